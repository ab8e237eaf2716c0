"""Insertion of motion activations implied by the apartment topology.

Occasionally a motion sensor fails to report an activation: the resident
walks kitchen -> livingroom -> bedroom but the livingroom sensor stays
silent.  Whenever two consecutive motion activations happen in rooms that
are neither identical nor adjacent, the missing activations along the
shortest room path are synthesized.  A single missing room gets the mean
of the two surrounding timestamps; several missing rooms are spaced
equally.  Off events and non-motion sensors are never touched.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .events import SensorEvent, ValidationError, format_timestamp, from_epoch


class CorrectionError(ValidationError):
    """Correction is impossible (unreachable rooms, room without sensor)."""


@dataclass
class CorrectionReport:
    inserted: list = field(default_factory=list)  # (event, room_path) pairs
    notes: list = field(default_factory=list)

    @property
    def counts(self):
        return Counter(event.sensor_id for event, _ in self.inserted)

    def to_csv(self):
        lines = ["timestamp,sensor_id,path"]
        for event, path in self.inserted:
            lines.append("{},{},{}".format(
                format_timestamp(event.timestamp), event.sensor_id, "-".join(path)))
        return "\n".join(lines) + "\n"

    def summary(self):
        lines = [f"inserted events: {len(self.inserted)}"]
        for sensor_id in sorted(self.counts):
            lines.append(f"sensor {sensor_id}: {self.counts[sensor_id]} inserted")
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


def _room_motion_sensor(registry):
    """Lowest-id motion sensor per room (deterministic insertion choice)."""
    table = {}
    for sensor in registry.motion_sensors():
        if sensor.room not in table or sensor.sensor_id < table[sensor.room]:
            table[sensor.room] = sensor.sensor_id
    return table


def _round_half_up(numerator, denominator):
    return (2 * numerator + denominator) // (2 * denominator)


def correct_missing_motion(events, graph, registry):
    """Return (corrected event list, CorrectionReport).

    Original events are never reordered or removed; synthesized events carry
    ``inserted=True`` and are placed in timestamp order between the two
    activations that implied them.
    """
    room_sensor = _room_motion_sensor(registry)
    motion_ids = {s.sensor_id for s in registry.motion_sensors()}

    report = CorrectionReport()
    pending = {}  # original index -> events to splice in before it
    prev = None  # (index, room, epoch) of the previous motion activation
    for index, event in enumerate(events):
        if event.sensor_id not in motion_ids or event.state != 1:
            continue
        room = registry.by_id[event.sensor_id].room
        if prev is not None and prev[1] != room:
            path, ambiguous = graph.shortest_path(prev[1], room)
            if ambiguous:
                report.notes.append(
                    f"ambiguous shortest path {prev[1]} -> {room}; "
                    f"took {'-'.join(path)}")
            intermediates = path[1:-1]
            if intermediates:
                t0, t1 = prev[2], event.epoch
                m = len(intermediates)
                for step, mid_room in enumerate(intermediates, start=1):
                    sensor_id = room_sensor.get(mid_room)
                    if sensor_id is None:
                        raise CorrectionError(
                            f"room {mid_room!r} on path {prev[1]} -> {room} "
                            "has no motion sensor to insert")
                    ts = t0 + _round_half_up((t1 - t0) * step, m + 1)
                    synthetic = SensorEvent(from_epoch(ts), sensor_id, 1, inserted=True)
                    position = _insert_position(events, prev[0], index, ts)
                    pending.setdefault(position, []).append(synthetic)
                    report.inserted.append((synthetic, tuple(path)))
        prev = (index, room, event.epoch)

    corrected = []
    for index, event in enumerate(events):
        corrected.extend(pending.get(index, ()))
        corrected.append(event)
    corrected.extend(pending.get(len(events), ()))
    return corrected, report


def _insert_position(events, lo, hi, ts):
    """First index in (lo, hi] whose event is strictly later than ``ts``."""
    for j in range(lo + 1, hi):
        if events[j].epoch > ts:
            return j
    return hi


def motion_room_walk(events, registry):
    """Rooms of the motion activations, in order."""
    rooms = []
    motion_ids = {s.sensor_id for s in registry.motion_sensors()}
    for event in events:
        if event.sensor_id in motion_ids and event.state == 1:
            rooms.append(registry.by_id[event.sensor_id].room)
    return rooms


def is_graph_valid(events, graph, registry):
    """True when every consecutive activation pair is same-room or adjacent."""
    walk = motion_room_walk(events, registry)
    return all(a == b or graph.are_adjacent(a, b) for a, b in zip(walk, walk[1:]))
