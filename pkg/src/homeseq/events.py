"""Sensor event data model, log parsing, and apartment configuration.

The on-disk log format is one event per line with three fields:
timestamp ("DD.MM.YYYY HH:MM:SS", 1 s resolution), integer sensor id, and a
binary message (1 = on, 0 = off).  Fields are separated either by commas or
by whitespace; the separator is auto-detected per file and must be used
consistently within the file.
"""

from __future__ import annotations

import configparser
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta

TIMESTAMP_FORMAT = "%d.%m.%Y %H:%M:%S"
SENSOR_KINDS = ("motion", "magnetic", "power")

_EPOCH = datetime(1970, 1, 1)
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


class ParseError(ValueError):
    """A log line does not match the declared grammar."""


class ValidationError(ValueError):
    """Parsed data violates a contract (order, registry membership, ...)."""


class ConfigError(ValueError):
    """Malformed registry/room configuration document."""


def parse_timestamp(text):
    try:
        return datetime.strptime(text.strip(), TIMESTAMP_FORMAT)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text.strip()!r}") from exc


def format_timestamp(dt):
    return dt.strftime(TIMESTAMP_FORMAT)


def to_epoch(dt):
    """Wall-clock seconds since 1970-01-01 00:00:00 (time zone ignored)."""
    return int((dt - _EPOCH).total_seconds())


def from_epoch(seconds):
    return _EPOCH + timedelta(seconds=int(seconds))


@dataclass(frozen=True)
class SensorEvent:
    """One timestamped on/off message from one sensor."""

    timestamp: datetime
    sensor_id: int
    state: int
    inserted: bool = False

    def __post_init__(self):
        if self.state not in (0, 1):
            raise ValidationError(f"state must be 0 or 1, got {self.state!r}")

    @property
    def epoch(self):
        return to_epoch(self.timestamp)

    @property
    def hour(self):
        """Hour of day as a fraction, e.g. 07:30:00 -> 7.5."""
        t = self.timestamp
        return t.hour + t.minute / 60.0 + t.second / 3600.0

    def canonical(self):
        return f"{format_timestamp(self.timestamp)},{self.sensor_id},{self.state}"


@dataclass(frozen=True)
class Sensor:
    sensor_id: int
    name: str
    kind: str
    room: str
    letter: str

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ConfigError(f"unknown sensor kind {self.kind!r} "
                              f"(expected one of {SENSOR_KINDS})")
        if len(self.letter) != 1 or not self.letter.isalpha() or not self.letter.islower():
            raise ConfigError(f"letter must be a single lowercase letter, got {self.letter!r}")


class SensorRegistry:
    """Immutable id -> sensor table with a unique letter pair per sensor."""

    def __init__(self, sensors):
        sensors = sorted(sensors, key=lambda s: s.sensor_id)
        ids = [s.sensor_id for s in sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate sensor ids in registry")
        letters = [s.letter for s in sensors]
        if len(set(letters)) != len(letters):
            raise ConfigError("duplicate letters in registry")
        self.sensors = tuple(sensors)
        self.by_id = {s.sensor_id: s for s in sensors}
        self.by_letter = {s.letter: s for s in sensors}
        self.by_name = {s.name: s for s in sensors}
        if len(self.by_name) != len(sensors):
            raise ConfigError("duplicate sensor names in registry")

    def __len__(self):
        return len(self.sensors)

    def __iter__(self):
        return iter(self.sensors)

    def __contains__(self, sensor_id):
        return sensor_id in self.by_id

    def letter_for(self, sensor_id, state):
        """Uppercase letter for an activation, lowercase for a deactivation."""
        sensor = self.by_id.get(sensor_id)
        if sensor is None:
            raise ValidationError(f"sensor id {sensor_id} not in registry")
        return sensor.letter.upper() if state == 1 else sensor.letter

    def motion_sensors(self):
        return [s for s in self.sensors if s.kind == "motion"]

    @classmethod
    def with_auto_letters(cls, specs):
        """Assign letters a, b, c, ... in ascending sensor-id order.

        ``specs`` is an iterable of (sensor_id, name, kind, room).
        """
        specs = sorted(specs, key=lambda t: t[0])
        if len(specs) > len(_LETTERS):
            raise ConfigError(f"more than {len(_LETTERS)} sensors; "
                              "assign letters explicitly")
        return cls([Sensor(sid, name, kind, room, _LETTERS[i])
                    for i, (sid, name, kind, room) in enumerate(specs)])


class ApartmentGraph:
    """Undirected room-adjacency graph with motion sensors mapped to rooms."""

    def __init__(self, rooms, edges):
        self.rooms = frozenset(rooms)
        adj = {room: set() for room in self.rooms}
        for a, b in edges:
            if a not in self.rooms or b not in self.rooms:
                raise ConfigError(f"edge ({a}, {b}) references unknown room")
            if a == b:
                continue
            adj[a].add(b)
            adj[b].add(a)
        self.adjacency = {room: tuple(sorted(neigh)) for room, neigh in adj.items()}
        self._check_connected()

    def _check_connected(self):
        if not self.rooms:
            raise ConfigError("apartment graph has no rooms")
        start = next(iter(sorted(self.rooms)))
        seen = {start}
        queue = deque([start])
        while queue:
            room = queue.popleft()
            for neigh in self.adjacency[room]:
                if neigh not in seen:
                    seen.add(neigh)
                    queue.append(neigh)
        if seen != self.rooms:
            missing = sorted(self.rooms - seen)
            raise ConfigError(f"apartment graph is not connected; unreachable: {missing}")

    def neighbors(self, room):
        return self.adjacency[room]

    def are_adjacent(self, a, b):
        return b in self.adjacency.get(a, ())

    def shortest_path(self, start, goal):
        """Shortest room path from start to goal (inclusive).

        Among equal-length paths the lexicographically smallest room-name
        sequence is returned.  Returns (path, ambiguous) where ``ambiguous``
        is True when another equal-length path exists.
        """
        if start not in self.rooms or goal not in self.rooms:
            raise ValidationError(f"room pair ({start}, {goal}) not in graph")
        if start == goal:
            return [start], False
        # distances to the goal, then greedy lexicographic descent
        dist = {goal: 0}
        queue = deque([goal])
        while queue:
            room = queue.popleft()
            for neigh in self.adjacency[room]:
                if neigh not in dist:
                    dist[neigh] = dist[room] + 1
                    queue.append(neigh)
        if start not in dist:
            raise ValidationError(f"no path between rooms {start} and {goal}")
        path = [start]
        ambiguous = False
        room = start
        while room != goal:
            options = [n for n in self.adjacency[room] if dist.get(n, -1) == dist[room] - 1]
            if len(options) > 1:
                ambiguous = True
            room = min(options)
            path.append(room)
        return path, ambiguous

    def all_shortest_paths(self, start, goal, limit=8):
        """Every shortest room path, lexicographically ordered."""
        if start == goal:
            return [[start]]
        dist = {goal: 0}
        queue = deque([goal])
        while queue:
            room = queue.popleft()
            for neigh in self.adjacency[room]:
                if neigh not in dist:
                    dist[neigh] = dist[room] + 1
                    queue.append(neigh)
        if start not in dist:
            raise ValidationError(f"no path between rooms {start} and {goal}")
        paths = []

        def walk(room, acc):
            if len(paths) >= limit:
                return
            if room == goal:
                paths.append(acc)
                return
            for neigh in self.adjacency[room]:
                if dist.get(neigh, -1) == dist[room] - 1:
                    walk(neigh, acc + [neigh])

        walk(start, [start])
        return paths


def _detect_separator(line):
    return "," if "," in line else None  # None -> whitespace split


def _split_fields(line, sep):
    if sep == ",":
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ParseError(f"expected 3 comma-separated fields, got {len(parts)}")
        return parts
    parts = line.split()
    if len(parts) != 4:
        raise ParseError("expected 'date time id state' (whitespace separated), "
                         f"got {len(parts)} fields")
    return [parts[0] + " " + parts[1], parts[2], parts[3]]


def parse_event_log(text, registry=None):
    """Parse a Table-1 style log into a list of SensorEvent, in file order.

    Raises ParseError (with the line number) on malformed lines and
    ValidationError on decreasing timestamps or, when a registry is given,
    unknown sensor ids.
    """
    events = []
    sep = None
    sep_locked = False
    prev = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not sep_locked:
            sep = _detect_separator(line)
            sep_locked = True
        try:
            ts_text, id_text, state_text = _split_fields(line, sep)
            timestamp = parse_timestamp(ts_text)
            sensor_id = int(id_text)
            if state_text not in ("0", "1"):
                raise ParseError(f"binary message must be 0 or 1, got {state_text!r}")
            state = int(state_text)
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        if prev is not None and timestamp < prev:
            raise ValidationError(f"non-monotonic timestamp at line {lineno}")
        if registry is not None and sensor_id not in registry:
            raise ValidationError(f"line {lineno}: unknown sensor id {sensor_id}")
        prev = timestamp
        events.append(SensorEvent(timestamp, sensor_id, state))
    return events


def serialize_events(events):
    """Canonical text form: 'DD.MM.YYYY HH:MM:SS,id,state' per line."""
    return "".join(e.canonical() + "\n" for e in events)


@dataclass
class ValidationReport:
    """Report-only result of checking an event stream against a registry."""

    unknown_ids: Counter = field(default_factory=Counter)
    duplicates: list = field(default_factory=list)  # (first, second) event pairs
    counts: Counter = field(default_factory=Counter)

    @property
    def ok(self):
        return not self.unknown_ids and not self.duplicates

    def summary(self):
        lines = [f"events: {sum(self.counts.values())}"]
        for sensor_id in sorted(self.counts):
            lines.append(f"sensor {sensor_id}: {self.counts[sensor_id]} events")
        if self.unknown_ids:
            ids = ", ".join(str(i) for i in sorted(self.unknown_ids))
            lines.append(f"unknown sensor ids: {ids}")
        for first, second in self.duplicates:
            lines.append(
                "duplicate consecutive (id={}, state={}) at {} and {}".format(
                    first.sensor_id, first.state,
                    format_timestamp(first.timestamp),
                    format_timestamp(second.timestamp)))
        if self.ok:
            lines.append("no issues")
        return "\n".join(lines) + "\n"


def validate_against_registry(events, registry):
    """List unknown ids, consecutive duplicate (id, state) pairs, and counts."""
    if len(registry) == 0:
        raise ValidationError("registry is empty")
    report = ValidationReport()
    prev = None
    for event in events:
        report.counts[event.sensor_id] += 1
        if event.sensor_id not in registry:
            report.unknown_ids[event.sensor_id] += 1
        if prev is not None and (prev.sensor_id, prev.state) == (event.sensor_id, event.state):
            report.duplicates.append((prev, event))
        prev = event
    return report


def load_apartment_config(text):
    """Parse a registry/rooms document.

    Two sections::

        [sensors]
        4 = bedroom motion, motion, bedroom, a
        [rooms]
        livingroom = kitchen, bedroom, hall

    Returns (SensorRegistry, ApartmentGraph).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config document: {exc}") from None
    if "sensors" not in parser or "rooms" not in parser:
        raise ConfigError("config needs [sensors] and [rooms] sections")

    sensors = []
    for key, value in parser["sensors"].items():
        try:
            sensor_id = int(key)
        except ValueError:
            raise ConfigError(f"sensor id {key!r} is not an integer") from None
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 4:
            raise ConfigError(f"sensor {key}: expected 'name, kind, room, letter'")
        name, kind, room, letter = parts
        sensors.append(Sensor(sensor_id, name, kind, room, letter))
    registry = SensorRegistry(sensors)

    rooms = set()
    edges = []
    for room, value in parser["rooms"].items():
        rooms.add(room)
        for neigh in value.split(","):
            neigh = neigh.strip()
            if neigh:
                rooms.add(neigh)
                edges.append((room, neigh))
    for sensor in registry:
        if sensor.kind == "motion" and sensor.room not in rooms:
            raise ConfigError(f"motion sensor {sensor.sensor_id} is in room "
                              f"{sensor.room!r} which is not in [rooms]")
    graph = ApartmentGraph(rooms, edges)
    return registry, graph


def dump_apartment_config(registry, graph):
    """Inverse of load_apartment_config (canonical form)."""
    lines = ["[sensors]"]
    for s in registry:
        lines.append(f"{s.sensor_id} = {s.name}, {s.kind}, {s.room}, {s.letter}")
    lines.append("")
    lines.append("[rooms]")
    listed = set()
    for room in sorted(graph.rooms):
        neighbors = [n for n in graph.neighbors(room) if (n, room) not in listed]
        for n in neighbors:
            listed.add((room, n))
        lines.append(f"{room} = {', '.join(neighbors)}")
    return "\n".join(lines) + "\n"
