"""Seeded discrete-event generator of resident behaviour over an apartment.

The resident is modelled as a semi-Markov process over daily activities
(sleep, bathroom, cooking, TV, going out, ...) whose transition tables
change with the phase of the day.  Each activity owns a room and an
ordered burst of sensor emissions with jittered gaps; switching rooms
walks the apartment graph edge by edge, emitting the next room's motion
activation before the previous room's deactivation.  Because movement
always traverses edges, simulated logs are graph-valid and survive the
topology correction unchanged.

The generator is a token-level automaton: at every emission it either
continues a deterministic queue (next-token probability 1) or draws the
next activity from an explicit transition row, in which case the exact
next-token distribution is computable.  ``bayes_ceiling`` exploits this to
estimate the highest next-token accuracy any predictor could reach.
"""

from __future__ import annotations

import configparser
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .events import (ApartmentGraph, ConfigError, Sensor, SensorEvent,
                     SensorRegistry, from_epoch, parse_timestamp, to_epoch)

DEFAULT_START = "01.09.2017 00:00:00"
TOGGLE = None  # emission state meaning "flip the sensor's tracked state"


@dataclass(frozen=True)
class Emission:
    sensor: str  # sensor name in the registry
    state: object  # 1, 0, or TOGGLE
    gap: tuple  # (median seconds, sigma) of the lognormal gap before it


@dataclass(frozen=True)
class Activity:
    name: str
    room: str
    emissions: tuple
    dwell: tuple  # gap before the next activity begins


@dataclass
class RoutineModel:
    """Activities plus per-phase transition tables."""

    activities: dict
    phases: tuple  # ((start_hour, name), ...) sorted by start hour
    transitions: dict  # phase -> current activity -> {next activity: prob}
    start_activity: str
    move_gap: tuple = (8.0, 0.35)  # gap before entering the next room
    off_gap: tuple = (15.0, 0.4)  # motion-off lag after leaving a room
    path_bias: float = 0.72  # weight of the preferred (lexicographic) room path

    def phase_of(self, hour):
        starts = [h for h, _ in self.phases]
        pos = bisect_right(starts, hour % 24.0) - 1
        return self.phases[pos][1]  # wraps to the last phase before 0:00

    def validate(self, registry, graph):
        if self.start_activity not in self.activities:
            raise ConfigError(f"unknown start activity {self.start_activity!r}")
        for activity in self.activities.values():
            if activity.room not in graph.rooms:
                raise ConfigError(f"activity {activity.name}: unknown room {activity.room!r}")
            for emission in activity.emissions:
                if emission.sensor not in registry.by_name:
                    raise ConfigError(f"activity {activity.name}: emission references "
                                      f"unknown sensor {emission.sensor!r}")
        for phase, rows in self.transitions.items():
            for current, row in rows.items():
                if current not in self.activities:
                    raise ConfigError(f"transition row for unknown activity {current!r}")
                total = sum(row.values())
                if abs(total - 1.0) > 1e-9:
                    raise ConfigError(f"[{phase}] {current}: row sums to {total}, not 1")
                for target in row:
                    if target not in self.activities:
                        raise ConfigError(f"[{phase}] {current}: unknown target {target!r}")
        missing = [(phase, name)
                   for _, phase in self.phases for name in self.activities
                   if name not in self.transitions.get(phase, {})]
        if missing:
            raise ConfigError(f"missing transition rows: {missing[:4]}...")


class _Generator:
    """Event-by-event walk of the routine with exact token conditionals.

    When an activity ends, the generator does not commit to the next
    activity outright: it keeps the whole candidate set of the transition
    row, samples one *token* at a time from the aggregated first-token
    distribution, and filters the candidates that are consistent with it.
    The reported per-step distribution is therefore exactly the sequential
    next-token law of the process, with no hidden committed state.
    """

    def __init__(self, routine, registry, graph, seed, start=DEFAULT_START):
        routine.validate(registry, graph)
        self.routine = routine
        self.registry = registry
        self.graph = graph
        self.rng = np.random.default_rng(seed)
        self.time = to_epoch(parse_timestamp(start))
        self.sensor_state = {s.name: 0 for s in registry}
        self.room_motion = {}
        for sensor in registry.motion_sensors():
            self.room_motion.setdefault(sensor.room, sensor.name)
        self.activity = routine.activities[routine.start_activity]
        self.room = self.activity.room
        self.candidates = []  # (activity name, token list, weight)
        self.position = 0

    def _sample_gap(self, gap):
        median, sigma = gap
        return max(1, int(round(median * math.exp(sigma * self.rng.standard_normal()))))

    def _expand(self, activity, path):
        """Token burst for switching to ``activity`` along ``path``."""
        states = dict(self.sensor_state)
        tokens = []

        def emit(sensor, state, gap):
            if states[sensor] != state:
                states[sensor] = state
                tokens.append((sensor, state, gap))

        for prev_room, next_room in zip(path, path[1:]):
            emit(self.room_motion[next_room], 1, self.routine.move_gap)
            emit(self.room_motion[prev_room], 0, self.routine.off_gap)
        for emission in activity.emissions:
            state = emission.state
            if state is TOGGLE:
                state = 1 - states[emission.sensor]
            emit(emission.sensor, state, emission.gap)
        return tokens

    def _open_decision(self):
        phase = self.routine.phase_of((self.time % 86400) / 3600.0)
        row = self.routine.transitions[phase][self.activity.name]
        self.candidates = []
        for name in sorted(row):
            activity = self.routine.activities[name]
            paths = self.graph.all_shortest_paths(self.room, activity.room)
            for rank, path in enumerate(paths):
                tokens = self._expand(activity, path)
                if not tokens:
                    raise RuntimeError(
                        f"routine stall: {self.activity.name} -> {name} emits nothing")
                share = self.routine.path_bias if rank == 0 else                     (1.0 - self.routine.path_bias) / (len(paths) - 1)
                if len(paths) == 1:
                    share = 1.0
                self.candidates.append((name, tokens, row[name] * share))
        self.position = 0

    def step(self):
        """Advance one emission; returns (event, best next-token probability)."""
        if not self.candidates:
            self._open_decision()
        pos = self.position
        total = sum(w for _, _, w in self.candidates)
        agg = {}
        for _, tokens, w in self.candidates:
            key = tokens[pos][:2]
            agg[key] = agg.get(key, 0.0) + w
        keys = sorted(agg)
        probs = np.array([agg[k] for k in keys]) / total
        best = float(probs.max())
        if len(keys) == 1:
            sensor, state = keys[0]
        else:
            sensor, state = keys[int(self.rng.choice(len(keys), p=probs))]
        survivors = [c for c in self.candidates if c[1][pos][:2] == (sensor, state)]

        gap = self.activity.dwell if pos == 0 else survivors[0][1][pos][2]
        self.time += self._sample_gap(gap)
        self.sensor_state[sensor] = state
        event = SensorEvent(from_epoch(self.time),
                            self.registry.by_name[sensor].sensor_id, state)

        self.position = pos + 1
        done = [c for c in survivors if len(c[1]) == self.position]
        if done:
            if len(survivors) > 1:
                raise RuntimeError(
                    "ambiguous routine: candidate bursts "
                    f"{sorted(c[0] for c in survivors)} share a prefix")
            name = survivors[0][0]
            self.activity = self.routine.activities[name]
            self.room = self.activity.room
            self.candidates = []
        else:
            self.candidates = survivors
        return event, best


def simulate(routine, registry, graph, days, seed, start=DEFAULT_START):
    """Generate a ``days``-long event log (deterministic given the seed)."""
    generator = _Generator(routine, registry, graph, seed, start)
    end = generator.time + int(days * 86400)
    events = []
    while True:
        event, _ = generator.step()
        if event.epoch > end:
            break
        events.append(event)
    return events


def bayes_ceiling(routine, registry, graph, steps=100_000, seed=0,
                  start=DEFAULT_START):
    """Monte-Carlo estimate of the best achievable next-token accuracy.

    Runs the generator for ``steps`` emissions recording, at each step, the
    probability of the most likely next token under the generator's own
    conditionals.  Returns (estimate, standard error).
    """
    generator = _Generator(routine, registry, graph, seed, start)
    best = np.empty(steps)
    for i in range(steps):
        _, best[i] = generator.step()
    return float(best.mean()), float(best.std(ddof=1) / math.sqrt(steps))


# ---------------------------------------------------------------------------
# Built-in apartment presets
# ---------------------------------------------------------------------------

ROOMS = ("bedroom", "livingroom", "kitchen", "bathroom", "hall")
EDGES = (("livingroom", "kitchen"), ("livingroom", "bedroom"),
         ("livingroom", "hall"), ("hall", "bathroom"),
         ("bedroom", "bathroom"))

# role -> (id, kind, room); the hot-drink appliance differs per apartment
_SENSOR_ROLES = (
    ("motion_bedroom", 1, "motion", "bedroom"),
    ("motion_livingroom", 2, "motion", "livingroom"),
    ("motion_kitchen", 3, "motion", "kitchen"),
    ("motion_bathroom", 4, "motion", "bathroom"),
    ("motion_hall", 5, "motion", "hall"),
    ("door_entrance", 6, "magnetic", "hall"),
    ("door_fridge", 7, "magnetic", "kitchen"),
    ("door_wardrobe", 8, "magnetic", "bedroom"),
    ("cabinet_bathroom", 9, "magnetic", "bathroom"),
    ("power_hotdrink", 10, "power", "kitchen"),  # kettle or coffee machine
    ("power_tv", 11, "power", "livingroom"),
    ("power_microwave", 12, "power", "kitchen"),
    ("power_stove", 13, "power", "kitchen"),
    ("power_lamp_livingroom", 14, "power", "livingroom"),
    ("power_lamp_bedroom", 15, "power", "bedroom"),
)

# apartment -> (hot-drink appliance name, roles left out)
PRESETS = {
    1: ("power_kettle", ()),
    2: ("power_coffee", ("door_wardrobe",)),
    3: ("power_kettle", ("door_fridge",)),
    4: ("power_coffee", ("cabinet_bathroom",)),
    5: ("power_kettle", ("power_lamp_bedroom",)),
}


def preset_registry(apartment=1):
    if apartment not in PRESETS:
        raise ConfigError(f"unknown apartment preset {apartment} (1-5)")
    hot_name, dropped = PRESETS[apartment]
    sensors = []
    letters = "abcdefghijklmnopqrstuvwxyz"
    index = 0
    for role, sensor_id, kind, room in _SENSOR_ROLES:
        if role in dropped:
            continue
        name = hot_name if role == "power_hotdrink" else role
        sensors.append(Sensor(sensor_id, name, kind, room, letters[index]))
        index += 1
    return SensorRegistry(sensors)


def preset_graph():
    return ApartmentGraph(ROOMS, EDGES)


def _perturb(rows, rng, scale=0.08):
    """Seeded multiplicative jitter of transition rows (renormalized)."""
    out = {}
    for current, row in rows.items():
        names = sorted(row)
        weights = np.array([row[n] for n in names])
        weights = weights * np.exp(scale * rng.standard_normal(len(names)))
        weights /= weights.sum()
        out[current] = dict(zip(names, weights))
    return out


def default_routine(registry, apartment=1):
    """Daily-living routine adapted to the sensors an apartment actually has."""
    names = set(registry.by_name)
    hot = "power_coffee" if "power_coffee" in names else "power_kettle"

    def burst(*spec):
        return tuple(Emission(sensor, state, gap) for sensor, state, gap in spec)

    # each sensor toggles at most once per template: recurring symbols chop
    # the repeat-free episodes the SPEED-style pattern mining relies on
    activities = {
        "sleep": Activity("sleep", "bedroom", burst(
            ("motion_bedroom", TOGGLE, (170.0, 0.4))), (4500.0, 0.6)),
        "night_toilet": Activity("night_toilet", "bathroom", (), (170.0, 0.4)),
        "wake": Activity("wake", "bathroom", burst(
            *((("cabinet_bathroom", 1, (25.0, 0.3)),
               ("cabinet_bathroom", 0, (60.0, 0.4)))
              if "cabinet_bathroom" in names else ())), (90.0, 0.4)),
        "breakfast": Activity("breakfast", "kitchen", burst(
            *((("door_fridge", 1, (18.0, 0.3)),
               ("door_fridge", 0, (22.0, 0.4))) if "door_fridge" in names
              else (("power_microwave", 1, (25.0, 0.3)),
                    ("power_microwave", 0, (70.0, 0.3)))),
            (hot, 1, (30.0, 0.3)),
            (hot, 0, (120.0, 0.3))), (120.0, 0.4)),
        "hotdrink": Activity("hotdrink", "kitchen", burst(
            (hot, 1, (18.0, 0.3)),
            (hot, 0, (110.0, 0.3))), (65.0, 0.4)),
        "cook": Activity("cook", "kitchen", burst(
            ("power_stove", 1, (30.0, 0.4)),
            *((("door_fridge", 1, (60.0, 0.3)),
               ("door_fridge", 0, (25.0, 0.4))) if "door_fridge" in names else ()),
            ("power_stove", 0, (230.0, 0.4))), (95.0, 0.4)),
        "eat": Activity("eat", "kitchen", burst(
            ("power_microwave", 1, (35.0, 0.3)),
            ("power_microwave", 0, (95.0, 0.3))), (150.0, 0.4)),
        "tv": Activity("tv", "livingroom", burst(
            ("power_tv", 1, (25.0, 0.3)),
            ("power_tv", 0, (250.0, 0.5))), (70.0, 0.4)),
        "relax": Activity("relax", "livingroom", burst(
            ("power_lamp_livingroom", 1, (16.0, 0.3)),
            ("power_lamp_livingroom", 0, (180.0, 0.5))), (65.0, 0.4)),
        "toilet": Activity("toilet", "bathroom", (), (115.0, 0.4)),
        "out": Activity("out", "hall", burst(
            ("door_entrance", 1, (22.0, 0.3)),
            ("door_entrance", 0, (7.0, 0.2))), (1500.0, 0.5)),
    }
    if "door_wardrobe" in names:
        activities["dress"] = Activity("dress", "bedroom", burst(
            ("door_wardrobe", 1, (16.0, 0.3)),
            ("door_wardrobe", 0, (65.0, 0.4))), (80.0, 0.4))
    if "power_lamp_bedroom" in names:
        activities["bed_lamp"] = Activity("bed_lamp", "bedroom", burst(
            ("power_lamp_bedroom", 1, (13.0, 0.3)),
            ("power_lamp_bedroom", 0, (330.0, 0.5))), (45.0, 0.4))

    # morning/day/evening share most rows: the fewer the hidden phase
    # differences, the closer history-based predictors get to the ceiling
    awake = {
        "wake": {"breakfast": 0.75, "dress": 0.25},
        "dress": {"breakfast": 1.0},
        "breakfast": {"eat": 0.85, "tv": 0.15},
        "cook": {"eat": 1.0},
        "eat": {"tv": 0.75, "toilet": 0.25},
        "tv": {"cook": 0.35, "hotdrink": 0.3, "toilet": 0.25, "out": 0.1},
        "hotdrink": {"relax": 0.55, "tv": 0.45},
        "relax": {"tv": 0.7, "toilet": 0.3},
        "toilet": {"tv": 0.6, "cook": 0.25, "relax": 0.15},
        "out": {"hotdrink": 0.5, "tv": 0.5},
        "sleep": {"wake": 1.0},
        "night_toilet": {"wake": 0.6, "sleep": 0.4},
        "bed_lamp": {"sleep": 1.0},
        "_default": {"tv": 1.0},
    }
    tables = {
        "night": {
            "sleep": {"sleep": 0.8, "night_toilet": 0.17, "hotdrink": 0.03},
            "night_toilet": {"sleep": 1.0},
            "hotdrink": {"sleep": 1.0},
            "tv": {"bed_lamp": 0.6, "sleep": 0.4},
            "relax": {"bed_lamp": 0.7, "sleep": 0.3},
            "bed_lamp": {"sleep": 1.0},
            "_default": {"sleep": 1.0},
        },
        "morning": dict(awake),
        "day": dict(awake),
        "evening": {
            **awake,
            "tv": {"cook": 0.35, "hotdrink": 0.25, "toilet": 0.25, "relax": 0.15},
            "relax": {"bed_lamp": 0.5, "tv": 0.3, "sleep": 0.2},
            "toilet": {"tv": 0.5, "relax": 0.3, "bed_lamp": 0.2},
            "sleep": {"night_toilet": 1.0},
        },
    }

    if "cabinet_bathroom" not in names:
        # "wake" has no emissions then; a same-room hop into it would stall
        for phase in ("morning", "day", "evening"):
            tables[phase]["night_toilet"] = {"sleep": 1.0}

    transitions = {}
    rng = np.random.default_rng(1000 + apartment)
    for phase, rows in tables.items():
        default = rows.pop("_default")
        table = {}
        for name in activities:
            row = dict(rows.get(name, default))
            # drop targets this apartment doesn't have, renormalize
            row = {k: v for k, v in row.items() if k in activities}
            if not row:
                row = {k: v for k, v in default.items() if k in activities}
            total = sum(row.values())
            table[name] = {k: v / total for k, v in row.items()}
        transitions[phase] = _perturb(table, rng)

    routine = RoutineModel(
        activities=activities,
        phases=((6.0, "morning"), (10.0, "day"), (17.0, "evening"), (22.0, "night")),
        transitions=transitions,
        start_activity="sleep")
    return routine


def build_preset(apartment=1):
    """Registry, graph, and routine for one of the five built-in apartments."""
    registry = preset_registry(apartment)
    graph = preset_graph()
    routine = default_routine(registry, apartment)
    routine.validate(registry, graph)
    return registry, graph, routine


# ---------------------------------------------------------------------------
# Routine config document
# ---------------------------------------------------------------------------

def routine_to_text(routine):
    lines = ["[routine]",
             f"start = {routine.start_activity}",
             "phases = " + ", ".join(f"{h}:{n}" for h, n in routine.phases),
             f"move_gap = {routine.move_gap[0]}, {routine.move_gap[1]}",
             f"off_gap = {routine.off_gap[0]}, {routine.off_gap[1]}",
             ""]
    for name in sorted(routine.activities):
        activity = routine.activities[name]
        lines.append(f"[activity:{name}]")
        lines.append(f"room = {activity.room}")
        lines.append(f"dwell = {activity.dwell[0]}, {activity.dwell[1]}")
        for i, emission in enumerate(activity.emissions):
            state = "toggle" if emission.state is TOGGLE else emission.state
            lines.append(f"emission{i} = {emission.sensor}, {state}, "
                         f"{emission.gap[0]}, {emission.gap[1]}")
        lines.append("")
    for phase in sorted(routine.transitions):
        lines.append(f"[transitions:{phase}]")
        rows = routine.transitions[phase]
        for current in sorted(rows):
            row = rows[current]
            entry = ", ".join(f"{k}:{float(row[k])!r}" for k in sorted(row))
            lines.append(f"{current} = {entry}")
        lines.append("")
    return "\n".join(lines)


def routine_from_text(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad routine document: {exc}") from None
    if "routine" not in parser:
        raise ConfigError("routine document needs a [routine] section")
    head = parser["routine"]
    phases = []
    for item in head["phases"].split(","):
        hour, name = item.split(":")
        phases.append((float(hour), name.strip()))

    def gap_of(text_value):
        median, sigma = text_value.split(",")
        return (float(median), float(sigma))

    activities = {}
    transitions = {}
    for section in parser.sections():
        if section.startswith("activity:"):
            name = section.split(":", 1)[1]
            data = parser[section]
            emissions = []
            i = 0
            while f"emission{i}" in data:
                sensor, state, median, sigma = [p.strip()
                                                for p in data[f"emission{i}"].split(",")]
                emissions.append(Emission(
                    sensor, TOGGLE if state == "toggle" else int(state),
                    (float(median), float(sigma))))
                i += 1
            activities[name] = Activity(name, data["room"], tuple(emissions),
                                        gap_of(data["dwell"]))
        elif section.startswith("transitions:"):
            phase = section.split(":", 1)[1]
            rows = {}
            for current, value in parser[section].items():
                row = {}
                for part in value.split(","):
                    target, prob = part.rsplit(":", 1)
                    row[target.strip()] = float(prob)
                rows[current] = row
            transitions[phase] = rows
    return RoutineModel(
        activities=activities,
        phases=tuple(sorted(phases)),
        transitions=transitions,
        start_activity=head["start"],
        move_gap=gap_of(head["move_gap"]),
        off_gap=gap_of(head["off_gap"]))
