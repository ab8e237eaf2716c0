from collections import deque

import numpy as np
import pytest

from homeseq.correction import (CorrectionError, correct_missing_motion,
                                is_graph_valid, motion_room_walk)
from homeseq.events import (ApartmentGraph, Sensor, SensorEvent, SensorRegistry,
                            from_epoch)
from homeseq import simulator

ROOMS = ["bedroom", "livingroom", "kitchen", "hall", "bathroom"]
EDGES = [("livingroom", "kitchen"), ("livingroom", "bedroom"),
         ("livingroom", "hall"), ("hall", "bathroom")]

REGISTRY = SensorRegistry([
    Sensor(1, "motion bedroom", "motion", "bedroom", "a"),
    Sensor(2, "motion livingroom", "motion", "livingroom", "b"),
    Sensor(3, "motion kitchen", "motion", "kitchen", "c"),
    Sensor(4, "motion hall", "motion", "hall", "d"),
    Sensor(5, "motion bathroom", "motion", "bathroom", "e"),
    Sensor(6, "tv", "power", "livingroom", "f"),
])
GRAPH = ApartmentGraph(ROOMS, EDGES)


def motion_on(sensor_id, epoch):
    return SensorEvent(from_epoch(epoch), sensor_id, 1)


def test_single_missing_room_mean_timestamp():
    events = [motion_on(3, 100), motion_on(1, 200)]  # kitchen -> bedroom
    corrected, report = correct_missing_motion(events, GRAPH, REGISTRY)
    assert len(corrected) == 3
    inserted = corrected[1]
    assert inserted.inserted
    assert inserted.sensor_id == 2  # livingroom
    assert inserted.epoch == 150
    assert len(report.inserted) == 1


def test_adjacent_rooms_are_untouched():
    events = [motion_on(3, 100), motion_on(2, 160), motion_on(1, 200)]
    corrected, report = correct_missing_motion(events, GRAPH, REGISTRY)
    assert corrected == events
    assert not report.inserted


def test_two_intermediates_equal_spacing():
    # bedroom -> bathroom passes livingroom and hall (BFS oracle below)
    events = [motion_on(1, 0), motion_on(5, 300)]
    corrected, report = correct_missing_motion(events, GRAPH, REGISTRY)

    # independent shortest-path oracle
    def bfs(start, goal):
        queue = deque([[start]])
        seen = {start}
        while queue:
            path = queue.popleft()
            if path[-1] == goal:
                return path
            for n in GRAPH.neighbors(path[-1]):
                if n not in seen:
                    seen.add(n)
                    queue.append(path + [n])

    assert bfs("bedroom", "bathroom") == ["bedroom", "livingroom", "hall", "bathroom"]
    assert [e.sensor_id for e in corrected] == [1, 2, 4, 5]
    assert [e.epoch for e in corrected] == [0, 100, 200, 300]
    assert all(e.inserted for e in corrected[1:3])
    assert len(report.inserted) == 2


def test_rounding_to_whole_seconds():
    events = [motion_on(3, 100), motion_on(1, 101)]
    corrected, _ = correct_missing_motion(events, GRAPH, REGISTRY)
    assert len(corrected) == 3
    # mean is 100.5; half-up rounding at 1 s log resolution
    assert corrected[1].epoch == 101
    assert [e.epoch for e in corrected] == sorted(e.epoch for e in corrected)


def test_non_motion_events_untouched_and_ordered():
    events = [motion_on(3, 100),
              SensorEvent(from_epoch(120), 6, 1),
              motion_on(1, 200)]
    corrected, _ = correct_missing_motion(events, GRAPH, REGISTRY)
    assert [e.sensor_id for e in corrected] == [3, 6, 2, 1]
    assert [e.epoch for e in corrected] == [100, 120, 150, 200]
    # originals keep their identity and order
    assert [e for e in corrected if not e.inserted] == events


def test_off_events_do_not_anchor_passages():
    # an off event between two activations is ignored for passage detection
    events = [motion_on(3, 100),
              SensorEvent(from_epoch(130), 3, 0),
              motion_on(1, 200)]
    corrected, report = correct_missing_motion(events, GRAPH, REGISTRY)
    assert len(report.inserted) == 1
    assert report.inserted[0][0].epoch == 150


def test_graph_validity_and_idempotence():
    rng = np.random.default_rng(5)
    registry, graph, routine = simulator.build_preset(1)
    events = simulator.simulate(routine, registry, graph, days=3, seed=5)
    motion_ids = {s.sensor_id for s in registry.motion_sensors()}
    kept = [e for e in events
            if not (e.sensor_id in motion_ids and e.state == 1 and rng.random() < 0.1)]
    assert not is_graph_valid(kept, graph, registry)
    corrected, report = correct_missing_motion(kept, graph, registry)
    assert report.inserted
    assert is_graph_valid(corrected, graph, registry)
    again, report2 = correct_missing_motion(corrected, graph, registry)
    assert again == corrected
    assert not report2.inserted


def test_clean_log_needs_no_insertions():
    registry, graph, routine = simulator.build_preset(2)
    events = simulator.simulate(routine, registry, graph, days=2, seed=3)
    corrected, report = correct_missing_motion(events, graph, registry)
    assert corrected == events
    assert not report.inserted


def test_room_without_motion_sensor_errors():
    registry = SensorRegistry([
        Sensor(1, "motion bedroom", "motion", "bedroom", "a"),
        Sensor(3, "motion kitchen", "motion", "kitchen", "c"),
    ])
    events = [motion_on(3, 0), motion_on(1, 100)]
    with pytest.raises(CorrectionError, match="livingroom"):
        correct_missing_motion(events, GRAPH, registry)


def test_ambiguous_path_is_noted():
    graph = ApartmentGraph(ROOMS, EDGES + [("bedroom", "bathroom")])
    events = [motion_on(3, 0), motion_on(5, 300)]  # kitchen -> bathroom
    corrected, report = correct_missing_motion(events, graph, REGISTRY)
    assert report.notes and "ambiguous" in report.notes[0]
    walk = motion_room_walk(corrected, REGISTRY)
    # deterministic lexicographic choice: via bedroom
    assert walk == ["kitchen", "livingroom", "bedroom", "bathroom"]


def test_report_csv_lists_insertions():
    events = [motion_on(3, 100), motion_on(1, 200)]
    _, report = correct_missing_motion(events, GRAPH, REGISTRY)
    csv = report.to_csv()
    assert "timestamp,sensor_id,path" in csv
    assert "kitchen-livingroom-bedroom" in csv
