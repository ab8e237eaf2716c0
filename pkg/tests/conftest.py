"""Shared helpers for the test suite."""

from homeseq.events import ApartmentGraph, Sensor, SensorRegistry


def small_registry():
    """Two sensors matching the Table-1 sample (4 -> a/A, 10 -> b/B)."""
    return SensorRegistry([
        Sensor(4, "bedroom motion", "motion", "bedroom", "a"),
        Sensor(10, "livingroom motion", "motion", "livingroom", "b"),
    ])


def small_graph():
    return ApartmentGraph(["bedroom", "livingroom"], [("bedroom", "livingroom")])
