import pytest

from conftest import small_registry
from homeseq.events import parse_event_log
from homeseq.simulator import build_preset, preset_registry, simulate
from homeseq.symbolization import (START, SymbolizationError, Vocabulary,
                                   alz_encode, decode_speed, speed_encode)

TABLE1 = """\
01.09.2017 07:58:40, 4, 1
01.09.2017 07:59:02, 10, 1
01.09.2017 08:03:05, 10, 0
"""


def table1_events(registry):
    return parse_event_log(TABLE1, registry)


def test_speed_encodes_table1_as_ABb():
    registry = small_registry()
    seq = speed_encode(table1_events(registry), registry)
    assert seq.text() == "ABb"


def test_speed_single_event_and_pair():
    registry = small_registry()
    assert speed_encode(parse_event_log("01.09.2017 07:58:40, 4, 1"), registry).text() == "A"
    text = "01.09.2017 07:58:40, 4, 1\n01.09.2017 07:58:50, 4, 0\n"
    assert speed_encode(parse_event_log(text), registry).text() == "Aa"


def test_alz_encodes_activations_only():
    registry = small_registry()
    seq = alz_encode(table1_events(registry), registry)
    assert seq.text() == "AB"


def test_alz_empty_without_activations():
    registry = small_registry()
    events = parse_event_log("01.09.2017 07:58:40, 4, 0", registry)
    assert len(alz_encode(events, registry)) == 0


def test_alz_rule_application():
    registry = small_registry()
    text = ("01.09.2017 07:00:00, 4, 1\n01.09.2017 07:00:10, 10, 1\n"
            "01.09.2017 07:00:20, 10, 0\n01.09.2017 07:00:30, 4, 1\n")
    assert alz_encode(parse_event_log(text), registry).text() == "ABA"


def test_lengths_match_event_counts():
    registry = small_registry()
    events = table1_events(registry)
    assert len(speed_encode(events, registry)) == len(events)
    assert len(alz_encode(events, registry)) == sum(e.state == 1 for e in events)


def test_case_encodes_state_everywhere():
    registry, graph, routine = build_preset(1)
    events = simulate(routine, registry, graph, days=1, seed=0)
    seq = speed_encode(events, registry)
    for event, token in zip(events, seq.tokens):
        assert token.isupper() == (event.state == 1)


def test_speed_is_decodable():
    registry, graph, routine = build_preset(1)
    events = simulate(routine, registry, graph, days=1, seed=1)
    seq = speed_encode(events, registry)
    assert decode_speed(seq, registry) == [(e.sensor_id, e.state) for e in events]


def test_vocabulary_sizes():
    registry = preset_registry(1)  # 15 sensors
    assert len(Vocabulary.plain(registry)) == 30
    assert len(Vocabulary.activations(registry)) == 15
    composite = Vocabulary.composite(Vocabulary.plain(registry),
                                     ("<1min", "1-15min", "15min-1h", ">1h"))
    assert len(composite) == 120


def test_vocabulary_bijection_and_start():
    vocab = Vocabulary.plain(small_registry())
    assert sorted(vocab.index.values()) == list(range(len(vocab)))
    assert all(vocab.tokens[i] == t for t, i in vocab.index.items())
    assert START == -1


def test_composite_split_round_trip():
    vocab = Vocabulary.composite(("A", "a", "B"), ("k0", "k1"))
    for base_idx, base in enumerate(("A", "a", "B")):
        for time_idx, name in enumerate(("k0", "k1")):
            idx = vocab.composite_index(base_idx, time_idx)
            assert vocab.split(idx) == (base, name)


def test_split_requires_composite():
    with pytest.raises(SymbolizationError):
        Vocabulary(("A", "a")).split(0)


def test_metadata_gaps_from_table1():
    registry = small_registry()
    seq = speed_encode(table1_events(registry), registry)
    assert seq.elapsed_prev == [None, 22, 243]
    assert seq.elapsed_next == [22, 243, None]


def test_metadata_csv_and_prefix():
    registry = small_registry()
    seq = speed_encode(table1_events(registry), registry)
    csv = seq.metadata_csv()
    assert csv.splitlines()[0] == "position,token,timestamp,elapsed_prev,elapsed_next"
    assert len(csv.splitlines()) == 4
    assert seq.prefix(2).tokens == ["A", "B"]


def test_unknown_sensor_raises():
    registry = small_registry()
    events = parse_event_log("01.09.2017 07:58:40, 99, 1")
    with pytest.raises(Exception):
        speed_encode(events, registry)
