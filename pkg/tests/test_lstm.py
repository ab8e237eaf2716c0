import math

import numpy as np
import pytest

from conftest import small_registry
from homeseq.events import parse_event_log
from homeseq.lstm import (LstmConfig, RecurrentModel, accuracy, backward,
                          build_joint_dataset, build_windows, forward, loss,
                          predict_joint, train)
from homeseq.symbolization import START, SymbolizationError, Vocabulary, speed_encode

ABC = Vocabulary(("a", "b", "c"))
ABCD = Vocabulary(("a", "b", "c", "d"))


def small_config(**kw):
    defaults = dict(memory_length=5, hidden_units=16, seed=0)
    defaults.update(kw)
    return LstmConfig(**defaults)


def test_forward_probabilities_sum_to_one():
    model = RecurrentModel.init(ABC, ABC, small_config())
    probs = forward(model, [0, 1, 2, START, 0])
    assert probs.shape == (3,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_weights_give_uniform_output():
    model = RecurrentModel.init(ABCD, ABCD, small_config())
    for p in model.params:
        p[...] = 0.0
    probs = forward(model, [0, 1, 2, 3, 0])
    assert np.allclose(probs, 0.25, atol=1e-15)


def test_forward_deterministic_across_runs():
    a = RecurrentModel.init(ABC, ABC, small_config(seed=3))
    b = RecurrentModel.init(ABC, ABC, small_config(seed=3))
    window = [0, 2, 1, 0, 2]
    assert np.array_equal(forward(a, window), forward(b, window))


def test_forward_rejects_out_of_range_indices():
    model = RecurrentModel.init(ABC, ABC, small_config())
    with pytest.raises(ValueError):
        forward(model, [0, 1, 5, 0, 0])
    with pytest.raises(ValueError):
        forward(model, [0, 1, -2, 0, 0])


def test_loss_uniform_prediction_is_log4():
    model = RecurrentModel.init(ABCD, ABCD, small_config())
    for p in model.params:
        p[...] = 0.0
    windows = np.zeros((8, 5), dtype=np.int64)
    targets = np.arange(8) % 4
    assert loss(model, (windows, targets)) == pytest.approx(math.log(4), abs=1e-12)


def test_loss_matches_independent_recomputation():
    rng = np.random.default_rng(4)
    model = RecurrentModel.init(ABCD, ABCD, small_config(seed=4))
    windows = rng.integers(-1, 4, (16, 5))
    targets = rng.integers(0, 4, 16)
    expected = -np.mean([np.log(forward(model, w)[t])
                         for w, t in zip(windows, targets)])
    assert loss(model, (windows, targets)) == pytest.approx(expected, abs=1e-12)


def test_loss_near_zero_for_confident_model():
    model = RecurrentModel.init(ABC, ABC, small_config())
    for p in model.params:
        p[...] = 0.0
    model.by[...] = np.array([50.0, 0.0, 0.0])
    windows = np.zeros((4, 5), dtype=np.int64)
    targets = np.zeros(4, dtype=np.int64)
    assert loss(model, (windows, targets)) < 1e-12


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    vocab = Vocabulary(tuple("abcdefgh"))
    model = RecurrentModel.init(vocab, vocab, small_config(seed=7))
    windows = rng.integers(-1, 8, (4, 5))
    targets = rng.integers(0, 8, 4)
    grads = backward(model, (windows, targets))
    eps = 1e-5
    for name in model.PARAM_NAMES:
        param = getattr(model, name)
        analytic = grads[name]
        flat = param.reshape(-1)
        for k in rng.choice(flat.size, size=min(40, flat.size), replace=False):
            orig = flat[k]
            flat[k] = orig + eps
            up = loss(model, (windows, targets))
            flat[k] = orig - eps
            down = loss(model, (windows, targets))
            flat[k] = orig
            numeric = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[k]
            assert abs(a - numeric) / max(1e-6, abs(a) + abs(numeric)) < 1e-4


def test_identical_batch_equals_single_sample_gradient():
    model = RecurrentModel.init(ABC, ABC, small_config(seed=1))
    window = np.array([[0, 1, 2, 1, 0]], dtype=np.int64)
    target = np.array([2], dtype=np.int64)
    single = backward(model, (window, target))
    batch = backward(model, (np.repeat(window, 6, axis=0), np.repeat(target, 6)))
    for name in model.PARAM_NAMES:
        assert np.allclose(single[name], batch[name], atol=1e-12)


def test_loss_decreases_after_small_step():
    rng = np.random.default_rng(2)
    model = RecurrentModel.init(ABCD, ABCD, small_config(seed=2))
    windows = rng.integers(-1, 4, (32, 5))
    targets = rng.integers(0, 4, 32)
    before = loss(model, (windows, targets))
    grads = backward(model, (windows, targets))
    for name in model.PARAM_NAMES:
        getattr(model, name)[...] -= 0.05 * grads[name]
    assert loss(model, (windows, targets)) < before


def test_training_learns_repeating_sequence():
    vocab = ABC
    tokens = [i % 3 for i in range(600)]
    X, y = build_windows([tokens[:480]], 10)
    Xv, yv = build_windows([tokens[480:540]], 10)
    Xt, yt = build_windows([tokens[540:]], 10)
    config = LstmConfig(memory_length=10, hidden_units=32, batch_size=64, seed=0)
    model = RecurrentModel.init(vocab, vocab, config)
    model, history = train(model, (X, y), (Xv, yv), config)
    assert history.epochs <= 200
    assert accuracy(model, Xt, yt) == 1.0


def test_training_is_chance_level_on_noise():
    rng = np.random.default_rng(0)
    tokens = rng.integers(0, 4, 4000).tolist()
    X, y = build_windows([tokens[:3000]], 10)
    Xv, yv = build_windows([tokens[3000:3500]], 10)
    Xt, yt = build_windows([tokens[3500:]], 10)
    config = LstmConfig(memory_length=10, hidden_units=32, batch_size=256,
                        patience=5, seed=0)
    model = RecurrentModel.init(ABCD, ABCD, config)
    model, _ = train(model, (X, y), (Xv, yv), config)
    assert accuracy(model, Xt, yt) == pytest.approx(0.25, abs=0.05)


def test_training_deterministic_given_seed():
    tokens = [i % 3 for i in range(300)]
    X, y = build_windows([tokens], 5)
    config = LstmConfig(memory_length=5, hidden_units=8, batch_size=64,
                        max_epochs=5, seed=9)
    runs = []
    for _ in range(2):
        model = RecurrentModel.init(ABC, ABC, config)
        model, history = train(model, (X, y), (X, y), config)
        runs.append((history.train_loss, [p.copy() for p in model.params]))
    assert runs[0][0] == runs[1][0]
    for a, b in zip(runs[0][1], runs[1][1]):
        assert np.array_equal(a, b)


def test_capacity_memorizes_unique_contexts():
    rng = np.random.default_rng(12)
    vocab = Vocabulary(tuple("abcdefgh"))
    tokens = rng.integers(0, 8, 200).tolist()
    X, y = build_windows([tokens], 10)
    config = LstmConfig(memory_length=10, hidden_units=64, batch_size=64,
                        max_epochs=200, patience=200, seed=0)
    model = RecurrentModel.init(vocab, vocab, config)
    model, _ = train(model, (X, y), (X, y), config)
    assert accuracy(model, X, y) == 1.0


def test_empty_dataset_rejected():
    model = RecurrentModel.init(ABC, ABC, small_config())
    empty = (np.empty((0, 5), dtype=np.int64), np.empty(0, dtype=np.int64))
    data = build_windows([[0, 1, 2]], 5)
    with pytest.raises(ValueError):
        train(model, empty, data, small_config())
    with pytest.raises(ValueError):
        train(model, data, empty, small_config())


def test_window_padding_at_sequence_start():
    X, y = build_windows([[0, 1, 2]], 5)
    assert X.shape == (3, 5)
    assert list(X[0]) == [START] * 5
    assert list(X[2]) == [START, START, START, 0, 1]
    assert list(y) == [0, 1, 2]


def test_predict_joint_decomposes_composite():
    base = Vocabulary(("A", "a"))
    composite = Vocabulary.composite(base, ("k0", "k1"))
    model = RecurrentModel.init(composite, composite, small_config())
    sensor, time_token = predict_joint(model, [0, 1, 2, 3, START])
    assert sensor in base.tokens
    assert time_token in ("k0", "k1")


def test_predict_joint_requires_composite_vocab():
    model = RecurrentModel.init(ABC, ABC, small_config())
    with pytest.raises(SymbolizationError):
        predict_joint(model, [0, 1, 2, 0, 0])


def test_joint_dataset_targets_pair_next_sensor_with_gap():
    registry = small_registry()
    text = ("01.09.2017 07:58:40, 4, 1\n01.09.2017 07:59:02, 10, 1\n"
            "01.09.2017 08:03:05, 10, 0\n")
    seq = speed_encode(parse_event_log(text, registry), registry)
    windows, targets, vocab = build_joint_dataset(seq, "bucket4", memory_length=4)
    assert len(windows) == len(seq) - 1
    # target for position 1: next sensor B with the 22 s gap (<1min)
    assert vocab.tokens[targets[0]] == "B|<1min"
    # target for position 2: token b with the 243 s gap (1-15min)
    assert vocab.tokens[targets[1]] == "b|1-15min"


def test_checkpoint_round_trip_and_finetune(tmp_path):
    config = small_config(seed=5)
    model = RecurrentModel.init(ABC, ABCD, config)
    path = tmp_path / "model.npz"
    model.save(path)
    loaded = RecurrentModel.load(path)
    assert loaded.in_vocab == model.in_vocab
    assert loaded.out_vocab == model.out_vocab
    assert loaded.config == config
    for a, b in zip(loaded.params, model.params):
        assert np.array_equal(a, b)
    window = [0, 1, 2, START, 1]
    assert np.allclose(forward(loaded, window), forward(model, window))
    # a loaded checkpoint can be fine-tuned further
    X = np.array([[0, 1, 2, 0, 1]] * 8, dtype=np.int64)
    y = np.array([3] * 8, dtype=np.int64)
    before = loss(loaded, (X, y))
    loaded, _ = train(loaded, (X, y), (X, y),
                      small_config(seed=5, max_epochs=3, patience=3))
    assert loss(loaded, (X, y)) < before
