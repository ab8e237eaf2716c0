"""The compiled kernel and the numpy fallback must agree numerically."""

import numpy as np
import pytest

from homeseq import _core_numpy, backend


def random_model(rng, v_in=9, v_out=7, hidden=12, dtype=np.float64):
    Wx = rng.normal(0, 0.4, (v_in, 4 * hidden)).astype(dtype)
    Wh = rng.normal(0, 0.4, (hidden, 4 * hidden)).astype(dtype)
    b = rng.normal(0, 0.1, 4 * hidden).astype(dtype)
    Wy = rng.normal(0, 0.4, (hidden, v_out)).astype(dtype)
    by = rng.normal(0, 0.1, v_out).astype(dtype)
    return Wx, Wh, b, Wy, by


def test_probs_match_numpy_fallback():
    rng = np.random.default_rng(0)
    for _ in range(5):
        params = random_model(rng)
        idx = rng.integers(-1, 9, (6, 5))
        via_backend = backend.lstm_probs(*params, idx)
        via_numpy = _core_numpy.lstm_probs(*params, np.ascontiguousarray(idx))
        assert np.allclose(via_backend, via_numpy, atol=1e-12)
        assert np.allclose(via_backend.sum(axis=1), 1.0, atol=1e-12)


def test_loss_and_grads_match_numpy_fallback():
    rng = np.random.default_rng(1)
    for _ in range(5):
        params = random_model(rng)
        idx = np.ascontiguousarray(rng.integers(-1, 9, (6, 5)))
        targets = np.ascontiguousarray(rng.integers(0, 7, 6))
        loss_a, grads_a = backend.lstm_loss_grads(*params, idx, targets)
        loss_b, grads_b = _core_numpy.lstm_loss_grads(*params, idx, targets)
        assert loss_a == pytest.approx(loss_b, abs=1e-12)
        for ga, gb in zip(grads_a, grads_b):
            assert np.allclose(ga, gb, atol=1e-12)
        assert backend.lstm_loss(*params, idx, targets) == pytest.approx(loss_a, abs=1e-12)


def test_float32_runs_through_numpy_path():
    rng = np.random.default_rng(2)
    params = random_model(rng, dtype=np.float32)
    idx = rng.integers(-1, 9, (4, 5))
    probs = backend.lstm_probs(*params, idx)
    assert probs.dtype == np.float32
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)


def test_padding_index_means_zero_input():
    rng = np.random.default_rng(3)
    params = random_model(rng)
    all_pad = np.full((2, 5), -1, dtype=np.int64)
    probs = backend.lstm_probs(*params, all_pad)
    assert np.allclose(probs[0], probs[1], atol=1e-15)


def test_backend_selection_reports_a_name():
    assert backend.active_backend() in ("compiled", "numpy")
