"""Kernel backend selection: compiled extension when available, numpy otherwise.

The compiled core only handles float64; float32 models (and environments
without the built extension) run on the numpy backend.  Set
``HOMESEQ_BACKEND=numpy`` to force the fallback, ``HOMESEQ_BACKEND=compiled``
to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

import numpy as np

from . import _core_numpy

try:
    from . import _core
except ImportError:
    _core = None

_FORCED = os.environ.get("HOMESEQ_BACKEND", "").strip().lower()
if _FORCED == "compiled" and _core is None:
    raise ImportError("HOMESEQ_BACKEND=compiled but homeseq._core is not built")


def active_backend():
    if _FORCED == "numpy" or _core is None:
        return "numpy"
    return "compiled"


def _impl(dtype):
    if active_backend() == "compiled" and dtype == np.float64:
        return _core
    return _core_numpy


def _prep(Wx, Wh, b, Wy, by, idx, targets=None):
    dtype = Wx.dtype
    arrays = [np.ascontiguousarray(a, dtype=dtype) for a in (Wx, Wh, b, Wy, by)]
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    if targets is None:
        return arrays, idx, None
    targets = np.ascontiguousarray(np.atleast_1d(targets), dtype=np.int64)
    return arrays, idx, targets


def lstm_probs(Wx, Wh, b, Wy, by, idx):
    arrays, idx, _ = _prep(Wx, Wh, b, Wy, by, idx)
    return _impl(arrays[0].dtype).lstm_probs(*arrays, idx)


def lstm_loss(Wx, Wh, b, Wy, by, idx, targets):
    arrays, idx, targets = _prep(Wx, Wh, b, Wy, by, idx, targets)
    return _impl(arrays[0].dtype).lstm_loss(*arrays, idx, targets)


def lstm_loss_grads(Wx, Wh, b, Wy, by, idx, targets):
    arrays, idx, targets = _prep(Wx, Wh, b, Wy, by, idx, targets)
    return _impl(arrays[0].dtype).lstm_loss_grads(*arrays, idx, targets)
