"""From-scratch one-layer LSTM classifier over one-hot token windows.

The network follows the text-generation setup: the input is a window of
the previous L token indices (one-hot, with the start/padding token as the
zero vector), one hidden LSTM layer with tanh activations, and a softmax
output over the target vocabulary.  Training uses Adam with categorical
cross-entropy and early stopping on a validation set.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import backend
from .symbolization import COMPOSITE_SEP, START, SymbolizationError, Vocabulary
from .timefeatures import annotate


@dataclass
class LstmConfig:
    memory_length: int = 10
    hidden_units: int = 64
    learning_rate: float = 0.01
    batch_size: int = 512
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    dtype: str = "float64"  # float32 available for speed, float64 for oracles

    def __post_init__(self):
        if self.memory_length < 1 or self.hidden_units < 1:
            raise ValueError("memory_length and hidden_units must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")


class RecurrentModel:
    """Parameter container: gate weights, output projection, vocabularies."""

    PARAM_NAMES = ("Wx", "Wh", "b", "Wy", "by")

    def __init__(self, in_vocab, out_vocab, config, params):
        self.in_vocab = in_vocab
        self.out_vocab = out_vocab
        self.config = config
        self.Wx, self.Wh, self.b, self.Wy, self.by = params

    @classmethod
    def init(cls, in_vocab, out_vocab, config):
        """Seeded scaled-uniform init; forget-gate bias starts at +1."""
        rng = np.random.default_rng(config.seed)
        dtype = np.dtype(config.dtype)
        v_in, v_out, h = len(in_vocab), len(out_vocab), config.hidden_units

        def uniform(fan_in, fan_out, shape):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, shape).astype(dtype)

        Wx = uniform(v_in, h, (v_in, 4 * h))
        Wh = uniform(h, h, (h, 4 * h))
        b = np.zeros(4 * h, dtype=dtype)
        b[h:2 * h] = 1.0
        Wy = uniform(h, v_out, (h, v_out))
        by = np.zeros(v_out, dtype=dtype)
        return cls(in_vocab, out_vocab, config, (Wx, Wh, b, Wy, by))

    @property
    def params(self):
        return (self.Wx, self.Wh, self.b, self.Wy, self.by)

    def copy(self):
        return RecurrentModel(self.in_vocab, self.out_vocab, self.config,
                              tuple(p.copy() for p in self.params))

    def _check_window(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if (idx >= len(self.in_vocab)).any() or (idx < START).any():
            raise ValueError("token index out of range for the input vocabulary")
        return idx

    def probabilities(self, windows):
        """Output distribution for a (B, L) batch or a single length-L window."""
        idx = self._check_window(windows)
        squeeze = idx.ndim == 1
        probs = backend.lstm_probs(*self.params, idx)
        return probs[0] if squeeze else probs

    def save(self, path_or_file):
        """Self-describing checkpoint (config + vocabularies + parameters)."""
        meta = {
            "config": asdict(self.config),
            "in_vocab": self.in_vocab.to_dict(),
            "out_vocab": self.out_vocab.to_dict(),
        }
        arrays = dict(zip(self.PARAM_NAMES, self.params))
        meta_bytes = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        if hasattr(path_or_file, "write"):
            np.savez(path_or_file, meta=meta_bytes, **arrays)
        else:
            with open(path_or_file, "wb") as fh:
                np.savez(fh, meta=meta_bytes, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            params = tuple(data[name] for name in cls.PARAM_NAMES)
        return cls(Vocabulary.from_dict(meta["in_vocab"]),
                   Vocabulary.from_dict(meta["out_vocab"]),
                   LstmConfig(**meta["config"]), params)


def forward(model, window):
    """Probability vector over the output vocabulary for one window."""
    return model.probabilities(window)


def loss(model, batch):
    """Mean categorical cross-entropy over a (windows, targets) batch."""
    windows, targets = batch
    return backend.lstm_loss(*model.params, np.asarray(windows, dtype=np.int64),
                             np.asarray(targets, dtype=np.int64))


def backward(model, batch):
    """Full BPTT gradients for every parameter, as a name -> array dict."""
    windows, targets = batch
    _, grads = backend.lstm_loss_grads(
        *model.params, np.asarray(windows, dtype=np.int64),
        np.asarray(targets, dtype=np.int64))
    return dict(zip(model.PARAM_NAMES, grads))


def predict(model, windows):
    """Argmax output indices (ties resolve to the lowest index)."""
    probs = model.probabilities(np.atleast_2d(np.asarray(windows, dtype=np.int64)))
    return probs.argmax(axis=1)


def accuracy(model, windows, targets, batch_size=4096):
    windows = np.asarray(windows, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if len(windows) == 0:
        raise ValueError("empty evaluation set")
    hits = 0
    for start in range(0, len(windows), batch_size):
        pred = predict(model, windows[start:start + batch_size])
        hits += int((pred == targets[start:start + batch_size]).sum())
    return hits / len(windows)


def predict_joint(model, window):
    """Argmax composite token decomposed into (sensor token, time token)."""
    if not model.out_vocab.is_composite:
        raise SymbolizationError("model output vocabulary is not composite")
    probs = model.probabilities(window)
    return model.out_vocab.split(int(probs.argmax()))


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    probe_accuracy: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def epochs(self):
        return len(self.train_loss)

    @property
    def best_probe_accuracy(self):
        return max(self.probe_accuracy) if self.probe_accuracy else None


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def _batched_loss(model, windows, targets, batch_size):
    total = 0.0
    for start in range(0, len(windows), batch_size):
        chunk = slice(start, start + batch_size)
        total += backend.lstm_loss(*model.params, windows[chunk], targets[chunk]) \
            * (min(start + batch_size, len(windows)) - start)
    return total / len(windows)


def train(model, dataset, validation, config=None, probe=None):
    """Adam training with early stopping on validation loss.

    Returns (model at the best validation epoch, TrainHistory).  ``probe``
    is an optional (windows, targets) pair whose accuracy is recorded at
    initialization and after every epoch (used by the transfer protocol's
    best-checkpoint metric).
    """
    config = config or model.config
    windows, targets = dataset
    windows = np.ascontiguousarray(windows, dtype=np.int64)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    if len(windows) == 0:
        raise ValueError("empty training dataset")
    val_windows, val_targets = validation
    val_windows = np.ascontiguousarray(val_windows, dtype=np.int64)
    val_targets = np.ascontiguousarray(val_targets, dtype=np.int64)
    if len(val_windows) == 0:
        raise ValueError("empty validation dataset")

    rng = np.random.default_rng(config.seed)
    optimizer = _Adam(model.params, config.learning_rate)
    history = TrainHistory()
    if probe is not None:
        history.probe_accuracy.append(accuracy(model, *probe))
    best_val = np.inf
    best_params = tuple(p.copy() for p in model.params)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(windows))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            batch_loss, grads = backend.lstm_loss_grads(
                *model.params, windows[batch], targets[batch])
            optimizer.step(model.params, grads)
            epoch_loss += batch_loss * len(batch)
        history.train_loss.append(epoch_loss / len(order))
        val_loss = _batched_loss(model, val_windows, val_targets, config.batch_size)
        history.val_loss.append(val_loss)
        if probe is not None:
            history.probe_accuracy.append(accuracy(model, *probe))
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = tuple(p.copy() for p in model.params)
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    for current, best in zip(model.params, best_params):
        current[...] = best
    return model, history


def build_windows(index_runs, memory_length, first_target=0):
    """Stride-1 windows over contiguous index runs, left-padded with START.

    Every position of every run becomes a target; the window holds the
    ``memory_length`` indices before it (padded at each run start).
    Returns (windows (N, L) int64, targets (N,) int64).
    """
    if index_runs and not isinstance(index_runs[0], (list, tuple, np.ndarray)):
        index_runs = [index_runs]
    length = memory_length
    all_windows = []
    all_targets = []
    for run in index_runs:
        run = np.asarray(run, dtype=np.int64)
        for j in range(first_target, len(run)):
            window = np.full(length, START, dtype=np.int64)
            lo = max(0, j - length)
            if j > lo:
                window[length - (j - lo):] = run[lo:j]
            all_windows.append(window)
            all_targets.append(run[j])
    if not all_windows:
        return (np.empty((0, length), dtype=np.int64), np.empty(0, dtype=np.int64))
    return np.stack(all_windows), np.asarray(all_targets, dtype=np.int64)


def build_joint_dataset(seq, mode, model=None, memory_length=10, causal_inputs=True):
    """Windows and composite targets for joint sensor+time prediction.

    Inputs are the composite stream annotated with the causal
    since-previous gap (or, with ``causal_inputs=False``, the to-next gap
    exactly as the per-event cluster features are defined).  The target
    for the window ending at position i pairs the next sensor token with
    the time token of the gap leading to it, i.e. the elapsed-to-next
    annotation of position i.
    """
    input_stream = annotate(seq, mode, model,
                            role="input" if causal_inputs else "target")
    target_stream = annotate(seq, mode, model, role="target")
    vocab = input_stream.vocab
    n = len(seq)
    if n < 2:
        raise ValueError("need at least two tokens for joint prediction")
    windows = []
    targets = []
    length = memory_length
    indices = input_stream.indices
    base_index = {tok: i for i, tok in enumerate(vocab.base_tokens)}
    time_index = {tok: i for i, tok in enumerate(vocab.time_tokens)}
    for j in range(1, n):
        window = np.full(length, START, dtype=np.int64)
        lo = max(0, j - length)
        window[length - (j - lo):] = indices[lo:j]
        windows.append(window)
        _, gap_time = _split_composite(target_stream.tokens[j - 1])
        targets.append(vocab.composite_index(base_index[seq.tokens[j]],
                                             time_index[gap_time]))
    return np.stack(windows), np.asarray(targets, dtype=np.int64), vocab


def _split_composite(token):
    base, _, time_name = token.rpartition(COMPOSITE_SEP)
    return base, time_name
