"""Chronological cross-validation of the four predictors.

The token sequence is cut into five contiguous blocks.  Fold i tests on
block i, validates on the cyclically following block, and trains on the
remaining three.  PPM tries are built from the train+validation blocks
(windows and episodes never span the gap left by the test block); LSTM
training windows are built per contiguous run so inputs never cross into
the held-out block.  Test predictions always see the true preceding
tokens, which are known at prediction time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import ppm
from .lstm import LstmConfig, RecurrentModel, train
from .symbolization import COMPOSITE_SEP, START, SymbolSequence, alz_encode, speed_encode
from .timefeatures import annotate, fit_time_clusters

METHODS = ("alz-ppm", "speed-ppm", "lstm-alz", "lstm-speed")


@dataclass
class EvalConfig:
    folds: int = 5
    seed: int = 0
    time_mode: str = None  # None | bucket4 | bucket8 | kcluster (lstm only)
    predict_time: bool = False  # joint sensor+time prediction (lstm only)
    causal_inputs: bool = True
    ppm_max_order: int = 4  # prediction context length = max_order - 1
    lstm: LstmConfig = field(default_factory=LstmConfig)
    jobs: int = 1


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    n_test: int
    train_seconds: float
    predict_seconds: float


@dataclass
class EvalReport:
    method: str
    n_tokens: int
    fold_results: list
    confusion: np.ndarray  # actual x predicted over output tokens
    out_tokens: tuple
    config: EvalConfig

    @property
    def accuracies(self):
        return [f.accuracy for f in self.fold_results]

    @property
    def mean_accuracy(self):
        return float(np.mean(self.accuracies))

    @property
    def train_seconds(self):
        return float(sum(f.train_seconds for f in self.fold_results))

    def to_csv(self):
        lines = ["fold,accuracy,n_test"]
        for f in self.fold_results:
            lines.append(f"{f.fold},{f.accuracy!r},{f.n_test}")
        lines.append(f"mean,{self.mean_accuracy!r},"
                     f"{sum(f.n_test for f in self.fold_results)}")
        return "\n".join(lines) + "\n"

    def confusion_csv(self):
        header = "actual\\predicted," + ",".join(self.out_tokens)
        lines = [header]
        for i, token in enumerate(self.out_tokens):
            lines.append(token + "," + ",".join(str(int(v)) for v in self.confusion[i]))
        return "\n".join(lines) + "\n"

    def timings_text(self):
        lines = [f"method: {self.method}"]
        for f in self.fold_results:
            lines.append(f"fold {f.fold}: train {f.train_seconds:.3f}s "
                         f"predict {f.predict_seconds:.3f}s")
        lines.append(f"total train: {self.train_seconds:.3f}s")
        return "\n".join(lines) + "\n"

    def summary(self):
        lines = [f"method: {self.method}",
                 f"tokens: {self.n_tokens}",
                 f"folds: {len(self.fold_results)}"]
        for f in self.fold_results:
            lines.append(f"fold {f.fold}: accuracy {f.accuracy:.6f} ({f.n_test} test)")
        lines.append(f"mean accuracy: {self.mean_accuracy:.6f}")
        return "\n".join(lines) + "\n"


def chronological_folds(n, k=5):
    """Fold geometry over ``n`` positions: 5 contiguous blocks, fold i
    tests on block i and validates on block (i+1) mod 5."""
    if not 1 <= k <= 5:
        raise ValueError("fold count must be between 1 and 5")
    if n < 5 * k:
        raise ValueError(f"sequence too short for {k} folds: {n} tokens")
    bounds = [round(i * n / 5) for i in range(6)]
    blocks = [(bounds[i], bounds[i + 1]) for i in range(5)]
    folds = []
    for i in range(k):
        test = blocks[i]
        val = blocks[(i + 1) % 5]
        rest = [blocks[j] for j in range(5) if j != i and j != (i + 1) % 5]
        folds.append((rest, val, test))
    return folds


def encode_for_method(method, events, registry):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r} (expected one of {METHODS})")
    if "alz" in method:
        return alz_encode(events, registry)
    return speed_encode(events, registry)


def _contiguous_runs(blocks):
    runs = []
    for lo, hi in sorted(blocks):
        if runs and runs[-1][1] == lo:
            runs[-1] = (runs[-1][0], hi)
        else:
            runs.append((lo, hi))
    return runs


def _run_windows(indices, runs, length, first_target=0):
    """Windows per contiguous run; padding never crosses a run boundary."""
    windows = []
    positions = []
    for lo, hi in runs:
        for j in range(max(lo, first_target), hi):
            window = np.full(length, START, dtype=np.int64)
            ctx_lo = max(lo, j - length)
            if j > ctx_lo:
                window[length - (j - ctx_lo):] = indices[ctx_lo:j]
            windows.append(window)
            positions.append(j)
    return np.stack(windows), positions


def _history_windows(indices, lo, hi, length, first_target=0):
    """Test windows: context is the true full history before each position."""
    windows = []
    positions = []
    for j in range(max(lo, first_target), hi):
        window = np.full(length, START, dtype=np.int64)
        ctx_lo = max(0, j - length)
        if j > ctx_lo:
            window[length - (j - ctx_lo):] = indices[ctx_lo:j]
        windows.append(window)
        positions.append(j)
    return np.stack(windows), positions


def _subsequence(seq, runs):
    tokens = []
    timestamps = []
    hours = []
    for lo, hi in runs:
        tokens.extend(seq.tokens[lo:hi])
        timestamps.extend(seq.timestamps[lo:hi])
        hours.extend(seq.hours[lo:hi])
    return SymbolSequence(seq.vocab, tokens, timestamps, hours)


def _eval_ppm_fold(seq, fold, frontend, max_order):
    train_blocks, val_block, test_block = fold
    t0 = time.perf_counter()
    runs = _contiguous_runs(train_blocks + [val_block])
    segments = [seq.tokens[lo:hi] for lo, hi in runs]
    trie = ppm.build_trie(frontend, segments, seq.vocab.tokens)
    t1 = time.perf_counter()
    context = max(0, min(max_order - 1, trie.depth - 1))
    lo, hi = test_block
    predictions = [ppm.predict_next(trie, seq.tokens[max(0, j - context):j])
                   for j in range(lo, hi)]
    t2 = time.perf_counter()
    actual = list(seq.tokens[lo:hi])
    return predictions, actual, t1 - t0, t2 - t1, seq.vocab.tokens


def _eval_lstm_fold(seq, fold, config):
    train_blocks, val_block, test_block = fold
    mode = config.time_mode
    length = config.lstm.memory_length
    trainval_runs = _contiguous_runs(train_blocks + [val_block])
    t0 = time.perf_counter()

    model_time = None
    if mode == "kcluster":
        model_time = fit_time_clusters(_subsequence(seq, trainval_runs),
                                       seed=config.seed)
    if mode is None:
        stream = seq
    else:
        stream = annotate(seq, mode, model_time,
                          role="input" if config.causal_inputs else "target")
    in_vocab = stream.vocab
    indices = stream.indices

    if config.predict_time:
        out_vocab = in_vocab
        target_stream = annotate(seq, mode, model_time, role="target")
        base_index = {t: i for i, t in enumerate(out_vocab.base_tokens)}
        time_index = {t: i for i, t in enumerate(out_vocab.time_tokens)}
        targets_at = np.full(len(seq), -1, dtype=np.int64)
        for j in range(1, len(seq)):
            gap_time = target_stream.tokens[j - 1].rpartition(COMPOSITE_SEP)[2]
            targets_at[j] = out_vocab.composite_index(
                base_index[seq.tokens[j]], time_index[gap_time])
        first_target = 1
    else:
        out_vocab = seq.vocab
        targets_at = np.asarray(seq.indices, dtype=np.int64)
        first_target = 0

    Xtr, tr_pos = _run_windows(indices, _contiguous_runs(train_blocks),
                               length, first_target)
    Xva, va_pos = _run_windows(indices, [val_block], length, first_target)
    Xte, te_pos = _history_windows(indices, *test_block, length,
                                   first_target=first_target)
    ytr = targets_at[tr_pos]
    yva = targets_at[va_pos]
    yte = targets_at[te_pos]

    cfg = replace(config.lstm, seed=config.lstm.seed + 7919 * config.seed)
    model = RecurrentModel.init(in_vocab, out_vocab, cfg)
    model, _ = train(model, (Xtr, ytr), (Xva, yva), cfg)
    t1 = time.perf_counter()
    predicted = []
    for start in range(0, len(Xte), 4096):
        probs = model.probabilities(Xte[start:start + 4096])
        predicted.extend(int(i) for i in probs.argmax(axis=1))
    t2 = time.perf_counter()
    predictions = [out_vocab.tokens[i] for i in predicted]
    actual = [out_vocab.tokens[i] for i in yte]
    return predictions, actual, t1 - t0, t2 - t1, out_vocab.tokens


def _run_fold(task):
    method, seq, fold, config = task
    if method.endswith("ppm"):
        frontend = method.split("-")[0]
        return _eval_ppm_fold(seq, fold, frontend, config.ppm_max_order)
    return _eval_lstm_fold(seq, fold, config)


def evaluate(method, seq, config=None):
    """Mean exact-match next-token accuracy over chronological folds."""
    config = config or EvalConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r} (expected one of {METHODS})")
    if method.endswith("ppm") and (config.time_mode or config.predict_time):
        raise ValueError("time features are only supported for the lstm methods")
    folds = chronological_folds(len(seq), config.folds)

    tasks = [(method, seq, fold, config) for fold in folds]
    if config.jobs and config.jobs > 1 and len(folds) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(config.jobs, len(folds))) as pool:
            outcomes = list(pool.map(_run_fold, tasks))
    else:
        outcomes = [_run_fold(task) for task in tasks]

    confusion = None
    token_index = None
    out_tokens = None
    fold_results = []
    for i, (predictions, actual, t_train, t_pred, tokens) in enumerate(outcomes):
        if confusion is None:
            out_tokens = tuple(tokens)
            token_index = {t: k for k, t in enumerate(out_tokens)}
            confusion = np.zeros((len(out_tokens), len(out_tokens)), dtype=np.int64)
        hits = 0
        for a, p in zip(actual, predictions):
            confusion[token_index[a], token_index[p]] += 1
            hits += a == p
        fold_results.append(FoldResult(i, hits / len(actual), len(actual),
                                       t_train, t_pred))
    return EvalReport(method, len(seq), fold_results, confusion, out_tokens,
                      config)


def size_sweep(method, seq, grid, config=None):
    """Evaluate on ascending prefixes; rows are (n, mean acc, train seconds)."""
    config = config or EvalConfig()
    grid = sorted(grid)
    if grid and grid[-1] > len(seq):
        raise ValueError(f"grid point {grid[-1]} exceeds sequence length {len(seq)}")
    rows = []
    reports = []
    for n in grid:
        report = evaluate(method, seq.prefix(n), config)
        rows.append((n, report.mean_accuracy, report.train_seconds))
        reports.append(report)
    return rows, reports


def sweep_csv(rows):
    """Deterministic curve (timings go to the volatile sidecar)."""
    lines = ["n_tokens,mean_accuracy"]
    for n, acc, _ in rows:
        lines.append(f"{n},{acc!r}")
    return "\n".join(lines) + "\n"


def sweep_timings(rows):
    lines = ["n_tokens,train_seconds"]
    for n, _, secs in rows:
        lines.append(f"{n},{secs:.3f}")
    return "\n".join(lines) + "\n"
