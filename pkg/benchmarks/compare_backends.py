#!/usr/bin/env python3
"""Benchmark the compiled LSTM kernels against the pure-numpy fallback.

Times the three kernel entry points at gradient-check size (tiny model,
call-overhead bound) and at training size (batch 512, the shape the
evaluation and transfer experiments run at), then a full training epoch.
"""

import argparse
import time

import numpy as np

from homeseq import _core_numpy, backend

try:
    from homeseq import _core
except ImportError:
    _core = None


def make_model(rng, v_in, v_out, hidden):
    return [rng.normal(0, 0.3, (v_in, 4 * hidden)),
            rng.normal(0, 0.3, (hidden, 4 * hidden)),
            rng.normal(0, 0.1, 4 * hidden),
            rng.normal(0, 0.3, (hidden, v_out)),
            rng.normal(0, 0.1, v_out)]


def bench(fn, *args, repeat=5, number=10):
    best = np.inf
    for _ in range(repeat):
        started = time.perf_counter()
        for _ in range(number):
            fn(*args)
        best = min(best, (time.perf_counter() - started) / number)
    return best


def run_shape(name, v, hidden, batch, length, number):
    rng = np.random.default_rng(0)
    params = make_model(rng, v, v, hidden)
    idx = np.ascontiguousarray(rng.integers(-1, v, (batch, length)))
    targets = np.ascontiguousarray(rng.integers(0, v, batch))
    rows = []
    for kernel in ("lstm_probs", "lstm_loss", "lstm_loss_grads"):
        args = (*params, idx) if kernel == "lstm_probs" else (*params, idx, targets)
        numpy_t = bench(getattr(_core_numpy, kernel), *args, number=number)
        if _core is not None:
            native_t = bench(getattr(_core, kernel), *args, number=number)
            rows.append((kernel, numpy_t, native_t, numpy_t / native_t))
        else:
            rows.append((kernel, numpy_t, None, None))
    print(f"\n{name}  (|V|={v}, H={hidden}, B={batch}, L={length})")
    print(f"  {'kernel':<16} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for kernel, numpy_t, native_t, speedup in rows:
        native_s = f"{native_t*1e6:9.1f}u" if native_t else "       n/a"
        ratio = f"{speedup:7.1f}x" if speedup else "     n/a"
        print(f"  {kernel:<16} {numpy_t*1e6:9.1f}u {native_s} {ratio}")


def run_epoch(v=30, hidden=64, batch=512, length=10, n_windows=10240):
    from homeseq.lstm import LstmConfig, RecurrentModel, train
    from homeseq.symbolization import Vocabulary

    rng = np.random.default_rng(1)
    vocab = Vocabulary(tuple(f"t{i}" for i in range(v)))
    windows = rng.integers(-1, v, (n_windows, length))
    targets = rng.integers(0, v, n_windows)
    config = LstmConfig(memory_length=length, hidden_units=hidden,
                        batch_size=batch, max_epochs=3, patience=3, seed=0)
    print(f"\nfull training epochs  ({n_windows} windows, 3 epochs, "
          f"backend={backend.active_backend()})")
    model = RecurrentModel.init(vocab, vocab, config)
    started = time.perf_counter()
    train(model, (windows, targets), (windows[:1024], targets[:1024]), config)
    print(f"  {time.perf_counter() - started:.2f}s")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = parser.parse_args()
    number = 5 if args.quick else 20
    print(f"active backend: {backend.active_backend()}")
    if _core is None:
        print("compiled kernel not built; showing numpy timings only")
    run_shape("gradient-check size", v=8, hidden=16, batch=4, length=5,
              number=number * 10)
    run_shape("training size", v=30, hidden=64, batch=512, length=10,
              number=number)
    run_shape("composite training size", v=120, hidden=64, batch=512, length=10,
              number=number)
    run_epoch()


if __name__ == "__main__":
    main()
