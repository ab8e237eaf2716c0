"""Command-line pipeline: simulate, ingest, correct, encode, cluster,
train, evaluate, sweep, transfer, rerun.

Every run writes a ``<output>.manifest.json`` recording the effective
arguments, seeds, backend, and sha256 of all inputs and outputs.  A run
can be reproduced byte-for-byte from its manifest alone with ``rerun``;
wall-clock timing files are declared volatile and excluded from the
comparison.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, backend
from .correction import CorrectionError, correct_missing_motion
from .evaluation import EvalConfig, encode_for_method, evaluate, size_sweep, \
    sweep_csv, sweep_timings
from .events import (ConfigError, ParseError, ValidationError,
                     dump_apartment_config, load_apartment_config,
                     parse_event_log, serialize_events, validate_against_registry)
from .lstm import LstmConfig, RecurrentModel, build_joint_dataset, build_windows, train
from .ppm import build_trie
from .simulator import (DEFAULT_START, build_preset, routine_from_text,
                        routine_to_text, simulate)
from .symbolization import alz_encode, speed_encode
from .timefeatures import TimeClusterModel, annotate, fit_time_clusters
from .transfer import (HarmonizationMap, default_harmonization_map, harmonize,
                       pretrain_finetune, results_csv)

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 1, 2, 3

# argument names holding output paths, per subcommand (rerun rewrites these)
OUTPUT_ARGS = {
    "simulate": ("output",),
    "ingest": ("output",),
    "correct": ("output",),
    "encode": ("output",),
    "cluster": ("output",),
    "train-ppm": ("output",),
    "train-lstm": ("output",),
    "evaluate": ("output",),
    "sweep": ("output",),
    "transfer": ("output",),
}


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _resolve(path, args):
    """Relative paths resolve under --data-dir (or HOMESEQ_DATA_DIR)."""
    base = getattr(args, "data_dir", None) or os.environ.get("HOMESEQ_DATA_DIR")
    path = Path(path)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _read_text(path, args):
    path = _resolve(path, args)
    try:
        return path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def _load_registry(args, log_path):
    """Registry from --registry, or the log's .registry.ini sidecar."""
    if getattr(args, "registry", None):
        return load_apartment_config(_read_text(args.registry, args))
    sidecar = Path(str(_resolve(log_path, args)) + ".registry.ini")
    if sidecar.exists():
        return load_apartment_config(sidecar.read_text())
    raise ConfigError(f"no registry: pass --registry or provide {sidecar}")


def _load_events(args, path, registry=None):
    return parse_event_log(_read_text(path, args), registry)


def _lstm_config(args, seed=None):
    return LstmConfig(
        memory_length=args.memory, hidden_units=args.hidden,
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        max_epochs=args.epochs, patience=args.patience,
        seed=args.seed if seed is None else seed, dtype=args.dtype)


# ---------------------------------------------------------------------------
# subcommands: each returns ({path: text-or-bytes}, {volatile paths})
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    registry, graph, routine = build_preset(args.preset)
    if args.routine:
        routine = routine_from_text(_read_text(args.routine, args))
    events = simulate(routine, registry, graph, args.days, args.seed, args.start)
    out = _resolve(args.output, args)
    return {
        out: serialize_events(events),
        Path(str(out) + ".registry.ini"): dump_apartment_config(registry, graph),
        Path(str(out) + ".routine.ini"): routine_to_text(routine),
    }, set()


def cmd_ingest(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    report = validate_against_registry(events, registry)
    out = _resolve(args.output, args)
    return {
        out: serialize_events(events),
        Path(str(out) + ".validation.txt"): report.summary(),
    }, set()


def cmd_correct(args):
    registry, graph = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    corrected, report = correct_missing_motion(events, graph, registry)
    out = _resolve(args.output, args)
    return {
        out: serialize_events(corrected),
        Path(str(out) + ".insertions.csv"): report.to_csv(),
        Path(str(out) + ".summary.txt"): report.summary(),
    }, set()


def _encode(args, registry, events):
    if args.frontend == "speed":
        seq = speed_encode(events, registry)
    else:
        seq = alz_encode(events, registry)
    if args.time_mode:
        model = None
        if args.time_mode == "kcluster":
            if not args.clusters:
                raise ConfigError("kcluster mode needs --clusters")
            model = TimeClusterModel.from_text(_read_text(args.clusters, args))
        seq = annotate(seq, args.time_mode, model, role=args.role)
    return seq


def cmd_encode(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    seq = _encode(args, registry, events)
    out = _resolve(args.output, args)
    return {
        out: seq.text() + "\n",
        Path(str(out) + ".meta.csv"): seq.metadata_csv(),
    }, set()


def cmd_cluster(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    seq = speed_encode(events, registry)
    model = fit_time_clusters(seq, seed=args.seed)
    out = _resolve(args.output, args)
    return {
        out: model.to_text(),
        Path(str(out) + ".curves.csv"): model.curves_csv(),
    }, set()


def cmd_train_ppm(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    if args.frontend == "speed":
        seq = speed_encode(events, registry)
    else:
        seq = alz_encode(events, registry)
    trie = build_trie(args.frontend, seq.tokens, seq.vocab.tokens)
    out = _resolve(args.output, args)
    stats = (f"frontend: {args.frontend}\ntokens: {len(seq)}\n"
             f"alphabet: {len(trie.alphabet)}\ndepth: {trie.depth}\n")
    return {out: trie.dump(), Path(str(out) + ".stats.txt"): stats}, set()


def cmd_train_lstm(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    config = _lstm_config(args)
    plain = speed_encode(events, registry) if args.frontend == "speed" \
        else alz_encode(events, registry)
    if args.joint:
        if not args.time_mode:
            raise ConfigError("--joint needs --time-mode")
        model_time = fit_time_clusters(plain, seed=args.seed) \
            if args.time_mode == "kcluster" else None
        windows, targets, vocab = build_joint_dataset(
            plain, args.time_mode, model_time, config.memory_length)
        in_vocab = out_vocab = vocab
    else:
        if args.time_mode:
            model_time = fit_time_clusters(plain, seed=args.seed) \
                if args.time_mode == "kcluster" else None
            stream = annotate(plain, args.time_mode, model_time, role="input")
        else:
            stream = plain
        in_vocab = stream.vocab
        out_vocab = plain.vocab
        windows, _ = build_windows([stream.indices], config.memory_length)
        targets = np.asarray(plain.indices, dtype=np.int64)
    cut = max(1, int(round(len(windows) * 0.8)))
    if cut >= len(windows):
        cut = len(windows) - 1
    model = RecurrentModel.init(in_vocab, out_vocab, config)
    model, history = train(model, (windows[:cut], targets[:cut]),
                           (windows[cut:], targets[cut:]), config)
    out = _resolve(args.output, args)
    buffer = io.BytesIO()
    model.save(buffer)
    history_lines = ["epoch,train_loss,val_loss"]
    for i, (tl, vl) in enumerate(zip(history.train_loss, history.val_loss), 1):
        history_lines.append(f"{i},{tl!r},{vl!r}")
    return {
        Path(out): buffer.getvalue(),
        Path(str(out) + ".history.csv"): "\n".join(history_lines) + "\n",
    }, set()


def _eval_config(args):
    return EvalConfig(
        folds=args.folds, seed=args.seed, time_mode=args.time_mode,
        predict_time=args.joint, ppm_max_order=args.ppm_order,
        lstm=_lstm_config(args), jobs=args.jobs)


def cmd_evaluate(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    seq = encode_for_method(args.method, events, registry)
    report = evaluate(args.method, seq, _eval_config(args))
    out = _resolve(args.output, args)
    return {
        out: report.to_csv(),
        Path(str(out) + ".confusion.csv"): report.confusion_csv(),
        Path(str(out) + ".summary.txt"): report.summary(),
        Path(str(out) + ".timings.txt"): report.timings_text(),
    }, {Path(str(out) + ".timings.txt")}


def cmd_sweep(args):
    registry, _ = _load_registry(args, args.log)
    events = _load_events(args, args.log, registry)
    seq = encode_for_method(args.method, events, registry)
    grid = [int(v) for v in args.grid.split(",") if v.strip()]
    rows, _ = size_sweep(args.method, seq, grid, _eval_config(args))
    out = _resolve(args.output, args)
    return {
        out: sweep_csv(rows),
        Path(str(out) + ".timings.csv"): sweep_timings(rows),
    }, {Path(str(out) + ".timings.csv")}


def cmd_transfer(args):
    source_paths = [p for p in args.sources.split(",") if p.strip()]
    if len(source_paths) != 4:
        raise ConfigError("transfer needs exactly 4 source logs")
    names = [Path(p).stem for p in source_paths + [args.target]]
    registries = {}
    event_sets = {}
    for name, path in zip(names, source_paths + [args.target]):
        registry, _ = _load_registry(args, path)
        registries[name] = registry
        event_sets[name] = _load_events(args, path, registry)
    if args.map:
        mapping = HarmonizationMap.from_config(_read_text(args.map, args))
    else:
        mapping = default_harmonization_map(registries)
    shared = mapping.shared_registry()
    seqs = {name: speed_encode(harmonize(event_sets[name],
                                         mapping.mapping_for(name), shared), shared)
            for name in names}
    budgets = [int(v) for v in args.budgets.split(",") if v.strip()]
    config = _lstm_config(args)
    results = []
    for budget in budgets:
        results.append(pretrain_finetune(
            [seqs[n] for n in names[:4]], seqs[names[4]], budget,
            seed=args.seed, config=config, repetitions=args.repetitions))
    out = _resolve(args.output, args)
    return {out: results_csv(results),
            Path(str(out) + ".map.ini"): mapping.to_config()}, set()


def cmd_rerun(args):
    manifest_path = _resolve(args.manifest, args)
    manifest = json.loads(manifest_path.read_text())
    sub = manifest["subcommand"]
    stored = argparse.Namespace(**manifest["args"])
    outdir = Path(args.out_dir).resolve()
    outdir.mkdir(parents=True, exist_ok=True)
    for arg_name in OUTPUT_ARGS[sub]:
        original = getattr(stored, arg_name)
        setattr(stored, arg_name, str(outdir / Path(original).name))
    outputs, volatile = COMMANDS[sub](stored)
    written = _write_outputs(outputs)
    if not args.check:
        _write_manifest(sub, stored, outputs, volatile, written)
        return {}, set()
    mismatches = []
    recorded = manifest["outputs"]
    for old_path, digest in recorded.items():
        new_path = outdir / Path(old_path).name
        if str(new_path) not in written:
            mismatches.append(f"missing output {new_path}")
        elif written[str(new_path)] != digest:
            mismatches.append(f"hash mismatch for {new_path}")
    if mismatches:
        raise ValidationError("rerun differs: " + "; ".join(mismatches))
    print(f"rerun reproduced {len(recorded)} outputs byte-for-byte")
    return {}, set()


def _write_outputs(outputs):
    written = {}
    for path, content in outputs.items():
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content if isinstance(content, bytes) else content.encode()
        path.write_bytes(data)
        written[str(path)] = _sha256(data)
    return written


def _namespace_dict(args):
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _write_manifest(sub, args, outputs, volatile, written):
    primary = next(iter(outputs))
    arg_dict = _namespace_dict(args)
    inputs = {}
    for name in ("log", "registry", "routine", "clusters", "map", "target"):
        value = arg_dict.get(name)
        if value:
            path = _resolve(value, args)
            if Path(path).exists():
                inputs[str(path)] = _sha256(Path(path).read_bytes())
    for name in ("sources",):
        value = arg_dict.get(name)
        if value:
            for item in str(value).split(","):
                path = _resolve(item.strip(), args)
                if Path(path).exists():
                    inputs[str(path)] = _sha256(Path(path).read_bytes())
    manifest = {
        "tool": "homeseq",
        "version": __version__,
        "backend": backend.active_backend(),
        "subcommand": sub,
        "args": arg_dict,
        "config_hash": _sha256(json.dumps(arg_dict, sort_keys=True).encode()),
        "inputs": inputs,
        "outputs": {p: h for p, h in written.items()
                    if Path(p) not in volatile},
        "volatile_outputs": [str(p) for p in volatile],
    }
    path = Path(str(primary) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "correct": cmd_correct,
    "encode": cmd_encode,
    "cluster": cmd_cluster,
    "train-ppm": cmd_train_ppm,
    "train-lstm": cmd_train_lstm,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "transfer": cmd_transfer,
    "rerun": cmd_rerun,
}


def _add_common(parser, lstm=False, evalopts=False):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--data-dir", default=None,
                        help="base for relative paths (default $HOMESEQ_DATA_DIR)")
    parser.add_argument("--config", default=None,
                        help="INI file with a [homeseq] section; values in it "
                             "override command-line flags")
    if lstm:
        parser.add_argument("--memory", type=int, default=10)
        parser.add_argument("--hidden", type=int, default=64)
        parser.add_argument("--learning-rate", type=float, default=0.01)
        parser.add_argument("--batch-size", type=int, default=512)
        parser.add_argument("--epochs", type=int, default=200)
        parser.add_argument("--patience", type=int, default=10)
        parser.add_argument("--dtype", choices=("float64", "float32"),
                            default="float64")
    if evalopts:
        parser.add_argument("--folds", type=int, default=5)
        parser.add_argument("--time-mode", default=None,
                            choices=("bucket4", "bucket8", "kcluster"))
        parser.add_argument("--joint", action="store_true",
                            help="predict sensor and time token jointly")
        parser.add_argument("--ppm-order", type=int, default=4)
        parser.add_argument("--jobs", type=int, default=os.cpu_count())


def build_parser():
    parser = CliParser(prog="homeseq",
                       description="Next-event prediction for smart-home "
                                   "binary sensor streams")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True,
                                 parser_class=CliParser)

    p = subs.add_parser("simulate", help="generate a synthetic event log")
    p.add_argument("--days", type=float, required=True)
    p.add_argument("--preset", type=int, default=1, choices=(1, 2, 3, 4, 5))
    p.add_argument("--routine", default=None, help="routine config overriding the preset")
    p.add_argument("--start", default=DEFAULT_START)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("ingest", help="parse, validate, canonicalize a log")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("correct", help="insert motion events implied by topology")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("encode", help="letter-encode a log (SPEED or ALZ text)")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("--frontend", choices=("speed", "alz"), default="speed")
    p.add_argument("--time-mode", default=None,
                   choices=("bucket4", "bucket8", "kcluster"))
    p.add_argument("--clusters", default=None, help="fitted time-cluster model")
    p.add_argument("--role", choices=("input", "target"), default="input")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("cluster", help="fit per-sensor time clusters")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("train-ppm", help="build a pattern trie and dump it")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("--frontend", choices=("speed", "alz"), default="speed")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = subs.add_parser("train-lstm", help="train a network checkpoint")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("--frontend", choices=("speed", "alz"), default="speed")
    p.add_argument("--time-mode", default=None,
                   choices=("bucket4", "bucket8", "kcluster"))
    p.add_argument("--joint", action="store_true")
    p.add_argument("-o", "--output", required=True)
    _add_common(p, lstm=True)

    p = subs.add_parser("evaluate", help="cross-validated accuracy of one method")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("--method", required=True,
                   choices=("alz-ppm", "speed-ppm", "lstm-alz", "lstm-speed"))
    p.add_argument("-o", "--output", required=True)
    _add_common(p, lstm=True, evalopts=True)

    p = subs.add_parser("sweep", help="accuracy vs dataset size curve")
    p.add_argument("log")
    p.add_argument("--registry", default=None)
    p.add_argument("--method", required=True,
                   choices=("alz-ppm", "speed-ppm", "lstm-alz", "lstm-speed"))
    p.add_argument("--grid", required=True, help="comma-separated token counts")
    p.add_argument("-o", "--output", required=True)
    _add_common(p, lstm=True, evalopts=True)

    p = subs.add_parser("transfer", help="pretrain on 4 apartments, fine-tune on one")
    p.add_argument("--sources", required=True, help="4 comma-separated logs")
    p.add_argument("--target", required=True)
    p.add_argument("--map", default=None, help="harmonization config")
    p.add_argument("--budgets", default="0,500", help="fine-tune event budgets")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("-o", "--output", required=True)
    _add_common(p, lstm=True)

    p = subs.add_parser("rerun", help="reproduce a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--check", action="store_true",
                   help="verify outputs match the recorded hashes")
    _add_common(p)
    return parser


def _apply_config_file(args):
    if not getattr(args, "config", None):
        return args
    import configparser
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(Path(_resolve(args.config, args)).read_text())
    if "homeseq" not in parser:
        raise ConfigError("config file needs a [homeseq] section")
    for key, raw in parser["homeseq"].items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"config key {key!r} is not a known option")
        current = getattr(args, attr)
        if isinstance(current, bool):
            value = raw.strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, attr, value)
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args)
        sub = args.subcommand
        outputs, volatile = COMMANDS[sub](args)
        if outputs:
            written = _write_outputs(outputs)
            manifest = _write_manifest(sub, args, outputs, volatile, written)
            for path in outputs:
                print(path)
            print(manifest)
        return 0
    except SystemExit as exc:
        return exc.code or 0
    except (ParseError, ValidationError, CorrectionError, ConfigError,
            ValueError) as exc:
        print(f"homeseq: {exc}", file=sys.stderr)
        return DATA_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"homeseq: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
