"""Cross-apartment label harmonization and the pretrain/fine-tune protocol.

Sensors that back the same activity in different apartments (kettle vs
coffee machine) are re-labelled to one shared name; sensors that cannot be
harmonized (lamps) are dropped.  A model pretrained on four apartments is
fine-tuned with the first n events of the target apartment and tested on
the following 3000 events; each configuration runs three times and the
metric is the mean of the best test accuracy seen across the early-
stopping checkpoints of each run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .events import ConfigError, Sensor, SensorEvent, SensorRegistry, ValidationError
from .lstm import RecurrentModel, accuracy, build_windows, train
from .symbolization import START

DROP = "-"  # config value marking a dropped sensor


class HarmonizationMap:
    """Per-apartment sensor-id -> shared-label tables plus a drop list."""

    def __init__(self, per_apartment):
        self.per_apartment = {name: dict(table) for name, table in per_apartment.items()}
        labels = sorted({label for table in self.per_apartment.values()
                         for label in table.values() if label is not None})
        self.labels = tuple(labels)

    def shared_registry(self):
        """Registry over the shared labels (ids by sorted label order)."""
        letters = "abcdefghijklmnopqrstuvwxyz"
        if len(self.labels) > len(letters):
            raise ConfigError("more shared labels than letters")
        sensors = [Sensor(i + 1, label, "power", "shared", letters[i])
                   for i, label in enumerate(self.labels)]
        return SensorRegistry(sensors)

    def mapping_for(self, apartment):
        if apartment not in self.per_apartment:
            raise ConfigError(f"no harmonization table for apartment {apartment!r}")
        return self.per_apartment[apartment]

    @classmethod
    def from_config(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"bad harmonization document: {exc}") from None
        per_apartment = {}
        for section in parser.sections():
            table = {}
            for key, value in parser[section].items():
                value = value.strip()
                table[int(key)] = None if value == DROP else value
            per_apartment[section] = table
        return cls(per_apartment)

    def to_config(self):
        lines = []
        for apartment in sorted(self.per_apartment):
            lines.append(f"[{apartment}]")
            table = self.per_apartment[apartment]
            for sensor_id in sorted(table):
                label = table[sensor_id]
                lines.append(f"{sensor_id} = {DROP if label is None else label}")
            lines.append("")
        return "\n".join(lines)


def harmonize(events, mapping, shared_registry):
    """Rewrite sensor ids to shared-label ids; drop-listed events vanish.

    ``mapping`` is sensor_id -> shared label (None = drop).  Unmapped
    retained sensors are an error.
    """
    out = []
    for event in events:
        if event.sensor_id not in mapping:
            raise ValidationError(f"sensor id {event.sensor_id} has no "
                                  "harmonization entry")
        label = mapping[event.sensor_id]
        if label is None:
            continue
        shared = shared_registry.by_name.get(label)
        if shared is None:
            raise ValidationError(f"shared label {label!r} not in shared registry")
        out.append(SensorEvent(event.timestamp, shared.sensor_id, event.state,
                               event.inserted))
    return out


@dataclass
class TransferResult:
    finetune_budget: int
    seeds: list
    pretrained_best: list  # best test accuracy per repetition
    scratch_best: list

    @property
    def mean_pretrained(self):
        return float(np.mean(self.pretrained_best))

    @property
    def mean_scratch(self):
        return float(np.mean(self.scratch_best))

    def to_csv_rows(self):
        rows = []
        for seed, pre, scratch in zip(self.seeds, self.pretrained_best,
                                      self.scratch_best):
            rows.append((self.finetune_budget, seed, pre, scratch))
        return rows


TEST_EVENTS = 3000


def _windows_per_sequence(seqs, length):
    runs = [seq.indices for seq in seqs]
    return build_windows(runs, length)


def _chronological_split(windows, targets, holdout=0.2):
    n = len(windows)
    cut = max(1, int(round(n * (1 - holdout))))
    if cut >= n:
        cut = n - 1
    return (windows[:cut], targets[:cut]), (windows[cut:], targets[cut:])


def _test_set(target_seq, n, length):
    """Windows for positions n .. n+3000 with true preceding context."""
    indices = target_seq.indices
    end = n + TEST_EVENTS
    windows = []
    for j in range(n, end):
        window = np.full(length, START, dtype=np.int64)
        lo = max(0, j - length)
        if j > lo:
            window[length - (j - lo):] = indices[lo:j]
        windows.append(window)
    return np.stack(windows), np.asarray(indices[n:end], dtype=np.int64)


def pretrain(source_seqs, config):
    """Train one model on the concatenated source apartments (per-run windows)."""
    vocab = source_seqs[0].vocab
    for seq in source_seqs[1:]:
        if seq.vocab != vocab:
            raise ValidationError("source vocabularies differ; harmonize first")
    windows, targets = _windows_per_sequence(source_seqs, config.memory_length)
    train_set, val_set = _chronological_split(windows, targets)
    model = RecurrentModel.init(vocab, vocab, config)
    model, history = train(model, train_set, val_set, config)
    return model, history


def _finetune_once(model, target_seq, n, probe, config):
    if n == 0:
        return accuracy(model, *probe)
    windows, targets = build_windows([target_seq.indices[:n]], config.memory_length)
    train_set, val_set = _chronological_split(windows, targets)
    model, history = train(model, train_set, val_set, config, probe=probe)
    return max(history.probe_accuracy)


def pretrain_finetune(source_seqs, target_seq, n, seed, config=None,
                      repetitions=3, base_model=None):
    """Paired pretrained-vs-scratch comparison at fine-tune budget ``n``.

    The pretrained model is copied before every fine-tune run (the
    pretrained parameters are never mutated).  ``base_model`` short-cuts
    the pretraining when sweeping several budgets over the same sources.
    Returns a TransferResult with the best-checkpoint test accuracy per
    repetition for both arms.
    """
    from .lstm import LstmConfig

    config = config or LstmConfig()
    if len(target_seq) < n + TEST_EVENTS:
        raise ValidationError(
            f"target needs at least {n + TEST_EVENTS} events, has {len(target_seq)}")
    vocab = target_seq.vocab
    for seq in source_seqs:
        if seq.vocab != vocab:
            raise ValidationError("vocabularies differ between apartments")

    probe = _test_set(target_seq, n, config.memory_length)
    if base_model is None:
        base_model, _ = pretrain(source_seqs, replace(config, seed=seed))

    result = TransferResult(n, [], [], [])
    for rep in range(repetitions):
        rep_seed = seed + 1000 * (rep + 1)
        rep_config = replace(config, seed=rep_seed)
        tuned = base_model.copy()
        tuned.config = rep_config
        result.pretrained_best.append(
            _finetune_once(tuned, target_seq, n, probe, rep_config))
        scratch = RecurrentModel.init(vocab, vocab, rep_config)
        result.scratch_best.append(
            _finetune_once(scratch, target_seq, n, probe, rep_config))
        result.seeds.append(rep_seed)
    return result


def default_harmonization_map(registries):
    """Map the built-in apartment presets onto one shared label set.

    Kettle and coffee machine merge into ``hotdrink``; lamp power sensors
    are dropped (no shared activity).
    """
    per_apartment = {}
    for name, registry in registries.items():
        table = {}
        for sensor in registry:
            if "lamp" in sensor.name:
                table[sensor.sensor_id] = None
            elif sensor.name in ("power_kettle", "power_coffee"):
                table[sensor.sensor_id] = "hotdrink"
            else:
                table[sensor.sensor_id] = sensor.name
        per_apartment[name] = table
    return HarmonizationMap(per_apartment)


def results_csv(results):
    lines = ["finetune_events,repetition_seed,pretrained_best,scratch_best"]
    for result in results:
        for n, seed, pre, scratch in result.to_csv_rows():
            lines.append(f"{n},{seed},{pre!r},{scratch!r}")
    return "\n".join(lines) + "\n"
