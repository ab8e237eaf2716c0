"""Letter encodings of event streams and the token vocabulary.

SPEED-text maps every event to a letter whose case carries the state
(uppercase = on, lowercase = off).  ALZ-text keeps activations only, so it
is a pure location/usage sequence.  Composite tokens pair a sensor letter
with a time token and are written "A|<1min".
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import ValidationError

START = -1  # index sentinel: reserved start token, one-hot encodes to zeros
START_TIME = "start"  # reserved time token for undefined elapsed times
COMPOSITE_SEP = "|"


class SymbolizationError(ValidationError):
    pass


class Vocabulary:
    """Ordered token universe with a dense token <-> index bijection.

    The reserved start/padding token is *not* part of the indexed tokens;
    it is represented by the index ``START`` (-1) and encodes to the zero
    one-hot vector, which keeps |V| = 2 * sensors for plain SPEED-text and
    |V| = base * time tokens for composite vocabularies.
    """

    def __init__(self, tokens, time_tokens=None, base_tokens=None):
        self.tokens = tuple(tokens)
        if len(set(self.tokens)) != len(self.tokens):
            raise SymbolizationError("vocabulary tokens are not unique")
        self.index = {token: i for i, token in enumerate(self.tokens)}
        self.time_tokens = tuple(time_tokens) if time_tokens is not None else None
        self.base_tokens = tuple(base_tokens) if base_tokens is not None else None

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return (isinstance(other, Vocabulary)
                and self.tokens == other.tokens
                and self.time_tokens == other.time_tokens)

    @property
    def is_composite(self):
        return self.time_tokens is not None

    @classmethod
    def plain(cls, registry):
        """Upper/lower pair per sensor, ascending sensor-id order."""
        tokens = []
        for sensor in registry:
            tokens.append(sensor.letter.upper())
            tokens.append(sensor.letter)
        return cls(tokens)

    @classmethod
    def activations(cls, registry):
        """Uppercase letter per sensor (ALZ-text universe)."""
        return cls([s.letter.upper() for s in registry])

    @classmethod
    def composite(cls, base, time_names):
        """Cross product, base-major: index = base_idx * T + time_idx."""
        if isinstance(base, Vocabulary):
            base = base.tokens
        time_names = tuple(time_names)
        tokens = [f"{b}{COMPOSITE_SEP}{t}" for b in base for t in time_names]
        return cls(tokens, time_tokens=time_names, base_tokens=base)

    def composite_index(self, base_idx, time_idx):
        return base_idx * len(self.time_tokens) + time_idx

    def split(self, index):
        """Decompose a composite token index into (base token, time token)."""
        if not self.is_composite:
            raise SymbolizationError("vocabulary is not composite")
        base_idx, time_idx = divmod(index, len(self.time_tokens))
        return self.base_tokens[base_idx], self.time_tokens[time_idx]

    def to_dict(self):
        return {"tokens": list(self.tokens),
                "time_tokens": list(self.time_tokens) if self.is_composite else None,
                "base_tokens": list(self.base_tokens) if self.base_tokens else None}

    @classmethod
    def from_dict(cls, data):
        return cls(data["tokens"], data.get("time_tokens"), data.get("base_tokens"))


def _token_index(vocab, token):
    idx = vocab.index.get(token)
    if idx is not None:
        return idx
    if vocab.is_composite and token.endswith(COMPOSITE_SEP + START_TIME):
        return START
    raise SymbolizationError(f"token {token!r} not in vocabulary")


@dataclass
class SymbolSequence:
    """Token sequence plus per-token timing metadata.

    ``indices`` mirrors ``tokens``; composite tokens whose time component is
    the reserved start token map to the START sentinel.
    """

    vocab: Vocabulary
    tokens: list
    timestamps: list  # epoch seconds, one per token
    hours: list = field(default_factory=list)  # fractional hour of day
    indices: list = field(init=False)

    def __post_init__(self):
        if len(self.tokens) != len(self.timestamps):
            raise SymbolizationError("tokens and timestamps length mismatch")
        if self.hours and len(self.hours) != len(self.tokens):
            raise SymbolizationError("hours and tokens length mismatch")
        self.indices = [_token_index(self.vocab, t) for t in self.tokens]

    def __len__(self):
        return len(self.tokens)

    @property
    def elapsed_prev(self):
        """Seconds since the previous token (None for the first)."""
        out = [None] * len(self)
        for i in range(1, len(self)):
            out[i] = self.timestamps[i] - self.timestamps[i - 1]
        return out

    @property
    def elapsed_next(self):
        """Seconds to the next token (None for the last)."""
        out = [None] * len(self)
        for i in range(len(self) - 1):
            out[i] = self.timestamps[i + 1] - self.timestamps[i]
        return out

    def prefix(self, n):
        return SymbolSequence(self.vocab, self.tokens[:n], self.timestamps[:n],
                              self.hours[:n] if self.hours else [])

    def text(self):
        """One-string export; space-joined when tokens are multi-character."""
        if all(len(t) == 1 for t in self.tokens):
            return "".join(self.tokens)
        return " ".join(self.tokens)

    def metadata_csv(self):
        lines = ["position,token,timestamp,elapsed_prev,elapsed_next"]
        prev_gaps = self.elapsed_prev
        next_gaps = self.elapsed_next
        for i, token in enumerate(self.tokens):
            prev_s = "" if prev_gaps[i] is None else str(prev_gaps[i])
            next_s = "" if next_gaps[i] is None else str(next_gaps[i])
            lines.append(f"{i},{token},{self.timestamps[i]},{prev_s},{next_s}")
        return "\n".join(lines) + "\n"


def speed_encode(events, registry):
    """Every event becomes a letter; case encodes the on/off state."""
    tokens = []
    timestamps = []
    hours = []
    for event in events:
        tokens.append(registry.letter_for(event.sensor_id, event.state))
        timestamps.append(event.epoch)
        hours.append(event.hour)
    return SymbolSequence(Vocabulary.plain(registry), tokens, timestamps, hours)


def alz_encode(events, registry, include_off=False):
    """Activation-only encoding (one token per 'on' event).

    ``include_off=True`` switches to the SPEED-like variant that keeps off
    events too, for experiments with the alternative ALZ-text construction.
    """
    if include_off:
        seq = speed_encode(events, registry)
        return seq
    tokens = []
    timestamps = []
    hours = []
    for event in events:
        if event.state != 1:
            continue
        tokens.append(registry.letter_for(event.sensor_id, event.state))
        timestamps.append(event.epoch)
        hours.append(event.hour)
    return SymbolSequence(Vocabulary.activations(registry), tokens, timestamps, hours)


def decode_speed(seq, registry):
    """Inverse of speed_encode: token stream back to (sensor_id, state)."""
    out = []
    for token in seq.tokens:
        sensor = registry.by_letter.get(token.lower())
        if sensor is None:
            raise SymbolizationError(f"letter {token!r} not in registry")
        out.append((sensor.sensor_id, 1 if token.isupper() else 0))
    return out
