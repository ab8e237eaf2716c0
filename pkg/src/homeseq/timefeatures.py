"""Elapsed-time bucketing and per-sensor time clustering.

Two fixed interval schemes (4 and 8 classes) turn inter-event gaps into
categorical time tokens.  Alternatively, each sensor token gets its own
K-means clustering over (hour of day, elapsed seconds to the next event),
with K chosen by the elbow of the SSD curve.
"""

from __future__ import annotations

import configparser
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .symbolization import COMPOSITE_SEP, START_TIME, SymbolSequence, Vocabulary

KMAX = 8  # largest cluster count considered per sensor token


@dataclass(frozen=True)
class TimeBucketScheme:
    """Left-closed, right-open partition of (0, inf) into named intervals."""

    names: tuple
    bounds: tuple  # upper bounds of all but the last bucket, seconds

    def __post_init__(self):
        if len(self.bounds) != len(self.names) - 1:
            raise ValueError("need exactly one bound fewer than names")
        if any(b <= a for a, b in zip(self.bounds, self.bounds[1:])):
            raise ValueError("bounds must be strictly increasing")

    @property
    def arity(self):
        return len(self.names)

    def bucket(self, elapsed):
        if elapsed < 0:
            raise ValueError(f"elapsed time must be >= 0, got {elapsed}")
        return bisect_right(self.bounds, elapsed)


BUCKETS_4 = TimeBucketScheme(
    names=("<1min", "1-15min", "15min-1h", ">1h"),
    bounds=(60, 900, 3600))

# the 8-class scheme lists seven intervals; ">5h" completes the partition
BUCKETS_8 = TimeBucketScheme(
    names=("<1min", "1-5min", "5-15min", "15-30min", "30min-1h", "1-2h", "2-5h", ">5h"),
    bounds=(60, 300, 900, 1800, 3600, 7200, 18000))

SCHEMES = {"bucket4": BUCKETS_4, "bucket8": BUCKETS_8}


def bucketize(elapsed, scheme):
    """Index of the unique bucket containing ``elapsed`` (boundaries [lo, hi))."""
    return scheme.bucket(elapsed)


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, d)
    labels: np.ndarray  # (n,)
    ssd: float
    n_iter: int


def _nearest(points, centroids):
    """Labels and squared distances to the nearest centroid (ties -> lowest)."""
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _lloyd(points, centroids, max_iter):
    """Lloyd iterations to an assignment fixpoint (or max_iter)."""
    k = len(centroids)
    centroids = centroids.copy()
    labels = None
    for it in range(1, max_iter + 1):
        new_labels, dist2 = _nearest(points, centroids)
        # re-seed empty clusters at the point farthest from its centroid
        for cluster in range(k):
            if not (new_labels == cluster).any():
                farthest = int(dist2.argmax())
                centroids[cluster] = points[farthest]
                new_labels, dist2 = _nearest(points, centroids)
        if labels is not None and (new_labels == labels).all():
            return KMeansResult(centroids, labels, float(dist2.sum()), it)
        labels = new_labels
        for cluster in range(k):
            members = points[labels == cluster]
            if len(members):  # duplicates can leave a cluster truly empty
                centroids[cluster] = members.mean(axis=0)
    _, dist2 = _nearest(points, centroids)
    return KMeansResult(centroids, labels, float(dist2.sum()), max_iter)


def kmeans_fit(points, k, seed, max_iter=100):
    """K-means with deterministic farthest-point seeding from a seeded pick."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        points = points.reshape(len(points), -1)
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n points, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centroids = [points[int(rng.integers(n))]]
    while len(centroids) < k:
        _, dist2 = _nearest(points, np.asarray(centroids))
        centroids.append(points[int(dist2.argmax())])
    return _lloyd(points, np.asarray(centroids, dtype=float), max_iter)


def ssd_curve(points, k_max=KMAX, seed=0, max_iter=100):
    """SSD for K = 1..k_max, warm-starting each K from the previous fit.

    Each new centroid starts at the point farthest from the existing ones,
    which guarantees a non-increasing curve.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n < k_max:
        raise ValueError(f"need at least {k_max} points, got {n}")
    result = kmeans_fit(points, 1, seed, max_iter)
    curve = [result.ssd]
    for _ in range(2, k_max + 1):
        _, dist2 = _nearest(points, result.centroids)
        centroids = np.vstack([result.centroids, points[int(dist2.argmax())]])
        result = _lloyd(points, centroids, max_iter)
        curve.append(result.ssd)
    return curve


def elbow_select(curve):
    """K at the maximum second difference of the SSD curve; ties and
    elbow-free curves fall back to the smallest interior K (=2)."""
    curve = [float(v) for v in curve]
    if len(curve) < 3:
        raise ValueError("SSD curve needs at least 3 values")
    for a, b in zip(curve, curve[1:]):
        if b > a + 1e-9 * max(1.0, abs(a)):
            raise ValueError("SSD curve must be non-increasing")
    best_k, best_d2 = 2, -math.inf
    for i in range(1, len(curve) - 1):  # interior K = i + 1
        d2 = curve[i - 1] - 2 * curve[i] + curve[i + 1]
        if d2 > best_d2:
            best_k, best_d2 = i + 1, d2
    if best_d2 <= 0:
        return 2
    return best_k


@dataclass
class TokenClusters:
    """Fitted clustering for one sensor token, in normalized feature space."""

    k: int
    centroids: np.ndarray  # (k, 2): (hour/24, log1p(dt)/dt_log_max)
    dt_log_max: float
    curve: list = None

    def normalize(self, hour, elapsed):
        dt = math.log1p(max(0.0, elapsed)) / self.dt_log_max if self.dt_log_max > 0 else 0.0
        return np.array([hour / 24.0, dt])

    def assign(self, hour, elapsed):
        point = self.normalize(hour, elapsed)
        d2 = ((self.centroids - point) ** 2).sum(axis=1)
        return int(d2.argmin())


class TimeClusterModel:
    """Per-token K-means models over (hour of day, elapsed to next event)."""

    def __init__(self, per_token):
        self.per_token = dict(per_token)

    @property
    def k_max(self):
        return max((tc.k for tc in self.per_token.values()), default=1)

    def time_token_names(self):
        return tuple(f"k{i}" for i in range(self.k_max))

    def assign(self, token, hour, elapsed):
        clusters = self.per_token.get(token)
        if clusters is None:
            return 0  # token never seen with a timed occurrence at fit time
        return clusters.assign(hour, elapsed)

    def to_text(self):
        lines = []
        for token in sorted(self.per_token):
            tc = self.per_token[token]
            lines.append(f"[{token}]")
            lines.append(f"k = {tc.k}")
            lines.append(f"dt_log_max = {float(tc.dt_log_max)!r}")
            for i, c in enumerate(tc.centroids):
                lines.append(f"centroid{i} = {float(c[0])!r}, {float(c[1])!r}")
            if tc.curve is not None:
                lines.append("ssd_curve = " + ", ".join(repr(float(v)) for v in tc.curve))
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser.read_string(text)
        per_token = {}
        for token in parser.sections():
            section = parser[token]
            k = int(section["k"])
            centroids = np.array([
                [float(v) for v in section[f"centroid{i}"].split(",")]
                for i in range(k)])
            curve = None
            if "ssd_curve" in section:
                curve = [float(v) for v in section["ssd_curve"].split(",")]
            per_token[token] = TokenClusters(k, centroids,
                                             float(section["dt_log_max"]), curve)
        return cls(per_token)

    def curves_csv(self):
        lines = ["token," + ",".join(f"ssd_k{i}" for i in range(1, KMAX + 1))]
        for token in sorted(self.per_token):
            tc = self.per_token[token]
            if tc.curve is None:
                continue
            lines.append(token + "," + ",".join(repr(v) for v in tc.curve))
        return "\n".join(lines) + "\n"


def fit_time_clusters(seq, seed=0, k_max=KMAX):
    """Fit per-token clusterings on (hour, elapsed-to-next) occurrences.

    Tokens with fewer than ``k_max`` timed occurrences get K = 1 (too few
    points for an elbow curve).
    """
    gaps = seq.elapsed_next
    features = {}
    for i, token in enumerate(seq.tokens):
        if gaps[i] is None:
            continue
        features.setdefault(token, []).append((seq.hours[i], gaps[i]))
    per_token = {}
    for j, token in enumerate(sorted(features)):
        raw = features[token]
        dt_log_max = max(math.log1p(dt) for _, dt in raw)
        if dt_log_max <= 0:
            dt_log_max = 1.0
        points = np.array([[h / 24.0, math.log1p(dt) / dt_log_max] for h, dt in raw])
        if len(points) < k_max:
            centroids = points.mean(axis=0, keepdims=True)
            per_token[token] = TokenClusters(1, centroids, dt_log_max)
            continue
        curve = ssd_curve(points, k_max, seed=seed + j)
        k = elbow_select(curve)
        fit = kmeans_fit(points, k, seed=seed + j)
        per_token[token] = TokenClusters(k, fit.centroids, dt_log_max, curve)
    return TimeClusterModel(per_token)


def _time_name(mode, scheme, model, token, hour, elapsed):
    if elapsed is None:
        return START_TIME
    if mode == "kcluster":
        return f"k{model.assign(token, hour, elapsed)}"
    return scheme.names[scheme.bucket(elapsed)]


def annotate(seq, mode, model=None, role="input"):
    """Attach a time token to every sensor token.

    ``role="input"`` uses the causal elapsed-since-previous gap (first token
    gets the reserved start time token); ``role="target"`` uses the
    elapsed-to-next gap, which for position i encodes when the following
    event occurs (undefined for the final token).
    """
    if mode not in ("bucket4", "bucket8", "kcluster"):
        raise ValueError(f"unknown time mode {mode!r}")
    if role not in ("input", "target"):
        raise ValueError(f"role must be 'input' or 'target', got {role!r}")
    scheme = SCHEMES.get(mode)
    if mode == "kcluster":
        if model is None:
            raise ValueError("kcluster mode needs a fitted TimeClusterModel")
        time_names = model.time_token_names()
    else:
        time_names = scheme.names
    vocab = Vocabulary.composite(seq.vocab, time_names)
    gaps = seq.elapsed_prev if role == "input" else seq.elapsed_next
    tokens = []
    for i, token in enumerate(seq.tokens):
        name = _time_name(mode, scheme, model, token, seq.hours[i], gaps[i])
        tokens.append(f"{token}{COMPOSITE_SEP}{name}")
    return SymbolSequence(vocab, tokens, list(seq.timestamps), list(seq.hours))
