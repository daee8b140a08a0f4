"""Distances between two empirical laws with bootstrap intervals."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InsufficientSamplesError, ParameterError

MIN_SAMPLES = 100
BOOTSTRAP = 1000


def ks_distance(a, b) -> float:
    """Sup distance between the two empirical distribution functions."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def tv_distance(a, b) -> float:
    """Total variation between the empirical laws of two integer samples."""
    a = np.asarray(a)
    b = np.asarray(b)
    if not (np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer)):
        if not (np.all(a == np.round(a)) and np.all(b == np.round(b))):
            raise ParameterError("total variation is only defined here for integer samples")
        a, b = a.astype(np.int64), b.astype(np.int64)
    lo = min(a.min(), b.min())
    size = max(a.max(), b.max()) - lo + 1
    pa = np.bincount(a - lo, minlength=size) / len(a)
    pb = np.bincount(b - lo, minlength=size) / len(b)
    return float(0.5 * np.abs(pa - pb).sum())


STATISTICS = {"ks": ks_distance, "tv": tv_distance}


@dataclass(frozen=True)
class DistanceReport:
    statistic: str
    value: float
    ci_low: float
    ci_high: float
    n_a: int
    n_b: int

    def as_dict(self) -> dict:
        return asdict(self)


def compare_laws(sample_a, sample_b, statistic: str = "ks", gen: np.random.Generator | None = None,
                 bootstrap: int = BOOTSTRAP, level: float = 0.95) -> DistanceReport:
    """Distance between two samples with a percentile bootstrap interval.

    Both samples are resampled independently with replacement ``bootstrap`` times.
    """
    if statistic not in STATISTICS:
        raise ParameterError(f"statistic must be one of {sorted(STATISTICS)}")
    a = np.asarray(sample_a)
    b = np.asarray(sample_b)
    if min(len(a), len(b)) < MIN_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_SAMPLES} samples on each side, got "
                                       f"{len(a)} and {len(b)}")
    fn = STATISTICS[statistic]
    value = fn(a, b)
    gen = gen if gen is not None else np.random.default_rng(0)
    boots = np.empty(bootstrap)
    for k in range(bootstrap):
        boots[k] = fn(a[gen.integers(0, len(a), len(a))], b[gen.integers(0, len(b), len(b))])
    tail = 50 * (1 - level)
    lo, hi = np.percentile(boots, [tail, 100 - tail])
    return DistanceReport(statistic, value, float(lo), float(hi), len(a), len(b))
