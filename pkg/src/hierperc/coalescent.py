"""Erdos-Renyi class reference laws: the weighted graph G(x, q), the exponential-clock
exploration forest, and excursions of Brownian motion with parabolic drift."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._fast import uf_roots
from .errors import ParameterError

DEFAULT_DT = 1e-4
KEEP_EXCURSIONS = 20


@dataclass(frozen=True)
class WeightedConfig:
    weights: np.ndarray
    q: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) < 1:
            raise ParameterError("need at least one weight")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be positive and finite")
        if not (self.q >= 0 and np.isfinite(self.q)):
            raise ParameterError("q must be finite and non-negative")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.weights)

    def sigma(self, k: int) -> float:
        return float(np.sum(self.weights**k))

    @property
    def sorted_weights(self) -> np.ndarray:
        return np.sort(self.weights)[::-1]


@dataclass
class WeightedPartition:
    """Components ranked by mass; ``labels[v]`` is the rank of the component of ``v``."""

    masses: np.ndarray
    sizes: np.ndarray
    surpluses: np.ndarray
    labels: np.ndarray

    def blocks(self) -> tuple:
        """Canonical set partition: tuple of sorted member tuples, sorted."""
        groups = {}
        for v, lab in enumerate(self.labels.tolist()):
            groups.setdefault(lab, []).append(v)
        return tuple(sorted(tuple(g) for g in groups.values()))


def _rank_components(weights, roots, edge_a, tiebreak):
    uniq, inverse = np.unique(roots, return_inverse=True)
    masses = np.bincount(inverse, weights=weights, minlength=len(uniq))
    sizes = np.bincount(inverse, minlength=len(uniq))
    edges = np.bincount(inverse[edge_a], minlength=len(uniq)) if len(edge_a) else np.zeros(len(uniq), int)
    first = np.full(len(uniq), np.iinfo(np.int64).max)
    np.minimum.at(first, inverse, tiebreak)
    order = np.lexsort((first, -masses))
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return WeightedPartition(masses[order], sizes[order], (edges - sizes + 1)[order], rank[inverse])


def sample_gxq(cfg: WeightedConfig, gen: np.random.Generator) -> WeightedPartition:
    """Independent edges with probability ``1 - exp(-q x_i x_j)``; ties broken by smallest vertex."""
    n = cfg.size
    i, j = np.triu_indices(n, k=1)
    p = -np.expm1(-cfg.q * cfg.weights[i] * cfg.weights[j])
    hit = gen.random(len(i)) < p
    a, b = i[hit].astype(np.int64), j[hit].astype(np.int64)
    roots = uf_roots(n, a, b)
    return _rank_components(cfg.weights, roots, a, np.arange(n))


@dataclass
class ExplorationForest:
    """Vertices in exploration order with their parents and tree boundaries.

    ``starts`` holds the position in ``order`` where each tree begins; ``N`` is the
    number of vertices explored when the maximal-mass tree is completed.
    """

    order: np.ndarray
    parent: np.ndarray  # parent vertex, -1 for roots
    starts: np.ndarray
    partition: WeightedPartition
    N: int


def exploration_forest(cfg: WeightedConfig, gen: np.random.Generator) -> ExplorationForest:
    """Breadth-first exploration driven by exponential clocks of rate ``q x_j``.

    The vertex being explored, ``v``, takes as children the undiscovered ``i`` whose
    clock ``xi_{v,i}`` rings before ``x_v``, ordered by ring time.  New trees start
    from an undiscovered vertex chosen proportionally to weight.
    """
    x = cfg.weights
    n = cfg.size
    discovered = np.zeros(n, dtype=bool)
    order = []
    parent = np.full(n, -1, dtype=np.int64)
    starts = []
    head = 0
    while len(order) < n:
        if head == len(order):
            pool = np.flatnonzero(~discovered)
            w = x[pool]
            root = int(pool[np.searchsorted(np.cumsum(w), gen.random() * w.sum(), side="right").clip(max=len(pool) - 1)])
            discovered[root] = True
            starts.append(len(order))
            order.append(root)
        v = order[head]
        head += 1
        cand = np.flatnonzero(~discovered)
        if len(cand) == 0 or cfg.q == 0:
            continue
        clocks = gen.exponential(1.0 / (cfg.q * x[cand]))
        ring = clocks <= x[v]
        kids = cand[ring][np.argsort(clocks[ring], kind="stable")]
        discovered[kids] = True
        parent[kids] = v
        order.extend(kids.tolist())
    order = np.asarray(order, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    tree_id = np.zeros(n, dtype=np.int64)
    bounds = np.append(starts, n)
    for t in range(len(starts)):
        tree_id[order[bounds[t]:bounds[t + 1]]] = t
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)
    kids = np.flatnonzero(parent >= 0)
    part = _rank_components(x, tree_id, kids, position)
    masses = np.add.reduceat(x[order], starts)
    top = int(np.lexsort((starts, -masses))[0])
    return ExplorationForest(order, parent, starts, part, int(bounds[top + 1]))


def size_biased_permutation(weights, gen: np.random.Generator) -> np.ndarray:
    """Order by increasing ``E_i / w_i`` with ``E_i`` i.i.d. Exp(1)."""
    w = np.asarray(weights, dtype=float)
    return np.argsort(gen.exponential(size=len(w)) / w, kind="stable")


def size_biased_partial_sums(weights, a_values, ell: int, gen: np.random.Generator) -> float:
    """``sup_{k <= ell} | sum_{i<=k} a_{v(i)} / (ell c) - k / ell |`` for a size-biased order ``v``,
    where ``c = sum(w a) / sum(w)``."""
    w = np.asarray(weights, dtype=float)
    a = np.asarray(a_values, dtype=float)
    if not 1 <= ell <= len(w):
        raise ParameterError("ell must lie in [1, number of weights]")
    c = float(np.sum(w * a) / np.sum(w))
    if not c > 0:
        raise ParameterError("c_n must be positive")
    v = size_biased_permutation(w, gen)[:ell]
    k = np.arange(1, ell + 1)
    return float(np.max(np.abs(np.cumsum(a[v]) / (ell * c) - k / ell)))


@dataclass
class LimitSample:
    lam: float
    gamma: np.ndarray
    areas: np.ndarray
    surplus_counts: np.ndarray
    grid_dt: float
    horizon: float
    open_at_horizon: bool = False
    excursions_total: int = field(default=0)

    def to_json(self) -> str:
        return json.dumps({"lambda": self.lam, "gamma": self.gamma.tolist(),
                           "surplus": self.surplus_counts.tolist()})


def default_horizon(lam: float) -> float:
    return max(10.0, 4.0 * (1.0 + abs(lam)))


def _path(lam, dt, t0, steps, w0, gen):
    t = t0 + dt * np.arange(steps + 1)
    drift = lam * dt - 0.5 * (t[1:] ** 2 - t[:-1] ** 2)
    incr = gen.normal(0.0, np.sqrt(dt), size=steps) + drift
    w = np.empty(steps + 1)
    w[0] = w0
    np.cumsum(incr, out=w[1:])
    w[1:] += w0
    return w


def sample_limit(lam: float, gen: np.random.Generator, grid_dt: float = DEFAULT_DT,
                 T: float | None = None, keep: int = KEEP_EXCURSIONS) -> LimitSample:
    """Excursions above zero of ``W - running_min(W)`` for ``W(t) = B(t) + lam t - t^2/2``.

    Lengths and areas are read off the grid; each kept excursion gets a Poisson surplus
    with mean equal to its area.  An excursion still open at the horizon triggers one
    extension of the path by another horizon; if it is still open it is kept and flagged.
    """
    if not grid_dt > 0:
        raise ParameterError("grid_dt must be positive")
    T = default_horizon(lam) if T is None else float(T)
    steps = int(round(T / grid_dt))
    w = _path(lam, grid_dt, 0.0, steps, 0.0, gen)
    horizon = steps * grid_dt
    refl = w - np.minimum.accumulate(w)
    if refl[-1] > 0:
        more = _path(lam, grid_dt, horizon, steps, w[-1], gen)
        w = np.concatenate([w, more[1:]])
        horizon *= 2
        refl = w - np.minimum.accumulate(w)
    open_end = bool(refl[-1] > 0)
    zero = np.flatnonzero(refl == 0)
    if open_end:
        zero = np.append(zero, len(refl) - 1)
    gaps = np.diff(zero)
    ex = np.flatnonzero(gaps > 1)
    left, right = zero[ex], zero[ex + 1]
    lengths = (right - left) * grid_dt
    csum = np.concatenate([[0.0], np.cumsum(refl)])
    # trapezoid rule; endpoints are zeros of the reflected path
    areas = (csum[right + 1] - csum[left]) * grid_dt
    top = np.argsort(-lengths, kind="stable")[:keep]
    gamma = lengths[top]
    area = areas[top]
    surplus = gen.poisson(area)
    return LimitSample(lam, gamma, area, surplus, grid_dt, horizon, open_end, len(lengths))
