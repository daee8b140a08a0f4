"""Percolation configurations on the hierarchical ball and on the torus.

Edges are drawn shell by shell: within a shell every pair has the same probability,
so the open pairs are located by geometric jumps over the pair index range and then
decoded to vertex pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Optional

import numpy as np

from ._fast import csr_from_edges, uf_roots
from .errors import ParameterError
from .geometry import (
    INDEX_LIMIT,
    LatticeSpec,
    TorusSpec,
    decode_pairs,
    decode_torus_pairs,
    encode_pairs,
    hier_levels,
    pair_count,
    shell_offset_vertices,
    shell_size,
    torus_class_pairs,
    torus_norms,
)
from .kernel import ModelParams
from .rng import RngPolicy

NAIVE_MAX_VERTICES = 2**16
STAGES = ("minus", "critical", "sprinkle", "scaled")


class ComponentSummary(NamedTuple):
    size: int
    edges: int
    representative: int


@dataclass(frozen=True)
class ComponentTable:
    """Components sorted by size (descending), ties by smallest member id."""

    sizes: np.ndarray
    edge_counts: np.ndarray
    representatives: np.ndarray
    labels: np.ndarray  # vertex -> rank in the sorted order

    def __len__(self) -> int:
        return len(self.sizes)

    def __iter__(self) -> Iterator[ComponentSummary]:
        for s, e, r in zip(self.sizes, self.edge_counts, self.representatives):
            yield ComponentSummary(int(s), int(e), int(r))

    def __getitem__(self, rank: int) -> ComponentSummary:
        return ComponentSummary(int(self.sizes[rank]), int(self.edge_counts[rank]),
                                int(self.representatives[rank]))

    def members(self, rank: int) -> np.ndarray:
        return np.flatnonzero(self.labels == rank)

    @property
    def surpluses(self) -> np.ndarray:
        return self.edge_counts - self.sizes + 1


@dataclass(frozen=True)
class PercolationSample:
    """One sampled graph.  ``edges[i]`` holds sorted ``(a, b)`` arrays with ``a < b``
    for the pairs of shell (or torus distance class) ``i``."""

    num_vertices: int
    edges: dict
    stage: str
    seed_trace: dict
    params: Optional[ModelParams] = field(default=None, repr=False, compare=False)
    torus: Optional[TorusSpec] = field(default=None, repr=False, compare=False)

    @property
    def lattice(self) -> Optional[LatticeSpec]:
        return None if self.params is None else self.params.lattice

    def edge_count(self, shell: Optional[int] = None) -> int:
        if shell is not None:
            return len(self.edges.get(shell, (np.empty(0),))[0])
        return sum(len(a) for a, _ in self.edges.values())

    def shell_counts(self) -> dict:
        return {i: len(a) for i, (a, _) in sorted(self.edges.items())}

    @cached_property
    def all_edges(self) -> tuple:
        if not self.edges:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        a = np.concatenate([e[0] for _, e in sorted(self.edges.items())])
        b = np.concatenate([e[1] for _, e in sorted(self.edges.items())])
        return a, b

    @cached_property
    def adjacency(self) -> tuple:
        """CSR ``(indptr, indices)`` over all vertices."""
        return csr_from_edges(self.num_vertices, *self.all_edges)

    @cached_property
    def roots(self) -> np.ndarray:
        a, b = self.all_edges
        return uf_roots(self.num_vertices, a, b)

    @cached_property
    def component_table(self) -> ComponentTable:
        return _component_table(self.roots, self.all_edges[0])

    def component_of(self, v: int) -> int:
        """Rank of the component containing vertex ``v``."""
        return int(self.component_table.labels[v])


def _component_table(roots: np.ndarray, edge_a: np.ndarray) -> ComponentTable:
    uniq, first, inverse, sizes = np.unique(roots, return_index=True, return_inverse=True,
                                            return_counts=True)
    edge_counts = np.bincount(inverse[edge_a], minlength=len(uniq)) if len(edge_a) else np.zeros(
        len(uniq), dtype=np.int64)
    order = np.lexsort((first, -sizes))
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return ComponentTable(
        sizes=sizes[order].astype(np.int64),
        edge_counts=edge_counts[order].astype(np.int64),
        representatives=first[order].astype(np.int64),
        labels=rank[inverse],
    )


def components(sample: PercolationSample) -> ComponentTable:
    return sample.component_table


# --- index sampling ------------------------------------------------------------------

_TINY_P = 1e-12


def skip_sample(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices in ``[0, N)``, each included independently with probability ``p``.

    Jumps between successive included indices are Geometric(p) on ``{1, 2, ...}``.
    """
    if N <= 0 or p <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(N, dtype=np.int64)
    if p < _TINY_P:
        return _sparse_sample(N, p, rng)
    mean = N * p
    chunk = int(mean + 6 * np.sqrt(mean) + 16)
    parts = []
    last = 0  # 1-based position of the last included index
    while True:
        pos = last + np.cumsum(rng.geometric(p, size=chunk))
        inside = pos[pos <= N]
        parts.append(inside - 1)
        if len(inside) < chunk:
            break
        last = int(pos[-1])
        chunk = max(16, chunk // 4)
    return np.concatenate(parts).astype(np.int64)


def _sparse_sample(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    # Geometric jumps may overflow int64 for tiny p; draw the count and a uniform subset.
    count = int(rng.binomial(N, p))
    return np.sort(_distinct_uniform(N, count, rng))


def _distinct_uniform(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``count``-subset of ``[0, N)`` by rejection on collisions."""
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if count * count > N:
        return rng.choice(N, size=count, replace=False).astype(np.int64)
    while True:
        draw = rng.integers(0, N, size=count, dtype=np.int64)
        if len(np.unique(draw)) == count:
            return draw


# --- hierarchical samplers -----------------------------------------------------------


def stage_probs(params: ModelParams, stage: str, eps: Optional[float] = None) -> np.ndarray:
    if stage == "minus":
        if params.prob_minus is None:
            raise ParameterError("stage 'minus' needs theta")
        return params.prob_minus
    if stage == "critical":
        return params.prob_critical
    if stage == "scaled":
        if eps is None:
            raise ParameterError("stage 'scaled' needs eps")
        return params.scaled_probs(eps)
    raise ParameterError(f"unknown stage {stage!r}")


def _sorted_pairs(a: np.ndarray, b: np.ndarray) -> tuple:
    order = np.lexsort((b, a))
    return a[order], b[order]


def sample_stratified(params: ModelParams, stage: str, rng: RngPolicy, replicate: int,
                      base: Optional[PercolationSample] = None, eps: Optional[float] = None,
                      probs: Optional[np.ndarray] = None) -> PercolationSample:
    """Shell-stratified sample in time linear in vertices plus edges.

    ``stage="sprinkle"`` adds to ``base`` (a ``"minus"`` sample with the same params)
    every closed pair independently with probability ``t_n``; the union has the law of
    the critical graph.  ``probs`` overrides the per-shell table for ``minus``,
    ``critical`` and ``scaled`` stages.
    """
    lat = params.lattice
    if stage not in STAGES:
        raise ParameterError(f"unknown stage {stage!r}")
    if stage == "sprinkle":
        if base is None or base.stage != "minus":
            raise ParameterError("stage 'sprinkle' needs a base sample drawn at stage 'minus'")
        if base.params is None or base.params.lattice != lat or base.params.kernel != params.kernel:
            raise ParameterError("sprinkle base was drawn with different params")
        if params.sprinkle_t is None:
            raise ParameterError("sprinkle probability undefined (theta unset or negative exponent)")
        p_table = np.full(lat.n, params.sprinkle_t)
    else:
        if base is not None:
            raise ParameterError(f"stage {stage!r} takes no base sample")
        p_table = np.asarray(probs, dtype=float) if probs is not None else stage_probs(params, stage, eps)
        if len(p_table) != lat.n:
            raise ParameterError(f"probability table must have {lat.n} entries")
    if np.any(p_table >= 1) or np.any(p_table < 0):
        raise ParameterError("shell probabilities must lie in [0, 1)")

    edges = {}
    streams = {}
    for i in range(1, lat.n + 1):
        N = pair_count(i, lat)
        if N >= INDEX_LIMIT:
            raise ParameterError(f"pair count at shell {i} exceeds int64 sampling range")
        gen = rng.stream(replicate, stage, i)
        streams[i] = rng.stream_id(replicate, stage, i)
        idx = skip_sample(N, float(p_table[i - 1]), gen)
        if stage == "sprinkle":
            ba, bb = base.edges.get(i, (np.empty(0, np.int64), np.empty(0, np.int64)))
            idx = np.union1d(encode_pairs(i, ba, bb, lat), idx)
        a, b = decode_pairs(i, idx, lat)
        edges[i] = _sorted_pairs(a, b)
    trace = {"master_seed": rng.master_seed, "replicate": replicate, "streams": streams}
    if stage == "sprinkle":
        trace["base"] = base.seed_trace
    return PercolationSample(lat.num_vertices, edges, stage, trace, params=params)


def sample_naive(params: ModelParams, stage: str, rng: RngPolicy, replicate: int,
                 eps: Optional[float] = None, probs: Optional[np.ndarray] = None) -> PercolationSample:
    """Reference sampler: one Bernoulli trial per unordered pair, pairs in lexicographic order."""
    lat = params.lattice
    V = lat.num_vertices
    if V > NAIVE_MAX_VERTICES:
        raise ParameterError(f"naive sampler limited to {NAIVE_MAX_VERTICES} vertices")
    p_table = np.asarray(probs, dtype=float) if probs is not None else stage_probs(params, stage, eps)
    if np.any(p_table > 1) or np.any(p_table < 0):
        raise ParameterError("shell probabilities must lie in [0, 1]")
    gen = rng.stream(replicate, "naive", 0)
    p_lookup = np.concatenate([[0.0], p_table])
    a_parts, b_parts = [], []
    for x in range(V - 1):
        ys = np.arange(x + 1, V, dtype=np.int64)
        lev = hier_levels(np.full_like(ys, x), ys, lat)
        hit = gen.random(len(ys)) < p_lookup[lev]
        a_parts.append(np.full(int(hit.sum()), x, dtype=np.int64))
        b_parts.append(ys[hit])
    a = np.concatenate(a_parts) if a_parts else np.empty(0, np.int64)
    b = np.concatenate(b_parts) if b_parts else np.empty(0, np.int64)
    lev = hier_levels(a, b, lat)
    edges = {i: (a[lev == i], b[lev == i]) for i in range(1, lat.n + 1)}
    trace = {"master_seed": rng.master_seed, "replicate": replicate,
             "streams": {0: rng.stream_id(replicate, "naive", 0)}}
    return PercolationSample(V, edges, stage, trace, params=params)


def sample_torus(spec: TorusSpec, class_probs, rng: RngPolicy, replicate: int) -> PercolationSample:
    """Stratified sample on the torus, one stratum per L-infinity distance class."""
    class_probs = np.asarray(class_probs, dtype=float)
    if len(class_probs) != spec.max_class:
        raise ParameterError(f"need {spec.max_class} class probabilities")
    if np.any(class_probs >= 1) or np.any(class_probs < 0):
        raise ParameterError("class probabilities must lie in [0, 1)")
    edges = {}
    streams = {}
    for k in range(1, spec.max_class + 1):
        table = torus_class_pairs(k, spec)
        gen = rng.stream(replicate, "torus", k)
        streams[k] = rng.stream_id(replicate, "torus", k)
        idx = skip_sample(table.num_pairs, float(class_probs[k - 1]), gen)
        a, b = decode_torus_pairs(table, idx, spec)
        edges[k] = _sorted_pairs(a, b)
    trace = {"master_seed": rng.master_seed, "replicate": replicate, "streams": streams}
    return PercolationSample(spec.num_vertices, edges, "torus", trace, torus=spec)


def torus_pair_classes(a, b, spec: TorusSpec) -> np.ndarray:
    return torus_norms(spec.coords(np.asarray(b)) - spec.coords(np.asarray(a)), spec)


# --- local exploration ---------------------------------------------------------------


@dataclass
class Exploration:
    """Breadth-first exploration of one cluster.

    ``order`` lists cluster vertices in discovery order, ``depth`` their BFS depth,
    ``edges`` the open pairs inside the cluster, ``ghosts[k]`` the number of draws of
    the ``k``-th explored vertex that landed on already-discovered vertices.
    """

    order: list
    depth: list
    edges: list
    ghosts: list
    truncated: bool = False

    @property
    def size(self) -> int:
        return len(self.order)


def explore_cluster(lattice: LatticeSpec, probs, root: int, gen: np.random.Generator,
                    size_cap: Optional[int] = None) -> Exploration:
    """Grow the cluster of ``root`` in the graph with per-shell probabilities ``probs``.

    Each explored vertex draws its full neighbourhood afresh: a Binomial count per shell
    and a uniform subset of that shell.  Draws that hit an undiscovered vertex add a
    child; draws that hit a discovered but unexplored vertex add an edge; draws that
    hit an explored vertex concern a pair already decided and are only counted as
    ghosts.  The resulting cluster has exactly the percolation law.
    """
    probs = np.asarray(probs, dtype=float)
    sizes = np.array([shell_size(i, lattice) for i in range(1, lattice.n + 1)], dtype=np.int64)
    order = [root]
    depth = [0]
    where = {root: 0}
    edges = []
    ghosts = []
    head = 0
    truncated = False
    while head < len(order):
        y = order[head]
        counts = gen.binomial(sizes, probs)
        nbrs = _draw_neighbours(lattice, y, counts, sizes, gen)
        g = 0
        for z in nbrs.tolist():
            pos = where.get(z)
            if pos is None:
                where[z] = len(order)
                order.append(z)
                depth.append(depth[head] + 1)
                edges.append((y, z))
            elif pos > head:
                edges.append((y, z))
                g += 1
            else:
                g += 1
        ghosts.append(g)
        head += 1
        if size_cap is not None and len(order) > size_cap:
            truncated = True
            break
    return Exploration(order, depth, edges, ghosts, truncated)


def _draw_neighbours(lattice, y, counts, sizes, gen):
    shells = np.flatnonzero(counts)
    if len(shells) == 0:
        return np.empty(0, dtype=np.int64)
    parts = []
    for s in shells:
        t = _distinct_uniform(int(sizes[s]), int(counts[s]), gen)
        parts.append(shell_offset_vertices(y, int(s) + 1, t, lattice))
    return np.concatenate(parts)


# --- edge-list dump ------------------------------------------------------------------


def dump_edges(sample: PercolationSample, path, header: Optional[dict] = None) -> None:
    """Write ``shell,vertex_a,vertex_b`` lines preceded by ``#`` header lines."""
    lines = []
    meta = dict(header or {})
    if sample.params is not None:
        lat, ker = sample.params.lattice, sample.params.kernel
        meta.update(L=lat.L, d=lat.d, n=lat.n, alpha=ker.alpha, A=ker.A, theta=ker.theta,
                    lam=ker.lam, zeta_n=repr(sample.params.zeta_n))
    if sample.torus is not None:
        meta.update(m=sample.torus.m, d=sample.torus.d)
    meta["stage"] = sample.stage
    meta["master_seed"] = sample.seed_trace.get("master_seed")
    meta["replicate"] = sample.seed_trace.get("replicate")
    streams = sample.seed_trace.get("streams", {})
    meta["streams"] = ";".join(f"{k}:{'/'.join(map(str, v))}" for k, v in sorted(streams.items()))
    for key, val in meta.items():
        lines.append(f"# {key}={val}")
    lines.append("shell,vertex_a,vertex_b")
    for i, (a, b) in sorted(sample.edges.items()):
        lines.extend(f"{i},{x},{y}" for x, y in zip(a.tolist(), b.tolist()))
    with open(path, "x", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edges(path) -> dict:
    """Parse a dump written by :func:`dump_edges` into ``(header, {shell: (a, b)})``."""
    header = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
            elif line and not line.startswith("shell"):
                rows.append(tuple(int(x) for x in line.split(",")))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
    edges = {int(i): (arr[arr[:, 0] == i, 1], arr[arr[:, 0] == i, 2]) for i in np.unique(arr[:, 0])}
    return {"header": header, "edges": edges}
