"""Metric and cycle analytics of sampled components, and whole-sample aggregates."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._fast import all_source_stats, bfs_dist, csr_from_edges, pair_distances
from .sampler import PercolationSample

EXACT_DIAMETER_CAP = 20_000
EXACT_PAIR_CAP = 10_000
SAMPLED_PAIRS = 4096
SURPLUS_CAP = 12


class _NotComputed:
    """Marker for cycle statistics skipped because the surplus exceeds the cap."""

    def __repr__(self):
        return "NOT_COMPUTED"

    def __bool__(self):
        return False


NOT_COMPUTED = _NotComputed()


@dataclass(frozen=True)
class ComponentGraph:
    """Connected simple graph on local ids ``0..size-1``; ``vertices`` maps back to the sample."""

    vertices: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def neighbours(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def edge_list(self) -> list:
        out = []
        for u in range(self.size):
            out.extend((u, int(w)) for w in self.neighbours(u) if u < w)
        return out

    @classmethod
    def from_edges(cls, size: int, edges, vertices=None) -> "ComponentGraph":
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        key = np.minimum(e[:, 0], e[:, 1]) * size + np.maximum(e[:, 0], e[:, 1])
        if len(np.unique(key)) != len(key):
            raise ValueError("multi-edges are not allowed")
        indptr, indices = csr_from_edges(size, e[:, 0], e[:, 1])
        if vertices is None:
            vertices = np.arange(size, dtype=np.int64)
        return cls(np.asarray(vertices, dtype=np.int64), indptr, indices)

    @classmethod
    def from_sample(cls, sample: PercolationSample, rank: int) -> "ComponentGraph":
        """The ``rank``-th largest component of ``sample``."""
        table = sample.component_table
        verts = table.members(rank)
        a, b = sample.all_edges
        inside = table.labels[a] == rank
        local = np.full(sample.num_vertices, -1, dtype=np.int64)
        local[verts] = np.arange(len(verts))
        indptr, indices = csr_from_edges(len(verts), local[a[inside]], local[b[inside]])
        return cls(verts, indptr, indices)


def bfs_distances(g: ComponentGraph, source: int) -> np.ndarray:
    dist = -np.ones(g.size, dtype=np.int64)
    queue = np.empty(g.size, dtype=np.int64)
    bfs_dist(g.indptr, g.indices, source, dist, queue)
    return dist


def distance_sum(g: ComponentGraph, source: int) -> int:
    """Sum of hop distances from ``source`` to every vertex of ``g``."""
    return int(bfs_distances(g, source).sum())


def diameter_info(g: ComponentGraph, cap: int = EXACT_DIAMETER_CAP) -> tuple:
    """``(diameter, exact)``; above ``cap`` vertices a double-sweep lower bound is returned."""
    if g.size <= cap:
        _, ecc = all_source_stats(g.indptr, g.indices, np.arange(g.size, dtype=np.int64))
        return int(ecc.max()), True
    d0 = bfs_distances(g, 0)
    far = int(np.argmax(d0))
    return int(bfs_distances(g, far).max()), False


def diameter(g: ComponentGraph, cap: int = EXACT_DIAMETER_CAP) -> int:
    return diameter_info(g, cap)[0]


def surplus(g: ComponentGraph) -> int:
    return g.num_edges - g.size + 1


# --- cycle structure -----------------------------------------------------------------


@dataclass(frozen=True)
class CycleKernel:
    """2-core with degree-2 chains contracted.

    ``nodes`` are local vertex ids of ``g``; ``edges`` are ``(u, v, weight)`` triples
    (``u == v`` for a loop) whose weights are the lengths of the contracted paths.
    """

    nodes: tuple
    edges: tuple

    @property
    def cyclomatic_number(self) -> int:
        if not self.nodes:
            return 0
        return len(self.edges) - len(self.nodes) + 1

    @property
    def empty(self) -> bool:
        return not self.nodes


def two_core(g: ComponentGraph) -> np.ndarray:
    """Boolean mask of the 2-core (iterated removal of degree-1 vertices)."""
    deg = np.diff(g.indptr).astype(np.int64)
    alive = np.ones(g.size, dtype=bool)
    stack = [int(u) for u in np.flatnonzero(deg <= 1)]
    while stack:
        u = stack.pop()
        if not alive[u]:
            continue
        alive[u] = False
        for w in g.neighbours(u):
            if alive[w]:
                deg[w] -= 1
                if deg[w] == 1:
                    stack.append(int(w))
    return alive


def cycle_kernel(g: ComponentGraph) -> CycleKernel:
    core = two_core(g)
    if not core.any():
        return CycleKernel((), ())
    nbrs = {int(u): [int(w) for w in g.neighbours(u) if core[w]] for u in np.flatnonzero(core)}
    branch = sorted(u for u, ws in nbrs.items() if len(ws) >= 3)
    if not branch:
        # the 2-core of a connected graph is connected, so this is a single cycle
        start = min(nbrs)
        return CycleKernel((start,), ((start, start, len(nbrs)),))
    is_branch = set(branch)
    used = set()
    edges = []
    for u in branch:
        for a in nbrs[u]:
            if (u, a) in used:
                continue
            prev, cur, length = u, a, 1
            while cur not in is_branch:
                nxt = nbrs[cur][0] if nbrs[cur][0] != prev else nbrs[cur][1]
                prev, cur = cur, nxt
                length += 1
            used.add((u, a))
            used.add((cur, prev))
            edges.append((u, cur, length))
    return CycleKernel(tuple(branch), tuple(edges))


def _kernel_shortest_path(kernel: CycleKernel, src, dst, skip: int) -> float:
    adj = {}
    for k, (u, v, w) in enumerate(kernel.edges):
        if k == skip or u == v:
            continue
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    best = {src: 0}
    heap = [(0, src)]
    while heap:
        dist, u = heapq.heappop(heap)
        if u == dst:
            return dist
        if dist > best.get(u, np.inf):
            continue
        for v, w in adj.get(u, ()):
            nd = dist + w
            if nd < best.get(v, np.inf):
                best[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.inf


def shortest_cycle(g: ComponentGraph, kernel: Optional[CycleKernel] = None) -> Optional[int]:
    """Girth of ``g``; ``None`` for a tree."""
    kernel = kernel if kernel is not None else cycle_kernel(g)
    if kernel.empty:
        return None
    best = np.inf
    for k, (u, v, w) in enumerate(kernel.edges):
        if u == v:
            best = min(best, w)
        else:
            best = min(best, w + _kernel_shortest_path(kernel, u, v, k))
    return int(best)


def longest_cycle(g: ComponentGraph, kernel: Optional[CycleKernel] = None,
                  surplus_cap: int = SURPLUS_CAP):
    """Length of the longest cycle; ``None`` for a tree, ``NOT_COMPUTED`` above the cap.

    Exhaustive search over simple cycles of the kernel multigraph: every graph cycle
    is a kernel cycle with the same total weight.
    """
    kernel = kernel if kernel is not None else cycle_kernel(g)
    if kernel.empty:
        return None
    if kernel.cyclomatic_number > surplus_cap:
        return NOT_COMPUTED
    adj = {u: [] for u in kernel.nodes}
    best = 0
    for k, (u, v, w) in enumerate(kernel.edges):
        if u == v:
            best = max(best, w)
        else:
            adj[u].append((v, w, k))
            adj[v].append((u, w, k))
    order = {u: r for r, u in enumerate(kernel.nodes)}
    for s in kernel.nodes:
        # cycles whose lowest-ranked node is s
        stack = [(s, 0, frozenset([s]), -1)]
        while stack:
            u, length, seen, last_edge = stack.pop()
            for v, w, k in adj[u]:
                if k == last_edge:
                    continue
                if v == s:
                    if length > 0:
                        best = max(best, length + w)
                    continue
                if v in seen or order[v] < order[s]:
                    continue
                stack.append((v, length + w, seen | {v}, k))
    return int(best)


# --- aggregates ----------------------------------------------------------------------


@dataclass
class SampleAggregates:
    """Susceptibilities, rescaled masses and distance functionals of one sample."""

    sbar_2: float
    sbar_3: float
    sigma_1: float
    sigma_2: float
    sigma_3: float
    x_max: float
    x_min: float
    diam_max: int
    diam_exact: bool
    tau: float
    tau_se: float
    masses: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    u_se: np.ndarray = field(repr=False)
    distance_total: int = 0  # sum over vertices of within-component distance sums (exact part)


def aggregates(sample: PercolationSample, rng: Optional[np.random.Generator] = None,
               pair_cap: int = EXACT_PAIR_CAP, sampled_pairs: int = SAMPLED_PAIRS) -> SampleAggregates:
    """Aggregates of the component masses ``x_i = V**(-2/3) |C_i|`` (``V`` vertices).

    ``u_i`` is exact for components with at most ``pair_cap`` vertices; larger ones use
    ``sampled_pairs`` uniform vertex pairs drawn from ``rng`` and report a standard error.
    """
    V = sample.num_vertices
    table = sample.component_table
    sizes = table.sizes
    sizes_f = sizes.astype(np.float64)
    scale = float(V) ** (-2.0 / 3.0)
    s2 = int(np.sum(sizes * sizes))
    s3 = int(np.sum(sizes * sizes * sizes))
    masses = sizes_f * scale
    indptr, indices = sample.adjacency
    labels = table.labels

    small = sizes[labels] <= pair_cap
    small_vertices = np.flatnonzero(small & (sizes[labels] > 1))
    dsum, ecc = all_source_stats(indptr, indices, small_vertices)
    comp_d = np.bincount(labels[small_vertices], weights=dsum, minlength=len(sizes))
    comp_ecc = np.zeros(len(sizes), dtype=np.int64)
    np.maximum.at(comp_ecc, labels[small_vertices], ecc)

    u = comp_d / (sizes_f * sizes_f)
    u_se = np.zeros(len(sizes))
    diam_exact = True
    big = np.flatnonzero(sizes > pair_cap)
    if len(big):
        if rng is None:
            raise ValueError("components above pair_cap need an rng for pair sampling")
        for rank in big:
            members = table.members(rank)
            xs = rng.choice(members, size=sampled_pairs)
            ys = rng.choice(members, size=sampled_pairs)
            dists = pair_distances(indptr, indices, xs, ys).astype(np.float64)
            u[rank] = dists.mean()
            u_se[rank] = dists.std(ddof=1) / np.sqrt(sampled_pairs)
            g = ComponentGraph.from_sample(sample, int(rank))
            comp_ecc[rank], exact = diameter_info(g, cap=0)
            diam_exact = diam_exact and exact
    # exact part of tau as an integer distance total, sampled part in floating point
    distance_total = int(dsum.sum())
    tau_exact = distance_total * float(V) ** (-4.0 / 3.0)
    tau_big = float(np.sum(masses[big] ** 2 * u[big])) if len(big) else 0.0
    tau_se = float(np.sqrt(np.sum((masses[big] ** 2 * u_se[big]) ** 2))) if len(big) else 0.0
    return SampleAggregates(
        sbar_2=s2 / V,
        sbar_3=s3 / V,
        sigma_1=float(np.sum(sizes)) * scale,
        sigma_2=s2 * scale**2,
        sigma_3=s3 * scale**3,
        x_max=float(masses[0]),
        x_min=float(masses[-1]),
        diam_max=int(comp_ecc.max()) if len(comp_ecc) else 0,
        diam_exact=diam_exact,
        tau=tau_exact + tau_big,
        tau_se=tau_se,
        masses=masses,
        u=u,
        u_se=u_se,
        distance_total=distance_total,
    )


def component_row(sample: PercolationSample, rank: int, surplus_cap: int = SURPLUS_CAP,
                  rng: Optional[np.random.Generator] = None) -> dict:
    """One row of the per-component CSV."""
    g = ComponentGraph.from_sample(sample, rank)
    kernel = cycle_kernel(g)
    diam, exact = diameter_info(g)
    if g.size <= EXACT_PAIR_CAP:
        dsum, _ = all_source_stats(g.indptr, g.indices, np.arange(g.size, dtype=np.int64))
        u_mean, u_se = float(dsum.sum()) / g.size**2, 0.0
    else:
        if rng is None:
            raise ValueError("component above pair cap needs an rng")
        xs = rng.integers(0, g.size, SAMPLED_PAIRS)
        ys = rng.integers(0, g.size, SAMPLED_PAIRS)
        dd = pair_distances(g.indptr, g.indices, xs, ys).astype(float)
        u_mean, u_se = float(dd.mean()), float(dd.std(ddof=1) / np.sqrt(len(dd)))
    return {
        "component_rank": rank + 1,
        "size": g.size,
        "edges": g.num_edges,
        "surplus": surplus(g),
        "diameter": diam if exact else f">={diam}",
        "girth": shortest_cycle(g, kernel),
        "longest_cycle": longest_cycle(g, kernel, surplus_cap),
        "u_mean": u_mean,
        "u_se": u_se,
    }
