"""Compiled inner loops: union-find and breadth-first search on CSR adjacency."""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True)
def uf_roots(num_vertices, a, b):
    """Root label per vertex after merging every edge ``(a[k], b[k])``.

    Union by size; on equal sizes the smaller root id wins.
    """
    parent = np.arange(num_vertices, dtype=np.int64)
    size = np.ones(num_vertices, dtype=np.int64)
    for k in range(a.shape[0]):
        ra = _find(parent, a[k])
        rb = _find(parent, b[k])
        if ra == rb:
            continue
        if size[ra] < size[rb] or (size[ra] == size[rb] and rb < ra):
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
    for v in range(num_vertices):
        parent[v] = _find(parent, v)
    return parent


@numba.njit(cache=True)
def bfs_dist(indptr, indices, source, dist, queue):
    """Hop distances from ``source``; ``dist`` must be -1 on entry for reachable vertices.

    Returns the number of reached vertices; their ids are ``queue[:count]``.
    """
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for p in range(indptr[u], indptr[u + 1]):
            w = indices[p]
            if dist[w] < 0:
                dist[w] = du
                queue[tail] = w
                tail += 1
    return tail


@numba.njit(cache=True)
def all_source_stats(indptr, indices, sources):
    """For each source: sum of hop distances and eccentricity within its component."""
    nv = indptr.shape[0] - 1
    dist = -np.ones(nv, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    dsum = np.zeros(sources.shape[0], dtype=np.int64)
    ecc = np.zeros(sources.shape[0], dtype=np.int64)
    for s in range(sources.shape[0]):
        cnt = bfs_dist(indptr, indices, sources[s], dist, queue)
        tot = 0
        mx = 0
        for t in range(cnt):
            dv = dist[queue[t]]
            tot += dv
            if dv > mx:
                mx = dv
            dist[queue[t]] = -1
        dsum[s] = tot
        ecc[s] = mx
    return dsum, ecc


@numba.njit(cache=True)
def pair_distances(indptr, indices, xs, ys):
    """Hop distance for each pair ``(xs[k], ys[k])`` (assumed connected)."""
    nv = indptr.shape[0] - 1
    dist = -np.ones(nv, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    out = np.empty(xs.shape[0], dtype=np.int64)
    for k in range(xs.shape[0]):
        cnt = bfs_dist(indptr, indices, xs[k], dist, queue)
        out[k] = dist[ys[k]]
        for t in range(cnt):
            dist[queue[t]] = -1
    return out


def csr_from_edges(num_vertices: int, a: np.ndarray, b: np.ndarray):
    """Symmetric CSR adjacency (``indptr``, ``indices``) from an undirected edge list."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    order = np.lexsort((dst, src))
    src = src[order]
    dst = dst[order]
    counts = np.bincount(src, minlength=num_vertices)
    indptr = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst
