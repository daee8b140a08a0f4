"""Dominating branching processes for clusters of the barely-subcritical graph."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterError
from .geometry import shell_size
from .graphstats import ComponentGraph, diameter
from .kernel import ModelParams
from .rng import RngPolicy
from .sampler import explore_cluster

SIZE_CAP = 10**7
HEIGHT_CAP = 10**5
COUPLING_MAX_VERTICES = 2**16


@dataclass
class BranchingRun:
    j: int
    total_size: int
    height: int
    generation_sizes: list = field(repr=False)
    truncated: bool = False

    def to_json(self) -> str:
        return json.dumps({"j": self.j, "total_size": self.total_size, "height": self.height,
                           "truncated": self.truncated})


def _offspring_table(j: int, params: ModelParams):
    if params.prob_minus is None:
        raise ParameterError("branching processes need theta")
    if not 1 <= j <= params.n:
        raise ParameterError(f"level {j} outside [1, {params.n}]")
    sizes = np.array([shell_size(i, params.lattice) for i in range(1, j + 1)], dtype=np.int64)
    return sizes, params.prob_minus[:j]


def sample_offspring(j: int, params: ModelParams, gen: np.random.Generator) -> int:
    """One draw of ``sum_{i<=j} Binomial(|shell i|, p_i)``."""
    sizes, probs = _offspring_table(j, params)
    return int(gen.binomial(sizes, probs).sum())


def sample_tree(j: int, params: ModelParams, gen: np.random.Generator, size_cap: int = SIZE_CAP,
                height_cap: int = HEIGHT_CAP) -> BranchingRun:
    """Generation-by-generation simulation.

    The children of ``W`` individuals at shell ``i`` are ``Binomial(W |shell i|, p_i)``
    (a sum of independent binomials with a common success probability).
    """
    if size_cap <= 0 or height_cap <= 0:
        raise ParameterError("caps must be positive")
    sizes, probs = _offspring_table(j, params)
    gens = [1]
    total = 1
    truncated = False
    while gens[-1] > 0:
        if len(gens) - 1 >= height_cap or total >= size_cap:
            truncated = True
            break
        nxt = int(gen.binomial(sizes * gens[-1], probs).sum())
        gens.append(nxt)
        total += nxt
    if gens[-1] == 0 and len(gens) > 1:
        gens.pop()
    return BranchingRun(j, total, len(gens) - 1, gens, truncated)


@dataclass
class CouplingReport:
    replicates: int
    size_violations: int
    diameter_violations: int
    truncated: int
    mean_tree_size: float
    mean_cluster_size: float
    mean_slack: float
    records: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("records")
        return d


def coupled_replicate(params: ModelParams, gen: np.random.Generator, root: int = 0,
                      size_cap: int = SIZE_CAP, height_cap: int = HEIGHT_CAP) -> dict:
    """Explore the cluster of ``root`` and complete its BFS tree to a copy of the full tree.

    Every draw of an explored vertex that did not discover a new vertex becomes an extra
    child, which roots an independent copy of the level-``n`` tree.
    """
    lat = params.lattice
    exp = explore_cluster(lat, params.prob_minus, root, gen, size_cap=size_cap)
    tree_size = exp.size
    tree_height = max(exp.depth)
    truncated = exp.truncated
    for k, g in enumerate(exp.ghosts):
        for _ in range(g):
            sub = sample_tree(lat.n, params, gen, size_cap, height_cap)
            tree_size += sub.total_size
            tree_height = max(tree_height, exp.depth[k] + 1 + sub.height)
            truncated = truncated or sub.truncated
    local = {v: i for i, v in enumerate(exp.order)}
    g = ComponentGraph.from_edges(exp.size, [(local[a], local[b]) for a, b in exp.edges],
                                  vertices=exp.order)
    return {
        "cluster_size": exp.size,
        "cluster_diameter": diameter(g),
        "tree_size": tree_size,
        "tree_height": tree_height,
        "truncated": truncated,
    }


def coupling_check(params: ModelParams, rng: RngPolicy, replicates: int, root: int = 0,
                   size_cap: int = SIZE_CAP, height_cap: int = HEIGHT_CAP) -> CouplingReport:
    if params.lattice.num_vertices > COUPLING_MAX_VERTICES:
        raise ParameterError(f"coupling check limited to {COUPLING_MAX_VERTICES} vertices")
    if params.prob_minus is None:
        raise ParameterError("coupling check needs theta")
    records = []
    for r in range(replicates):
        records.append(coupled_replicate(params, rng.stream(r, "coupling"), root, size_cap, height_cap))
    ok = [rec for rec in records if not rec["truncated"]]
    size_v = sum(rec["cluster_size"] > rec["tree_size"] for rec in records)
    diam_v = sum(rec["cluster_diameter"] > 2 * rec["tree_height"] for rec in records)
    mt = float(np.mean([r["tree_size"] for r in ok])) if ok else float("nan")
    mc = float(np.mean([r["cluster_size"] for r in ok])) if ok else float("nan")
    return CouplingReport(replicates, int(size_v), int(diam_v), len(records) - len(ok), mt, mc,
                          mt - mc, records)
