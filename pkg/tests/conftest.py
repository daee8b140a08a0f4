import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hierperc.geometry import LatticeSpec
from hierperc.kernel import KernelSpec, ModelParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_levels(a, b, spec):
    """Highest differing base-D digit, computed from digit lists."""
    da, db = spec.digits(a), spec.digits(b)
    level = 0
    for i, (x, y) in enumerate(zip(da, db), start=1):
        if x != y:
            level = i
    return level


def brute_cycle_lengths(g: nx.Graph) -> list:
    """Lengths of all simple cycles by DFS from each start over larger-labelled vertices."""
    nodes = sorted(g.nodes)
    out = []
    for s in nodes:
        stack = [(s, [s])]
        while stack:
            u, path = stack.pop()
            for v in g.neighbors(u):
                if v == s and len(path) >= 3:
                    out.append(len(path))
                elif v > s and v not in path:
                    stack.append((v, path + [v]))
    return out  # every cycle appears twice (two directions)


@pytest.fixture(scope="session")
def params_n6():
    return ModelParams.build(LatticeSpec(2, 1, 6), KernelSpec(alpha=0.5, theta=0.6))


@pytest.fixture(scope="session")
def params_n3():
    return ModelParams.build(LatticeSpec(2, 1, 3), KernelSpec(alpha=0.5, theta=0.6))


@pytest.fixture(scope="session")
def params_2d():
    return ModelParams.build(LatticeSpec(2, 2, 2), KernelSpec(alpha=0.5, theta=0.6))


def all_pairs(V):
    return list(itertools.combinations(range(V), 2))


def binom_chi2_pvalue(counts, N, p):
    """Chi-square goodness of fit of integer ``counts`` to Binomial(N, p), sparse bins pooled."""
    from scipy import stats

    counts = np.asarray(counts)
    obs = np.bincount(counts, minlength=N + 1)[: N + 1]
    exp = stats.binom.pmf(np.arange(N + 1), N, p) * len(counts)
    keep = exp >= 5
    obs_k, exp_k = list(obs[keep]), list(exp[keep])
    if (~keep).any() and exp[~keep].sum() > 0:
        obs_k.append(obs[~keep].sum())
        exp_k.append(exp[~keep].sum())
    obs_k, exp_k = np.array(obs_k), np.array(exp_k)
    if len(obs_k) < 2:
        return 1.0
    return float(stats.chisquare(obs_k, exp_k * obs_k.sum() / exp_k.sum()).pvalue)
