from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hierperc.coalescent import (
    WeightedConfig,
    default_horizon,
    exploration_forest,
    sample_gxq,
    sample_limit,
    size_biased_partial_sums,
    size_biased_permutation,
)
from hierperc.errors import ParameterError
from hierperc.experiments.compare import ks_distance


def test_config_validation():
    with pytest.raises(ParameterError):
        WeightedConfig(np.array([]), 1.0)
    with pytest.raises(ParameterError):
        WeightedConfig(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ParameterError):
        WeightedConfig(np.array([1.0]), -0.1)
    cfg = WeightedConfig(np.array([1.0, 3.0, 2.0]), 0.5)
    assert cfg.sigma(2) == 14 and cfg.sorted_weights.tolist() == [3, 2, 1]


def test_zero_rate_gives_singletons():
    cfg = WeightedConfig(np.array([0.3, 0.1, 0.2]), 0.0)
    part = sample_gxq(cfg, np.random.default_rng(0))
    assert part.sizes.tolist() == [1, 1, 1]
    assert part.masses.tolist() == [0.3, 0.2, 0.1]
    f = exploration_forest(cfg, np.random.default_rng(0))
    assert f.partition.sizes.tolist() == [1, 1, 1] and np.all(f.parent == -1)


def test_two_vertices_merge_with_probability_one_half():
    cfg = WeightedConfig(np.array([2.0, 0.5]), np.log(2))
    gen = np.random.default_rng(1)
    merged = sum(len(sample_gxq(cfg, gen).sizes) == 1 for _ in range(20000))
    forest = sum(len(exploration_forest(cfg, gen).starts) == 1 for _ in range(20000))
    for k in (merged, forest):
        assert stats.binomtest(k, 20000, 0.5).pvalue > 1e-3


def test_equal_weights_reduce_to_erdos_renyi():
    n, c = 200, 1.5
    cfg = WeightedConfig(np.ones(n), c / n)
    p = -np.expm1(-c / n)
    gen = np.random.default_rng(2)
    ours = [sample_gxq(cfg, gen).sizes[0] for _ in range(1500)]
    ref = [max(len(k) for k in nx.connected_components(nx.fast_gnp_random_graph(n, p, seed=s)))
           for s in range(1500)]
    assert stats.ks_2samp(ours, ref).pvalue > 1e-3


def test_forest_partition_law_matches_gxq():
    cfg = WeightedConfig(np.array([0.9, 0.5, 1.3, 0.2, 0.7]), 1.1)
    gen = np.random.default_rng(3)
    reps = 20000
    a = Counter(sample_gxq(cfg, gen).blocks() for _ in range(reps))
    b = Counter(exploration_forest(cfg, gen).partition.blocks() for _ in range(reps))
    keys = [k for k in set(a) | set(b) if a[k] + b[k] >= 20]
    table = np.array([[a[k] for k in keys], [b[k] for k in keys]])
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_forest_structure():
    gen = np.random.default_rng(4)
    cfg = WeightedConfig(gen.uniform(0.1, 1, 30), 2.0)
    f = exploration_forest(cfg, gen)
    assert sorted(f.order.tolist()) == list(range(30))
    position = np.empty(30, int)
    position[f.order] = np.arange(30)
    kids = np.flatnonzero(f.parent >= 0)
    assert np.all(position[f.parent[kids]] < position[kids])
    assert len(kids) == 30 - len(f.starts)
    assert np.all(f.partition.surpluses == 0)
    assert f.partition.masses.sum() == pytest.approx(cfg.weights.sum())
    # N ends the maximal-mass tree
    bounds = np.append(f.starts, 30)
    t = int(np.searchsorted(bounds, f.N) - 1)
    assert cfg.weights[f.order[bounds[t]:bounds[t + 1]]].sum() == pytest.approx(f.partition.masses[0])


def test_single_vertex_forest():
    f = exploration_forest(WeightedConfig(np.array([0.4]), 3.0), np.random.default_rng(0))
    assert f.N == 1 and f.order.tolist() == [0]


def test_first_root_is_size_biased():
    w = np.array([1.0, 2.0, 3.0, 4.0])
    gen = np.random.default_rng(5)
    firsts = np.array([exploration_forest(WeightedConfig(w, 0.0), gen).order[0] for _ in range(20000)])
    obs = np.bincount(firsts, minlength=4)
    assert stats.chisquare(obs, 20000 * w / w.sum()).pvalue > 1e-3
    perm_first = np.array([size_biased_permutation(w, gen)[0] for _ in range(20000)])
    assert stats.chisquare(np.bincount(perm_first, minlength=4), 20000 * w / w.sum()).pvalue > 1e-3


def test_partial_sums():
    gen = np.random.default_rng(6)
    w = gen.uniform(0.5, 2, 400)
    assert size_biased_partial_sums(np.ones(400), np.ones(400), 400, gen) == 0
    assert size_biased_partial_sums(w, np.ones(400), 400, gen) == pytest.approx(0, abs=1e-12)
    a = gen.uniform(0, 2, 400)
    g1, g2 = np.random.default_rng(9), np.random.default_rng(9)
    assert size_biased_partial_sums(w, a, 100, g1) == size_biased_partial_sums(w, a, 100, g2)
    with pytest.raises(ParameterError):
        size_biased_partial_sums(w, a, 0, gen)


def test_partial_sums_shrink_with_size():
    # ell = sqrt(n) sits inside the window n^0.4 << ell << n^0.6 where the concentration
    # hypotheses hold for these weights
    gen = np.random.default_rng(7)
    means = []
    for n in (100, 1000, 10_000):
        x = np.arange(1, n + 1) ** -0.4
        x /= x.sum()
        ell = int(np.sqrt(n))
        means.append(np.mean([size_biased_partial_sums(x, x, ell, gen) for _ in range(200)]))
    assert means[0] > means[1] > means[2]


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=20), st.integers(0, 2**31))
def test_permutation_is_a_permutation(w, seed):
    perm = size_biased_permutation(w, np.random.default_rng(seed))
    assert sorted(perm.tolist()) == list(range(len(w)))


# --- limit process -----------------------------------------------------------------


def test_limit_sample_shape():
    s = sample_limit(0.0, np.random.default_rng(0))
    assert np.all(np.diff(s.gamma) <= 0) and np.all(s.gamma >= 0)
    assert np.all(s.areas >= 0) and len(s.gamma) <= 20
    assert s.horizon >= default_horizon(0.0)
    assert s.excursions_total >= len(s.gamma)


def test_limit_largest_excursion_grows_with_lambda():
    gen = np.random.default_rng(1)
    med = [np.median([sample_limit(lam, gen).gamma[0] for _ in range(300)]) for lam in (-2, 0, 2)]
    assert med[0] < med[1] < med[2]


def test_limit_surplus_mean_equals_area():
    gen = np.random.default_rng(2)
    s = [sample_limit(1.0, gen) for _ in range(500)]
    surplus = np.array([x.surplus_counts[0] for x in s])
    area = np.array([x.areas[0] for x in s])
    assert abs(surplus.mean() - area.mean()) < 4 * np.sqrt(area.mean() / len(s)) + 0.02


def test_limit_grid_refinement_invariance():
    gen = np.random.default_rng(3)
    coarse = [sample_limit(0.0, gen, grid_dt=2e-4).gamma[0] for _ in range(600)]
    fine = [sample_limit(0.0, gen, grid_dt=1e-4).gamma[0] for _ in range(600)]
    assert stats.ks_2samp(coarse, fine).pvalue > 1e-3


def test_limit_rejects_bad_grid():
    with pytest.raises(ParameterError):
        sample_limit(0.0, np.random.default_rng(0), grid_dt=0)


def test_critical_erdos_renyi_matches_limit():
    n = 1000
    cfg = WeightedConfig(np.full(n, n ** (-2 / 3)), n ** (1 / 3))
    gen = np.random.default_rng(4)
    a = [sample_gxq(cfg, gen).masses[0] for _ in range(800)]
    b = [sample_limit(0.0, gen).gamma[0] for _ in range(800)]
    assert ks_distance(a, b) < 0.1
