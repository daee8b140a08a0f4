import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_levels
from hierperc.errors import ParameterError
from hierperc.geometry import (
    LatticeSpec,
    TorusSpec,
    ball_size,
    decode_pair,
    decode_pairs,
    decode_torus_pairs,
    encode_pair,
    encode_pairs,
    hier_distance,
    hier_level,
    hier_levels,
    pair_count,
    shell_offset_vertices,
    shell_size,
    torus_class_count,
    torus_class_pairs,
    torus_distance,
)


def test_distance_examples():
    s1 = LatticeSpec(2, 1, 3)
    assert hier_distance(3, 3, s1) == 0
    assert hier_distance(0, 5, s1) == 8
    s2 = LatticeSpec(2, 2, 2)
    # level-1 digit is the least significant base-4 digit
    assert hier_distance(4, 5, s2) == 2
    assert hier_distance(0, 4, s2) == 4


def test_distance_matches_digit_oracle():
    spec = LatticeSpec(3, 1, 3)
    for a, b in itertools.combinations(range(spec.num_vertices), 2):
        assert hier_level(a, b, spec) == brute_levels(a, b, spec)
        assert hier_distance(a, b, spec) == spec.L ** brute_levels(a, b, spec)


def test_shell_size_examples():
    assert shell_size(3, LatticeSpec(2, 1, 3)) == 4
    assert shell_size(1, LatticeSpec(2, 2, 1)) == 3
    spec = LatticeSpec(3, 1, 2)
    assert shell_size(2, spec) == 6
    assert sum(hier_distance(0, y, spec) == 9 for y in range(9)) == 6
    with pytest.raises(ParameterError):
        shell_size(0, spec)
    with pytest.raises(ParameterError):
        shell_size(3, spec)


def test_pair_count_examples():
    assert pair_count(1, LatticeSpec(2, 1, 1)) == 1
    s = LatticeSpec(2, 1, 3)
    assert pair_count(2, s) == 8
    assert sum(hier_distance(a, b, s) == 4 for a, b in itertools.combinations(range(8), 2)) == 8
    s2 = LatticeSpec(2, 2, 2)
    assert pair_count(2, s2) == 96
    assert sum(hier_distance(a, b, s2) == 4 for a, b in itertools.combinations(range(16), 2)) == 96


@pytest.mark.parametrize("L,d,n", [(2, 1, 3), (2, 2, 2), (3, 1, 3)])
def test_decode_enumerates_each_pair_once(L, d, n):
    spec = LatticeSpec(L, d, n)
    for i in range(1, n + 1):
        got = sorted(decode_pair(i, k, spec) for k in range(pair_count(i, spec)))
        want = sorted(p for p in itertools.combinations(range(spec.num_vertices), 2)
                      if hier_level(*p, spec) == i)
        assert got == want
        a, b = decode_pairs(i, np.arange(pair_count(i, spec)), spec)
        assert sorted(zip(a.tolist(), b.tolist())) == want


def test_encode_decode_round_trip_random():
    spec = LatticeSpec(2, 1, 40)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = (int(x) for x in rng.integers(0, spec.num_vertices, 2))
        if a == b:
            continue
        i, k = encode_pair(a, b, spec)
        assert decode_pair(i, k, spec) == (min(a, b), max(a, b))
        assert hier_distance(*decode_pair(i, k, spec), spec) == 2**i


def test_vectorized_encode_matches_scalar():
    spec = LatticeSpec(3, 2, 4)
    rng = np.random.default_rng(1)
    i = 3
    ks = rng.integers(0, pair_count(i, spec), 200)
    a, b = decode_pairs(i, ks, spec)
    assert np.array_equal(encode_pairs(i, a, b, spec), ks)
    assert np.all(hier_levels(a, b, spec) == i)


def test_decode_rejects_out_of_range():
    spec = LatticeSpec(2, 1, 3)
    with pytest.raises(ParameterError):
        decode_pair(2, 8, spec)
    with pytest.raises(ParameterError):
        decode_pair(2, -1, spec)


def test_index_width_guard():
    with pytest.raises(ParameterError):
        LatticeSpec(2, 1, 63)
    with pytest.raises(ParameterError):
        LatticeSpec(2, 1, 0)


def test_shell_offset_vertices_cover_the_shell():
    spec = LatticeSpec(3, 1, 3)
    for y in range(spec.num_vertices):
        for i in range(1, 4):
            got = shell_offset_vertices(y, i, np.arange(shell_size(i, spec)), spec)
            want = [z for z in range(spec.num_vertices) if hier_level(y, z, spec) == i]
            assert sorted(got.tolist()) == want


def test_ultrametric_exhaustive_small():
    for n in range(1, 5):
        spec = LatticeSpec(2, 1, n)
        V = spec.num_vertices
        dist = np.array([[hier_distance(a, b, spec) for b in range(V)] for a in range(V)])
        assert np.all(dist[:, None, :] <= np.maximum(dist[:, :, None], dist[None, :, :].transpose(1, 0, 2)))


@given(st.integers(0, 3**8 - 1), st.integers(0, 3**8 - 1), st.integers(0, 3**8 - 1))
def test_ultrametric_random_triples(a, b, c):
    spec = LatticeSpec(3, 2, 4)
    assert hier_distance(a, c, spec) <= max(hier_distance(a, b, spec), hier_distance(b, c, spec))


@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 5))
def test_shell_partition_and_ball_sandwich(L, d, n):
    L += 1
    spec = LatticeSpec(L, d, n)
    assert sum(shell_size(i, spec) for i in range(1, n + 1)) + 1 == L ** (n * d)
    for i in range(1, n + 1):
        r = L**i
        assert r**d * L ** (-d) <= ball_size(i, spec) <= r**d


def test_homogeneity_of_distance_histograms():
    spec = LatticeSpec(2, 2, 3)
    rng = np.random.default_rng(3)
    x, y = rng.integers(0, spec.num_vertices, 2)
    hist = [np.bincount([hier_level(int(v), z, spec) for z in range(spec.num_vertices)]) for v in (x, y)]
    assert np.array_equal(*hist)


def _tdist(a, b, t):
    return torus_distance(t.coords(a), t.coords(b), t)


def test_torus_distance_examples():
    assert torus_distance(3, 3, TorusSpec(6, 1)) == 0
    assert torus_distance(0, 5, TorusSpec(6, 1)) == 1
    assert torus_distance([0, 0], [2, 1], TorusSpec(5, 2)) == 2
    t = TorusSpec(5, 2)
    assert int(t.index([2, 1])) == 2 + 5 * 1


def test_torus_class_counts():
    assert torus_class_count(1, TorusSpec(5, 1)) == 2
    t = TorusSpec(5, 2)
    assert torus_class_count(2, t) == 16
    assert sum(_tdist(0, v, t) == 2 for v in range(25)) == 16
    for m, d in [(4, 1), (5, 2), (6, 2), (7, 3)]:
        t = TorusSpec(m, d)
        assert sum(torus_class_count(k, t) for k in range(1, t.max_class + 1)) == m**d - 1
    with pytest.raises(ParameterError):
        torus_class_count(3, TorusSpec(5, 1))


@pytest.mark.parametrize("m,d", [(4, 1), (5, 1), (4, 2), (6, 2), (5, 2)])
def test_torus_pair_decoding_matches_brute_force(m, d):
    t = TorusSpec(m, d)
    for k in range(1, t.max_class + 1):
        table = torus_class_pairs(k, t)
        a, b = decode_torus_pairs(table, np.arange(table.num_pairs), t)
        got = sorted(zip(a.tolist(), b.tolist()))
        want = [p for p in itertools.combinations(range(t.num_vertices), 2) if _tdist(*p, t) == k]
        assert got == want
    if (m, d) == (4, 1):
        assert torus_class_pairs(1, t).num_pairs == 4
        assert torus_class_pairs(2, t).num_pairs == 2
