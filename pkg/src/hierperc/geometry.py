"""Ultrametric addressing on the hierarchical ball and L-infinity geometry on the torus.

A vertex of the ball of level ``n`` is a flat integer in ``[0, L**(n*d))`` read as
``n`` base-``L**d`` digits, the level-1 digit least significant.  Two vertices are at
distance ``L**i`` where ``i`` is the highest level at which their digits differ.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError

INDEX_LIMIT = 2**63
PAIR_INDEX_LIMIT = 2**127


@dataclass(frozen=True)
class LatticeSpec:
    L: int
    d: int
    n: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ParameterError(f"L must be an integer >= 2, got {self.L}")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be an integer >= 1, got {self.d}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be an integer >= 1, got {self.n}")
        if self.L ** (self.n * self.d) >= INDEX_LIMIT:
            raise ParameterError(
                f"L^(nd) = {self.L}^{self.n * self.d} exceeds the 63-bit vertex index width"
            )

    @property
    def base(self) -> int:
        """Digit base L^d (number of points of the level-1 torus)."""
        return self.L**self.d

    @property
    def num_vertices(self) -> int:
        return self.L ** (self.n * self.d)

    def digits(self, v: int) -> list[int]:
        """Digits of ``v``, level 1 first."""
        check_vertex(v, self)
        out = []
        for _ in range(self.n):
            v, r = divmod(v, self.base)
            out.append(r)
        return out

    def from_digits(self, digits) -> int:
        if len(digits) != self.n:
            raise ParameterError(f"expected {self.n} digits, got {len(digits)}")
        v = 0
        for dig in reversed(digits):
            if not 0 <= dig < self.base:
                raise ParameterError(f"digit {dig} outside [0, {self.base})")
            v = v * self.base + dig
        return v

    @cached_property
    def _digit_pair_table(self):
        a, b = np.triu_indices(self.base, k=1)
        return a.astype(np.int64), b.astype(np.int64)


def check_vertex(v: int, spec: LatticeSpec) -> None:
    if not 0 <= v < spec.num_vertices:
        raise ParameterError(f"vertex {v} outside [0, {spec.num_vertices})")


def _check_level(i: int, spec: LatticeSpec) -> None:
    if not 1 <= i <= spec.n:
        raise ParameterError(f"level {i} outside [1, {spec.n}]")


def hier_level(a: int, b: int, spec: LatticeSpec) -> int:
    """Highest level at which the digits of ``a`` and ``b`` differ (0 when equal)."""
    check_vertex(a, spec)
    check_vertex(b, spec)
    level = 0
    while a != b:
        a //= spec.base
        b //= spec.base
        level += 1
    return level


def hier_distance(a: int, b: int, spec: LatticeSpec) -> int:
    level = hier_level(a, b, spec)
    return 0 if level == 0 else spec.L**level


def hier_levels(a, b, spec: LatticeSpec) -> np.ndarray:
    """Vectorized :func:`hier_level` over integer arrays."""
    a = np.asarray(a, dtype=np.int64).copy()
    b = np.asarray(b, dtype=np.int64).copy()
    level = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    for _ in range(spec.n):
        differ = a != b
        if not differ.any():
            break
        level += differ
        a //= spec.base
        b //= spec.base
    return level


def shell_size(i: int, spec: LatticeSpec) -> int:
    """Number of points at distance exactly ``L**i`` from any fixed point."""
    _check_level(i, spec)
    return (spec.base - 1) * spec.base ** (i - 1)


def ball_size(i: int, spec: LatticeSpec) -> int:
    """Points within distance ``L**i`` (``i = 0`` gives the point itself)."""
    if not 0 <= i <= spec.n:
        raise ParameterError(f"level {i} outside [0, {spec.n}]")
    return spec.base**i


def pair_count(i: int, spec: LatticeSpec) -> int:
    """Number of unordered vertex pairs at distance exactly ``L**i``."""
    _check_level(i, spec)
    count = spec.num_vertices * shell_size(i, spec) // 2
    if count >= PAIR_INDEX_LIMIT:
        raise ParameterError(f"pair count at level {i} exceeds the 127-bit index width")
    return count


def _pair_radix(i: int, spec: LatticeSpec):
    D = spec.base
    lower = D ** (i - 1)
    n_digit_pairs = D * (D - 1) // 2
    return D, lower, n_digit_pairs


def digit_pair_index(a: int, b: int, D: int) -> int:
    """Lexicographic index of the digit pair ``a < b`` among all pairs from ``[0, D)``."""
    if not 0 <= a < b < D:
        raise ParameterError(f"need 0 <= a < b < {D}, got ({a}, {b})")
    return a * D - a * (a + 1) // 2 + (b - a - 1)


def digit_pair_from_index(t: int, D: int) -> tuple[int, int]:
    a = 0
    row = D - 1
    while t >= row:
        t -= row
        a += 1
        row -= 1
    return a, a + 1 + t


def decode_pair(i: int, k: int, spec: LatticeSpec) -> tuple[int, int]:
    """Map ``k`` in ``[0, pair_count(i))`` to the k-th pair at distance ``L**i``.

    Mixed radix, most significant first: common digits above level ``i``, the
    unordered digit pair at level ``i``, the lower digits of the smaller endpoint,
    the lower digits of the larger endpoint.
    """
    N = pair_count(i, spec)
    if not 0 <= k < N:
        raise ParameterError(f"pair index {k} outside [0, {N})")
    D, lower, n_dp = _pair_radix(i, spec)
    rest, low_b = divmod(k, lower)
    rest, low_a = divmod(rest, lower)
    high, t = divmod(rest, n_dp)
    da, db = digit_pair_from_index(t, D)
    top = high * D
    a = (top + da) * lower + low_a
    b = (top + db) * lower + low_b
    return a, b


def encode_pair(a: int, b: int, spec: LatticeSpec) -> tuple[int, int]:
    """Inverse of :func:`decode_pair`: returns ``(level, k)``."""
    if a > b:
        a, b = b, a
    i = hier_level(a, b, spec)
    if i == 0:
        raise ParameterError("a pair of identical vertices has no index")
    D, lower, n_dp = _pair_radix(i, spec)
    rest_a, low_a = divmod(a, lower)
    rest_b, low_b = divmod(b, lower)
    high, da = divmod(rest_a, D)
    _, db = divmod(rest_b, D)
    t = digit_pair_index(da, db, D)
    return i, ((high * n_dp + t) * lower + low_a) * lower + low_b


def decode_pairs(i: int, k, spec: LatticeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`decode_pair` for an int64 array of indices (no range check)."""
    D, lower, n_dp = _pair_radix(i, spec)
    k = np.asarray(k, dtype=np.int64)
    rest, low_b = np.divmod(k, lower)
    rest, low_a = np.divmod(rest, lower)
    high, t = np.divmod(rest, n_dp)
    tab_a, tab_b = spec._digit_pair_table
    top = high * D
    a = (top + tab_a[t]) * lower + low_a
    b = (top + tab_b[t]) * lower + low_b
    return a, b


def shell_offset_vertices(y: int, i: int, t, spec: LatticeSpec) -> np.ndarray:
    """Vertices at distance ``L**i`` from ``y`` indexed by ``t`` in ``[0, shell_size(i))``.

    ``t = (delta - 1) * L**((i-1)d) + low`` shifts the level-``i`` digit of ``y`` by
    ``delta`` (mod ``L**d``) and replaces the lower digits by ``low``.
    """
    D = spec.base
    lower = D ** (i - 1)
    t = np.asarray(t, dtype=np.int64)
    delta, low = np.divmod(t, lower)
    high, dig = divmod(y // lower, D)
    new_dig = (dig + 1 + delta) % D
    return (high * D + new_dig) * lower + low


# --- torus ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusSpec:
    m: int
    d: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ParameterError(f"torus side m must be an integer >= 2, got {self.m}")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be an integer >= 1, got {self.d}")
        if self.m**self.d >= INDEX_LIMIT:
            raise ParameterError("m^d exceeds the 63-bit vertex index width")

    @property
    def num_vertices(self) -> int:
        return self.m**self.d

    @property
    def max_class(self) -> int:
        return self.m // 2

    def coords(self, v):
        """Coordinates of flat index ``v`` (first coordinate least significant)."""
        v = np.asarray(v, dtype=np.int64)
        out = []
        for _ in range(self.d):
            v, r = np.divmod(v, self.m)
            out.append(r)
        return np.stack(out, axis=-1)

    def index(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64) % self.m
        v = np.zeros(coords.shape[:-1], dtype=np.int64)
        for j in reversed(range(self.d)):
            v = v * self.m + coords[..., j]
        return v


def torus_distance(a, b, spec: TorusSpec) -> int:
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    b = np.atleast_1d(np.asarray(b, dtype=np.int64))
    if a.shape != (spec.d,) or b.shape != (spec.d,):
        raise ParameterError(f"points must have {spec.d} coordinates")
    diff = np.abs(a % spec.m - b % spec.m)
    return int(np.max(np.minimum(diff, spec.m - diff)))


def torus_norms(offsets, spec: TorusSpec) -> np.ndarray:
    """L-infinity torus norm of each row of ``offsets``."""
    o = np.asarray(offsets, dtype=np.int64) % spec.m
    return np.max(np.minimum(o, spec.m - o), axis=-1)


def torus_class_count(k: int, spec: TorusSpec) -> int:
    """Number of points at torus L-infinity distance exactly ``k`` from a fixed point."""
    if not 1 <= k <= spec.max_class:
        raise ParameterError(f"distance class {k} outside [1, {spec.max_class}]")

    def ball(r):
        return min(2 * r + 1, spec.m) ** spec.d

    return ball(k) - ball(k - 1)


@dataclass(frozen=True)
class TorusClassPairs:
    """Pair-decoding table for one distance class.

    Offsets ``o`` with ``o != -o`` are kept once per ``{o, -o}`` and paired with every
    base point; self-inverse offsets (only for even ``m``) use half the base points.
    """

    reps: np.ndarray  # (R, d) offsets, one per {o, -o}
    self_inverse: np.ndarray  # (S, d)
    half_axis: np.ndarray  # (S,) first coordinate equal to m/2 for each self-inverse offset
    num_pairs: int


def torus_class_pairs(k: int, spec: TorusSpec) -> TorusClassPairs:
    torus_class_count(k, spec)
    m, d = spec.m, spec.d
    grid = spec.coords(np.arange(spec.num_vertices))
    offs = grid[torus_norms(grid, spec) == k]
    neg_idx = spec.index(-offs)
    own_idx = spec.index(offs)
    selfinv = neg_idx == own_idx
    reps = offs[~selfinv & (own_idx < neg_idx)]
    si = offs[selfinv]
    half_axis = np.argmax(si == m // 2, axis=1) if len(si) else np.zeros(0, dtype=np.int64)
    n_pairs = spec.num_vertices * len(reps) + (spec.num_vertices // 2) * len(si)
    return TorusClassPairs(reps, si, half_axis.astype(np.int64), n_pairs)


def decode_torus_pairs(table: TorusClassPairs, k, spec: TorusSpec):
    """Vectorized decoder from pair indices in ``[0, table.num_pairs)`` to vertex pairs."""
    k = np.asarray(k, dtype=np.int64)
    V = spec.num_vertices
    n_regular = V * len(table.reps)
    regular = k < n_regular
    a = np.empty_like(k)
    b = np.empty_like(k)
    if regular.any():
        off_i, base = np.divmod(k[regular], V)
        x = spec.coords(base)
        a[regular] = base
        b[regular] = spec.index(x + table.reps[off_i])
    if (~regular).any():
        half = V // 2
        off_i, hb = np.divmod(k[~regular] - n_regular, half)
        axis = table.half_axis[off_i]
        # half-base index: coordinate `axis` ranges over [0, m/2), others over [0, m)
        x = np.zeros((len(hb), spec.d), dtype=np.int64)
        rem = hb
        for j in range(spec.d):
            radix = np.where(axis == j, spec.m // 2, spec.m)
            rem, x[:, j] = np.divmod(rem, radix)
        a[~regular] = spec.index(x)
        b[~regular] = spec.index(x + table.self_inverse[off_i])
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo, hi


def encode_pairs(i: int, a, b, spec: LatticeSpec) -> np.ndarray:
    """Vectorized pair index at level ``i`` for ``a < b`` known to be at distance ``L**i``."""
    D, lower, n_dp = _pair_radix(i, spec)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    rest_a, low_a = np.divmod(a, lower)
    rest_b, low_b = np.divmod(b, lower)
    high, da = np.divmod(rest_a, D)
    db = rest_b % D
    t = da * D - da * (da + 1) // 2 + (db - da - 1)
    return ((high * n_dp + t) * lower + low_a) * lower + low_b
