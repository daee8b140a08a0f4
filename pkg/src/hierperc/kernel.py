"""Kernel profile, criticality normalization and per-shell edge probabilities.

Tables are evaluated once in extended precision (mpmath) and stored as float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np

from .errors import ParameterError, SolverError
from .geometry import LatticeSpec, TorusSpec, torus_class_count

MP_DPS = 50
ZETA_RTOL = 1e-12
ZETA_MAX_ITER = 200


def theta_upper(alpha: float, d: int) -> float:
    """Upper end of the admissible window for the barely-subcritical exponent."""
    if 0 < alpha <= d / 2:
        return 4 * alpha / 3
    if d / 2 < alpha <= 2 * d / 3:
        return 2 * alpha - d / 2
    if 2 * d / 3 < alpha < 5 * d / 6:
        return 5 * alpha / 2 - d
    raise ParameterError(f"alpha={alpha} outside (0, 5d/6) for d={d}")


def check_theta(alpha: float, theta: float, d: int) -> None:
    hi = theta_upper(alpha, d)
    if not alpha < theta < hi:
        raise ParameterError(f"theta={theta} outside the window ({alpha}, {hi}) for alpha={alpha}, d={d}")


@dataclass(frozen=True)
class KernelSpec:
    """Power-law profile ``rho(r) = A * r**-alpha`` with window parameters.

    ``profile`` optionally overrides the power law with any positive function of the
    distance; it must be mpmath-compatible.
    """

    alpha: float
    A: float = 1.0
    theta: Optional[float] = None
    lam: float = 0.0
    profile: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not self.A > 0:
            raise ParameterError(f"A must be positive, got {self.A}")
        if self.theta is not None and not self.theta > 0:
            raise ParameterError(f"theta must be positive, got {self.theta}")

    def rho(self, r):
        """Profile at distance ``r``; ``rho(0) = 0``."""
        if r == 0:
            return mpmath.mpf(0)
        if self.profile is not None:
            return mpmath.mpf(self.profile(r))
        return mpmath.mpf(self.A) * mpmath.power(mpmath.mpf(r), -mpmath.mpf(self.alpha))

    def validate_for(self, d: int, require_theta: bool = True) -> None:
        if not self.alpha < d:
            raise ParameterError(f"alpha={self.alpha} must be < d={d}")
        if require_theta:
            if self.theta is None:
                raise ParameterError("theta is required for this regime")
            check_theta(self.alpha, self.theta, d)


def _bisect_increasing(f, target, guess, rtol=ZETA_RTOL, max_iter=ZETA_MAX_ITER):
    """Root of increasing ``f(z) = target`` on ``z > 0`` by bracket doubling + bisection."""
    with mpmath.workdps(MP_DPS):
        target = mpmath.mpf(target)
        guess = mpmath.mpf(guess)
        Z = mpmath.mpf(2)
        for _ in range(max_iter):
            lo, hi = guess / Z, guess * Z
            if f(lo) < target < f(hi):
                break
            Z *= 2
        else:
            raise SolverError("could not bracket the normalization root")
        tol = mpmath.mpf(rtol) * abs(target) * mpmath.mpf(10) ** -20
        for _ in range(max_iter):
            mid = (lo + hi) / 2
            val = f(mid) - target
            if abs(val) <= tol:
                lo = hi = mid
                break
            if val < 0:
                lo = mid
            else:
                hi = mid
        z = (lo + hi) / 2
        if abs(f(z) - target) > mpmath.mpf(rtol) * abs(target):
            raise SolverError("bisection did not reach the residual tolerance")
        return z


def _zeta_lhs(lattice: LatticeSpec, kernel: KernelSpec):
    D = lattice.base
    rhos = [kernel.rho(lattice.L**i) for i in range(1, lattice.n + 1)]
    weights = [mpmath.mpf((D - 1) * D ** (i - 1)) for i in range(1, lattice.n + 1)]

    def lhs(z):
        return mpmath.fsum(w * mpmath.exp(-r / z) for w, r in zip(weights, rhos))

    return lhs


def solve_zeta_mp(lattice: LatticeSpec, kernel: KernelSpec):
    """Extended-precision root of the criticality normalization equation."""
    rhs = lattice.num_vertices - 2
    if rhs <= 0:
        raise ParameterError("L^(nd) - 2 <= 0: the normalization equation has no positive root")
    with mpmath.workdps(MP_DPS):
        if any(kernel.rho(lattice.L**i) <= 0 for i in range(1, lattice.n + 1)):
            raise ParameterError("rho must be strictly positive on all shells")
        guess = mpmath.power(lattice.L, lattice.n * (lattice.d - kernel.alpha))
        return _bisect_increasing(_zeta_lhs(lattice, kernel), rhs, guess)


def solve_zeta(lattice: LatticeSpec, kernel: KernelSpec) -> float:
    return float(solve_zeta_mp(lattice, kernel))


def zeta_residual(zeta: float, lattice: LatticeSpec, kernel: KernelSpec) -> float:
    """Relative residual of the normalization equation at ``zeta``."""
    with mpmath.workdps(MP_DPS):
        rhs = mpmath.mpf(lattice.num_vertices - 2)
        return float(abs(_zeta_lhs(lattice, kernel)(mpmath.mpf(zeta)) - rhs) / rhs)


def minus_threshold(kernel: KernelSpec, L: int) -> int:
    """Smallest ``n0`` such that ``rho(L**i) > L**(-n theta)`` for every ``i <= n`` and ``n >= n0``.

    Closed form for the power law: the binding shell is ``i = n``.
    """
    if kernel.theta is None:
        raise ParameterError("theta is required")
    if kernel.theta <= kernel.alpha:
        raise ParameterError("theta must exceed alpha for a finite threshold")
    if kernel.profile is not None:
        raise ParameterError("threshold is only available in closed form for the power law")
    # A * L^{-n alpha} > L^{-n theta}  <=>  n (theta - alpha) ln L > -ln A
    bound = -math.log(kernel.A) / ((kernel.theta - kernel.alpha) * math.log(L))
    return max(1, math.floor(bound) + 1)


@dataclass(frozen=True)
class ModelParams:
    """Lattice + kernel with the derived normalization and probability tables.

    Tables are indexed by shell ``i - 1`` for ``i = 1..n``.  ``prob_minus`` and
    ``sprinkle_t`` are ``None`` when ``theta`` is unset; ``sprinkle_t`` is also ``None``
    when the sprinkle exponent is negative.
    """

    lattice: LatticeSpec
    kernel: KernelSpec
    zeta_n: float
    prob_minus: Optional[np.ndarray]
    prob_critical: np.ndarray
    sprinkle_t: Optional[float]
    q: Optional[float]
    critical_clamped: tuple
    _mp: dict = field(repr=False, compare=False)

    @classmethod
    def build(cls, lattice: LatticeSpec, kernel: KernelSpec, strict: bool = True) -> "ModelParams":
        """Solve for the normalization and evaluate every table.

        With ``strict`` a lambda that clamps the critical kernel on some shell is rejected.
        """
        kernel.validate_for(lattice.d, require_theta=False)
        with mpmath.workdps(MP_DPS):
            zeta = solve_zeta_mp(lattice, kernel)
            L, n, d = lattice.L, lattice.n, lattice.d
            lam = mpmath.mpf(kernel.lam)
            window = lam * mpmath.power(L, -mpmath.mpf(4) * n * d / 3)
            rhos = [kernel.rho(L**i) for i in range(1, n + 1)]
            kappa = [r / zeta + window for r in rhos]
            clamped = tuple(i + 1 for i, k in enumerate(kappa) if k < 0)
            if strict and clamped:
                raise ParameterError(
                    f"lambda={kernel.lam} makes the critical kernel negative on shells {clamped}; "
                    "the clamp must be inactive for every shell"
                )
            p_crit = [-mpmath.expm1(-max(k, 0)) for k in kappa]
            mp = {"zeta": zeta, "rho": rhos, "kappa": kappa, "p_crit": p_crit}
            p_minus = t_n = q = None
            if kernel.theta is not None:
                cut = mpmath.power(L, -mpmath.mpf(n) * kernel.theta)
                rho_minus = [max(r - cut, 0) for r in rhos]
                pm = [-mpmath.expm1(-r / zeta) for r in rho_minus]
                mp.update(rho_minus=rho_minus, p_minus=pm, cut=cut)
                p_minus = np.array([float(x) for x in pm])
                expo = cut / zeta + window
                mp["sprinkle_exponent"] = expo
                if expo >= 0:
                    mp["t"] = -mpmath.expm1(-expo)
                    t_n = float(mp["t"])
                q = float(lam + mpmath.power(L, n * (mpmath.mpf(4) * d / 3 - kernel.theta)) / zeta)
        return cls(
            lattice=lattice,
            kernel=kernel,
            zeta_n=float(zeta),
            prob_minus=p_minus,
            prob_critical=np.array([float(x) for x in p_crit]),
            sprinkle_t=t_n,
            q=q,
            critical_clamped=clamped,
            _mp=mp,
        )

    @property
    def n(self) -> int:
        return self.lattice.n

    def mp(self, key):
        return self._mp[key]

    def scaled_probs(self, eps: float) -> np.ndarray:
        """Edge probabilities ``1 - exp(-(1 + eps) rho / zeta)`` of the off-critical family."""
        if not eps > -1:
            raise ParameterError(f"eps must exceed -1, got {eps}")
        with mpmath.workdps(MP_DPS):
            z = self._mp["zeta"]
            return np.array([float(-mpmath.expm1(-(1 + mpmath.mpf(eps)) * r / z)) for r in self._mp["rho"]])


def _check_shell(i: int, params: ModelParams) -> None:
    if not 1 <= i <= params.n:
        raise ParameterError(f"shell {i} outside [1, {params.n}]")


def _need_theta(params: ModelParams) -> None:
    if params.prob_minus is None:
        raise ParameterError("theta is unset: barely-subcritical quantities are undefined")


def edge_prob_minus(i: int, params: ModelParams) -> float:
    _check_shell(i, params)
    _need_theta(params)
    return float(params.prob_minus[i - 1])


def edge_prob_critical(i: int, params: ModelParams) -> float:
    _check_shell(i, params)
    return float(params.prob_critical[i - 1])


def sprinkle_prob(params: ModelParams) -> float:
    _need_theta(params)
    if params.sprinkle_t is None:
        raise ParameterError(
            "sprinkle exponent is negative for this lambda: the two-stage construction is invalid"
        )
    return params.sprinkle_t


def branching_mean(j: int, params: ModelParams, exact: bool = False):
    """Mean offspring of the dominating tree restricted to the level-``j`` ball."""
    _check_shell(j, params)
    _need_theta(params)
    D = params.lattice.base
    with mpmath.workdps(MP_DPS):
        m = mpmath.fsum(
            (D - 1) * mpmath.mpf(D) ** (i - 1) * params._mp["p_minus"][i - 1] for i in range(1, j + 1)
        )
    return m if exact else float(m)


def branching_gap_identity(params: ModelParams) -> tuple:
    """Both sides of ``1 - m_n = (L^(nd) - 2) (exp(L^(-n theta) / zeta) - 1)`` in extended precision."""
    _need_theta(params)
    with mpmath.workdps(MP_DPS):
        lhs = 1 - branching_mean(params.n, params, exact=True)
        rhs = (params.lattice.num_vertices - 2) * mpmath.expm1(params._mp["cut"] / params._mp["zeta"])
    return lhs, rhs


# --- torus ---------------------------------------------------------------------------


def solve_zeta_torus_mp(spec: TorusSpec, kernel: KernelSpec):
    if spec.m < 3:
        raise ParameterError("torus normalization needs m >= 3")
    rhs = spec.num_vertices - 2
    with mpmath.workdps(MP_DPS):
        classes = range(1, spec.max_class + 1)
        counts = [mpmath.mpf(torus_class_count(k, spec)) for k in classes]
        rhos = [kernel.rho(k) for k in classes]

        def lhs(z):
            return mpmath.fsum(c * mpmath.exp(-r / z) for c, r in zip(counts, rhos))

        guess = mpmath.power(spec.m, spec.d - kernel.alpha)
        return _bisect_increasing(lhs, rhs, guess)


def solve_zeta_torus(spec: TorusSpec, kernel: KernelSpec) -> float:
    return float(solve_zeta_torus_mp(spec, kernel))


def torus_probs(spec: TorusSpec, kernel: KernelSpec, lam: float = 0.0, which: str = "critical",
                theta_prime: Optional[float] = None, zeta: Optional[float] = None) -> np.ndarray:
    """Edge probability per L-infinity distance class ``k = 1..floor(m/2)``.

    ``which="minus"`` uses ``max((J - m**-theta_prime) / zeta, 0)`` with
    ``theta_prime`` in ``(alpha, d)``.
    """
    with mpmath.workdps(MP_DPS):
        z = mpmath.mpf(zeta) if zeta is not None else solve_zeta_torus_mp(spec, kernel)
        rhos = [kernel.rho(k) for k in range(1, spec.max_class + 1)]
        if which == "critical":
            window = mpmath.mpf(lam) * mpmath.power(spec.m, -mpmath.mpf(4) * spec.d / 3)
            expo = [max(r / z + window, 0) for r in rhos]
        elif which == "minus":
            if theta_prime is None or not kernel.alpha < theta_prime < spec.d:
                raise ParameterError("theta_prime must lie in (alpha, d)")
            cut = mpmath.power(spec.m, -mpmath.mpf(theta_prime))
            expo = [max((r - cut) / z, 0) for r in rhos]
        else:
            raise ParameterError(f"unknown torus table {which!r}")
        return np.array([float(-mpmath.expm1(-e)) for e in expo])
