"""Monte-Carlo estimators: shell-resolved two-point function, the triangle-type sums,
criticality diagnostics for the barely-subcritical graph and order parameters of the
off-critical family."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientSamplesError, ParameterError
from .geometry import LatticeSpec, shell_size
from .graphstats import aggregates
from .kernel import KernelSpec, ModelParams
from .rng import RngPolicy
from .sampler import explore_cluster, sample_stratified


def vertex_levels(v, lattice: LatticeSpec) -> np.ndarray:
    """Shell of each vertex relative to the origin (0 for the origin itself)."""
    v = np.asarray(v, dtype=np.int64)
    lev = np.zeros(v.shape, dtype=np.int64)
    D = lattice.base
    power = 1
    for i in range(1, lattice.n + 1):
        lev[v >= power] = i
        power *= D
    return lev


@dataclass
class ShellEstimate:
    """``p_hat[i-1]`` estimates the connection probability from the origin to a vertex
    of shell ``i``; ``se`` is ``sqrt(p(1-p)/replicates)``, an upper bound for the
    standard error of a per-replicate shell fraction."""

    p_hat: np.ndarray
    se: np.ndarray
    replicates: int
    hits: np.ndarray = field(repr=False)

    @classmethod
    def from_hits(cls, hits, replicates: int, lattice: LatticeSpec) -> "ShellEstimate":
        hits = np.asarray(hits, dtype=np.int64)
        sizes = np.array([shell_size(i, lattice) for i in range(1, lattice.n + 1)], dtype=float)
        p = hits / (replicates * sizes)
        return cls(p, np.sqrt(p * (1 - p) / replicates), replicates, hits)

    def slope(self, lattice: LatticeSpec, max_shell: int) -> float:
        """Least-squares slope of ``log p_hat_i`` against ``log L**i`` over ``i <= max_shell``."""
        i = np.arange(1, max_shell + 1)
        p = self.p_hat[:max_shell]
        if np.any(p <= 0):
            raise InsufficientSamplesError("zero estimate on a regression shell")
        return float(np.polyfit(i * np.log(lattice.L), np.log(p), 1)[0])


def a0(kernel: KernelSpec) -> float:
    """Exponent bounding the shells where the two-point function still decays."""
    if kernel.theta is None:
        raise ParameterError("a0 needs theta")
    return 2.0 - kernel.theta / kernel.alpha


def _shell_hits(cluster, lattice: LatticeSpec) -> np.ndarray:
    lev = vertex_levels(cluster, lattice)
    return np.bincount(lev, minlength=lattice.n + 1)[1:]


def two_point_hits(params: ModelParams, rng: RngPolicy, replicates, root: int = 0) -> np.ndarray:
    """Summed per-shell hit counts over the replicate ids in ``replicates``."""
    if params.prob_minus is None:
        raise ParameterError("two-point estimation needs theta")
    lat = params.lattice
    hits = np.zeros(lat.n, dtype=np.int64)
    for r in replicates:
        exp = explore_cluster(lat, params.prob_minus, root, rng.stream(r, "minus"))
        hits += _shell_hits(_translate(np.asarray(exp.order, dtype=np.int64), root, lat), lat)
    return hits


def two_point(params: ModelParams, replicates: int, rng: RngPolicy, root: int = 0) -> ShellEstimate:
    """Shell-averaged connection probabilities in the barely-subcritical graph.

    Only the cluster of ``root`` is grown, which has the same law as reading it off a
    full sample.  A non-zero ``root`` is mapped to the origin by the digit-wise group
    translation, an automorphism of the lattice.
    """
    hits = two_point_hits(params, rng, range(replicates), root)
    return ShellEstimate.from_hits(hits, replicates, params.lattice)


def _translate(v: np.ndarray, root: int, lattice: LatticeSpec) -> np.ndarray:
    """Digit-wise subtraction of ``root`` modulo the base."""
    if root == 0:
        return v
    D = lattice.base
    out = np.zeros_like(v)
    power = 1
    r = root
    for _ in range(lattice.n):
        out += ((v // power - r % D) % D) * power
        r //= D
        power *= D
    return out


def delta_estimates(est: ShellEstimate, params: ModelParams) -> tuple:
    """Shell decompositions of the two triangle-type sums.

    ``tilde = zeta^-1 sum_i |shell i| p_i rho(L^i)`` and ``delta`` sums
    ``p(x) p(y) rho(|x - y|) / zeta`` over distinct non-origin ``x, y``.  Points in
    different shells are at distance ``L^max(i, j)``.  For ``x`` in shell ``i`` the
    other points of the same shell split as ``(D-2) D^(i-1)`` at distance ``L^i`` and
    ``(D-1) D^(k-1)`` at distance ``L^k`` for each ``k < i``.
    """
    lat = params.lattice
    n, D, L = lat.n, lat.base, lat.L
    p = np.asarray(est.p_hat, dtype=float)
    S = np.array([shell_size(i, lat) for i in range(1, n + 1)], dtype=float)
    rho = np.array([float(params.kernel.rho(L**i)) for i in range(1, n + 1)])
    zeta = params.zeta_n
    tilde = float(np.sum(S * p * rho)) / zeta
    w = S * p
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += w[i] * w[j] * rho[max(i, j)]
        same = (D - 2) * D**i * rho[i] + sum((D - 1) * D**k * rho[k] for k in range(i))
        total += w[i] * p[i] * same
    return total / zeta, tilde


@dataclass
class DiagnosticsReport:
    """Per-replicate criticality statistics of the barely-subcritical graph."""

    n: int
    lam: float
    replicates: int
    master_seed: int
    q_minus_inv_sigma2: np.ndarray
    sigma_ratio: np.ndarray
    tau_rescaled: np.ndarray
    order_parameter: np.ndarray
    delta_n: float
    delta_tilde_n: float
    two_point: ShellEstimate = field(repr=False)

    STATISTICS = ("q_minus_inv_sigma2", "sigma_ratio", "tau_rescaled", "order_parameter")

    def median(self, name: str) -> float:
        return float(np.median(getattr(self, name)))

    def iqr(self, name: str) -> float:
        lo, hi = np.percentile(getattr(self, name), [25, 75])
        return float(hi - lo)

    def summary_rows(self) -> list:
        rows = []
        for name in self.STATISTICS:
            vals = getattr(self, name)
            for qname, qv in zip(("q25", "median", "q75"), np.percentile(vals, [25, 50, 75])):
                rows.append({"n": self.n, "lambda": self.lam, "statistic": name,
                             "quantile": qname, "value": float(qv)})
        rows.append({"n": self.n, "lambda": self.lam, "statistic": "delta_n", "quantile": "mean",
                     "value": self.delta_n})
        rows.append({"n": self.n, "lambda": self.lam, "statistic": "delta_tilde_n",
                     "quantile": "mean", "value": self.delta_tilde_n})
        return rows


def tau_scale(params: ModelParams) -> float:
    lat, ker = params.lattice, params.kernel
    return float(lat.L) ** (lat.n * (7 * lat.d / 3 - 2 * ker.theta)) / params.zeta_n**2


def diagnostic_replicate(params: ModelParams, rng: RngPolicy, r: int) -> tuple:
    """``(1/sigma_2, sigma_3/sigma_2^3, tau, |C_1|/V, shell hits of the origin's cluster)``."""
    lat = params.lattice
    sample = sample_stratified(params, "minus", rng, r)
    agg = aggregates(sample, rng.stream(r, "aggregates"))
    table = sample.component_table
    hits = _shell_hits(table.members(table.labels[0]), lat)
    return (1.0 / agg.sigma_2, agg.sigma_3 / agg.sigma_2**3, agg.tau,
            table.sizes[0] / lat.num_vertices, hits)


def assemble_diagnostics(params: ModelParams, records: list, lams, master_seed: int) -> list:
    lat = params.lattice
    inv_s2, ratio, tau, order = (np.array([rec[k] for rec in records]) for k in range(4))
    hits = np.sum([rec[4] for rec in records], axis=0)
    est = ShellEstimate.from_hits(hits, len(records), lat)
    delta, tilde = delta_estimates(est, params)
    q0 = params.q - params.kernel.lam
    tau_r = tau * tau_scale(params)
    return [DiagnosticsReport(lat.n, float(lam), len(records), master_seed, q0 + lam - inv_s2,
                              ratio, tau_r, order, delta, tilde, est) for lam in lams]


def criticality_diagnostics(params: ModelParams, replicates: int, rng: RngPolicy,
                            lams: Optional[Sequence[float]] = None) -> list:
    """Sample the barely-subcritical graph and evaluate the three criticality statistics.

    The graph does not depend on lambda, which only shifts ``q``; one set of samples
    therefore serves every entry of ``lams`` (default: the kernel's own lambda).
    Returns one :class:`DiagnosticsReport` per lambda.
    """
    if params.prob_minus is None or params.q is None:
        raise ParameterError("criticality diagnostics need theta")
    lams = [params.kernel.lam] if lams is None else list(lams)
    records = [diagnostic_replicate(params, rng, r) for r in range(replicates)]
    return assemble_diagnostics(params, records, lams, rng.master_seed)


def _params_for(base: ModelParams, n: int) -> ModelParams:
    lat = LatticeSpec(base.lattice.L, base.lattice.d, n)
    return ModelParams.build(lat, base.kernel, strict=False)


def phase_sweep(params_base: ModelParams, epsilons: Sequence[float], n_values: Sequence[int],
                replicates: int, rng: RngPolicy) -> list:
    """Largest-component sizes of the graph with edge probabilities ``1 - exp(-(1+eps) rho/zeta)``.

    One row per ``(eps, n, replicate)`` with ``|C_1|`` and its two normalizations.
    """
    rows = []
    stream = 0  # replicate ids run consecutively over the whole sweep
    for n in n_values:
        params = _params_for(params_base, n)
        V = params.lattice.num_vertices
        for eps in epsilons:
            if not eps > -1:
                raise ParameterError(f"eps must exceed -1, got {eps}")
            probs = params.scaled_probs(eps)
            for r in range(replicates):
                s = sample_stratified(params, "scaled", rng, stream, probs=probs)
                stream += 1
                c1 = int(s.component_table.sizes[0])
                rows.append({
                    "eps": float(eps), "n": n, "replicate": r, "c1": c1,
                    "sub_ratio": c1 / (n * eps**-2) if eps != 0 else float("nan"),
                    "super_fraction": c1 / V,
                })
    return rows


def summarize_sweep(rows: list) -> list:
    """Per ``(eps, n)``: max of the subcritical ratio, 5th percentile of the giant fraction."""
    out = []
    keys = sorted({(r["eps"], r["n"]) for r in rows})
    for eps, n in keys:
        sel = [r for r in rows if r["eps"] == eps and r["n"] == n]
        sub = np.array([r["sub_ratio"] for r in sel])
        sup = np.array([r["super_fraction"] for r in sel])
        out.append({"eps": eps, "n": n, "replicates": len(sel), "max_sub_ratio": float(sub.max()),
                    "median_c1": float(np.median([r["c1"] for r in sel])),
                    "p05_super_fraction": float(np.percentile(sup, 5))})
    return out


@dataclass
class TailProfile:
    sizes: np.ndarray
    tail: np.ndarray  # fraction of vertices in components of size >= s
    rate: float
    r_squared: float


def cluster_tail_profile(params: ModelParams, stage: str, replicates: int, rng: RngPolicy,
                         eps: Optional[float] = None, min_count: int = 10) -> TailProfile:
    """Empirical ``s -> V^-1 #{v : |C(v)| >= s}`` averaged over replicates.

    The exponential rate and ``R^2`` come from a linear fit of ``log tail`` on ``s``
    over sizes supported by at least ``min_count`` vertex observations.
    """
    V = params.lattice.num_vertices
    weight = None
    for r in range(replicates):
        sizes = sample_stratified(params, stage, rng, r, eps=eps).component_table.sizes
        w = np.bincount(sizes, weights=sizes.astype(float))
        weight = w if weight is None else _padd(weight, w)
    # weight[s] = number of vertices in components of size exactly s, summed over replicates
    tail_counts = np.cumsum(weight[::-1])[::-1]
    s = np.arange(len(tail_counts))
    tail = tail_counts / (V * replicates)
    s, tail, tail_counts = s[1:], tail[1:], tail_counts[1:]
    keep = tail_counts >= min_count
    rate, r2 = float("nan"), float("nan")
    if keep.sum() >= 3:
        x, y = s[keep], np.log(tail[keep])
        coef = np.polyfit(x, y, 1)
        resid = y - np.polyval(coef, x)
        ss = np.sum((y - y.mean()) ** 2)
        rate = float(-coef[0])
        r2 = float(1 - np.sum(resid**2) / ss) if ss > 0 else 1.0
    return TailProfile(s, tail, rate, r2)


def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    a = a.copy()
    a[: len(b)] += b
    return a
