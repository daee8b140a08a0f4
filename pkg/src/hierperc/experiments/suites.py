"""Suite orchestration: replicate farming, artifacts and the run manifest."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .. import __version__
from ..branching import COUPLING_MAX_VERTICES, coupled_replicate, sample_tree
from ..coalescent import sample_limit
from ..errors import HierPercError, InsufficientSamplesError, ParameterError
from ..estimators import (
    ShellEstimate,
    a0,
    assemble_diagnostics,
    delta_estimates,
    diagnostic_replicate,
    summarize_sweep,
    two_point_hits,
)
from ..geometry import TorusSpec
from ..graphstats import NOT_COMPUTED, ComponentGraph, component_row, diameter_info, shortest_cycle, surplus
from ..kernel import branching_mean, minus_threshold, torus_probs
from ..rng import RngPolicy
from ..sampler import sample_stratified, sample_torus
from .compare import compare_laws
from .config import ExperimentConfig
from .output import write_csv, write_jsonl

WORKERS_ENV = "HIERPERC_WORKERS"
TWO_POINT_CHUNK = 2000


class ReplicateFailure(HierPercError, RuntimeError):
    """A module error inside one replicate; carries the seed needed to replay it."""


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        k = int(raw)
    except ValueError as exc:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if k < 1:
        raise ParameterError(f"{WORKERS_ENV} must be at least 1")
    return k


def _guarded(task):
    fn, cfg, key = task
    try:
        return fn(cfg, *key)
    except Exception as exc:  # re-raised with the replay coordinates attached
        raise ReplicateFailure(
            f"{type(exc).__name__}: {exc} [master_seed={cfg.master_seed}, task={key}]") from exc


def pmap(fn: Callable, cfg: ExperimentConfig, keys: list) -> list:
    """Apply ``fn(cfg, *key)`` to every key, in order, on the worker pool."""
    tasks = [(fn, cfg, key) for key in keys]
    k = worker_count()
    if k == 1 or len(tasks) < 2:
        return [_guarded(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=k) as pool:
        return list(pool.map(_guarded, tasks, chunksize=max(1, len(tasks) // (4 * k))))


@lru_cache(maxsize=64)
def _params(cfg: ExperimentConfig, n: int, lam: float | None = None):
    return cfg.params(n, lam)


def _rng(cfg: ExperimentConfig, *key: int) -> RngPolicy:
    """Independent stream family per lattice size (or torus side, or lambda index)."""
    return RngPolicy(cfg.master_seed).child(*key)


# --- per-replicate workers -------------------------------------------------------------


def _critical_window_rep(cfg, n, r):
    params = _params(cfg, n)
    s = sample_stratified(params, "critical", _rng(cfg, n), r)
    L, d = cfg.L, cfg.d
    size_scale = float(L) ** (-2 * n * d / 3)
    dist_scale = float(L) ** (-n * d / 3)
    sizes = s.component_table.sizes
    row = {"n": n, "replicate": r}
    for i in range(cfg.largest):
        row[f"c{i + 1}_scaled"] = float(sizes[i]) * size_scale if i < len(sizes) else 0.0
    g = ComponentGraph.from_sample(s, 0)
    diam, exact = diameter_info(g)
    girth = shortest_cycle(g)
    row.update(c1=int(sizes[0]), diam1_scaled=diam * dist_scale, diam1_exact=exact,
               surplus1=surplus(g), girth1=girth,
               girth1_scaled=None if girth is None else girth * dist_scale)
    return row


def _surplus_girth_rep(cfg, n, r):
    params = _params(cfg, n)
    rng = _rng(cfg, n)
    s = sample_stratified(params, "critical", rng, r)
    row = component_row(s, 0, cfg.surplus_cap, rng.stream(r, "aggregates"))
    girth = row["girth"]
    scale = float(cfg.L) ** (-n * cfg.d / 3)
    return {"n": n, "replicate": r, "c1_scaled": row["size"] * float(cfg.L) ** (-2 * n * cfg.d / 3),
            "surplus1": row["surplus"], "girth1": girth,
            "girth1_scaled": None if girth is None else girth * scale,
            "longest_cycle1": "not_computed" if row["longest_cycle"] is NOT_COMPUTED
            else row["longest_cycle"],
            "diameter1": row["diameter"]}


def _limit_rep(cfg, lam, r):
    ls = sample_limit(lam, _rng(cfg, *_lam_key(lam)).stream(r, "limit"), grid_dt=cfg.grid_dt)
    return {"lambda": lam, "replicate": r, "gamma": ls.gamma.tolist(),
            "surplus": ls.surplus_counts.tolist(), "open_at_horizon": ls.open_at_horizon}


def _lam_key(lam: float) -> tuple:
    # lambda as an exact integer pair so the stream family does not depend on formatting
    num, den = float(lam).as_integer_ratio()
    return (0, abs(num), den, int(num < 0))


def _diagnostics_rep(cfg, n, r):
    return diagnostic_replicate(_params(cfg, n), _rng(cfg, n), r)


def _two_point_chunk(cfg, n, start, stop):
    return two_point_hits(_params(cfg, n), _rng(cfg, n), range(start, stop))


def _branching_rep(cfg, n, r):
    params = _params(cfg, n)
    rng = _rng(cfg, n)
    rec = coupled_replicate(params, rng.stream(r, "coupling"), size_cap=cfg.size_cap)
    tree = sample_tree(n, params, rng.stream(r, "branching"), size_cap=cfg.size_cap)
    return rec, json.loads(tree.to_json())


def _sweep_rep(cfg, n, eps, stream):
    params = _params(cfg, n)
    s = sample_stratified(params, "scaled", _rng(cfg, n), stream, eps=eps)
    c1 = int(s.component_table.sizes[0])
    return {"eps": eps, "n": n, "replicate": stream, "c1": c1,
            "sub_ratio": c1 * eps**2 / n if eps != 0 else None,
            "super_fraction": c1 / params.lattice.num_vertices}


def _torus_rep(cfg, m, r):
    spec = TorusSpec(m, cfg.d)
    probs = _torus_table(cfg, m)
    s = sample_torus(spec, probs, _rng(cfg, m), r)
    V = spec.num_vertices
    sizes = s.component_table.sizes
    row = {"m": m, "replicate": r}
    for i in range(cfg.largest):
        row[f"c{i + 1}_scaled"] = float(sizes[i]) * V ** (-2 / 3) if i < len(sizes) else 0.0
    g = ComponentGraph.from_sample(s, 0)
    diam, _ = diameter_info(g)
    row.update(diam1_scaled=diam * V ** (-1 / 3), surplus1=surplus(g))
    return row


@lru_cache(maxsize=16)
def _torus_table(cfg, m):
    return torus_probs(TorusSpec(m, cfg.d), cfg.kernel(), lam=cfg.lam)


# --- suites ----------------------------------------------------------------------------


@dataclass
class RunManifest:
    suite: str
    config_hash: str
    code_version: str
    master_seed: int
    seeds: list
    wall_clock: float
    files: list
    summary: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


class _Run:
    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.files = []
        self.seeds = []
        self.summary = []
        self.meta = {**cfg.header(), "config_hash": cfg.digest(), "code_version": __version__}

    def csv(self, name, rows, columns=None):
        self.files.append(str(write_csv(self.out / name, rows, self.meta, columns)))

    def jsonl(self, name, records):
        self.files.append(str(write_jsonl(self.out / name, records, self.meta)))

    def note_seeds(self, label, replicates, stage):
        self.seeds.append({"key": label, "replicates": [0, replicates], "stage": stage})


def _quantiles(values) -> dict:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if len(v) == 0:
        return {"q25": None, "median": None, "q75": None}
    q = np.percentile(v, [25, 50, 75])
    return {"q25": float(q[0]), "median": float(q[1]), "q75": float(q[2])}


def _suite_critical_window(run: _Run):
    cfg = run.cfg
    rows = pmap(_critical_window_rep, cfg, [(n, r) for n in cfg.n for r in range(cfg.replicates)])
    run.csv("critical_window.csv", rows)
    for n in cfg.n:
        sel = [r for r in rows if r["n"] == n]
        for stat in [f"c{i + 1}_scaled" for i in range(cfg.largest)] + ["diam1_scaled", "surplus1",
                                                                         "girth1_scaled"]:
            run.summary.append({"n": n, "statistic": stat, **_quantiles(r[stat] for r in sel)})
        run.note_seeds(f"n={n}", cfg.replicates, "critical")
    run.csv("critical_window_summary.csv", run.summary)


def _suite_surplus_girth(run: _Run):
    cfg = run.cfg
    rows = pmap(_surplus_girth_rep, cfg, [(n, r) for n in cfg.n for r in range(cfg.replicates)])
    run.csv("surplus_girth.csv", rows)
    ref = pmap(_limit_rep, cfg, [(cfg.lam, r) for r in range(cfg.limit_replicates)])
    run.jsonl("coalescent_reference.jsonl", ref)
    gamma1 = np.array([rec["gamma"][0] if rec["gamma"] else 0.0 for rec in ref])
    spl1 = np.array([rec["surplus"][0] if rec["surplus"] else 0 for rec in ref], dtype=np.int64)
    boot = RngPolicy(cfg.master_seed).stream(0, "bootstrap")
    for n in cfg.n:
        sel = [r for r in rows if r["n"] == n]
        run.note_seeds(f"n={n}", cfg.replicates, "critical")
        for stat, a, b in (("ks", [r["c1_scaled"] for r in sel], gamma1),
                           ("tv", np.array([r["surplus1"] for r in sel], dtype=np.int64), spl1)):
            target = "c1_scaled~gamma1" if stat == "ks" else "surplus1~limit_surplus1"
            try:
                rep = compare_laws(a, b, stat, boot)
                run.summary.append({"n": n, "comparison": target, **rep.as_dict()})
            except InsufficientSamplesError as exc:
                run.summary.append({"n": n, "comparison": target, "statistic": stat,
                                    "value": None, "note": str(exc)})
    run.note_seeds(f"lambda={cfg.lam}", cfg.limit_replicates, "limit")
    run.csv("comparison.csv", run.summary,
            ["n", "comparison", "statistic", "value", "ci_low", "ci_high", "n_a", "n_b", "note"])


def _suite_coalescent_reference(run: _Run):
    cfg = run.cfg
    lams = cfg.lams or (cfg.lam,)
    recs = pmap(_limit_rep, cfg, [(lam, r) for lam in lams for r in range(cfg.limit_replicates)])
    run.jsonl("coalescent_reference.jsonl", recs)
    for lam in lams:
        sel = [r for r in recs if r["lambda"] == lam]
        run.summary.append({"lambda": lam, "statistic": "gamma1",
                            **_quantiles(r["gamma"][0] if r["gamma"] else 0.0 for r in sel)})
        run.summary.append({"lambda": lam, "statistic": "surplus1",
                            **_quantiles(r["surplus"][0] if r["surplus"] else 0 for r in sel)})
        run.note_seeds(f"lambda={lam}", cfg.limit_replicates, "limit")
    run.csv("coalescent_summary.csv", run.summary)


def _suite_diagnostics(run: _Run):
    cfg = run.cfg
    lams = cfg.lams or (cfg.lam,)
    per_rep = []
    for n in cfg.n:
        records = pmap(_diagnostics_rep, cfg, [(n, r) for r in range(cfg.replicates)])
        reports = assemble_diagnostics(_params(cfg, n), records, lams, cfg.master_seed)
        for rep in reports:
            run.summary.extend(rep.summary_rows())
            for r in range(rep.replicates):
                per_rep.append({"n": n, "lambda": rep.lam, "replicate": r,
                                **{s: float(getattr(rep, s)[r]) for s in rep.STATISTICS}})
        run.note_seeds(f"n={n}", cfg.replicates, "minus")
    run.csv("diagnostics.csv", per_rep)
    run.csv("diagnostics_summary.csv", run.summary)


def _suite_two_point(run: _Run):
    cfg = run.cfg
    rows = []
    for n in cfg.n:
        params = _params(cfg, n)
        keys = [(n, s, min(s + TWO_POINT_CHUNK, cfg.replicates))
                for s in range(0, cfg.replicates, TWO_POINT_CHUNK)]
        hits = np.sum(pmap(_two_point_chunk, cfg, keys), axis=0)
        est = ShellEstimate.from_hits(hits, cfg.replicates, params.lattice)
        delta, tilde = delta_estimates(est, params)
        for i in range(n):
            rows.append({"n": n, "shell": i + 1, "distance": cfg.L ** (i + 1),
                         "p_hat": float(est.p_hat[i]), "se": float(est.se[i]),
                         "hits": int(est.hits[i]), "p_edge": float(params.prob_minus[i])})
        top = int(a0(params.kernel) * n)
        slope = est.slope(params.lattice, top) if top >= 2 and np.all(est.p_hat[:top] > 0) else None
        run.summary.append({"n": n, "delta_n": delta, "delta_tilde_n": tilde, "a0": a0(params.kernel),
                            "regression_shells": top, "slope": slope})
        run.note_seeds(f"n={n}", cfg.replicates, "minus")
    run.csv("two_point.csv", rows)
    run.csv("two_point_summary.csv", run.summary)


def _suite_branching(run: _Run):
    cfg = run.cfg
    trees = []
    rows = []
    for n in cfg.n:
        params = _params(cfg, n)
        if params.lattice.num_vertices > COUPLING_MAX_VERTICES:
            raise ParameterError(f"branching suite limited to {COUPLING_MAX_VERTICES} vertices")
        out = pmap(_branching_rep, cfg, [(n, r) for r in range(cfg.replicates)])
        for r, (rec, tree) in enumerate(out):
            rows.append({"n": n, "replicate": r, **rec})
            trees.append(tree)
        size_v = sum(rec["cluster_size"] > rec["tree_size"] for rec, _ in out)
        diam_v = sum(rec["cluster_diameter"] > 2 * rec["tree_height"] for rec, _ in out)
        m_n = float(branching_mean(n, params))
        run.summary.append({"n": n, "replicates": cfg.replicates, "size_violations": size_v,
                            "diameter_violations": diam_v, "m_n": m_n,
                            "mean_tree_size": float(np.mean([t["total_size"] for _, t in out])),
                            "mean_tree_size_theory": 1 / (1 - m_n) if m_n < 1 else None,
                            "truncated": sum(rec["truncated"] for rec, _ in out)})
        run.note_seeds(f"n={n}", cfg.replicates, "coupling+branching")
    run.jsonl("branching.jsonl", trees)
    run.csv("coupling.csv", rows)
    run.csv("branching_summary.csv", run.summary)


def _suite_phase_sweep(run: _Run):
    cfg = run.cfg
    keys = []
    stream = 0
    for n in cfg.n:
        for eps in cfg.eps:
            for _ in range(cfg.replicates):
                keys.append((n, eps, stream))
                stream += 1
    rows = pmap(_sweep_rep, cfg, keys)
    run.csv("phase_sweep.csv", rows)
    run.summary.extend(summarize_sweep([{**r, "sub_ratio": r["sub_ratio"] if r["sub_ratio"] is not None
                                         else float("nan")} for r in rows]))
    run.seeds.append({"key": "sweep", "replicates": [0, stream], "stage": "scaled"})
    run.csv("phase_sweep_summary.csv", run.summary)


def _suite_torus(run: _Run):
    cfg = run.cfg
    rows = pmap(_torus_rep, cfg, [(m, r) for m in cfg.m for r in range(cfg.replicates)])
    run.csv("torus.csv", rows)
    for m in cfg.m:
        sel = [r for r in rows if r["m"] == m]
        for stat in ("c1_scaled", "diam1_scaled", "surplus1"):
            run.summary.append({"m": m, "statistic": stat, **_quantiles(r[stat] for r in sel)})
        run.note_seeds(f"m={m}", cfg.replicates, "torus")
    run.csv("torus_summary.csv", run.summary)


SUITE_RUNNERS = {
    "phase-sweep": _suite_phase_sweep,
    "critical-window": _suite_critical_window,
    "surplus-girth": _suite_surplus_girth,
    "diagnostics": _suite_diagnostics,
    "two-point": _suite_two_point,
    "branching": _suite_branching,
    "coalescent-reference": _suite_coalescent_reference,
    "torus": _suite_torus,
}


def run_suite(cfg: ExperimentConfig, output_dir=None, echo: Callable | None = print) -> RunManifest:
    """Run one suite; artifacts and ``manifest.json`` land in ``output_dir``.

    Existing files are never overwritten, so a second run into the same directory fails.
    """
    cfg.validate()
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(cfg, out)
    t0 = time.perf_counter()
    SUITE_RUNNERS[cfg.suite](run)
    manifest = RunManifest(cfg.suite, cfg.digest(), __version__, cfg.master_seed, run.seeds,
                           time.perf_counter() - t0, run.files, run.summary)
    with open(out / "manifest.json", "x", encoding="utf-8") as fh:
        json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True, default=_jsonable)
    if echo is not None:
        echo(format_table(run.summary))
    return manifest


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def format_table(rows: list) -> str:
    if not rows:
        return "(no summary rows)"
    cols = list(dict.fromkeys(k for r in rows for k in r))

    def cell(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        return "" if v is None else str(v)

    body = [[cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)


def derived_quantities(cfg: ExperimentConfig) -> list:
    """Rows printed by ``validate``: normalization, branching mean, sprinkle probability, q."""
    rows = []
    if cfg.suite == "torus":
        from ..kernel import solve_zeta_torus

        for m in cfg.m:
            spec = TorusSpec(m, cfg.d)
            rows.append({"m": m, "vertices": spec.num_vertices,
                         "zeta_T": solve_zeta_torus(spec, cfg.kernel())})
        return rows
    if cfg.suite == "coalescent-reference":
        return [{"lambda": lam, "horizon": max(10.0, 4 * (1 + abs(lam))), "grid_dt": cfg.grid_dt}
                for lam in (cfg.lams or (cfg.lam,))]
    for n in cfg.n:
        p = _params(cfg, n)
        row = {"n": n, "vertices": p.lattice.num_vertices, "zeta_n": p.zeta_n}
        if p.prob_minus is not None:
            m_n = branching_mean(n, p)
            row.update(m_n=float(m_n), one_minus_m_n=float(1 - m_n), t_n=p.sprinkle_t, q=p.q,
                       n0=minus_threshold(p.kernel, cfg.L))
        rows.append(row)
    return rows
