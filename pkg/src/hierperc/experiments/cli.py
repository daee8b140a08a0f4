"""``hierperc`` command line: validate, run, compare, dump-edges."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from ..errors import HierPercError
from ..geometry import LatticeSpec
from ..kernel import ModelParams
from ..rng import RngPolicy
from ..sampler import dump_edges, sample_stratified
from .compare import compare_laws
from .config import ExperimentConfig
from .output import read_csv, read_jsonl
from .suites import WORKERS_ENV, derived_quantities, format_table, run_suite


def _load(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.load(path)
    except HierPercError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group(help=f"Hierarchical long-range percolation toolkit. Worker count: ${WORKERS_ENV}.")
def main():
    pass


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def validate(config):
    """Check CONFIG and print the derived quantities for every level."""
    cfg = _load(config)
    click.echo(f"config ok: suite={cfg.suite} hash={cfg.digest()[:12]}")
    click.echo(format_table(derived_quantities(cfg)))


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "-o", type=click.Path(file_okay=False), default=None,
              help="Output directory (overrides output_dir in the config).")
def run(config, output):
    """Run the suite described by CONFIG."""
    cfg = _load(config)
    try:
        manifest = run_suite(cfg, output, echo=click.echo)
    except HierPercError as exc:
        raise click.ClickException(str(exc)) from exc
    except FileExistsError as exc:
        raise click.ClickException(f"refusing to overwrite {exc.filename}") from exc
    click.echo(f"wrote {len(manifest.files)} files in {manifest.wall_clock:.1f}s")


def _column(path: str, column: str, where: tuple) -> np.ndarray:
    """Values of ``column`` from a CSV or JSONL result file.

    For JSONL list fields, ``name.k`` selects element ``k`` (missing entries are skipped).
    """
    filters = [w.split("=", 1) for w in where]
    if path.endswith(".jsonl"):
        _, recs = read_jsonl(path)
        name, _, idx = column.partition(".")
        out = []
        for rec in recs:
            if any(str(rec.get(k)) != v for k, v in filters):
                continue
            val = rec.get(name)
            if idx:
                val = val[int(idx)] if isinstance(val, list) and len(val) > int(idx) else None
            if val is not None:
                out.append(val)
        return np.asarray(out)
    _, rows = read_csv(path)
    vals = [r[column] for r in rows if all(r.get(k) == v for k, v in filters) and r.get(column) not in ("", None)]
    if not vals:
        return np.asarray([])
    try:
        return np.asarray([int(v) for v in vals])
    except ValueError:
        return np.asarray([float(v) for v in vals])


@main.command()
@click.argument("file_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("file_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--column", "-c", required=True, help="Column in FILE_A (and FILE_B unless --column-b).")
@click.option("--column-b", default=None)
@click.option("--statistic", type=click.Choice(["ks", "tv"]), default="ks")
@click.option("--where-a", multiple=True, help="key=value row filter for FILE_A.")
@click.option("--where-b", multiple=True, help="key=value row filter for FILE_B.")
@click.option("--seed", default=0, show_default=True, help="Bootstrap seed.")
def compare(file_a, file_b, column, column_b, statistic, where_a, where_b, seed):
    """Distance between the laws of a column in two result files."""
    a = _column(file_a, column, where_a)
    b = _column(file_b, column_b or column, where_b)
    try:
        rep = compare_laws(a, b, statistic, RngPolicy(seed).stream(0, "bootstrap"))
    except HierPercError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(json.dumps(rep.as_dict()))


@main.command("dump-edges")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "level", type=int, default=None, help="Level (default: first n of the config).")
@click.option("--replicate", type=int, default=0, show_default=True)
@click.option("--stage", type=click.Choice(["minus", "critical", "scaled"]), default="critical")
@click.option("--eps", type=float, default=None, help="Required for --stage scaled.")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
def dump_edges_cmd(config, level, replicate, stage, eps, out):
    """Write the edge list of one sample."""
    cfg = _load(config)
    n = level if level is not None else cfg.n[0]
    try:
        params = ModelParams.build(LatticeSpec(cfg.L, cfg.d, n), cfg.kernel())
        sample = sample_stratified(params, stage, RngPolicy(cfg.master_seed).child(n), replicate, eps=eps)
    except HierPercError as exc:
        raise click.ClickException(str(exc)) from exc
    if Path(out).exists():
        raise click.ClickException(f"refusing to overwrite {out}")
    dump_edges(sample, out, {"config_hash": cfg.digest()})
    click.echo(f"{sum(len(a) for a, _ in sample.edges.values())} edges -> {out}")


if __name__ == "__main__":
    sys.exit(main())
