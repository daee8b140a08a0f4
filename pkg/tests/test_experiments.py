import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hierperc.errors import InsufficientSamplesError, ParameterError
from hierperc.experiments import ExperimentConfig, compare_laws, run_suite
from hierperc.experiments.cli import main
from hierperc.experiments.compare import ks_distance, tv_distance
from hierperc.experiments.output import read_csv, read_jsonl, write_csv
from hierperc.experiments.suites import WORKERS_ENV, worker_count
from hierperc.sampler import read_edges

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "critical-window": "n = 5, 6\nreplicates = 4\ntheta = 0.6",
    "surplus-girth": "n = 5\nreplicates = 4\nlimit_replicates = 4\ngrid_dt = 1e-3",
    "diagnostics": "n = 5\nreplicates = 4\ntheta = 0.6\nlams = -1, 0",
    "two-point": "n = 6\nreplicates = 50\ntheta = 0.6",
    "branching": "n = 5\nreplicates = 10\ntheta = 0.6",
    "phase-sweep": "n = 5, 6\nreplicates = 3\neps = -0.5, 0.5",
    "coalescent-reference": "lams = -1, 1\nlimit_replicates = 3\ngrid_dt = 1e-3",
    "torus": "m = 8\nreplicates = 3",
}


def cfg_text(suite, extra=""):
    """Small config text for ``suite``; ``extra`` lines override keys of the same name."""
    kv = {"suite": suite, "master_seed": "5"}
    for line in (SMALL[suite] + "\n" + extra).splitlines():
        if line.strip():
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
    return "".join(f"{k} = {v}\n" for k, v in kv.items())


def small_cfg(suite, extra=""):
    return ExperimentConfig.from_text(cfg_text(suite, extra))


# --- config -----------------------------------------------------------------------


def test_parse_comments_aliases_and_lists():
    cfg = ExperimentConfig.from_text(
        "# header comment\nsuite = diagnostics\ntheta = 0.6  # inline\nlambda = -1.5\n"
        "seed = 7\nn_values = 4, 5\nlams = -1, 0, 2\n")
    assert cfg.lam == -1.5 and cfg.master_seed == 7 and cfg.n == (4, 5)
    assert cfg.lams == (-1.0, 0.0, 2.0)


@pytest.mark.parametrize("text", [
    "suite = nope",
    "theta = 0.6",
    "suite = critical-window\nbogus = 1",
    "suite = critical-window\nreplicates = ten",
    "suite = critical-window\nreplicates = 0",
    "suite = diagnostics",
    "suite = critical-window\ntheta = 0.2",
    "suite = phase-sweep\neps = -1",
    "suite = torus",
    "suite = critical-window\nmaster_seed = -1",
    "suite = critical-window\nn = 6\nlambda = -1000",
    "suite = critical-window\nthis line has no delimiter",
    "suite = critical-window\nn = 5\nn = 6",
])
def test_rejects_bad_configs(text):
    with pytest.raises(ParameterError):
        ExperimentConfig.from_text(text)


def test_canonical_text_roundtrip():
    cfg = small_cfg("diagnostics")
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.digest() != small_cfg("diagnostics", "replicates = 5").digest()


def test_shipped_configs_validate():
    paths = sorted(CONFIGS.glob("*.cfg"))
    assert len(paths) == 8
    suites = {ExperimentConfig.load(p).suite for p in paths}
    assert len(suites) == 8


# --- comparison ---------------------------------------------------------------------


def test_distances():
    a = np.arange(200)
    assert ks_distance(a, a) == 0 and tv_distance(a, a) == 0
    assert ks_distance(np.zeros(200), np.ones(200)) == 1
    assert tv_distance(np.zeros(200, int), np.ones(200, int)) == 1
    with pytest.raises(ParameterError):
        tv_distance(np.full(200, 0.5), np.zeros(200))


def test_compare_laws_interval_and_minimum():
    gen = np.random.default_rng(0)
    a, b = gen.normal(size=500), gen.normal(0.5, size=500)
    rep = compare_laws(a, b, "ks", np.random.default_rng(1), bootstrap=300)
    assert rep.ci_low <= rep.value <= rep.ci_high
    assert rep.n_a == rep.n_b == 500
    same = compare_laws(np.zeros(100), np.zeros(100), "ks", bootstrap=50)
    assert same.value == same.ci_low == same.ci_high == 0
    half = np.r_[np.zeros(100), np.ones(100)]
    assert compare_laws(np.zeros(200), half, "ks", bootstrap=50).value == 0.5
    with pytest.raises(InsufficientSamplesError):
        compare_laws(np.zeros(99), np.zeros(100))
    with pytest.raises(ParameterError):
        compare_laws(a, b, "wasserstein")


# --- output -----------------------------------------------------------------------


def test_csv_roundtrip_and_write_once(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, [{"a": 1, "b": 0.1}, {"a": 2, "b": None}], {"k": "v"})
    meta, rows = read_csv(p)
    assert meta["k"] == "v" and meta["schema_version"] == "1"
    assert rows == [{"a": "1", "b": "0.1"}, {"a": "2", "b": ""}]
    with pytest.raises(FileExistsError):
        write_csv(p, [], {})


# --- suites -----------------------------------------------------------------------


@pytest.mark.parametrize("suite", sorted(SMALL))
def test_every_suite_runs(tmp_path, suite):
    cfg = small_cfg(suite)
    man = run_suite(cfg, tmp_path, echo=None)
    assert man.config_hash == cfg.digest() and man.files
    for f in man.files:
        assert Path(f).exists()
        if f.endswith(".csv"):
            meta, _ = read_csv(f)
            assert meta["config_hash"] == cfg.digest() and meta["master_seed"] == "5"
        else:
            meta, recs = read_jsonl(f)
            assert meta["config_hash"] == cfg.digest() and recs
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["suite"] == suite and data["seeds"]


def test_rerun_is_byte_identical_and_write_once(tmp_path):
    cfg = small_cfg("critical-window")
    run_suite(cfg, tmp_path / "a", echo=None)
    run_suite(cfg, tmp_path / "b", echo=None)
    for name in ("critical_window.csv", "critical_window_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with pytest.raises(FileExistsError):
        run_suite(cfg, tmp_path / "a", echo=None)


def test_worker_pool_matches_serial(tmp_path, monkeypatch):
    cfg = small_cfg("phase-sweep")
    run_suite(cfg, tmp_path / "serial", echo=None)
    monkeypatch.setenv(WORKERS_ENV, "2")
    run_suite(cfg, tmp_path / "pool", echo=None)
    for name in ("phase_sweep.csv", "phase_sweep_summary.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_worker_env_validation(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    for bad in ("0", "x"):
        monkeypatch.setenv(WORKERS_ENV, bad)
        with pytest.raises(ParameterError):
            worker_count()


def test_changing_one_n_leaves_other_rows_unchanged(tmp_path):
    a = small_cfg("critical-window")
    b = small_cfg("critical-window", "n = 6")
    run_suite(a, tmp_path / "a", echo=None)
    run_suite(b, tmp_path / "b", echo=None)
    _, ra = read_csv(tmp_path / "a" / "critical_window.csv")
    _, rb = read_csv(tmp_path / "b" / "critical_window.csv")
    assert [r for r in ra if r["n"] == "6"] == rb


# --- CLI --------------------------------------------------------------------------


def write_cfg(tmp_path, suite, extra=""):
    p = tmp_path / f"{suite}.cfg"
    p.write_text(cfg_text(suite, extra))
    return p


def test_cli_validate(tmp_path):
    r = CliRunner().invoke(main, ["validate", str(write_cfg(tmp_path, "diagnostics"))])
    assert r.exit_code == 0 and "config ok" in r.output and "zeta" in r.output
    bad = tmp_path / "bad.cfg"
    bad.write_text("suite = nope\n")
    r = CliRunner().invoke(main, ["validate", str(bad)])
    assert r.exit_code != 0 and "unknown suite" in r.output


def test_cli_run_compare_and_dump(tmp_path):
    runner = CliRunner()
    cfg = write_cfg(tmp_path, "critical-window", "replicates = 120\nn = 5")
    out = tmp_path / "out"
    r = runner.invoke(main, ["run", str(cfg), "-o", str(out)])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["run", str(cfg), "-o", str(out)])
    assert r.exit_code != 0 and "refusing to overwrite" in r.output
    csv = str(out / "critical_window.csv")
    r = runner.invoke(main, ["compare", csv, csv, "-c", "c1_scaled"])
    assert r.exit_code == 0
    assert json.loads(r.output)["value"] == 0
    r = runner.invoke(main, ["compare", csv, csv, "-c", "surplus1", "--statistic", "tv",
                             "--where-a", "n=5", "--where-b", "n=4"])
    assert r.exit_code != 0 and "need at least" in r.output
    edges = tmp_path / "edges.txt"
    r = runner.invoke(main, ["dump-edges", str(cfg), "--out", str(edges)])
    assert r.exit_code == 0, r.output
    assert read_edges(edges)
    r = runner.invoke(main, ["dump-edges", str(cfg), "--out", str(edges)])
    assert r.exit_code != 0


def test_cli_compare_jsonl_index(tmp_path):
    runner = CliRunner()
    cfg = write_cfg(tmp_path, "coalescent-reference", "limit_replicates = 100\nlams = 0")
    out = tmp_path / "o"
    assert runner.invoke(main, ["run", str(cfg), "-o", str(out)]).exit_code == 0
    f = str(out / "coalescent_reference.jsonl")
    r = runner.invoke(main, ["compare", f, f, "-c", "gamma.0"])
    assert r.exit_code == 0 and json.loads(r.output)["n_a"] == 100
