import csv
import json
import math

import numpy as np
import pytest
from scipy.stats import kstest
from scipy.stats import norm as scipy_norm

from robustqoe.harness import Check, ConfigError, ExperimentReport, load_config
from robustqoe.harness.cli import main
from robustqoe.harness.experiments import RUNNERS, grid_minimum, numerical_hessian
from robustqoe.harness.ks import KS_1PCT, ks_critical, ks_statistic, normal_cdf
from robustqoe.harness.rng import Purpose, stream

# ---------------------------------------------------------------- rng and KS


def test_streams_are_keyed_and_independent():
    a = stream(7, 3, Purpose.DATA).standard_normal(5)
    assert np.array_equal(a, stream(7, 3, Purpose.DATA).standard_normal(5))
    assert not np.array_equal(a, stream(7, 4, Purpose.DATA).standard_normal(5))
    assert not np.array_equal(a, stream(7, 3, Purpose.CONTAMINATION).standard_normal(5))
    assert not np.array_equal(a, stream(8, 3, Purpose.DATA).standard_normal(5))
    with pytest.raises(ValueError):
        stream(-1, 0)


def test_ks_against_scipy():
    rng = np.random.default_rng(0)
    for m in (1, 7, 100, 5000):
        x = rng.normal(0.1, 1.2, size=m)
        ours = ks_statistic(x, normal_cdf())
        assert ours == pytest.approx(kstest(x, "norm").statistic, abs=1e-12)
        assert ks_statistic(x, normal_cdf(0.1, 1.2)) == pytest.approx(kstest(x, "norm", args=(0.1, 1.2)).statistic, abs=1e-12)


def test_ks_examples():
    m = 1000
    strat = scipy_norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    assert ks_statistic(strat, normal_cdf()) <= 0.5 / m + 1e-12
    v = 0.3
    assert ks_statistic(np.full(10, v), normal_cdf()) == pytest.approx(max(scipy_norm.cdf(v), 1 - scipy_norm.cdf(v)))
    with pytest.raises(ValueError):
        ks_statistic([], normal_cdf())


def test_ks_critical_value():
    assert KS_1PCT == pytest.approx(1.628, abs=1e-3)
    assert ks_critical(2000) == pytest.approx(1.6276 / math.sqrt(2000), rel=1e-4)
    rejections = sum(
        ks_statistic(np.random.default_rng([s, 1]).standard_normal(10_000), normal_cdf()) >= 1.95 / 100 for s in range(100)
    )
    assert rejections <= 5


# ---------------------------------------------------------------- reports


def sample_report():
    r = ExperimentReport("clt", {"n": 10, "blocks": {"k": 2}})
    r.check("var[0]", 1.5, 1.4, 1.7)
    r.check("ks[0]", 0.5, None, 0.1, "diagnostic")
    r.summary = {"cov": np.eye(2), "k": np.int64(3)}
    r.notes.append("hello")
    r.records = [(0, 0, 0.25), (1, 0, -1e-300)]
    return r


def test_report_json_round_trip():
    r = sample_report()
    text = r.to_json()
    back = ExperimentReport.from_json(text)
    assert back.to_json() == text
    assert back.passed and back.checks[1].passed is False


def test_check_flags_are_recomputed():
    d = json.loads(sample_report().to_json())
    d["checks"][0]["passed"] = False
    with pytest.raises(ValueError, match="disagrees"):
        ExperimentReport.from_dict(d)
    assert not Check("x", float("nan"), None, None).passed
    assert Check("x", 2.0, 2.0, 2.0).passed


def test_csv_records(tmp_path):
    path = tmp_path / "r.csv"
    sample_report().write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["rep", "coord", "value"] and float(rows[2][2]) == -1e-300


# ---------------------------------------------------------------- configs


def test_defaults_load():
    for name in RUNNERS:
        assert load_config(None, name).experiment == name


@pytest.mark.parametrize(
    "body, pattern",
    [
        ('experiment = "clt"\nn = 100\nreplications = "many"\n', r"c\.toml:3: replications: expected an integer"),
        ('experiment = "clt"\n[blocks]\nkk = 3\n', r"c\.toml:3: blocks\.kk: unknown field"),
        ('experiment = "clt"\nn = = 3\n', r"c\.toml:2"),
        ('experiment = "sweep"\n', r"experiment"),
        ('experiment = "clt"\n[contamination]\ncount = 1\nrate = 0.1\n', r"contamination\.count"),
        ('experiment = "clt"\n[quantile]\nalpha = 1.5\n', r"c\.toml:3: quantile\.alpha"),
    ],
)
def test_config_errors(tmp_path, body, pattern):
    path = tmp_path / "c.toml"
    path.write_text(body)
    with pytest.raises(ConfigError, match=pattern):
        load_config(path, "clt")


def test_json_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "clt", "n": 500, "blocks": {"k": 10}}))
    cfg = load_config(path, "clt")
    assert cfg.n == 500 and cfg.blocks.k == 10
    path.write_text('{"n": 500,\n "replications": -1}')
    with pytest.raises(ConfigError, match=r"c\.json:2: replications"):
        load_config(path, "clt")


# ---------------------------------------------------------------- experiments in miniature


def test_inadmissible_rate_is_config_error():
    cfg = load_config(None, "clt", {"n": 400, "replications": 2, "blocks": {"k": 20}, "contamination": {"rate": 0.3}})
    with pytest.raises(ConfigError, match="empty"):
        RUNNERS["clt"](cfg)


def test_grid_minimum_finds_centre():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    val, y, scale = grid_minimum(pts, np.zeros(2), np.zeros(2), 101, 0.05)
    assert np.linalg.norm(y) < 0.05 and val == pytest.approx(4.0, abs=1e-3) and scale == 2.0


def test_numerical_hessian_of_quadratic():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    h = numerical_hessian(lambda z: 0.5 * z @ a @ z, np.array([0.3, -0.2]), 1e-3)
    assert np.allclose(h, a, atol=1e-6)


def test_small_runs_pass():
    small = {
        "geomq": {"instances": 10, "grid": 100},
        "lemv": {"instances": 20},
        "functional": {"replications": 50, "rel_tol": 1.0, "abs_floor": 1.0},
    }
    for name, over in small.items():
        assert RUNNERS[name](load_config(None, name, over)).passed, name


def test_reports_independent_of_threads():
    cfg = load_config(None, "clt", {"n": 1000, "replications": 30, "blocks": {"k": 10}, "rel_tol": 10.0})
    one = RUNNERS["clt"](cfg, threads=1).to_json()
    two = RUNNERS["clt"](cfg, threads=3).to_json()
    assert one == two


# ---------------------------------------------------------------- CLI


CLT_SMALL = 'experiment = "clt"\nn = 1000\nreplications = 40\nrel_tol = 10.0\nrecords = true\n[blocks]\nk = 10\n'


def test_cli_solve(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    pts.write_text("1,0\n-1,0\n0,1\n0,-1\n")
    assert main(["solve", "--points", str(pts), "--u", "0,0"]) == 0
    assert capsys.readouterr().out.strip() == "0,0"
    assert main(["solve", "--points", str(pts), "--u", "0.9,0.9"]) == 2


def test_cli_determinism_and_outputs(tmp_path, capsys):
    cfg = tmp_path / "clt.toml"
    cfg.write_text(CLT_SMALL)
    outs = []
    for threads in ("1", "1", "2"):
        out = tmp_path / f"r{len(outs)}.json"
        assert main(["clt", "--config", str(cfg), "--seed", "7", "--out", str(out), "--threads", threads]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    rows = tmp_path / "rows.csv"
    assert main(["clt", "--config", str(cfg), "--csv", str(rows), "--quiet"]) == 0
    lines = rows.read_text().splitlines()
    assert lines[0] == "rep,coord,value" and len(lines) == 41
    assert "clt: PASS" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "clt.toml"
    cfg.write_text(CLT_SMALL.replace("rel_tol = 10.0", "rel_tol = 1e-6"))
    assert main(["clt", "--config", str(cfg)]) == 1
    cfg.write_text('experiment = "clt"\nreplications = 0\n')
    assert main(["clt", "--config", str(cfg)]) == 2
    assert "clt.toml:2: replications" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["clt", "--bogus"])
    assert info.value.code == 2
    assert main(["clt", "--config", str(tmp_path / "missing.toml")]) == 2


def test_cli_sweep_csv(tmp_path):
    cfg = tmp_path / "sweep.toml"
    cfg.write_text('experiment = "sweep"\nn = 2000\nreplications = 5\ngammas = [0.0, 0.1, 0.2]\n[blocks]\nk = 40\n')
    table = tmp_path / "sweep.csv"
    code = main(["sweep", "--config", str(cfg), "--csv", str(table), "--quiet"])
    assert code in (0, 1)
    rows = list(csv.DictReader(open(table)))
    assert [(r["gamma"], r["estimator"]) for r in rows[:6]] == [
        ("0.0", "qoe"), ("0.0", "raw"), ("0.1", "qoe"), ("0.1", "raw"), ("0.2", "qoe"), ("0.2", "raw")
    ]
    assert len(rows) == 8  # three gammas plus the breakdown row, two estimators each
