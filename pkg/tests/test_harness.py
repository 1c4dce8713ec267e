import json
import math

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from logical_bell import harness
from logical_bell.cli import main
from logical_bell.codes import CodeSpec
from logical_bell.config import DEFAULTS, load_config, parse_code
from logical_bell.rng import master_seed
from logical_bell.stabilizer import ConfigurationError

GRID = np.logspace(-4, -2, 8)


# -- crossings ----------------------------------------------------------------

@pytest.mark.parametrize("a", [300.0, 1000.0, 2500.0])
def test_crossing_of_quadratic_and_linear(a):
    code = harness.Curve.exact(GRID, a * GRID**2)
    base = harness.Curve.exact(GRID, GRID)
    est = harness.estimate_pseudo_threshold(code, base, resamples=50)
    assert est.value == pytest.approx(1 / a, rel=1e-9)
    assert est.ci_low <= est.value <= est.ci_high


def test_family_crossing():
    # p_L ~ A (p / p_th)^((d+1)/2) crosses at p_th for any prefactor
    pth = 4e-3
    d3 = harness.Curve.exact(GRID, 0.01 * (GRID / pth) ** 2)
    d5 = harness.Curve.exact(GRID, 0.01 * (GRID / pth) ** 3)
    est = harness.estimate_family_threshold(d3, d5, resamples=20)
    assert est.value == pytest.approx(pth, rel=1e-9)


def test_identical_curves_do_not_cross():
    c = harness.Curve.exact(GRID, GRID)
    est = harness.estimate_crossing(c, c, "x", resamples=10)
    assert isinstance(est, harness.NoCrossing) and est.direction == "undefined"


def test_curve_staying_above():
    est = harness.estimate_crossing(harness.Curve.exact(GRID, 2 * GRID), harness.Curve.exact(GRID, GRID), "x")
    assert isinstance(est, harness.NoCrossing) and est.direction == "above"


def test_crossing_requires_shared_grid():
    with pytest.raises(ValueError):
        harness.estimate_crossing(harness.Curve.exact(GRID, GRID), harness.Curve.exact(GRID * 2, GRID), "x")


def test_wilson_interval():
    lo, hi = harness.wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    assert harness.wilson_interval(0, 0) == (0.0, 1.0)


# -- sweeps -------------------------------------------------------------------

def small_sweep(**kw):
    base = dict(grid=(1e-3, 3e-3), shots=2000, codes=(CodeSpec("RotatedSurface", 3),), seed=5, batch=1000)
    base.update(kw)
    return harness.SweepConfig(**base)


def test_sweep_rows_and_determinism():
    rows = harness.sweep_logical_error(small_sweep())
    assert [r["code"] for r in rows] == ["rotated3", "rotated3", "Unencoded-rotated", "Unencoded-rotated"]
    assert rows == harness.sweep_logical_error(small_sweep())
    assert rows[0]["failures"] < rows[1]["failures"]


def test_sweep_independent_of_worker_count():
    a = harness.sweep_logical_error(small_sweep(workers=1))
    b = harness.sweep_logical_error(small_sweep(workers=2))
    assert a == b


def test_zero_noise_point_is_flagged():
    rows = harness.sweep_logical_error(small_sweep(grid=(0.0, 1e-3), baseline=False))
    assert rows[0]["failures"] == 0 and rows[0]["flagged"]


def test_stderr_shrinks_with_shots():
    r1 = harness._row("p_err", 1e-3, "c", "f", 3, 10_000, 100, 50, 50)
    r2 = harness._row("p_err", 1e-3, "c", "f", 3, 20_000, 200, 100, 100)
    assert r1["stderr"] / r2["stderr"] == pytest.approx(math.sqrt(2))


def test_sweep_config_validation():
    with pytest.raises(ConfigurationError):
        harness.SweepConfig(axis="nope")
    with pytest.raises(ConfigurationError):
        harness.SweepConfig(grid=(2e-3, 1e-3))


def test_metadata_reports_both_iteration_conventions():
    meta = harness.metadata_for(small_sweep(m1=9))
    assert meta["memory_extractions"] == 9 and meta["iterations_incl_generation"] == 10


# -- export -------------------------------------------------------------------

def test_csv_round_trip():
    rows = harness.sweep_logical_error(small_sweep(grid=(1e-3,)))
    assert harness.read_csv(harness.to_csv(rows)) == rows


def test_json_validates_against_schema():
    rows = harness.sweep_logical_error(small_sweep(grid=(1e-3,)))
    doc = json.loads(harness.to_json("sweep", rows, {"seed": 5}, []))
    jsonschema.validate(doc, harness.result_schema())
    assert doc["schema_version"] == harness.SCHEMA_VERSION


def test_single_point_export(tmp_path):
    rows = harness.sweep_logical_error(small_sweep(grid=(1e-3,), baseline=False))
    for fmt in ("csv", "json", "svg"):
        path = harness.export(rows, tmp_path, "one", fmt)
        assert path.exists() and path.stat().st_size > 0


def test_svg_is_reproducible(tmp_path):
    rows = harness.sweep_logical_error(small_sweep(grid=(1e-3, 3e-3), baseline=False))
    assert harness.to_svg(rows) == harness.to_svg(rows)


def test_unwritable_output_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        harness.export([{"a": 1}], blocker / "sub", "x", "csv")


# -- config and CLI -----------------------------------------------------------

def test_config_defaults_and_unknown_key(tmp_path):
    assert load_config()["seed"] == DEFAULTS["seed"]
    bad = tmp_path / "bad.yaml"
    bad.write_text("link:\n  colour: red\n")
    with pytest.raises(ConfigurationError, match="colour"):
        load_config(bad)
    good = tmp_path / "good.yaml"
    good.write_text("seed: 9\nlink:\n  p_dark: 0.01\n")
    cfg = load_config(good)
    assert cfg["seed"] == 9 and cfg["link"]["p_dark"] == 0.01 and cfg["link"]["p_trs"] == 0.5


def test_parse_code():
    assert parse_code("BaconShor:5") == CodeSpec("BaconShor", 5)
    with pytest.raises(ConfigurationError):
        parse_code("BaconShor")


def test_env_seed_override(monkeypatch):
    monkeypatch.setenv("LOGICAL_BELL_SEED", "77")
    assert master_seed(None, 1) == 77
    assert master_seed(3, 1) == 3
    monkeypatch.delenv("LOGICAL_BELL_SEED")
    assert master_seed(None, 1) == 1


def test_cli_time_budget():
    out = CliRunner().invoke(main, ["time-budget", "--distance", "1"])
    assert out.exit_code == 0
    assert "2,BS[[18,2,3]],8.88e-03,3.55e-02,1.44e-05,5.34e-02" in out.output


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_cli_output_is_byte_identical(tmp_path, fmt):
    args = ["sweep-depolarizing", "--code", "RotatedSurface:3", "--shots", "500", "--seed", "3", "--format", fmt]
    texts = []
    for sub in ("a", "b"):
        res = CliRunner().invoke(main, args + ["--out", str(tmp_path / sub)])
        assert res.exit_code == 0, res.output
        texts.append((tmp_path / sub / f"sweep_depolarizing.{fmt}").read_bytes())
    assert texts[0] == texts[1]


def test_cli_bad_config_is_reported(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense: 1\n")
    res = CliRunner().invoke(main, ["time-budget", "--config", str(bad)])
    assert res.exit_code != 0 and "nonsense" in res.output


def test_cli_report(tmp_path):
    CliRunner().invoke(main, ["sweep-depolarizing", "--code", "RotatedSurface:3", "--shots", "300",
                              "--format", "json", "--out", str(tmp_path)])
    res = CliRunner().invoke(main, ["report", "--out", str(tmp_path)])
    assert res.exit_code == 0 and "unencoded-crossing" in res.output
