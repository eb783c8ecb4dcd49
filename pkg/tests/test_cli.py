import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from asympheat import cli
from asympheat.fieldio import deserialize_field, load_chart

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


SMALL_EQ = {
    "grid": {"d": 3, "n": 49, "half_width": 6.0},
    "phi": {"kind": "gaussian", "amplitude": 1.0, "width": 0.7071067811865476, "linear": [0.3, 0.0, 0.0]},
    "psi": {"kind": "gaussian", "amplitude": 0.5, "width": 0.7071067811865476},
}


def test_verify_trivial(tmp_path, capsys):
    assert cli.run(["verify", "--suite", "trivial", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] and report["checks"]
    assert "PASS" in capsys.readouterr().out
    assert (tmp_path / "timings.json").exists() and (tmp_path / "config_echo.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "asympheat", "verify", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_evolve_artifacts(tmp_path):
    cfg = json.loads((CONFIGS / "evolve_d2.json").read_text())
    cfg["grid"]["n"] = 161
    assert cli.run(["evolve", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    for t in ("0p25", "0p5", "1", "2"):
        chart = load_chart(out / f"chart_t{t}.json")
        assert chart.N == 2 and chart.d == 2
        rem = deserialize_field(out / f"remainder_t{t}")
        assert rem.shape == (161, 161) and np.all(np.isfinite(rem.data))
    rows = (out / "curves.csv").read_text().splitlines()
    assert rows[0] == "t,norm,norm_ratio,leading_drift,sup" and len(rows) == 5
    report = json.loads((out / "report.json").read_text())
    assert report["checks"]["leading_coefficients_frozen"] and report["drift"] == 0.0
    assert report["reference_exponent"] == 3.0
    # the top coefficient at t=0 is the configured one
    a0 = load_chart(out / "chart_t0p25.json")[0].coeffs
    assert a0[0] == 1.0 and a0[3] == 0.5


@pytest.mark.parametrize("patch, field", [
    ({"chart": {"n": 0, "N": -1, "p": 4.0, "L_max": 2}}, "chart.N"),
    ({"grid": {"d": 4, "n": 16, "half_width": 4.0}}, "grid.d"),
    ({"times": [-1.0]}, "times"),
    ({"duhamel": {"method": "simpson"}}, "duhamel.method"),
])
def test_config_errors_exit_2(tmp_path, capsys, patch, field):
    cfg = json.loads((CONFIGS / "evolve_d2.json").read_text())
    cfg.update(patch)
    code = cli.run(["evolve", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")])
    assert code == 2
    assert field in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path, capsys):
    assert cli.run(["evolve", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run(["evolve", "--config", str(bad)]) == 2
    assert cli.run(["evolve", "--out", str(tmp_path)]) == 2
    assert cli.run(["verify", "--seed", "-3", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_coarse_grid_is_a_config_error(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "evolve_d2.json").read_text())
    cfg["grid"]["n"] = 64
    assert cli.run(["evolve", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    assert "grid" in capsys.readouterr().err


def test_psi_negative_rejected(tmp_path, capsys):
    cfg = dict(SMALL_EQ, psi={"kind": "gaussian", "amplitude": -0.5, "width": 0.7071067811865476})
    assert cli.run(["equilibrium", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path)]) == 2
    assert "psi" in capsys.readouterr().err


def test_deterministic_and_echo_rerun(tmp_path):
    cfg = json.loads((CONFIGS / "evolve_d3.json").read_text())
    cfg["grid"] = {"d": 3, "n": 49, "half_width": 6.0}
    path = _write(tmp_path, cfg)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.run(["evolve", "--config", str(path), "--out", str(a), "--seed", "7"]) == 0
    assert cli.run(["evolve", "--config", str(path), "--out", str(b), "--seed", "7"]) == 0
    assert cli.run(["evolve", "--config", str(a / "config_echo.json"), "--out", str(c)]) == 0
    ra = (a / "report.json").read_bytes()
    assert ra == (b / "report.json").read_bytes() == (c / "report.json").read_bytes()
    assert (a / "remainder_t1.f64").read_bytes() == (c / "remainder_t1.f64").read_bytes()
    d = tmp_path / "d"
    cli.run(["evolve", "--config", str(path), "--out", str(d), "--seed", "8"])
    assert (d / "report.json").read_bytes() != ra


def test_equilibrium_and_flow(tmp_path):
    eq_out = tmp_path / "eq"
    assert cli.run(["equilibrium", "--config", str(_write(tmp_path, SMALL_EQ)), "--out", str(eq_out)]) == 0
    report = json.loads((eq_out / "report.json").read_text())
    assert report["converged"] and report["residual"] <= 1e-8
    flow = dict(SMALL_EQ, initial={"kind": "equilibrium"}, T=1.0, dt=0.1)
    fl_out = tmp_path / "fl"
    assert cli.run(["flow", "--config", str(_write(tmp_path, flow, "flow.json")), "--out", str(fl_out)]) == 0
    report = json.loads((fl_out / "report.json").read_text())
    assert report["checks"]["stationary"] and report["checks"]["a1_a2_frozen"]
    assert (fl_out / "monitors.csv").exists()


def test_resolvent(tmp_path):
    cfg = json.loads((CONFIGS / "resolvent.json").read_text())
    cfg["samples"] = 6
    cfg["grid"]["n"] = 32
    assert cli.run(["resolvent", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "r")]) == 0
    rows = (tmp_path / "r" / "sector_sweep.csv").read_text().splitlines()
    assert len(rows) == 7
