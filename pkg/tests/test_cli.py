import json
import subprocess
import sys

import numpy as np
import pytest

from dwell4.cli import config_hash, main, parse_range
from dwell4.dynamics import frequency_from_samples
from dwell4.eigensolver import ModelParams
from dwell4.fixed_points import analytic_fixed_points
from dwell4.errors import ConfigError


def run(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def coefficients(capsys, *args):
    assert run(["coefficients", *args]) == 0
    return json.loads(capsys.readouterr().out)


def test_coefficients_point_c(capsys):
    out = coefficients(capsys, "--v0", "8.75", "--gamma", "2.5e-2")
    assert out["regime"] == "Josephson" and out["valid"]
    assert out["chi0"] == pytest.approx(600, rel=0.05)


def test_coefficients_zero_gamma(capsys):
    out = coefficients(capsys, "--v0", "5", "--gamma", "0")
    assert out["nu0"] == out["nu1"] == out["nu01"] == 0.0
    assert out["j0"] > 0 and out["j1"] > 0


def test_coefficients_shallow_barrier_invalid(capsys):
    out = coefficients(capsys, "--v0", "0.5", "--gamma", "1e-3")
    assert not out["valid"] and out["regime"] == "Invalid"
    assert out["e1"] > 0.5 and "V0 < E1" in out["reasons"]


def test_coefficients_to_file(tmp_path):
    target = tmp_path / "c" / "b.json"
    assert run(["coefficients", "--v0", "5", "--gamma", "2.5e-3", "--out", str(target)]) == 0
    assert json.loads(target.read_text())["regime"] == "Mixed"
    man = json.loads((target.parent / "b.json.manifest.json").read_text())
    assert man["command"] == "coefficients" and man["files"] == ["b.json"]


def test_config_file_and_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"v0": 3.75, "gamma": 2.5e-5}))
    out = coefficients(capsys, "--config", str(cfg))
    assert out["regime"] == "Rabi"
    cfg.write_text(json.dumps({"v0": 3.75, "gamma": 2.5e-5, "bogus": 1}))
    assert run(["coefficients", "--config", str(cfg)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and "bogus" in err["message"]


def test_missing_potential_is_config_error(capsys):
    assert run(["coefficients"]) == 2


def test_bad_flag_exits_2(capsys):
    assert run(["simulate", "--model", "quantum"]) == 2


def test_parse_range():
    assert np.allclose(parse_range("0:0.4:0.1", "x"), [0, 0.1, 0.2, 0.3, 0.4])
    assert np.allclose(parse_range("0:1:3", "x", count_last=True), [0, 0.5, 1])
    with pytest.raises(ConfigError):
        parse_range("0.4:0:0.1", "x")
    with pytest.raises(ConfigError):
        parse_range("nonsense", "x")


def test_empty_scan_exits_2(tmp_path, capsys):
    code = run(["fixed-points", "--v0", "8.75", "--gamma", "2.5e-2", "--scan-z0", "0.4:0.0:0.1",
                "--out", str(tmp_path)])
    assert code == 2


def test_simulate_dragging(tmp_path):
    out = tmp_path / "sim"
    code = run(["simulate", "--v0", "5", "--gamma", "2.5e-3", "--initial", "z0=0.1,z2=0.6", "--out", str(out)])
    assert code == 0
    data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    assert 1e-3 <= np.max(np.abs(data["z1"])) <= 1e-1
    assert np.max(np.abs(data["z2"] - 0.6)) < 1e-2
    man = json.loads((out / "manifest.json").read_text())
    assert man["termination"] == "Completed" and man["max_energy_drift"] < 1e-8
    assert set(man) >= {"command", "config", "config_hash", "solver", "version", "files"}


def test_simulate_two_mode_has_frozen_z2(tmp_path):
    out = tmp_path / "two"
    assert run(["simulate", "--v0", "5", "--gamma", "2.5e-3", "--initial", "z0=0.1,z2=0.6",
                "--t-end", "50", "--model", "two-mode", "--out", str(out)]) == 0
    data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    assert np.all(data["z1"] == 0.0)


def test_full_model_slower_than_two_mode(tmp_path):
    freqs = {}
    for model in ("full", "two-mode"):
        out = tmp_path / model
        assert run(["simulate", "--v0", "5", "--gamma", "2.5e-3", "--initial", "z0=0.1,z2=0.6",
                    "--model", model, "--out", str(out)]) == 0
        data = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
        freqs[model] = frequency_from_samples(data["t"], data["z0"])[0]
    assert freqs["full"] < freqs["two-mode"]


def test_fixed_point_initial_condition_is_constant(tmp_path):
    params = ModelParams(0.0, 1.0, 0.02, 0.05, 4.0, 4.0, 1.2)
    fp = next(r for r in analytic_fixed_points(params) if r.exists)
    cfg = tmp_path / "fp.json"
    cfg.write_text(json.dumps({"params": params.to_dict(), "initial": list(fp.location.as_array()), "t_end": 100.0}))
    assert run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    data = np.genfromtxt(tmp_path / "o" / "trajectory.csv", delimiter=",", names=True)
    for col in ("z0", "theta0", "z1", "theta1", "z2", "theta2"):
        assert np.ptp(data[col]) < 1e-9


def test_fixed_points_scan(tmp_path):
    out = tmp_path / "fp"
    assert run(["fixed-points", "--v0", "8.75", "--gamma", "2.5e-2", "--z2", "0", "--scan-z0", "0:0.45:0.01",
                "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    counts = [c for _, c in man["root_counts"]]
    assert len(counts) == 46 and counts[0] == 4 and counts[-1] == 2
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert man["critical_imbalance"] == pytest.approx(0.39, abs=0.01)
    assert (out / "fixed_points.csv").read_text().startswith("k0,k1,k2,z2_0,exists,stability")


def test_regime_map_default_window(tmp_path):
    out = tmp_path / "rm"
    assert run(["regime-map", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert {k: v["regime"] for k, v in man["marked"].items()} == {"A": "Rabi", "B": "Mixed", "C": "Josephson"}
    assert len((out / "regime_map.csv").read_text().splitlines()) == 3601


def test_regime_map_small(tmp_path):
    cfg = tmp_path / "rm.json"
    cfg.write_text(json.dumps({"grid": {"v0_count": 4, "gamma_count": 5}}))
    out = tmp_path / "rm"
    assert run(["regime-map", "--config", str(cfg), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert {k: v["regime"] for k, v in man["marked"].items()} == {"A": "Rabi", "B": "Mixed", "C": "Josephson"}
    assert len((out / "regime_map.csv").read_text().splitlines()) == 21
    cfg.write_text(json.dumps({"grid": {"v0_count": 4, "oops": 1}}))
    assert run(["regime-map", "--config", str(cfg), "--out", str(out)]) == 2


def test_portrait_and_poincare(tmp_path):
    out = tmp_path / "por"
    assert run(["portrait", "--v0", "8.75", "--gamma", "2.5e-2", "--z-values=-0.2:0.2:3",
                "--t-end", "20", "--random", "2", "--seed", "4", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "portrait"
    out2 = tmp_path / "pc"
    args = ["poincare", "--v0", "8.75", "--gamma", "0.1", "--initial", "z0=0.05,theta0=3.14159,z1=0.02",
            "--t-end", "3000", "--out", str(out2)]
    # the orbit is trapped around theta0 = pi, so the default theta0 = 0 section is empty
    assert run(args) == 3
    cfg = tmp_path / "pc.json"
    cfg.write_text(json.dumps({"section": ["theta0", 3.141592653589793]}))
    assert run(args + ["--config", str(cfg)]) == 0
    assert len((out2 / "section.csv").read_text().splitlines()) > 5


def test_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert run(["simulate", "--v0", "5", "--gamma", "2.5e-3", "--initial", "z0=0.1,z2=0.6",
                    "--t-end", "30", "--out", str(d)]) == 0
        outs.append(((d / "trajectory.csv").read_bytes(), (d / "manifest.json").read_bytes()))
    assert outs[0] == outs[1]
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "dwell4.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
