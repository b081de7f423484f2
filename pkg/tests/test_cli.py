import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nonlocal_growth import cli, output, scenarios
from nonlocal_growth.simulate import IntegrationError

SMALL = ["--grid-n", "20", "--t-end", "4", "--dt", "0.01"]


def run(args, tmp_path):
    return cli.main(args + ["--out-dir", str(tmp_path)])


def test_resolve_case_presets():
    sc = scenarios.resolve(case=4)
    assert sc.kernel == "case4_asymmetric" and sc.growth == "case1" and sc.t_end == 200.0
    assert scenarios.resolve(case=2).t_end == 500.0
    sc = scenarios.resolve({"case": 1, "grid_n": 50}, grid_n=60, emit="spectral,steady")
    assert sc.grid_n == 60 and sc.emit == ("spectral", "steady")


@pytest.mark.parametrize("cfg", [
    {"grid_n": 1}, {"dt": 0.3}, {"dt": 0.03, "t_end": 1.0}, {"kernel": "nope"},
    {"growth": "nope"}, {"bogus": 1}, {"emit": "pictures"}, {"case": 9},
    {"model_params": {"gamma_R": -1}}, {"strict_k": "yes"},
])
def test_resolve_rejects(cfg):
    with pytest.raises(scenarios.ConfigError):
        scenarios.resolve(cfg)


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err
    assert run(["run", "--case", "1", "--dt", "0.5"], tmp_path) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise IntegrationError("non-finite state", 1.5)

    monkeypatch.setattr(cli, "integrate", boom)
    assert run(["run", "--case", "1"] + SMALL, tmp_path) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_run_writes_artifacts(tmp_path):
    assert run(["run", "--case", "1", "--emit", "timeseries,heatmap,spectral"] + SMALL, tmp_path) == 0
    names = {p.name for p in tmp_path.iterdir()}
    for s in ("I_V", "I_R"):
        assert {f"traj_{s}.csv", f"phys_{s}.csv", f"heat_{s}.svg"} <= names
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["grid_n"] == 20 and "wall_times_s" not in man
    assert set(man["artifacts"]) == names - {"manifest.json"}
    rows = list(csv.reader(open(tmp_path / "traj_I_V.csv")))
    assert rows[0] == ["t", "y", "species", "value"]
    assert len(rows) == 1 + 2 * 20                       # t = 0 and t = 4 (snapshot every 5)
    phys = list(csv.reader(open(tmp_path / "phys_I_R.csv")))
    assert phys[0] == ["t", "x", "species", "value"]
    spec = json.loads((tmp_path / "spectral.json").read_text())
    assert {"value", "omega", "residual", "grid_n", "method"} <= set(spec)


def test_wide_csv_and_timings(tmp_path):
    assert run(["run", "--case", "3", "--emit", "timeseries", "--wide", "--timings"] + SMALL, tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "traj_I_R.csv")))
    assert rows[0][:2] == ["t", "y_1"] and len(rows[0]) == 21
    assert "wall_times_s" in json.loads((tmp_path / "manifest.json").read_text())


def test_steady_subcommand_case3(tmp_path):
    assert run(["steady", "--case", "3"] + SMALL, tmp_path) == 0
    rows = list(csv.reader(open(tmp_path / "steady.csv")))
    assert rows[0] == ["species", "value"]
    assert float(rows[1][1]) == pytest.approx(2845.9755, rel=1e-7)
    rep = json.loads((tmp_path / "steady.json").read_text())
    assert rep["kind"] == "ode_equilibrium" and rep["residual"] <= 1e-8


def test_spectral_subcommand_case3(tmp_path):
    assert run(["spectral", "--case", "3"], tmp_path) == 0
    spec = json.loads((tmp_path / "spectral.json").read_text())
    assert abs(spec["value"] - 0.5348) <= 1e-4


def test_verify_subcommand(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"case": 3, "verify_n": 16, "verify_pairs": 3, "t_end": 4.0}))
    assert cli.main(["verify", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    reps = json.loads((tmp_path / "verify.json").read_text())
    names = [r["name"] for r in reps]
    assert names[:3] == ["reaction_conditions", "kernel_assumptions", "growth_classification"]
    assert all(r.get("passed", True) for r in reps), [r["name"] for r in reps if not r.get("passed", True)]


def test_determinism_small(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["run", "--case", "4", "--emit", "timeseries,heatmap,spectral"] + SMALL, d) == 0
    for p in a.iterdir():
        q = b / p.name
        if p.name == "manifest.json":
            ja, jb = json.loads(p.read_text()), json.loads(q.read_text())
            ja["config"].pop("out_dir"), jb["config"].pop("out_dir")
            assert ja == jb
        else:
            assert p.read_bytes() == q.read_bytes(), p.name


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "nonlocal_growth", "spectral", "--case", "3",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert json.loads(out.stdout)["spectral_value"] == pytest.approx(0.53484, abs=1e-5)


def test_heatmap_zero_field(tmp_path):
    p = output.render_heatmap([0.0, 1.0], np.array([0.25, 0.75]), np.zeros((2, 2)), "u", tmp_path / "z.svg")
    text = p.read_text()
    assert "min=0 max=0" in text
    again = output.render_heatmap([0.0, 1.0], np.array([0.25, 0.75]), np.zeros((2, 2)), "u", tmp_path / "z2.svg")
    assert again.read_bytes() == p.read_bytes()
    with pytest.raises(ValueError):
        output.render_heatmap([], np.array([0.5]), np.zeros((0, 1)), "u", tmp_path / "e.svg")


def test_colorize_endpoints():
    rgb = output.colorize(np.array([0.0, 0.5, 1.0]), 0.0, 1.0)
    np.testing.assert_array_equal(rgb[0], [68, 1, 84])
    np.testing.assert_array_equal(rgb[-1], [253, 231, 37])
    assert np.all(output.colorize(np.ones(3), 1.0, 1.0) == rgb[0])


def test_png_structure():
    data = output.png_bytes(np.zeros((3, 5, 3), dtype=np.uint8))
    assert data.startswith(b"\x89PNG\r\n\x1a\n") and data.endswith(b"IEND\xaeB`\x82")
    assert int.from_bytes(data[16:20], "big") == 5 and int.from_bytes(data[20:24], "big") == 3


def test_heatmap_peak_location(tmp_path):
    # interior peak for the symmetric kernel, left-shifted for the Case-4 kernel
    for case, check in ((1, lambda y: 0.4 < y < 0.6), (4, lambda y: y < 0.45)):
        d = tmp_path / str(case)
        assert run(["run", "--case", str(case), "--emit", "timeseries", "--grid-n", "40",
                    "--t-end", "100", "--dt", "0.02"], d) == 0
        rows = [r for r in csv.DictReader(open(d / "traj_I_V.csv")) if float(r["t"]) == 100.0]
        peak = max(rows, key=lambda r: float(r["value"]))
        assert check(float(peak["y"])), (case, peak)
