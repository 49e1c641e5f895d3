import json
import os
import subprocess
import sys

import numpy as np
import pytest

from bohmlab.cli import default_config_path, main
from bohmlab.scenarios import SCENARIO_IDS, config_from_dict, default_config

QUICK = ["n_trajectories=100", "n_equilibrium=0"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def crossing_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("crossing")
    assert main(["run", default_config_path("crossing"), str(out), *QUICK]) == 0
    assert main(["export-plotdata", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def protective_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("protective")
    args = ["n_equilibrium=0", "ramp_duration=2", "t_final=2", "dump_times=0,1,2"]
    assert main(["run", default_config_path("protective"), str(out), *args]) == 0
    assert main(["export-plotdata", str(out)]) == 0
    return out


def test_list_scenarios(capsys):
    code, out, _ = run_cli(capsys, "list-scenarios")
    assert code == 0
    lines = out.strip().splitlines()
    assert [ln.split("\t")[0] for ln in lines] == list(SCENARIO_IDS)
    for ln in lines:
        sid, path, desc = ln.split("\t")
        assert os.path.exists(path) and desc
    assert run_cli(capsys, "list-scenarios")[1] == out


class TestRun:
    def test_artifacts(self, crossing_dir):
        manifest = json.loads((crossing_dir / "manifest.json").read_text())
        for name in manifest["artifacts"]:
            assert (crossing_dir / name).exists()
        assert manifest["scenario"] == "crossing"
        report = json.loads((crossing_dir / "report.json").read_text())
        assert report["swap_fraction"] == 1.0
        assert report["n_trajectories"] == 100
        assert any(n.startswith("frames/branch-left_") for n in manifest["artifacts"])

    def test_config_echo_rebuilds_run_config(self, crossing_dir):
        report = json.loads((crossing_dir / "report.json").read_text())
        cfg = config_from_dict(report["config"])
        assert cfg == default_config("crossing").updated(n_trajectories=100, n_equilibrium=0)

    def test_rerun_body_is_identical(self, crossing_dir, tmp_path):
        assert main(["run", default_config_path("crossing"), str(tmp_path), *QUICK]) == 0
        a = json.loads((crossing_dir / "report.json").read_text())
        b = json.loads((tmp_path / "report.json").read_text())
        a.pop("runtime"), b.pop("runtime")
        a.pop("artifacts"), b.pop("artifacts")
        assert a == b
        assert (crossing_dir / "trajectories.csv").read_bytes() == (tmp_path / "trajectories.csv").read_bytes()

    def test_validation_error_exit(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "run", default_config_path("crossing"), str(tmp_path), "sigma=-1")
        assert code == 3
        info = json.loads(err.strip().splitlines()[-1])
        assert info["error"] == "validation" and info["field"] == "sigma"
        assert not (tmp_path / "manifest.json").exists()

    def test_parse_error_exit(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("[scenario]\nscenario = crossing\n[packets]\nsigma = wide\n")
        code, _, err = run_cli(capsys, "run", str(cfg), str(tmp_path / "out"))
        assert code == 2
        info = json.loads(err.strip())
        assert info["line"] == 4 and info["field"] == "sigma"

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "run", str(tmp_path / "none.cfg"), str(tmp_path / "out"))
        assert code == 4
        assert json.loads(err.strip())["type"] == "FileNotFoundError"


class TestExport:
    def test_missing_artifacts(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "export-plotdata", str(tmp_path))
        assert code == 4
        assert json.loads(err.strip())["error"] == "missing-artifacts"

    def test_trajectories_reverse_at_overlap(self, crossing_dir):
        t_over = json.loads((crossing_dir / "report.json").read_text())["overlap_time"]
        text = (crossing_dir / "plot" / "trajectories.dat").read_text()
        polylines = []
        for b in text.split("\n\n\n"):
            rows = [ln.split() for ln in b.splitlines() if ln and not ln.startswith("#")]
            if rows:
                polylines.append(np.array(rows, dtype=float))
        assert len(polylines) == 100
        for p in polylines:
            t, v = p[:, 1], p[:, 3]
            assert np.all(v[t < t_over - 1.0] > 0)
            assert np.all(v[t > t_over + 1.0] < 0)

    def test_density_and_outlines(self, crossing_dir):
        plot = crossing_dir / "plot"
        index = json.loads((plot / "index.json").read_text())
        assert "branch_outlines.dat" in index["files"]
        dens = sorted(plot.glob("density_t*.dat"))
        assert len(dens) == 3
        x, rho = np.loadtxt(dens[0], unpack=True)
        assert np.sum(rho) * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-9)
        rows = [ln.split() for ln in (plot / "branch_outlines.dat").read_text().splitlines()[1:]]
        assert {r[0] for r in rows} == {"left", "right"}
        for name, t, lo, hi in rows:
            assert float(lo) < float(hi)

    def test_pointer_momentum_rises_through_ramp(self, protective_dir):
        data = np.loadtxt(protective_dir / "plot" / "pointer_series.dat")
        with open(protective_dir / "plot" / "pointer_series.dat") as fh:
            header = fh.readline().lstrip("# ").split()
        p = data[:, header.index("pointer_momentum")]
        g = data[:, header.index("coupling")]
        assert np.all(np.diff(p) >= -1e-12)
        predicted = json.loads((protective_dir / "report.json").read_text())["predicted_shift"]
        assert p[-1] - p[0] == pytest.approx(predicted, rel=0.1)
        assert g.max() == pytest.approx(0.5, rel=1e-3)

    def test_protective_has_no_outlines(self, protective_dir):
        assert not (protective_dir / "plot" / "branch_outlines.dat").exists()
        dens = sorted((protective_dir / "plot").glob("density_t*.dat"))
        assert np.loadtxt(dens[0]).shape[1] == 3

    def test_2d_outlines(self, tmp_path):
        args = [*QUICK, "x_points=128", "x_min=-25", "x_max=25", "y_points=32", "y_min=-8", "y_max=8",
                "transverse_offset=1", "t_final=5", "dump_times=0,5"]
        assert main(["run", default_config_path("crossing"), str(tmp_path), *args]) == 0
        assert main(["export-plotdata", str(tmp_path)]) == 0
        lines = (tmp_path / "plot" / "branch_outlines.dat").read_text().splitlines()
        assert lines[0] == "# branch t x y_lo y_hi"
        rows = np.array([ln.split()[1:] for ln in lines[1:]], dtype=float)
        assert np.all(rows[:, 2] <= rows[:, 3])
        # at t = 0 the left branch sits below the axis, the right one above
        first = [ln.split() for ln in lines[1:] if float(ln.split()[1]) == 0.0]
        left = np.array([r[2:] for r in first if r[0] == "left"], dtype=float)
        right = np.array([r[2:] for r in first if r[0] == "right"], dtype=float)
        assert left[:, 1:].mean() < 0 < right[:, 1:].mean()


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "bohmlab.cli", "list-scenarios"], capture_output=True, text=True)
    assert out.returncode == 0 and "protective" in out.stdout
