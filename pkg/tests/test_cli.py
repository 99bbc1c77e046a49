"""Command-line surface: argument handling, output formats, exit codes."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import szaszmir as sz
from szaszmir.cli import main


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    rng = np.random.default_rng(2024)
    path = tmp_path_factory.mktemp("data") / "sample.csv"
    rows = rng.gamma(2.0, 1.0, size=(25, 2))
    path.write_text(
        "\n".join(",".join(format(v, ".17g") for v in row) for row in rows) + "\n"
    )
    return path


def run_main(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEstimate:
    def test_single_point_matches_library(self, capsys, data_file):
        code, out, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "12,20", "--x", "1.0,1.5"
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x_1,x_2,F_ecdf,F_sm"
        cells = lines[1].split(",")
        sample = sz.load_sample(data_file)
        assert float(cells[2]) == pytest.approx(
            sz.empirical_cdf(sample, [1.0, 1.5]), abs=0.0
        )
        # the batch path truncates Poisson windows at 1e-13 mass
        assert float(cells[3]) == pytest.approx(
            sz.sm_estimate(sample, (12, 20), [1.0, 1.5]), abs=1e-10
        )

    def test_isotropic_m_broadcast(self, capsys, data_file):
        code, out, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "9", "--x", "1.0,1.0"
        )
        assert code == 0
        sample = sz.load_sample(data_file)
        want = sz.sm_estimate(sample, 9, [1.0, 1.0])
        assert float(out.strip().splitlines()[1].split(",")[3]) == pytest.approx(want, abs=1e-10)

    def test_auto_selects_and_echoes(self, capsys, data_file):
        code, out, _ = run_main(
            capsys,
            "estimate", "--data", str(data_file),
            "--m", "auto", "--x", "1.0,1.0", "--select-grid-size", "256",
        )
        assert code == 0
        header = out.strip().splitlines()[0]
        assert header.startswith("# m_star=")
        sample = sz.load_sample(data_file)
        grid = sz.qmc_grid(sz.IntegrationRegion(0.05, 2), size=256, kind="sobol")
        want = sz.select_m(sample, grid).m_star
        assert header == "# m_star=" + ",".join(str(v) for v in want)

    def test_points_file(self, capsys, data_file, tmp_path):
        pts = tmp_path / "pts.csv"
        pts.write_text("0.5,0.5\n1.0,2.0\n")
        code, out, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "10", "--points", str(pts)
        )
        assert code == 0
        assert len(out.strip().splitlines()) == 3

    def test_grid_evaluation(self, capsys, data_file):
        code, out, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "8", "--grid", "16"
        )
        assert code == 0
        assert len(out.strip().splitlines()) == 17

    def test_out_file(self, data_file, tmp_path, capsys):
        dest = tmp_path / "est.csv"
        code = main(
            ["estimate", "--data", str(data_file), "--m", "8", "--x", "1,1", "--out", str(dest)]
        )
        assert code == 0
        assert dest.read_text().startswith("x_1,x_2,F_ecdf,F_sm")

    def test_missing_point_source_usage_error(self, capsys, data_file):
        code, _, err = run_main(capsys, "estimate", "--data", str(data_file), "--m", "8")
        assert code == 2
        assert "--x" in err or "point" in err.lower()

    def test_conflicting_point_sources(self, capsys, data_file):
        code, _, _ = run_main(
            capsys,
            "estimate", "--data", str(data_file),
            "--m", "8", "--x", "1,1", "--grid", "16",
        )
        assert code == 2

    def test_missing_data_file_is_data_error(self, capsys, tmp_path):
        ghost = tmp_path / "ghost.csv"
        code, _, err = run_main(
            capsys, "estimate", "--data", str(ghost), "--m", "8", "--x", "1,1"
        )
        assert code == 3
        assert "ghost.csv" in err

    def test_bad_m_is_usage_error(self, capsys, data_file):
        code, _, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "0", "--x", "1,1"
        )
        assert code == 2

    def test_wrong_x_dimension(self, capsys, data_file):
        code, _, _ = run_main(
            capsys, "estimate", "--data", str(data_file), "--m", "8", "--x", "1,1,1"
        )
        assert code == 2


class TestLscv:
    def test_trace_output(self, capsys, data_file):
        code, out, _ = run_main(
            capsys, "lscv", "--data", str(data_file), "--grid-size", "256"
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("# m_star=")
        assert "score=" in lines[0] and "evaluations=" in lines[0]
        assert lines[1] == "stage,coordinate,m_1,m_2,score"
        stages = {row.split(",")[0] for row in lines[2:]}
        assert "pilot" in stages

    def test_matches_library_selection(self, capsys, data_file):
        code, out, _ = run_main(
            capsys, "lscv", "--data", str(data_file), "--grid-size", "256"
        )
        sample = sz.load_sample(data_file)
        grid = sz.qmc_grid(sz.IntegrationRegion(0.05, 2), size=256, kind="sobol")
        res = sz.select_m(sample, grid)
        head = out.strip().splitlines()[0]
        assert head.split("m_star=")[1].split(" ")[0] == ",".join(
            str(v) for v in res.m_star
        )

    def test_delta_validation(self, capsys, data_file):
        code, _, _ = run_main(
            capsys, "lscv", "--data", str(data_file), "--delta", "1.5"
        )
        assert code == 2


class TestValidate:
    def test_single_suite_rows(self, capsys):
        code, out, _ = run_main(capsys, "validate", "--suite", "skellam")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "name,predicted,observed,tolerance,passed"
        assert len(lines) == 4
        assert all(row.endswith(",true") for row in lines[1:])

    def test_unknown_suite_usage_error(self, capsys):
        code, _, _ = run_main(capsys, "validate", "--suite", "nonsense")
        assert code == 2

    def test_out_file(self, tmp_path, capsys):
        dest = tmp_path / "checks.csv"
        code = main(["validate", "--suite", "deficiency", "--out", str(dest)])
        assert code == 0
        assert dest.read_text().count("\n") >= 2


class TestSimulateAndTables:
    def test_pipeline_round_trip(self, tmp_path, capsys):
        out_dir = tmp_path / "sim"
        code, _, err = run_main(
            capsys,
            "simulate",
            "--model", "m1", "--n", "25", "--nmc", "2",
            "--grid-size", "256", "--no-figures", "--quiet",
            "--out-dir", str(out_dir),
        )
        assert code == 0
        raw = out_dir / "raw_m1.csv"
        summary = out_dir / "summary_m1.csv"
        assert raw.exists() and summary.exists()

        tab_dir = tmp_path / "tab"
        code2, out2, _ = run_main(
            capsys,
            "tables", "--raw", str(raw), "--out-dir", str(tab_dir), "--no-figures",
        )
        assert code2 == 0
        assert (tab_dir / "summary_m1.csv").read_bytes() == summary.read_bytes()

    def test_config_file_with_overrides(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("models = m1\nn_list = 25\nn_mc = 1\ngrid_size = 256\nfigures = false\n")
        out_dir = tmp_path / "sim2"
        code, out, _ = run_main(
            capsys,
            "simulate", "--config", str(cfg), "--quiet", "--out-dir", str(out_dir),
        )
        assert code == 0
        text = (out_dir / "config_resolved.txt").read_text()
        assert "n_mc = 1" in text
        assert f"out_dir = {out_dir}" in text

    def test_bad_delta_usage_error(self, tmp_path, capsys):
        code, _, _ = run_main(
            capsys,
            "simulate", "--model", "m1", "--n", "25", "--nmc", "1",
            "--delta", "2.0", "--quiet", "--out-dir", str(tmp_path / "x"),
        )
        assert code == 2

    def test_missing_raw_file_data_error(self, tmp_path, capsys):
        code, _, _ = run_main(
            capsys, "tables", "--raw", str(tmp_path / "none.csv"), "--out-dir", str(tmp_path)
        )
        assert code == 3


class TestTopLevel:
    def test_no_subcommand_usage(self, capsys):
        assert main([]) == 2

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0

    def test_console_script_runs(self, data_file):
        proc = subprocess.run(
            [sys.executable, "-m", "szaszmir",
             "estimate", "--data", str(data_file), "--m", "7", "--x", "1,1"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("x_1,x_2,F_ecdf,F_sm")
