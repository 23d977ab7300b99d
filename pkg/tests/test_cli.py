import csv
import json
import subprocess
import sys

import pytest

from polyfloer import cli


def run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    rc = cli.main([*argv, "--out", str(out)])
    return rc, out


def test_simulate_counterexample_is_flagged(tmp_path, capsys):
    rc, out = run(tmp_path, "simulate", "--scenario", "counterexample", "--grid-n", "16")
    assert rc == 0
    assert "non-convergent (expected)" in capsys.readouterr().out
    rows = list(csv.DictReader(open(out / "trajectory.csv")))
    first, last = float(rows[0]["sobolev_0"]), float(rows[-1]["sobolev_0"])
    assert abs(first - last) < 1e-12 and first > 0.5
    summary = json.loads((out / "simulate_summary.json").read_text())
    assert summary["passed"] and summary["notes"]
    assert not (out / cli.FAILED).exists()


def test_simulate_is_byte_identical_on_rerun(tmp_path):
    args = ["simulate", "--scenario", "bridges_seed7", "--grid-n", "16", "--s-max", "2"]
    rc1, a = run(tmp_path, *args, sub="a")
    rc2, b = run(tmp_path, *args, sub="b")
    assert rc1 == rc2 == 0
    for name in ("trajectory.csv", "trajectory.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = [json.loads(line) for line in open(a / "trajectory.jsonl")]
    assert rows[-1]["sobolev_0"] < rows[0]["sobolev_0"]
    assert set(rows[0]) >= {"s", "action", "dissipation", "energy", "sobolev_0", "sobolev_4"}


def test_seed_changes_the_trajectory(tmp_path):
    base = ["simulate", "--scenario", "bridges_seed7", "--grid-n", "8", "--s-max", "1"]
    run(tmp_path, *base, sub="a")
    run(tmp_path, *base, "--seed", "8", sub="b")
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_spectrum_table(tmp_path):
    rc, out = run(tmp_path, "spectrum", "--scenario", "bridges_seed7")
    assert rc == 0
    rows = list(csv.DictReader(open(out / "spectrum.csv")))
    assert len(rows) == 17 * 17
    assert (out / "spectrum.jsonl").exists()


def test_verify_selected_criteria(tmp_path, capsys):
    rc, out = run(tmp_path, "verify", "--criterion", "1", "--criterion", "10")
    text = capsys.readouterr().out
    assert rc == 0
    assert "2/2 checks passed" in text


def test_verify_sqrt2_leaves_a_failure_marker(tmp_path):
    # the default scenario uses R = sqrt 2, whose Pell coincidences break the R^-2 bound
    rc, out = run(tmp_path, "verify")
    assert rc == 1
    marker = (out / cli.FAILED).read_text()
    assert "eigenvalue lower bound" in marker
    assert (out / "verify_summary.json").exists()


def test_verify_coupled_ratio_passes(tmp_path):
    rc, out = run(tmp_path, "verify", "--scenario", "coupled_rest")
    assert rc == 0
    assert not (out / cli.FAILED).exists()


def test_stale_marker_is_removed(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    (out / cli.FAILED).write_text("old")
    assert cli.main(["verify", "--criterion", "1", "--out", str(out)]) == 0
    assert not (out / cli.FAILED).exists()


def test_strict_aborts_at_first_failure(tmp_path):
    rc, out = run(tmp_path, "verify", "--strict")
    assert rc == 1
    summary = json.loads((out / "verify_summary.json").read_text())
    assert "aborted_at" in summary["result"]


def test_asymptotics_needs_particles(tmp_path, capsys):
    rc, _ = run(tmp_path, "asymptotics", "--scenario", "bridges_seed7")
    assert rc == 2
    assert "no particles" in capsys.readouterr().err


def test_asymptotics_writes_coefficients(tmp_path):
    rc, out = run(tmp_path, "asymptotics", "--scenario", "coupled_rest", "--grid-n", "32")
    assert rc == 0
    assert (out / "limit_coefficients.csv").exists()


def test_invalid_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('name = "bad"\nflow.epsilon = 2.0\n')
    rc, _ = run(tmp_path, "simulate", "--scenario", str(bad))
    assert rc == 2
    assert "flow.epsilon" in capsys.readouterr().err
    rc, _ = run(tmp_path, "simulate", "--scenario", "nope")
    assert rc == 2


def test_report_merges_everything(tmp_path):
    rc, out = run(tmp_path, "report", "--scenario", "coupled_rest", "--grid-n", "16", "--s-max", "2")
    text = (out / "report.txt").read_text()
    assert "simulate" in text and "spectrum" in text and "asymptotics" in text


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "polyfloer.cli", "verify", "--criterion", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "1/1 checks passed" in proc.stdout


@pytest.mark.parametrize("command", ["simulate", "spectrum", "verify", "asymptotics", "report"])
def test_help_for_every_subcommand(command, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main([command, "--help"])
    assert info.value.code == 0
    assert "--scenario" in capsys.readouterr().out
