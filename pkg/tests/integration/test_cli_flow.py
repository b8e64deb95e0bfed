# tests/integration/test_cli_flow.py

import re

import pytest

from src.cli.commands import EXIT_ERROR, EXIT_OK, run

INTERVAL = re.compile(r"\[(\d+\.\d{6}), (\d+\.\d{6})\]")
TRUTH = re.compile(r"ground-truth initial vehicles: (\d+\.\d+)")


@pytest.fixture
def oracle_dir(tmp_path, capsys):
    out = tmp_path / "oracle"
    code = run(
        [
            "simulate",
            "--oracle",
            "--out",
            str(out),
            "--seed",
            "3",
            "--space-blocks",
            "3",
            "--time-blocks",
            "4",
            "--cells-per-block",
            "2",
        ]
    )
    assert code == EXIT_OK
    truth = float(TRUTH.search(capsys.readouterr().out).group(1))
    return out, truth


# ---------------------
# SIMULATE / BOUND
# ---------------------

def test_simulate_writes_scenario_and_run(oracle_dir):
    out, truth = oracle_dir
    assert (out / "scenario.toml").is_file()
    assert (out / "run.csv").is_file()
    assert truth >= 0.0


@pytest.mark.slow
def test_bound_brackets_ground_truth(oracle_dir, capsys):
    out, truth = oracle_dir
    code = run(["bound", "--scenario", str(out / "scenario.toml")])
    assert code == EXIT_OK

    match = INTERVAL.search(capsys.readouterr().out)
    assert match is not None
    low, high = float(match.group(1)), float(match.group(2))
    assert low - 1e-4 <= truth <= high + 1e-4


def test_simulate_requires_oracle_flag(tmp_path):
    assert run(["simulate", "--out", str(tmp_path / "x")]) == EXIT_ERROR


def _simulate_bottleneck(out, space_blocks, time_blocks):
    return run(
        [
            "simulate",
            "--oracle",
            "--bottleneck",
            "--out",
            str(out),
            "--space-blocks",
            str(space_blocks),
            "--time-blocks",
            str(time_blocks),
            "--cells-per-block",
            "2",
        ]
    )


def test_bound_brackets_bottleneck_truth(tmp_path, capsys):
    out = tmp_path / "queue"
    assert _simulate_bottleneck(out, 4, 8) == EXIT_OK
    truth = float(TRUTH.search(capsys.readouterr().out).group(1))

    assert run(["bound", "--scenario", str(out / "scenario.toml")]) == EXIT_OK
    match = INTERVAL.search(capsys.readouterr().out)
    low, high = float(match.group(1)), float(match.group(2))
    assert low - 1e-4 <= truth <= high + 1e-4


def test_bottleneck_queue_must_stay_on_the_link(tmp_path):
    assert _simulate_bottleneck(tmp_path / "long", 2, 40) == EXIT_ERROR


# ---------------------
# ESTIMATE / EXPORT
# ---------------------

def test_estimate_writes_artifacts(oracle_dir, tmp_path):
    out, _ = oracle_dir
    results = tmp_path / "results"
    code = run(
        ["estimate", "--scenario", str(out / "scenario.toml"), "--out", str(results), "--resolution", "6"]
    )
    assert code == EXIT_OK
    for name in ("density_main.csv", "density_main_matrix.csv", "travel_times.txt", "travel_times.json", "solver.log"):
        assert (results / name).is_file(), name
    assert (results / "solver.log").read_text(encoding="utf-8").strip()


def test_export_writes_lp_and_families(oracle_dir, tmp_path):
    out, _ = oracle_dir
    lp = tmp_path / "problem.lp"
    assert run(["export", "--scenario", str(out / "scenario.toml"), "--lp", str(lp)]) == EXIT_OK

    text = lp.read_text(encoding="utf-8")
    assert text.startswith("Minimize")
    assert text.rstrip().endswith("End")
    assert (tmp_path / "problem.lp.families.csv").is_file()


def test_missing_scenario_is_an_error(tmp_path):
    assert run(["bound", "--scenario", str(tmp_path / "nope.toml")]) == EXIT_ERROR
