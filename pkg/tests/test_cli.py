import json

import pytest
from click.testing import CliRunner

from prunesched.cli import main
from prunesched.harness import parse_report_csv


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def pet_file(tmp_path, runner):
    path = tmp_path / "pet.json"
    res = runner.invoke(main, [
        "--seed", "3", "gen-pet", "--task-types", "3", "--machines", "2",
        "--samples", "150", "--out", str(path),
    ])
    assert res.exit_code == 0, res.output
    return path


@pytest.fixture()
def trace_file(tmp_path, runner, pet_file):
    path = tmp_path / "trace.csv"
    res = runner.invoke(main, [
        "--seed", "3", "gen-trace", "--pet", str(pet_file),
        "--tasks", "40", "--span", "400", "--out", str(path),
    ])
    assert res.exit_code == 0, res.output
    return path


def test_gen_pet_writes_loadable_file(pet_file):
    from prunesched.pet import load_pet

    matrix = load_pet(pet_file)
    assert matrix.task_type_count == 3 and matrix.machine_count == 2


def test_gen_trace_writes_loadable_file(trace_file):
    from prunesched.workload import load_trace

    assert len(load_trace(trace_file)) == 40


def test_run_writes_metrics_and_log(tmp_path, runner, pet_file, trace_file):
    out = tmp_path / "out"
    res = runner.invoke(main, [
        "--seed", "5", "--out-dir", str(out), "run",
        "--pet", str(pet_file), "--trace", str(trace_file),
        "--heuristic", "pam", "--trim", "4",
    ])
    assert res.exit_code == 0, res.output
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["counted_total"] == 40 - 2 * 4
    assert (out / "events.csv").read_text().startswith("# prunesched-eventlog v1")
    assert "robustness" in res.output


def test_run_rejects_bad_scenario(runner, pet_file, trace_file):
    res = runner.invoke(main, [
        "run", "--pet", str(pet_file), "--trace", str(trace_file),
        "--scenario", "z",
    ])
    assert res.exit_code != 0


def test_experiment_preset_writes_report(tmp_path, runner):
    out = tmp_path / "exp"
    res = runner.invoke(main, [
        "--out-dir", str(out), "experiment", "--preset", "heuristic-comparison",
        "--trials", "2", "--tasks", "30",
    ])
    assert res.exit_code == 0, res.output
    rows = parse_report_csv(out / "heuristic-comparison.csv")
    assert {r.point for r in rows} == {"mm", "msd", "mmu", "moc", "pam", "pamf"}
    raw = json.loads((out / "heuristic-comparison.results.json").read_text())
    assert raw["name"] == "heuristic-comparison"


def test_experiment_yaml_config(tmp_path, runner):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        "name: custom\n"
        "pet: {task_types: 3, machines: 2, samples_per_cell: 150, seed: 5}\n"
        "workload: {total_tasks: 30, task_type_count: 3, span: 300}\n"
        "sim: {trim_count: 3, scenario: c}\n"
        "sweep_param: heuristic\n"
        "sweep_values: [mm, pam]\n"
        "trials_per_point: 2\n"
    )
    out = tmp_path / "exp"
    res = runner.invoke(main, ["--out-dir", str(out), "experiment", "--config", str(cfg)])
    assert res.exit_code == 0, res.output
    rows = parse_report_csv(out / "custom.csv")
    assert {r.point for r in rows} == {"mm", "pam"}


def test_experiment_requires_exactly_one_source(runner, tmp_path):
    res = runner.invoke(main, ["experiment"])
    assert res.exit_code != 0
    assert "exactly one" in res.output


def test_report_reemits_from_raw_results(tmp_path, runner):
    out = tmp_path / "exp"
    res = runner.invoke(main, [
        "--out-dir", str(out), "experiment", "--preset", "cost",
        "--trials", "2", "--tasks", "30",
    ])
    assert res.exit_code == 0, res.output
    res2 = runner.invoke(main, [
        "--out-dir", str(out), "report",
        "--results", str(out / "cost.results.json"), "--format", "plotdata",
    ])
    assert res2.exit_code == 0, res2.output
    assert (out / "cost.plotdata").exists()
