import numpy as np
import pytest

from prunesched.pet import generate_synthetic_pet
from prunesched.workload import (
    Task,
    TraceError,
    WorkloadConfig,
    generate_trace,
    load_trace,
    save_trace,
    task_deadline,
)


@pytest.fixture(scope="module")
def pet():
    means = np.full((4, 2), 50.0)
    return generate_synthetic_pet(means, shape_range=(8, 8), samples_per_cell=400, seed=2)


def test_deadline_formula_zero_slack():
    assert task_deadline(0, 50.0, 0.0, 125.0) == 50


def test_deadline_formula_with_slack():
    assert task_deadline(100, 50.0, 1.0, 125.0) == 275


def test_single_task_zero_beta(pet):
    cfg = WorkloadConfig(total_tasks=1, task_type_count=4, span=100, slack_beta=0.0, seed=3)
    (task,) = generate_trace(cfg, pet)
    expect = task_deadline(task.arrival, pet.type_mean_execution(task.task_type), 0.0,
                           pet.grand_mean_execution())
    assert task.deadline == expect


def test_trace_deterministic(pet):
    cfg = WorkloadConfig(total_tasks=50, task_type_count=4, span=500, seed=11)
    a = generate_trace(cfg, pet)
    b = generate_trace(cfg, pet)
    assert [(t.id, t.task_type, t.arrival, t.deadline) for t in a] == [
        (t.id, t.task_type, t.arrival, t.deadline) for t in b
    ]


def test_trace_sorted_with_id_tiebreak(pet):
    cfg = WorkloadConfig(total_tasks=200, task_type_count=4, span=400, seed=13)
    trace = generate_trace(cfg, pet)
    assert len(trace) == 200
    keys = [(t.arrival, t.id) for t in trace]
    assert keys == sorted(keys)


def test_interarrival_mean_statistics(pet):
    total, types, span = 12_000, 4, 60_000
    cfg = WorkloadConfig(total_tasks=total, task_type_count=types, span=span, seed=17)
    trace = generate_trace(cfg, pet)
    target_gap = span * types / total
    for f in range(types):
        arr = [t.arrival for t in trace if t.task_type == f]
        gaps = np.diff(sorted(arr))
        assert abs(gaps.mean() - target_gap) / target_gap < 0.05


def test_roundtrip(tmp_path, pet):
    cfg = WorkloadConfig(total_tasks=800, task_type_count=4, span=4000, seed=19)
    trace = generate_trace(cfg, pet)
    path = tmp_path / "trace.csv"
    save_trace(trace, path)
    loaded = load_trace(path)
    assert [(t.id, t.task_type, t.arrival, t.deadline) for t in trace] == [
        (t.id, t.task_type, t.arrival, t.deadline) for t in loaded
    ]


def test_empty_file_is_empty_trace(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert load_trace(path) == []


def test_invalid_deadline_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# prunesched-trace v1\nid,type,arrival,deadline\n0,1,10,10\n")
    with pytest.raises(TraceError, match=":3:"):
        load_trace(path)


def test_malformed_row_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# prunesched-trace v1\nid,type,arrival,deadline\n0,1,10\n")
    with pytest.raises(TraceError, match=":3:"):
        load_trace(path)


def test_task_invariant():
    with pytest.raises(TraceError):
        Task(id=0, task_type=0, arrival=5, deadline=5)
