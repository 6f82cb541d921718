"""Synthetic task arrival traces: gamma inter-arrivals and slack deadlines.

Per task type, inter-arrival times are gamma-distributed with mean
``span * task_type_count / total_tasks`` and variance equal to a configured
fraction of that mean. Each task's deadline is its arrival plus the mean
execution time of its type (across machines) plus a slack term
``beta * grand_mean``.

Note on scale: a trace has ``total_tasks`` tasks regardless of arrival
intensity. Oversubscription level is the arrival *rate*, controlled by
``span`` at fixed ``total_tasks`` (shorter span = heavier oversubscription).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_ARRIVAL_VARIANCE_RATIO = 0.10
DEFAULT_SLACK_BETA = 1.0


class TraceError(ValueError):
    pass


class TaskState(enum.Enum):
    UNMAPPED = "unmapped"
    DEFERRED = "deferred"
    QUEUED = "queued"
    EXECUTING = "executing"
    COMPLETED_ONTIME = "completed_ontime"
    COMPLETED_LATE = "completed_late"
    DROPPED = "dropped"

    @property
    def terminal(self) -> bool:
        return self in (
            TaskState.COMPLETED_ONTIME,
            TaskState.COMPLETED_LATE,
            TaskState.DROPPED,
        )


@dataclass
class Task:
    id: int
    task_type: int
    arrival: int
    deadline: int
    state: TaskState = TaskState.UNMAPPED

    def __post_init__(self):
        if self.deadline <= self.arrival:
            raise TraceError(
                f"task {self.id}: deadline {self.deadline} <= arrival {self.arrival}"
            )


@dataclass
class WorkloadConfig:
    total_tasks: int
    task_type_count: int
    span: int
    arrival_variance_ratio: float = DEFAULT_ARRIVAL_VARIANCE_RATIO
    slack_beta: float = DEFAULT_SLACK_BETA
    seed: int = 0

    def __post_init__(self):
        if self.total_tasks <= 0:
            raise TraceError("total_tasks must be positive")
        if self.arrival_variance_ratio <= 0:
            raise TraceError("arrival_variance_ratio must be positive")


def task_deadline(arrival: int, type_mean: float, beta: float, grand_mean: float) -> int:
    """Arrival + own-type mean execution + beta * grand mean, as integer time."""
    d = int(round(arrival + type_mean + beta * grand_mean))
    return max(d, arrival + 1)


def generate_trace(cfg: WorkloadConfig, pet) -> list[Task]:
    """Deterministic (per seed) trace of ``total_tasks`` tasks sorted by arrival."""
    if pet.task_type_count != cfg.task_type_count:
        raise TraceError(
            f"PET has {pet.task_type_count} task types, config wants {cfg.task_type_count}"
        )
    rng = np.random.default_rng(cfg.seed)
    mean_gap = cfg.span * cfg.task_type_count / cfg.total_tasks
    var = cfg.arrival_variance_ratio * mean_gap
    shape = mean_gap * mean_gap / var
    scale = var / mean_gap
    per_type_count = -(-cfg.total_tasks // cfg.task_type_count) + 8  # headroom
    arrivals = []  # (arrival, type)
    for f in range(cfg.task_type_count):
        gaps = rng.gamma(shape, scale, size=per_type_count)
        times = np.cumsum(gaps)
        for t in times:
            arrivals.append((int(round(t)), f))
    arrivals.sort()
    arrivals = arrivals[: cfg.total_tasks]

    grand_mean = pet.grand_mean_execution()
    type_means = [pet.type_mean_execution(f) for f in range(cfg.task_type_count)]
    tasks = [
        Task(
            id=i,
            task_type=f,
            arrival=arr,
            deadline=task_deadline(arr, type_means[f], cfg.slack_beta, grand_mean),
        )
        for i, (arr, f) in enumerate(arrivals)
    ]
    return tasks


TRACE_HEADER = "# prunesched-trace v1"
_COLUMNS = "id,type,arrival,deadline"


def save_trace(tasks: list[Task], path) -> None:
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        fh.write(_COLUMNS + "\n")
        for t in tasks:
            fh.write(f"{t.id},{t.task_type},{t.arrival},{t.deadline}\n")


def load_trace(path) -> list[Task]:
    tasks = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        return tasks
    if lines[0] != TRACE_HEADER:
        raise TraceError(f"{path}: missing trace header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line == _COLUMNS:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise TraceError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        try:
            tid, ttype, arr, dl = (int(x) for x in parts)
        except ValueError as exc:
            raise TraceError(f"{path}:{lineno}: non-integer field: {exc}") from exc
        try:
            tasks.append(Task(id=tid, task_type=ttype, arrival=arr, deadline=dl))
        except TraceError as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from exc
    return tasks
