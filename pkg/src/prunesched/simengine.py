"""Deterministic discrete-event simulation of the oversubscribed system.

Mapping events fire on task arrival and task completion. At each event,
coalesced per timestamp: completions settle first (machine index order),
then arrivals enter the batch queue, then one mapping pass runs --
deadline sweep, oversubscription update, optional probabilistic drop pass,
batch mapping, and execution starts.

The event log is the source of truth: ``compute_metrics`` derives every
reported number purely from log rows, so a trial's metrics can be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heuristics import MappingCache, SufferageTable, VirtualQueues, map_batch, update_sufferage
from .machines import MachineState, Scenario
from .pet import sample_execution
from .pruner import PrunerState, drop_pass, update_oversubscription
from .workload import TaskState

# Per-time-unit rates shaped like on-demand cloud VM pricing tiers; override
# via SimConfig.price_rates to model a specific deployment.
DEFAULT_PRICE_RATES = (0.096, 0.085, 0.134, 0.192, 0.123, 0.266, 0.107, 0.149)

LOG_SCHEMA_VERSION = 1
LOG_HEADER = "# prunesched-eventlog v1"
LOG_COLUMNS = "time,kind,task,machine,detail"


class TrialAborted(RuntimeError):
    """Internal invariant breach; the trial's results are unusable."""


@dataclass
class SimConfig:
    scenario: Scenario = Scenario.EVICT
    queue_capacity: int = 6
    trim_count: int = 100
    heuristic: str = "pam"
    seed: int = 0
    price_rates: tuple | None = None
    # pruner knobs (see PrunerState)
    pruner_enabled: bool = True
    ewma_weight: float = 0.9
    trigger_on: float = 1.0
    trigger_off: float = 0.8
    base_drop_threshold: float = 0.50
    defer_threshold: float = 0.90
    position_scale: float = 0.1
    fairness_factor: float = 0.05

    def make_pruner(self) -> PrunerState:
        enabled = self.pruner_enabled and self.scenario is not Scenario.NO_DROP
        return PrunerState(
            ewma_weight=self.ewma_weight,
            trigger_on=self.trigger_on,
            trigger_off=self.trigger_off,
            base_drop_threshold=self.base_drop_threshold if enabled else 0.0,
            defer_threshold=self.defer_threshold if enabled else 0.0,
            position_scale=self.position_scale,
            enabled=enabled,
        )

    def resolved_price_rates(self, machine_count: int) -> tuple:
        if self.price_rates is not None:
            if len(self.price_rates) != machine_count:
                raise ValueError("price_rates length must match machine count")
            return tuple(self.price_rates)
        base = DEFAULT_PRICE_RATES
        return tuple(base[j % len(base)] for j in range(machine_count))


@dataclass
class TrialMetrics:
    counted_ontime: int
    counted_total: int
    per_type_ontime_ratio: dict
    variance_per_type: float
    total_cost: float
    robustness_pct: float
    cost_per_robustness: float


@dataclass
class LogRow:
    time: int
    kind: str
    task: int
    machine: int  # -1 when not machine-bound
    detail: str = ""

    def as_csv(self) -> str:
        return f"{self.time},{self.kind},{self.task},{self.machine},{self.detail}"


def save_event_log(log: list, path) -> None:
    with open(path, "w") as fh:
        fh.write(LOG_HEADER + "\n")
        fh.write(LOG_COLUMNS + "\n")
        for row in log:
            fh.write(row.as_csv() + "\n")


def load_event_log(path) -> list:
    rows = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != LOG_HEADER:
        raise ValueError(f"{path}: missing event log header")
    for line in lines[1:]:
        if not line or line == LOG_COLUMNS:
            continue
        t, kind, task, machine, detail = line.split(",", 4)
        rows.append(LogRow(int(t), kind, int(task), int(machine), detail))
    return rows


def run_trial(cfg: SimConfig, pet, trace) -> tuple:
    """Run one trial to completion; returns (TrialMetrics, event log)."""
    scenario = cfg.scenario
    rates = cfg.resolved_price_rates(pet.machine_count)
    machines = [MachineState(j, price_rate=rates[j]) for j in range(pet.machine_count)]
    rng = np.random.default_rng(cfg.seed)
    pruner = cfg.make_pruner()
    sufferage = SufferageTable.zeros(pet.task_type_count, cfg.fairness_factor)
    cache = MappingCache()
    log: list[LogRow] = []
    tasks = list(trace)
    for t in tasks:
        t.state = TaskState.UNMAPPED
    batch: list = []  # unmapped/deferred tasks, arrival order
    arr_idx = 0
    missed = 0  # deadline misses since the last mapping event
    drops_allowed = scenario is not Scenario.NO_DROP

    def settle_outcome(task, on_time: bool):
        update_sufferage(sufferage, task.task_type, on_time)

    def start_next(m, now):
        nonlocal missed
        while m.queue:
            head = m.queue[0]
            if drops_allowed and head.deadline <= now:
                # machine freed too late for this task to start
                head.state = TaskState.DROPPED
                m.queue.pop(0)
                log.append(LogRow(now, "drop_deadline", head.id, m.id,
                                  f"deadline={head.deadline}"))
                missed += 1
                settle_outcome(head, False)
                continue
            actual = sample_execution(pet, head.task_type, m.id, rng)
            actual = max(actual, 1)
            m.exec_start = now
            planned = now + actual
            if scenario is Scenario.EVICT and planned > head.deadline:
                m.exec_finish = head.deadline
                m.exec_evicts = True
            else:
                m.exec_finish = planned
                m.exec_evicts = False
            head.state = TaskState.EXECUTING
            log.append(LogRow(now, "start", head.id, m.id, f"planned={planned}"))
            return
        m.exec_start = None
        m.exec_finish = None
        m.exec_evicts = False

    def finish_head(m, now):
        nonlocal missed
        head = m.queue.pop(0)
        m.total_busy += now - m.exec_start
        if m.exec_evicts:
            head.state = TaskState.DROPPED
            log.append(LogRow(now, "evict", head.id, m.id,
                              f"deadline={head.deadline}"))
            missed += 1
            settle_outcome(head, False)
        else:
            on_time = now <= head.deadline
            head.state = (
                TaskState.COMPLETED_ONTIME if on_time else TaskState.COMPLETED_LATE
            )
            kind = "finish_ontime" if on_time else "finish_late"
            log.append(LogRow(now, kind, head.id, m.id, f"deadline={head.deadline}"))
            if not on_time:
                missed += 1
            settle_outcome(head, on_time)
        m.exec_start = None
        m.exec_finish = None
        m.exec_evicts = False
        start_next(m, now)

    def on_pruned(m, task, was_executing):
        log.append(LogRow(now, "drop_pruned", task.id, m.id,
                          "executing=1" if was_executing else "executing=0"))
        settle_outcome(task, False)
        if was_executing:
            m.total_busy += now - m.exec_start
            m.exec_start = None
            m.exec_finish = None
            m.exec_evicts = False

    now = 0
    stall_guard = 0
    while True:
        pending_comp = [(m.exec_finish, m.id) for m in machines if m.busy]
        next_comp = min(pending_comp) if pending_comp else None
        next_arr = tasks[arr_idx].arrival if arr_idx < len(tasks) else None
        if next_comp is None and next_arr is None:
            live = [t for t in batch if not t.state.terminal]
            if not live:
                break
            if drops_allowed:
                now = max(now, min(t.deadline for t in live))
            else:
                stall_guard += 1
                if stall_guard > len(live) + 2:
                    raise TrialAborted(
                        "no events pending and mapping makes no progress"
                    )
        else:
            candidates = [t for t in (
                next_comp[0] if next_comp else None, next_arr) if t is not None]
            now = min(candidates)
            stall_guard = 0

        # completions first, machine-index order
        for m in sorted(machines, key=lambda m: m.id):
            while m.busy and m.exec_finish == now:
                finish_head(m, now)
        # then arrivals
        while arr_idx < len(tasks) and tasks[arr_idx].arrival == now:
            task = tasks[arr_idx]
            batch.append(task)
            log.append(LogRow(now, "arrive", task.id, -1,
                              f"type={task.task_type};deadline={task.deadline}"))
            arr_idx += 1

        # mapping pass: 1) deadline sweep
        if drops_allowed:
            for task in [t for t in batch if t.deadline <= now and not t.state.terminal]:
                task.state = TaskState.DROPPED
                log.append(LogRow(now, "drop_deadline", task.id, -1,
                                  f"deadline={task.deadline}"))
                missed += 1
                settle_outcome(task, False)
            for m in machines:
                waiting = m.queue[1:] if m.busy else list(m.queue)
                for task in [t for t in waiting if t.deadline <= now]:
                    task.state = TaskState.DROPPED
                    m.queue.remove(task)
                    log.append(LogRow(now, "drop_deadline", task.id, m.id,
                                      f"deadline={task.deadline}"))
                    missed += 1
                    settle_outcome(task, False)
        batch = [t for t in batch if not t.state.terminal]

        # 2) oversubscription update, 3) probabilistic drop pass
        if pruner.enabled:
            update_oversubscription(pruner, missed)
        missed = 0
        if pruner.enabled and pruner.dropping_engaged:
            drop_pass(machines, pet, pruner, now, scenario, on_drop=on_pruned)
            for m in machines:
                if not m.busy and m.queue:
                    start_next(m, now)

        # 4) map the batch
        if batch:
            vq = VirtualQueues(machines, pet, scenario, cfg.queue_capacity, now,
                               cache=cache)
            res = map_batch(cfg.heuristic, batch, vq, pet, pruner, sufferage,
                            scenario)
            for task, j in res.assignments:
                batch.remove(task)
                task.state = TaskState.QUEUED
                machines[j].queue.append(task)
                log.append(LogRow(now, "map", task.id, j, ""))
            for task in res.deferred:
                task.state = TaskState.DEFERRED
        # 5) start executions
        for m in machines:
            if not m.busy and m.queue:
                start_next(m, now)

    non_terminal = [t.id for t in tasks if not t.state.terminal]
    if non_terminal:
        raise TrialAborted(f"tasks never reached a terminal state: {non_terminal[:5]}")
    metrics = compute_metrics(log, cfg, machine_count=pet.machine_count)
    return metrics, log


def compute_metrics(log: list, cfg: SimConfig, machine_count: int) -> TrialMetrics:
    """Derive trial metrics purely from the event log.

    The first and last ``trim_count`` tasks by arrival order are excluded,
    keeping only the oversubscribed middle of the trial.
    """
    arrivals = {}  # task -> (arrival, type, deadline)
    outcome = {}  # task -> on_time bool (terminal)
    busy_start = {}  # machine -> (time, task)
    busy = {j: 0 for j in range(machine_count)}
    for row in log:
        if row.kind == "arrive":
            fields = dict(kv.split("=") for kv in row.detail.split(";"))
            arrivals[row.task] = (row.time, int(fields["type"]), int(fields["deadline"]))
        elif row.kind == "start":
            busy_start[row.machine] = (row.time, row.task)
        elif row.kind in ("finish_ontime", "finish_late", "evict"):
            outcome[row.task] = row.kind == "finish_ontime"
            t0, _ = busy_start.pop(row.machine)
            busy[row.machine] += row.time - t0
        elif row.kind == "drop_pruned":
            outcome[row.task] = False
            if row.detail == "executing=1":
                t0, _ = busy_start.pop(row.machine)
                busy[row.machine] += row.time - t0
        elif row.kind == "drop_deadline":
            outcome[row.task] = False

    ordered = sorted(arrivals, key=lambda tid: (arrivals[tid][0], tid))
    trim = cfg.trim_count
    counted = ordered[trim: len(ordered) - trim] if trim else ordered
    counted_total = len(counted)
    counted_ontime = sum(1 for tid in counted if outcome[tid])
    by_type_total = {}
    by_type_ontime = {}
    for tid in counted:
        f = arrivals[tid][1]
        by_type_total[f] = by_type_total.get(f, 0) + 1
        if outcome[tid]:
            by_type_ontime[f] = by_type_ontime.get(f, 0) + 1
    per_type = {
        f: 100.0 * by_type_ontime.get(f, 0) / n for f, n in sorted(by_type_total.items())
    }
    variance = float(np.var(list(per_type.values()))) if per_type else 0.0
    rates = cfg.resolved_price_rates(machine_count)
    total_cost = float(sum(rates[j] * busy[j] for j in range(machine_count)))
    robustness_pct = 100.0 * counted_ontime / counted_total if counted_total else 0.0
    cpr = total_cost / robustness_pct if robustness_pct > 0 else float("inf")
    return TrialMetrics(
        counted_ontime=counted_ontime,
        counted_total=counted_total,
        per_type_ontime_ratio=per_type,
        variance_per_type=variance,
        total_cost=total_cost,
        robustness_pct=robustness_pct,
        cost_per_robustness=cpr,
    )
