"""Oversubscription-driven task pruning: EWMA level, Schmitt trigger,
skew/position-adjusted drop thresholds, and the queue drop pass."""

from __future__ import annotations

from dataclasses import dataclass

from .machines import Scenario, convolve_for
from .pmf import Pct, robustness
from .workload import TaskState


@dataclass
class PrunerState:
    """All pruning knobs plus the mutable engagement state.

    ``ewma_weight`` is the weight of the most recent miss count; ``level``
    is the smoothed oversubscription estimate. Engagement flips on when the
    level reaches ``trigger_on`` and off when it falls to ``trigger_off``
    (strict hysteresis gap in between).
    """

    ewma_weight: float = 0.9
    level: float = 0.0
    trigger_on: float = 1.0
    trigger_off: float = 0.8
    dropping_engaged: bool = False
    base_drop_threshold: float = 0.50
    defer_threshold: float = 0.90
    position_scale: float = 0.1  # weight of the skew/position adjustment
    enabled: bool = True

    def __post_init__(self):
        if not (0.0 < self.ewma_weight <= 1.0):
            raise ValueError("ewma_weight must be in (0, 1]")
        if self.trigger_off >= self.trigger_on:
            raise ValueError("trigger_off must be strictly below trigger_on")
        if not (0.0 <= self.base_drop_threshold <= self.defer_threshold <= 1.0):
            raise ValueError(
                "need 0 <= base_drop_threshold <= defer_threshold <= 1"
            )


def update_oversubscription(state: PrunerState, missed: int) -> PrunerState:
    """Fold the latest per-event miss count into the level; apply the trigger."""
    if missed < 0:
        raise ValueError("missed count cannot be negative")
    lam = state.ewma_weight
    state.level = missed * lam + state.level * (1.0 - lam)
    if state.level >= state.trigger_on:
        state.dropping_engaged = True
    elif state.level <= state.trigger_off:
        state.dropping_engaged = False
    return state


def adjusted_drop_threshold(state: PrunerState, skew: float, queue_pos: int) -> float:
    """Per-task threshold: favor positive skew, weight the head most heavily."""
    adj = (-skew * state.position_scale) / (queue_pos + 1)
    return float(min(max(state.base_drop_threshold + adj, 0.0), 1.0))


def should_defer(robustness_best: float, effective_defer_threshold: float) -> bool:
    """Defer only on strictly insufficient robustness."""
    return robustness_best < effective_defer_threshold


def drop_pass(machines, pet, state: PrunerState, now: int,
              scenario: Scenario = Scenario.EVICT, on_drop=None) -> list[int]:
    """Walk every machine queue head-to-tail, dropping low-robustness tasks.

    A task is dropped when its robustness is at or below its adjusted
    threshold; downstream distributions are recomputed after each drop. In
    the pending-only regime the executing head is exempt. ``on_drop(machine,
    task, was_executing)`` lets the caller settle bookkeeping (busy time,
    restarting the queue) before the walk continues. Returns dropped ids.
    """
    conv = convolve_for(scenario)
    dropped: list[int] = []
    for m in machines:
        orig_head = m.queue[0] if m.queue else None
        head_start = m.exec_start
        pos = 0
        idx = 0
        prev = Pct.idle(now)
        while idx < len(m.queue):
            task = m.queue[idx]
            executing = task is orig_head and head_start is not None
            base_prev = Pct.idle(head_start) if executing else prev
            pct = conv(base_prev, pet.cell(task.task_type, m.id), task.deadline)
            droppable = not (scenario is Scenario.PENDING and executing)
            if droppable:
                skew = pct.release_view().skewness()
                threshold = adjusted_drop_threshold(state, skew, pos)
                if robustness(pct) <= threshold:
                    dropped.append(task.id)
                    task.state = TaskState.DROPPED
                    del m.queue[idx]
                    if on_drop is not None:
                        on_drop(m, task, executing)
                    continue  # re-evaluate the new occupant of this slot
            prev = pct
            idx += 1
            pos += 1
    return dropped
