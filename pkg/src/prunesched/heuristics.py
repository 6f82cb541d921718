"""Two-phase batch mapping heuristics over virtual machine-queue copies.

Six heuristics share one loop: phase 1 picks, per unmapped task, the best
machine for that task under the heuristic's objective; phase 2 commits a
single task-machine pair; both repeat until the virtual queues fill or the
batch drains.

``mm``   minimum expected completion, both phases.
``msd``  phase 2 prefers the soonest deadline (tie: min completion).
``mmu``  phase 2 prefers the greatest urgency 1/(deadline - E[completion]).
``moc``  phase 1 max robustness; tasks under a fixed 30% robustness floor
         are culled for this event; phase 2 permutes the top-3 pairs and
         commits from the ordering with the best total robustness.
``pam``  phase 1 max robustness; tasks under the deferring threshold go
         back to the batch queue; phase 2 min expected completion
         (tie: shortest expected execution).
``pamf`` ``pam`` with a per-task-type deferring threshold relaxed by the
         type's accumulated sufferage value.

Phase-1 robustness and expected completion come from a per-(machine, type)
cached convolution with prefix sums, so evaluating a task costs a binary
search instead of a convolution. The cache exploits the fact that, for any
dropping regime, success mass at or before the deadline equals the plain
convolution's mass there (blocked/evicted outcomes only ever land at or
after the deadline).
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .machines import Scenario, convolve_for
from .pmf import Pct

HEURISTICS = ("mm", "msd", "mmu", "moc", "pam", "pamf")
MOC_CULL_THRESHOLD = 0.30


def urgency(deadline: float, expected_completion: float) -> float:
    """1/(deadline - E[completion]); +inf at zero slack, negative when late."""
    slack = deadline - expected_completion
    if slack == 0:
        return math.inf
    return 1.0 / slack


@dataclass
class SufferageTable:
    """Per-task-type relaxation of the deferring threshold."""

    values: list
    fairness_factor: float = 0.05

    @classmethod
    def zeros(cls, task_type_count: int, fairness_factor: float = 0.05):
        return cls(values=[0.0] * task_type_count, fairness_factor=fairness_factor)

    def effective_defer_threshold(self, base: float, task_type: int) -> float:
        return float(min(max(base - self.values[task_type], 0.0), 1.0))


def update_sufferage(table: SufferageTable, task_type: int, on_time: bool) -> SufferageTable:
    """Relax the threshold for types that miss, tighten for types that hit."""
    delta = -table.fairness_factor if on_time else table.fairness_factor
    table.values[task_type] = float(min(max(table.values[task_type] + delta, 0.0), 1.0))
    return table


class _ConvStats:
    """Prefix sums over a (tail release x execution PMF) convolution."""

    __slots__ = ("times", "cum_mass", "cum_tmass", "exec_mean", "total_mass", "total_tmass")

    def __init__(self, conv_pmf, exec_mean):
        self.times = conv_pmf.times
        self.cum_mass = np.cumsum(conv_pmf.probs)
        self.cum_tmass = np.cumsum(conv_pmf.times * conv_pmf.probs)
        self.exec_mean = exec_mean
        self.total_mass = float(self.cum_mass[-1]) if len(self.cum_mass) else 0.0
        self.total_tmass = float(self.cum_tmass[-1]) if len(self.cum_tmass) else 0.0

    def mass_at_or_before(self, t):
        i = bisect_right(self.times, t)
        return float(self.cum_mass[i - 1]) if i else 0.0

    def tmass_at_or_before(self, t):
        i = bisect_right(self.times, t)
        return float(self.cum_tmass[i - 1]) if i else 0.0


class _ReleaseStats:
    __slots__ = ("times", "cum_mass", "cum_tmass", "total_mass", "total_tmass")

    def __init__(self, release_pmf):
        self.times = release_pmf.times
        self.cum_mass = np.cumsum(release_pmf.probs)
        self.cum_tmass = np.cumsum(release_pmf.times * release_pmf.probs)
        self.total_mass = float(self.cum_mass[-1]) if len(self.cum_mass) else 0.0
        self.total_tmass = float(self.cum_tmass[-1]) if len(self.cum_tmass) else 0.0

    def tail_mass_from(self, t):
        """Mass and t-weighted mass of release impulses at times >= t."""
        i = bisect_right(self.times, t - 1)
        head = float(self.cum_mass[i - 1]) if i else 0.0
        thead = float(self.cum_tmass[i - 1]) if i else 0.0
        return self.total_mass - head, self.total_tmass - thead


@dataclass
class _TailEntry:
    sig: tuple
    tail: Pct
    conv: dict  # task_type -> _ConvStats
    rel: dict  # {"stats": _ReleaseStats} once built


class MappingCache:
    """Cross-event memo of per-machine tail folds and candidate stats.

    A machine's analytic tail only changes when its queue composition or
    head start time changes, so folds survive across mapping events. Owned
    by a single trial.
    """

    def __init__(self):
        self._entries = {}

    def entry(self, m, pet, scenario, now) -> _TailEntry:
        if m.queue:
            sig = (m.exec_start, tuple(t.id for t in m.queue))
        else:
            sig = ("idle", now)
        e = self._entries.get(m.id)
        if e is None or e.sig != sig:
            e = _TailEntry(sig, m.tail_pct(pet, scenario, now), {}, {})
            self._entries[m.id] = e
        return e


class VirtualQueues:
    """Provisional machine queues used during one mapping event.

    Holds per-machine free-slot counts and the analytic tail release
    distribution, kept consistent with every committed assignment.
    """

    def __init__(self, machines, pet, scenario: Scenario, capacity: int, now: int,
                 cache: MappingCache | None = None):
        self.pet = pet
        self.scenario = scenario
        self.now = now
        self.machine_ids = [m.id for m in machines]
        self.slots = {m.id: m.free_slots(capacity) for m in machines}
        self.committed = {m.id: [] for m in machines}
        self.tails = {}
        self._conv_by_m = {}
        self._rel_by_m = {}
        for m in machines:
            if cache is not None:
                e = cache.entry(m, pet, scenario, now)
            else:
                e = _TailEntry((), m.tail_pct(pet, scenario, now), {}, {})
            self.tails[m.id] = e.tail
            self._conv_by_m[m.id] = e.conv
            self._rel_by_m[m.id] = e.rel
        self._exec_means = {}

    def clone(self) -> "VirtualQueues":
        other = object.__new__(VirtualQueues)
        other.pet = self.pet
        other.scenario = self.scenario
        other.now = self.now
        other.machine_ids = list(self.machine_ids)
        other.slots = dict(self.slots)
        other.tails = dict(self.tails)
        other.committed = {j: list(v) for j, v in self.committed.items()}
        # sub-dicts are shared: commits replace them, never mutate in place
        other._conv_by_m = dict(self._conv_by_m)
        other._rel_by_m = dict(self._rel_by_m)
        other._exec_means = self._exec_means
        return other

    def free_machines(self):
        return [j for j in self.machine_ids if self.slots[j] > 0]

    def total_free_slots(self) -> int:
        return sum(self.slots.values())

    def exec_mean(self, task_type: int, j: int) -> float:
        key = (task_type, j)
        mu = self._exec_means.get(key)
        if mu is None:
            mu = self.pet.cell(task_type, j).expected_value()
            self._exec_means[key] = mu
        return mu

    def _release_stats(self, j) -> _ReleaseStats:
        holder = self._rel_by_m[j]
        st = holder.get("stats")
        if st is None:
            st = _ReleaseStats(self.tails[j].release_view())
            holder["stats"] = st
        return st

    def _conv_stats(self, j, task_type) -> _ConvStats:
        d = self._conv_by_m[j]
        st = d.get(task_type)
        if st is None:
            conv = convolve_for(Scenario.NO_DROP)
            pet_pmf = self.pet.cell(task_type, j)
            full = conv(self.tails[j], pet_pmf, 0)
            st = _ConvStats(full.success, self.exec_mean(task_type, j))
            d[task_type] = st
        return st

    def robustness(self, task, j) -> float:
        """Probability the task completes by its deadline if appended to j."""
        return self._conv_stats(j, task.task_type).mass_at_or_before(task.deadline)

    def expected_completion(self, task, j) -> float:
        """Expected machine-release time of the candidate, regime-aware."""
        cs = self._conv_stats(j, task.task_type)
        e_full = cs.total_tmass
        if self.scenario is Scenario.NO_DROP:
            return e_full
        rs = self._release_stats(j)
        d = task.deadline
        tail_mass, tail_tmass = rs.tail_mass_from(d)
        e_pending = e_full - tail_mass * cs.exec_mean
        if self.scenario is Scenario.PENDING:
            return e_pending
        # eviction collapses late success mass onto the deadline
        succ_tail_t = (cs.total_tmass - cs.tmass_at_or_before(d)) - (
            tail_tmass + tail_mass * cs.exec_mean
        )
        succ_tail_m = (cs.total_mass - cs.mass_at_or_before(d)) - tail_mass
        return e_pending - (succ_tail_t - d * succ_tail_m)

    def commit(self, task, j) -> None:
        if self.slots[j] <= 0:
            raise RuntimeError(f"machine {j} has no free virtual slot")
        conv = convolve_for(self.scenario)
        new_tail = conv(self.tails[j], self.pet.cell(task.task_type, j), task.deadline)
        if abs(new_tail.total_mass - self.tails[j].total_mass) > 1e-9:
            raise RuntimeError(f"virtual tail mass drifted on machine {j}")
        self.tails[j] = new_tail
        self.slots[j] -= 1
        self.committed[j].append(task)
        self._conv_by_m[j] = {}
        self._rel_by_m[j] = {}


@dataclass
class MapResult:
    assignments: list = field(default_factory=list)  # (task, machine_id)
    deferred: list = field(default_factory=list)


def _phase1(heuristic, tasks, vq, free):
    """Best machine per task under the heuristic's phase-1 objective."""
    out = []
    for task in tasks:
        best_j = None
        best_score = None
        for j in free:
            if heuristic in ("moc", "pam", "pamf"):
                score = vq.robustness(task, j)
                better = best_score is None or score > best_score
            else:
                score = vq.expected_completion(task, j)
                better = best_score is None or score < best_score
            if better:
                best_score, best_j = score, j
        out.append((task, best_j, best_score))
    return out


def _moc_phase2(cands, vq):
    """Permute the top-3 robustness pairs; commit from the best ordering."""
    top = sorted(
        range(len(cands)), key=lambda i: (-cands[i][2], i)
    )[:3]
    best_order = None
    best_total = -1.0
    for perm in itertools.permutations(top):
        scratch = vq.clone()
        total = 0.0
        feasible = []
        for i in perm:
            task, j, _ = cands[i]
            if scratch.slots[j] <= 0:
                continue
            total += scratch.robustness(task, j)
            scratch.commit(task, j)
            feasible.append(i)
        if feasible and total > best_total + 1e-12:
            best_total = total
            best_order = feasible
    if best_order is None:
        return None
    return cands[best_order[0]]


def map_batch(heuristic, batch, vq: VirtualQueues, pet, pruner_state, sufferage,
              scenario: Scenario | None = None) -> MapResult:
    """Run one mapping event; commits into ``vq`` and returns the decisions.

    ``batch`` must be in arrival order. Tasks neither assigned nor deferred
    remain for the next event. Phase-1 ties go to the lowest machine index;
    phase-2 ties to the earliest batch position.
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    result = MapResult()
    remaining = list(batch)
    rejected = []  # culled by moc for this event only
    while remaining and vq.total_free_slots() > 0:
        free = vq.free_machines()
        if not free:
            break
        cands = _phase1(heuristic, remaining, vq, free)

        if heuristic in ("pam", "pamf"):
            survivors = []
            for task, j, rob in cands:
                if heuristic == "pamf":
                    thr = sufferage.effective_defer_threshold(
                        pruner_state.defer_threshold, task.task_type
                    )
                else:
                    thr = pruner_state.defer_threshold
                if rob < thr:
                    result.deferred.append(task)
                    remaining.remove(task)
                else:
                    survivors.append((task, j, rob))
            cands = survivors
        elif heuristic == "moc":
            survivors = []
            for task, j, rob in cands:
                if rob < MOC_CULL_THRESHOLD:
                    rejected.append(task)
                    remaining.remove(task)
                else:
                    survivors.append((task, j, rob))
            cands = survivors
        if not cands:
            break

        if heuristic == "mm":
            pick = min(cands, key=lambda c: (c[2], remaining.index(c[0])))
        elif heuristic == "msd":
            pick = min(
                cands,
                key=lambda c: (c[0].deadline, c[2], remaining.index(c[0])),
            )
        elif heuristic == "mmu":
            pick = max(
                cands,
                key=lambda c: (
                    urgency(c[0].deadline, c[2]),
                    -remaining.index(c[0]),
                ),
            )
        elif heuristic == "moc":
            pick = _moc_phase2(cands, vq)
            if pick is None:
                break
        else:  # pam / pamf: min expected completion, tie shortest execution
            pick = min(
                cands,
                key=lambda c: (
                    vq.expected_completion(c[0], c[1]),
                    vq.exec_mean(c[0].task_type, c[1]),
                    remaining.index(c[0]),
                ),
            )
        task, j, _ = pick
        vq.commit(task, j)
        result.assignments.append((task, j))
        remaining.remove(task)
    return result
