"""Per-machine FCFS queue state and the analytic completion-time fold."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .pmf import Pct, convolve_evict, convolve_no_drop, convolve_pending


class Scenario(enum.Enum):
    """Dropping regime: none / pending-only / any task incl. executing."""

    NO_DROP = "a"
    PENDING = "b"
    EVICT = "c"


_VARIANTS = {
    Scenario.NO_DROP: convolve_no_drop,
    Scenario.PENDING: convolve_pending,
    Scenario.EVICT: convolve_evict,
}


def convolve_for(scenario: Scenario):
    return _VARIANTS[scenario]


@dataclass
class MachineState:
    id: int
    price_rate: float = 1.0
    queue: list = field(default_factory=list)  # head = executing task
    exec_start: int | None = None  # actual start time of the head
    exec_finish: int | None = None  # actual completion/eviction time
    exec_evicts: bool = False  # head will be evicted at exec_finish
    total_busy: int = 0

    @property
    def busy(self) -> bool:
        return self.exec_start is not None

    def free_slots(self, capacity: int) -> int:
        return capacity - len(self.queue)

    def chain_pcts(self, pet, scenario: Scenario, now: int) -> list[Pct]:
        """Analytic completion distribution of every queued task, in order.

        The executing head is modeled from its actual start time; queued
        tasks fold onto the predecessor's release distribution. The model
        deliberately does not condition on "still running at now": the
        mapper reasons from the same distributions it mapped with.
        """
        conv = convolve_for(scenario)
        pcts = []
        prev = Pct.idle(now)
        for pos, task in enumerate(self.queue):
            if pos == 0 and self.exec_start is not None:
                prev = Pct.idle(self.exec_start)
            pct = conv(prev, pet.cell(task.task_type, self.id), task.deadline)
            pcts.append(pct)
            prev = pct
        return pcts

    def tail_pct(self, pet, scenario: Scenario, now: int) -> Pct:
        """Release distribution seen by the next task appended to this queue."""
        pcts = self.chain_pcts(pet, scenario, now)
        return pcts[-1] if pcts else Pct.idle(now)
