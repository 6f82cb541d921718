"""prunesched: probabilistic task-pruning scheduler simulation toolkit."""

from .machines import MachineState, Scenario
from .pet import PetMatrix, generate_synthetic_pet, load_pet, sample_execution, save_pet
from .pmf import (
    Pct,
    Pmf,
    PmfError,
    convolve_evict,
    convolve_no_drop,
    convolve_pending,
    robustness,
)
from .pruner import (
    PrunerState,
    adjusted_drop_threshold,
    drop_pass,
    should_defer,
    update_oversubscription,
)
from .heuristics import (
    HEURISTICS,
    SufferageTable,
    VirtualQueues,
    map_batch,
    update_sufferage,
    urgency,
)
from .simengine import SimConfig, TrialMetrics, compute_metrics, run_trial
from .workload import Task, TaskState, WorkloadConfig, generate_trace, load_trace, save_trace
from .harness import ExperimentSpec, PRESETS, emit_report, run_experiment

__version__ = "0.1.0"
