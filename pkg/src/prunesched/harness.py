"""Experiment runner: sweeps, repeated trials, confidence intervals, reports.

An :class:`ExperimentSpec` names one parameter to sweep and runs
``trials_per_point`` independent trials per sweep value. Trials share the
experiment's PET matrix (the execution-time model is held fixed) but each
trial gets a freshly generated arrival trace from its own seed. Results are
reported as mean and 95% Student-t confidence interval per metric.

Everything is deterministic given the spec: seeds derive from
``base_seed`` and the trial index, and result ordering is by (sweep point,
trial index) regardless of worker completion order.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as _scipy_stats

from .pet import (
    DEFAULT_SAMPLES_PER_CELL,
    DEFAULT_SHAPE_RANGE,
    PetMatrix,
    default_mean_table,
    generate_synthetic_pet,
)
from .simengine import SimConfig, run_trial
from .workload import WorkloadConfig, generate_trace

REPORT_COLUMNS = ("point", "metric", "mean", "ci_low", "ci_high", "n")
REPORT_METRICS = ("robustness_pct", "variance_per_type", "total_cost", "cost_per_robustness")

# seed offsets keep the PET, trace, and simulation RNG streams disjoint
_TRACE_SEED_OFFSET = 10_000
_SIM_SEED_OFFSET = 20_000_000


@dataclass
class PetSpec:
    task_types: int = 12
    machines: int = 8
    mean_range: tuple = (50.0, 200.0)
    shape_range: tuple = DEFAULT_SHAPE_RANGE
    samples_per_cell: int = DEFAULT_SAMPLES_PER_CELL
    bin_width: int = 5
    seed: int = 7


@dataclass
class ExperimentSpec:
    name: str
    pet: PetSpec = field(default_factory=PetSpec)
    workload: WorkloadConfig = field(
        default_factory=lambda: WorkloadConfig(total_tasks=800, task_type_count=12, span=3200)
    )
    sim: SimConfig = field(default_factory=SimConfig)
    sweep_param: str = "heuristic"
    sweep_values: tuple = ("pam",)
    trials_per_point: int = 30
    base_seed: int = 1

    def __post_init__(self):
        if self.trials_per_point < 2:
            raise ValueError("trials_per_point must be >= 2 for CI computation")


@dataclass
class ResultRow:
    point: str
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    n: int


@dataclass
class ExperimentResult:
    spec_name: str
    rows: list
    trial_values: dict  # (point, metric) -> list of per-trial values


def build_pet(ps: PetSpec) -> PetMatrix:
    means = default_mean_table(ps.task_types, ps.machines, ps.mean_range, seed=ps.seed)
    return generate_synthetic_pet(
        means,
        shape_range=ps.shape_range,
        samples_per_cell=ps.samples_per_cell,
        bin_width=ps.bin_width,
        seed=ps.seed,
    )


def _apply_sweep(spec: ExperimentSpec, value):
    """Return (SimConfig, WorkloadConfig) with the sweep value applied."""
    sim = spec.sim
    wl = spec.workload
    param = spec.sweep_param
    if param == "heuristic":
        sim = replace(sim, heuristic=value)
    elif param == "total_tasks":
        wl = replace(wl, total_tasks=value)
    elif param == "span":
        wl = replace(wl, span=value)
    elif hasattr(sim, param):
        sim = replace(sim, **{param: value})
    elif hasattr(wl, param):
        wl = replace(wl, **{param: value})
    else:
        raise ValueError(f"unknown sweep parameter {param!r}")
    return sim, wl


def _run_one(args):
    pet, sim_cfg, wl_cfg, trace_seed, sim_seed = args
    wl = replace(wl_cfg, seed=trace_seed)
    trace = generate_trace(wl, pet)
    cfg = replace(sim_cfg, seed=sim_seed)
    metrics, _log = run_trial(cfg, pet, trace)
    return {m: getattr(metrics, m) for m in REPORT_METRICS}


def t_confidence_interval(values, confidence: float = 0.95):
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    mean = float(values.mean())
    # inf sentinels (e.g. cost ratio at zero robustness) have no spread
    if n < 2 or not np.isfinite(values).all():
        return mean, mean, mean
    sd = float(values.std(ddof=1))
    crit = float(_scipy_stats.t.ppf(0.5 + confidence / 2.0, n - 1))
    half = crit * sd / math.sqrt(n)
    return mean, mean - half, mean + half


def run_experiment(spec: ExperimentSpec, workers: int = 1,
                   pet: PetMatrix | None = None) -> ExperimentResult:
    if pet is None:
        pet = build_pet(spec.pet)
    jobs = []
    labels = []
    for value in spec.sweep_values:
        sim_cfg, wl_cfg = _apply_sweep(spec, value)
        for k in range(spec.trials_per_point):
            trace_seed = spec.base_seed + _TRACE_SEED_OFFSET + k
            sim_seed = spec.base_seed + _SIM_SEED_OFFSET + k
            jobs.append((pet, sim_cfg, wl_cfg, trace_seed, sim_seed))
            labels.append(str(value))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        outcomes = [_run_one(j) for j in jobs]

    trial_values: dict = {}
    for label, out in zip(labels, outcomes):
        for metric, v in out.items():
            trial_values.setdefault((label, metric), []).append(v)
    rows = []
    for value in spec.sweep_values:
        label = str(value)
        for metric in REPORT_METRICS:
            vals = trial_values[(label, metric)]
            mean, lo, hi = t_confidence_interval(vals)
            rows.append(ResultRow(label, metric, mean, lo, hi, len(vals)))
    return ExperimentResult(spec_name=spec.name, rows=rows, trial_values=trial_values)


def emit_report(result: ExperimentResult, out_dir, fmt: str = "csv") -> list:
    """Write the result table; returns the written paths.

    ``csv``: one row per (sweep point, metric) with mean and CI bounds.
    ``plotdata``: per-metric blocks separated by blank lines, one series
    per sweep point, for external plotting tools.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt == "csv":
        path = os.path.join(out_dir, f"{result.spec_name}.csv")
        with open(path, "w") as fh:
            fh.write(",".join(REPORT_COLUMNS) + "\n")
            for r in result.rows:
                fh.write(
                    f"{r.point},{r.metric},{r.mean!r},{r.ci_low!r},{r.ci_high!r},{r.n}\n"
                )
        paths.append(path)
    elif fmt == "plotdata":
        path = os.path.join(out_dir, f"{result.spec_name}.plotdata")
        with open(path, "w") as fh:
            for metric in REPORT_METRICS:
                fh.write(f"# metric: {metric}\n")
                for r in result.rows:
                    if r.metric == metric:
                        fh.write(f"{r.point} {r.mean!r} {r.ci_low!r} {r.ci_high!r}\n")
                fh.write("\n")
        paths.append(path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return paths


def parse_report_csv(path) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ",".join(REPORT_COLUMNS):
            raise ValueError(f"{path}: unexpected report header")
        for line in fh:
            point, metric, mean, lo, hi, n = line.rstrip("\n").split(",")
            rows.append(ResultRow(point, metric, float(mean), float(lo), float(hi), int(n)))
    return rows


# ---------------------------------------------------------------------------
# Bundled presets: one per headline study, at desk scale.
# ---------------------------------------------------------------------------

HIGH_OVERSUB_SPAN = 3200  # ~4x arrival intensity over service capacity
MODERATE_OVERSUB_SPAN = 6400


def _base_workload(total_tasks=800, span=HIGH_OVERSUB_SPAN, seed=0):
    return WorkloadConfig(
        total_tasks=total_tasks, task_type_count=12, span=span, seed=seed
    )


def preset_lambda_sweep(trials=30, total_tasks=800, base_seed=11) -> ExperimentSpec:
    return ExperimentSpec(
        name="lambda-sweep",
        workload=_base_workload(total_tasks),
        sim=SimConfig(heuristic="pam"),
        sweep_param="ewma_weight",
        sweep_values=(0.5, 0.7, 0.9, 1.0),
        trials_per_point=trials,
        base_seed=base_seed,
    )


def preset_threshold_gap(trials=30, total_tasks=800, base_seed=13) -> ExperimentSpec:
    return ExperimentSpec(
        name="threshold-gap",
        workload=_base_workload(total_tasks),
        sim=SimConfig(heuristic="pam"),
        sweep_param="defer_threshold",
        sweep_values=(0.50, 0.70, 0.90),
        trials_per_point=trials,
        base_seed=base_seed,
    )


def preset_fairness(trials=30, total_tasks=800, base_seed=17) -> ExperimentSpec:
    return ExperimentSpec(
        name="fairness",
        workload=_base_workload(total_tasks),
        sim=SimConfig(heuristic="pamf"),
        sweep_param="fairness_factor",
        sweep_values=(0.0, 0.05, 0.15, 0.25),
        trials_per_point=trials,
        base_seed=base_seed,
    )


def preset_heuristic_comparison(trials=30, total_tasks=800, base_seed=19) -> ExperimentSpec:
    return ExperimentSpec(
        name="heuristic-comparison",
        workload=_base_workload(total_tasks),
        sim=SimConfig(),
        sweep_param="heuristic",
        sweep_values=("mm", "msd", "mmu", "moc", "pam", "pamf"),
        trials_per_point=trials,
        base_seed=base_seed,
    )


def preset_cost(trials=30, total_tasks=800, base_seed=23) -> ExperimentSpec:
    return ExperimentSpec(
        name="cost",
        workload=_base_workload(total_tasks),
        sim=SimConfig(),
        sweep_param="heuristic",
        sweep_values=("mm", "moc", "pam", "pamf"),
        trials_per_point=trials,
        base_seed=base_seed,
    )


PRESETS = {
    "lambda-sweep": preset_lambda_sweep,
    "threshold-gap": preset_threshold_gap,
    "fairness": preset_fairness,
    "heuristic-comparison": preset_heuristic_comparison,
    "cost": preset_cost,
}
