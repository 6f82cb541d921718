"""Command-line interface.

Subcommands:

* ``gen-pet``     build a synthetic execution-time matrix file
* ``gen-trace``   synthesize an arrival trace against a PET file
* ``run``         run a single trial, writing metrics and the event log
* ``experiment``  run a bundled preset or a YAML-described experiment
* ``report``      convert stored experiment results to csv/plotdata
"""

from __future__ import annotations

import dataclasses
import json
import os

import click
import yaml

from . import harness, pet as petmod, simengine, workload
from .machines import Scenario

_SCENARIOS = {"a": Scenario.NO_DROP, "b": Scenario.PENDING, "c": Scenario.EVICT}


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Global base seed.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel trial workers for experiments.")
@click.option("--out-dir", type=click.Path(), default=".", show_default=True)
@click.pass_context
def main(ctx, seed, workers, out_dir):
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, workers=workers, out_dir=out_dir)


@main.command("gen-pet")
@click.option("--task-types", type=int, default=12, show_default=True)
@click.option("--machines", type=int, default=8, show_default=True)
@click.option("--mean-lo", type=float, default=50.0, show_default=True)
@click.option("--mean-hi", type=float, default=200.0, show_default=True)
@click.option("--shape-lo", type=float, default=1.0, show_default=True)
@click.option("--shape-hi", type=float, default=20.0, show_default=True)
@click.option("--samples", type=int, default=500, show_default=True)
@click.option("--bin-width", type=int, default=5, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default="pet.json", show_default=True)
@click.pass_context
def gen_pet(ctx, task_types, machines, mean_lo, mean_hi, shape_lo, shape_hi,
            samples, bin_width, out_path):
    """Generate a synthetic PET matrix and save it."""
    seed = ctx.obj["seed"]
    means = petmod.default_mean_table(task_types, machines, (mean_lo, mean_hi), seed=seed)
    matrix = petmod.generate_synthetic_pet(
        means, shape_range=(shape_lo, shape_hi), samples_per_cell=samples,
        bin_width=bin_width, seed=seed,
    )
    petmod.save_pet(matrix, out_path)
    click.echo(f"wrote {task_types}x{machines} PET to {out_path}")


@main.command("gen-trace")
@click.option("--pet", "pet_path", type=click.Path(exists=True), required=True)
@click.option("--tasks", type=int, default=800, show_default=True)
@click.option("--span", type=int, default=3200, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True,
              help="Deadline slack coefficient.")
@click.option("--variance-ratio", type=float, default=0.10, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default="trace.csv", show_default=True)
@click.pass_context
def gen_trace(ctx, pet_path, tasks, span, beta, variance_ratio, out_path):
    """Generate an arrival trace for the given PET."""
    matrix = petmod.load_pet(pet_path)
    cfg = workload.WorkloadConfig(
        total_tasks=tasks,
        task_type_count=matrix.task_type_count,
        span=span,
        arrival_variance_ratio=variance_ratio,
        slack_beta=beta,
        seed=ctx.obj["seed"],
    )
    trace = workload.generate_trace(cfg, matrix)
    workload.save_trace(trace, out_path)
    click.echo(f"wrote {len(trace)} tasks to {out_path}")


def _pruner_options(fn):
    opts = [
        click.option("--ewma-weight", type=float, default=0.9, show_default=True),
        click.option("--trigger-on", type=float, default=1.0, show_default=True),
        click.option("--trigger-off", type=float, default=0.8, show_default=True),
        click.option("--drop-threshold", type=float, default=0.50, show_default=True),
        click.option("--defer-threshold", type=float, default=0.90, show_default=True),
        click.option("--position-scale", type=float, default=0.1, show_default=True),
        click.option("--fairness-factor", type=float, default=0.05, show_default=True),
        click.option("--no-pruner", is_flag=True, default=False),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@main.command("run")
@click.option("--pet", "pet_path", type=click.Path(exists=True), required=True)
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--heuristic", type=click.Choice(list("mm msd mmu moc pam pamf".split())),
              default="pam", show_default=True)
@click.option("--scenario", type=click.Choice(["a", "b", "c"]), default="c",
              show_default=True, help="Dropping regime.")
@click.option("--queue-capacity", type=int, default=6, show_default=True)
@click.option("--trim", type=int, default=100, show_default=True)
@_pruner_options
@click.pass_context
def run(ctx, pet_path, trace_path, heuristic, scenario, queue_capacity, trim,
        ewma_weight, trigger_on, trigger_off, drop_threshold, defer_threshold,
        position_scale, fairness_factor, no_pruner):
    """Run one trial and write metrics.json plus the event log."""
    matrix = petmod.load_pet(pet_path)
    trace = workload.load_trace(trace_path)
    cfg = simengine.SimConfig(
        scenario=_SCENARIOS[scenario],
        queue_capacity=queue_capacity,
        trim_count=trim,
        heuristic=heuristic,
        seed=ctx.obj["seed"],
        pruner_enabled=not no_pruner,
        ewma_weight=ewma_weight,
        trigger_on=trigger_on,
        trigger_off=trigger_off,
        base_drop_threshold=drop_threshold,
        defer_threshold=defer_threshold,
        position_scale=position_scale,
        fairness_factor=fairness_factor,
    )
    metrics, log = simengine.run_trial(cfg, matrix, trace)
    out_dir = ctx.obj["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.json")
    with open(metrics_path, "w") as fh:
        json.dump(dataclasses.asdict(metrics), fh, indent=2)
    log_path = os.path.join(out_dir, "events.csv")
    simengine.save_event_log(log, log_path)
    click.echo(
        f"robustness {metrics.robustness_pct:.2f}% "
        f"({metrics.counted_ontime}/{metrics.counted_total} counted tasks on time); "
        f"wrote {metrics_path} and {log_path}"
    )


def _spec_from_yaml(path, base_seed) -> harness.ExperimentSpec:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    pet_spec = harness.PetSpec(**doc.get("pet", {}))
    wl = workload.WorkloadConfig(**doc["workload"])
    sim_kwargs = dict(doc.get("sim", {}))
    if "scenario" in sim_kwargs:
        sim_kwargs["scenario"] = _SCENARIOS[sim_kwargs["scenario"]]
    sim = simengine.SimConfig(**sim_kwargs)
    return harness.ExperimentSpec(
        name=doc["name"],
        pet=pet_spec,
        workload=wl,
        sim=sim,
        sweep_param=doc["sweep_param"],
        sweep_values=tuple(doc["sweep_values"]),
        trials_per_point=doc.get("trials_per_point", 30),
        base_seed=doc.get("base_seed", base_seed),
    )


@main.command("experiment")
@click.option("--preset", type=click.Choice(sorted(harness.PRESETS)), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML experiment spec (alternative to --preset).")
@click.option("--trials", type=int, default=None, help="Override trials per sweep point.")
@click.option("--tasks", type=int, default=None, help="Override tasks per trial.")
@click.pass_context
def experiment(ctx, preset, config_path, trials, tasks):
    """Run a full experiment and store raw results + a CSV report."""
    if (preset is None) == (config_path is None):
        raise click.UsageError("give exactly one of --preset or --config")
    if preset is not None:
        kwargs = {}
        if trials is not None:
            kwargs["trials"] = trials
        if tasks is not None:
            kwargs["total_tasks"] = tasks
        spec = harness.PRESETS[preset](**kwargs)
    else:
        spec = _spec_from_yaml(config_path, ctx.obj["seed"])
    result = harness.run_experiment(spec, workers=ctx.obj["workers"])
    out_dir = ctx.obj["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    raw_path = os.path.join(out_dir, f"{spec.name}.results.json")
    with open(raw_path, "w") as fh:
        json.dump(
            {
                "name": result.spec_name,
                "trials": {
                    f"{point}|{metric}": values
                    for (point, metric), values in result.trial_values.items()
                },
            },
            fh,
        )
    paths = harness.emit_report(result, out_dir, fmt="csv")
    click.echo(f"wrote {raw_path} and {paths[0]}")


@main.command("report")
@click.option("--results", "results_path", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "plotdata"]), default="csv",
              show_default=True)
@click.pass_context
def report(ctx, results_path, fmt):
    """Re-emit a stored results file as csv or plotdata."""
    with open(results_path) as fh:
        doc = json.load(fh)
    trial_values = {}
    for key, values in doc["trials"].items():
        point, metric = key.split("|")
        trial_values[(point, metric)] = values
    points = list(dict.fromkeys(p for p, _ in trial_values))
    rows = []
    for point in points:
        for metric in harness.REPORT_METRICS:
            vals = trial_values.get((point, metric))
            if vals is None:
                continue
            mean, lo, hi = harness.t_confidence_interval(vals)
            rows.append(harness.ResultRow(point, metric, mean, lo, hi, len(vals)))
    result = harness.ExperimentResult(doc["name"], rows, trial_values)
    paths = harness.emit_report(result, ctx.obj["out_dir"], fmt=fmt)
    click.echo(f"wrote {paths[0]}")


if __name__ == "__main__":
    main()
