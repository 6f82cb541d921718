"""Independent oracles used by the test suite.

``mc_success_probs`` simulates a single-machine FCFS queue directly,
sampling execution times and applying the dropping rule step by step; it
never touches the convolution code, so it can arbitrate its correctness.
"""

import numpy as np

from prunesched.pmf import Pct, Pmf
from prunesched.pmf import convolve_evict, convolve_no_drop, convolve_pending

RULES = ("no_drop", "pending", "evict")


def mc_success_probs(pmfs, deadlines, rule, n_samples=100_000, seed=0):
    """Per-task success probability of a queue started on an idle machine at 0."""
    rng = np.random.default_rng(seed)
    n_samples = int(n_samples)
    free = np.zeros(n_samples)
    out = []
    for pmf, d in zip(pmfs, deadlines):
        p = pmf.probs / pmf.probs.sum()
        e = rng.choice(pmf.times, p=p, size=n_samples)
        if rule == "no_drop":
            c = free + e
            out.append(float((c <= d).mean()))
            free = c
        elif rule == "pending":
            started = free < d
            c = free + e
            out.append(float((started & (c <= d)).mean()))
            free = np.where(started, c, free)
        elif rule == "evict":
            started = free < d
            c = free + e
            on_time = started & (c <= d)
            out.append(float(on_time.mean()))
            free = np.where(~started, free, np.where(c <= d, c, d))
        else:
            raise ValueError(rule)
    return out


_CONVS = {
    "no_drop": convolve_no_drop,
    "pending": convolve_pending,
    "evict": convolve_evict,
}


def analytic_success_probs(pmfs, deadlines, rule):
    """Fold the dropping-aware convolution chain; per-task deadline mass."""
    conv = _CONVS[rule]
    prev = Pct.idle(0)
    out = []
    for pmf, d in zip(pmfs, deadlines):
        pct = conv(prev, pmf, d)
        out.append(pct.success.mass_at_or_before(d))
        prev = pct
    return out


def random_queue_instance(rng, max_tasks=4, max_impulses=8, max_time=12):
    """A random small queue: execution PMFs plus loosely matched deadlines."""
    n_tasks = int(rng.integers(1, max_tasks + 1))
    pmfs = []
    deadlines = []
    horizon = 0
    for _ in range(n_tasks):
        k = int(rng.integers(1, max_impulses + 1))
        times = np.sort(rng.choice(np.arange(1, max_time + 1), size=k, replace=False))
        probs = rng.random(k) + 0.05
        probs /= probs.sum()
        pmfs.append(Pmf(times, probs))
        horizon += int(times[-1])
        deadlines.append(int(rng.integers(1, horizon + 3)))
    return pmfs, deadlines


def classic_min_min(exec_times, capacity=None):
    """Deterministic Min-Min on scalar execution times.

    ``exec_times[i][j]`` is task i's time on machine j; all machines start
    idle at 0. Ties break toward the earlier task, then the lower machine
    index. Returns assignments [(task, machine)] in commitment order.
    """
    n_tasks = len(exec_times)
    n_machines = len(exec_times[0])
    ready = [0.0] * n_machines
    load = [0] * n_machines
    unassigned = list(range(n_tasks))
    order = []
    while unassigned:
        best = None  # (completion, task_pos, machine)
        for pos, i in enumerate(unassigned):
            for j in range(n_machines):
                if capacity is not None and load[j] >= capacity:
                    continue
                c = ready[j] + exec_times[i][j]
                key = (c, pos, j)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        c, pos, j = best
        i = unassigned.pop(pos)
        ready[j] = c
        load[j] += 1
        order.append((i, j))
    return order
