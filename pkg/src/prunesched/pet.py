"""Probabilistic Execution Time matrix: synthesis, persistence, sampling.

Each cell (task_type, machine) holds an execution-time PMF built by
histogramming gamma samples. The gamma shape per cell is drawn uniformly
from a configured range and the scale is chosen so the cell hits its
configured mean, giving inconsistent heterogeneity across the grid.

File format (JSON, versioned) round-trips bit-exactly; see ``save_pet``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pmf import MASS_TOL, Pmf

PET_FORMAT = "prunesched-pet"
PET_VERSION = 1

DEFAULT_TASK_TYPES = 12
DEFAULT_MACHINES = 8
DEFAULT_MEAN_RANGE = (50.0, 200.0)
DEFAULT_SHAPE_RANGE = (1.0, 20.0)
DEFAULT_SAMPLES_PER_CELL = 500


class PetError(ValueError):
    pass


@dataclass(frozen=True)
class PetMatrix:
    """Grid of execution-time PMFs indexed (task_type, machine)."""

    entries: tuple  # tuple[tuple[Pmf, ...], ...], rows = task types
    mean_table: np.ndarray
    rng_seed: int
    shape_table: np.ndarray | None = None  # gamma shapes used, for provenance
    _cumdfs: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def task_type_count(self) -> int:
        return len(self.entries)

    @property
    def machine_count(self) -> int:
        return len(self.entries[0])

    def cell(self, task_type: int, machine: int) -> Pmf:
        return self.entries[task_type][machine]

    def cell_mean(self, task_type: int, machine: int) -> float:
        return self.cell(task_type, machine).expected_value()

    def type_mean_execution(self, task_type: int) -> float:
        """Mean (over machines) of the modeled expected execution time."""
        return float(
            np.mean([self.cell_mean(task_type, j) for j in range(self.machine_count)])
        )

    def grand_mean_execution(self) -> float:
        return float(
            np.mean([self.type_mean_execution(i) for i in range(self.task_type_count)])
        )

    def __eq__(self, other):
        if not isinstance(other, PetMatrix):
            return NotImplemented
        return (
            self.rng_seed == other.rng_seed
            and np.array_equal(self.mean_table, other.mean_table)
            and self.entries == other.entries
        )

    def _cdf(self, task_type: int, machine: int) -> np.ndarray:
        key = (task_type, machine)
        cdf = self._cumdfs.get(key)
        if cdf is None:
            cdf = np.cumsum(self.cell(task_type, machine).probs)
            self._cumdfs[key] = cdf
        return cdf

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cumdfs"] = {}
        return state


def default_mean_table(
    task_types: int = DEFAULT_TASK_TYPES,
    machines: int = DEFAULT_MACHINES,
    mean_range: tuple = DEFAULT_MEAN_RANGE,
    seed: int = 0,
) -> np.ndarray:
    """Per-cell mean execution times drawn uniformly from ``mean_range``."""
    rng = np.random.default_rng(seed)
    return rng.uniform(mean_range[0], mean_range[1], size=(task_types, machines))


def generate_synthetic_pet(
    means: np.ndarray,
    shape_range: tuple = DEFAULT_SHAPE_RANGE,
    samples_per_cell: int = DEFAULT_SAMPLES_PER_CELL,
    bin_width: int = 1,
    seed: int = 0,
) -> PetMatrix:
    """Build a PET by sampling a gamma per cell and histogramming.

    Deterministic for a fixed seed: cells are filled row-major with a single
    generator.
    """
    means = np.asarray(means, dtype=np.float64)
    if np.any(means <= 0):
        raise PetError("all mean execution times must be positive")
    lo, hi = shape_range
    if lo < 1:
        raise PetError("gamma shape lower bound must be >= 1")
    if samples_per_cell < 2:
        raise PetError("samples_per_cell must be >= 2")
    rng = np.random.default_rng(seed)
    task_types, machines = means.shape
    shapes = np.empty((task_types, machines))
    rows = []
    for i in range(task_types):
        row = []
        for j in range(machines):
            shape = rng.uniform(lo, hi)
            shapes[i, j] = shape
            scale = means[i, j] / shape
            samples = rng.gamma(shape, scale, size=samples_per_cell)
            row.append(Pmf.from_samples(samples, bin_width=bin_width))
        rows.append(tuple(row))
    return PetMatrix(
        entries=tuple(rows), mean_table=means, rng_seed=seed, shape_table=shapes
    )


def sample_execution(pet: PetMatrix, task_type: int, machine: int, rng) -> int:
    """Draw an actual execution time from a cell's PMF by inverse CDF."""
    cell = pet.cell(task_type, machine)
    cdf = pet._cdf(task_type, machine)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, len(cell) - 1)
    return int(cell.times[idx])


def save_pet(pet: PetMatrix, path) -> None:
    doc = {
        "format": PET_FORMAT,
        "version": PET_VERSION,
        "task_types": pet.task_type_count,
        "machines": pet.machine_count,
        "seed": pet.rng_seed,
        "mean_table": pet.mean_table.tolist(),
        "shape_table": None
        if pet.shape_table is None
        else pet.shape_table.tolist(),
        "cells": [
            {
                "type": i,
                "machine": j,
                "impulses": [
                    [int(t), float(p)]
                    for t, p in zip(
                        pet.entries[i][j].times, pet.entries[i][j].probs
                    )
                ],
            }
            for i in range(pet.task_type_count)
            for j in range(pet.machine_count)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_pet(path) -> PetMatrix:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PetError(f"malformed PET file {path}: {exc}") from exc
    if doc.get("format") != PET_FORMAT:
        raise PetError(f"{path}: not a PET file")
    if doc.get("version") != PET_VERSION:
        raise PetError(f"{path}: unsupported PET version {doc.get('version')}")
    task_types = doc["task_types"]
    machines = doc["machines"]
    grid: list[list] = [[None] * machines for _ in range(task_types)]
    for cell in doc["cells"]:
        i, j = cell["type"], cell["machine"]
        if not (0 <= i < task_types and 0 <= j < machines):
            raise PetError(f"{path}: cell ({i},{j}) out of range")
        times = [t for t, _ in cell["impulses"]]
        probs = [p for _, p in cell["impulses"]]
        try:
            pmf = Pmf(times, probs)
        except ValueError as exc:
            raise PetError(f"{path}: invalid PMF in cell ({i},{j}): {exc}") from exc
        if abs(pmf.mass - 1.0) > MASS_TOL:
            raise PetError(
                f"{path}: cell ({i},{j}) mass {pmf.mass!r} violates unit-mass invariant"
            )
        grid[i][j] = pmf
    for i in range(task_types):
        for j in range(machines):
            if grid[i][j] is None:
                raise PetError(f"{path}: missing cell ({i},{j})")
    shape_table = doc.get("shape_table")
    return PetMatrix(
        entries=tuple(tuple(row) for row in grid),
        mean_table=np.asarray(doc["mean_table"], dtype=np.float64),
        rng_seed=doc["seed"],
        shape_table=None if shape_table is None else np.asarray(shape_table),
    )
