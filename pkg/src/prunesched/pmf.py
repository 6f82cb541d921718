"""Impulse-based PMF algebra over integer simulation time.

A :class:`Pmf` is an ordered train of (time, probability) impulses. A
:class:`Pct` is a completion/availability distribution split into a
*success* part (the task finished its own run at t) and a *passthrough*
part (the machine frees at t but the task did not complete: it was dropped
before starting, or evicted). Keeping the two parts separate lets
deadline-robustness sum only genuine completions even when eviction piles
failure mass onto the same time point as real completions.

Three queue-fold convolutions are provided, one per dropping regime:

* :func:`convolve_no_drop`   -- every mapped task runs to completion.
* :func:`convolve_pending`   -- a task that cannot start before its
  deadline is dropped; a started task always finishes.
* :func:`convolve_evict`     -- additionally, a running task that has not
  completed by its deadline is evicted, freeing the machine exactly then.

All values are immutable after construction; operations are pure.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

MASS_TOL = 1e-9
_EMPTY_T = np.empty(0, dtype=np.int64)
_EMPTY_P = np.empty(0, dtype=np.float64)


class PmfError(ValueError):
    """Invalid PMF construction or a broken mass invariant."""


class Pmf:
    """An ordered train of positive-mass impulses over non-negative int time.

    May carry partial mass (< 1) when used as one part of a :class:`Pct`;
    constructors that promise a full distribution normalize or validate.
    """

    def __init__(self, times, probs, _validated=False):
        times = np.asarray(times, dtype=np.int64)
        probs = np.asarray(probs, dtype=np.float64)
        if not _validated:
            if times.ndim != 1 or times.shape != probs.shape:
                raise PmfError("times and probs must be 1-D arrays of equal length")
            if times.shape[0]:
                if np.any(np.diff(times) <= 0):
                    raise PmfError("impulse times must be strictly increasing")
                if times[0] < 0:
                    raise PmfError("impulse times must be non-negative")
                if np.any(probs <= 0.0):
                    raise PmfError("impulse probabilities must be positive")
        self.times = times
        self.probs = probs
        self.times.setflags(write=False)
        self.probs.setflags(write=False)

    # -- constructors ---------------------------------------------------

    @classmethod
    def point(cls, t: int) -> "Pmf":
        """Unit mass at a single time."""
        return cls(np.array([t], dtype=np.int64), np.array([1.0]), _validated=True)

    @classmethod
    def empty(cls) -> "Pmf":
        return cls(_EMPTY_T, _EMPTY_P, _validated=True)

    @classmethod
    def from_dict(cls, impulses: dict) -> "Pmf":
        items = sorted(impulses.items())
        return cls([t for t, _ in items], [p for _, p in items])

    @classmethod
    def from_samples(cls, samples, bin_width: int = 1) -> "Pmf":
        """Normalized histogram of observed times; impulse at each bin midpoint."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size == 0:
            raise PmfError("cannot build a PMF from an empty sample list")
        if bin_width < 1:
            raise PmfError("bin_width must be >= 1")
        bins = np.floor(samples / bin_width).astype(np.int64)
        uniq, counts = np.unique(bins, return_counts=True)
        times = uniq * bin_width + bin_width // 2
        times = np.maximum(times, 0)
        probs = counts / counts.sum()
        return cls(times, probs)

    # -- queries --------------------------------------------------------

    @property
    def mass(self) -> float:
        return float(self.probs.sum())

    def __len__(self):
        return self.times.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.probs, other.probs
        )

    def __repr__(self):
        pairs = ", ".join(f"{t}:{p:g}" for t, p in zip(self.times, self.probs))
        return f"Pmf({{{pairs}}})"

    def to_dict(self) -> dict:
        return {int(t): float(p) for t, p in zip(self.times, self.probs)}

    def mass_at_or_before(self, t: int) -> float:
        """Cumulative mass at times <= t."""
        idx = np.searchsorted(self.times, t, side="right")
        return float(self.probs[:idx].sum())

    def expected_value(self) -> float:
        if len(self) == 0:
            raise PmfError("expected value of an empty PMF")
        return float(np.dot(self.times, self.probs) / self.mass)

    def skewness(self) -> float:
        """Third standardized moment clamped to [-1, 1]; 0 for degenerate PMFs."""
        mu = self.expected_value()
        d = self.times - mu
        w = self.probs / self.mass
        var = float(np.dot(d * d, w))
        if var == 0.0:
            return 0.0
        third = float(np.dot(d * d * d, w))
        raw = third / var**1.5
        return float(np.clip(raw, -1.0, 1.0))

    def shift(self, offset: int) -> "Pmf":
        if offset < 0:
            raise PmfError("shift offset must be non-negative")
        if offset == 0:
            return self
        return Pmf(self.times + offset, self.probs, _validated=True)

    def restrict(self, mask) -> "Pmf":
        return Pmf(self.times[mask], self.probs[mask], _validated=True)

    def merged_with(self, other: "Pmf") -> "Pmf":
        t, p = _kernels.merge_impulse_trains(
            self.times, self.probs, other.times, other.probs
        )
        return Pmf(t, p, _validated=True)


class Pct:
    """Completion/availability distribution of one task in a machine queue.

    ``success`` holds mass for "task completes its own run at t";
    ``passthrough`` holds mass for "machine frees at t without the task
    completing". The merged :meth:`release_view` is what the next task in
    the queue convolves against.
    """

    def __init__(self, success: Pmf, passthrough: Pmf, deadline: int):
        self.success = success
        self.passthrough = passthrough
        self.deadline = int(deadline)

    @classmethod
    def idle(cls, now: int) -> "Pct":
        """Availability of an idle machine: free with certainty at ``now``."""
        return cls(Pmf.point(now), Pmf.empty(), now)

    @property
    def total_mass(self) -> float:
        return self.success.mass + self.passthrough.mass

    def release_view(self) -> Pmf:
        if len(self.passthrough) == 0:
            return self.success
        if len(self.success) == 0:
            return self.passthrough
        return self.success.merged_with(self.passthrough)

    def __eq__(self, other):
        if not isinstance(other, Pct):
            return NotImplemented
        return (
            self.success == other.success
            and self.passthrough == other.passthrough
            and self.deadline == other.deadline
        )

    def __repr__(self):
        return (
            f"Pct(success={self.success!r}, passthrough={self.passthrough!r}, "
            f"deadline={self.deadline})"
        )


def robustness(pct: Pct, deadline: int | None = None) -> float:
    """Probability the task completes at or before its deadline.

    Only success mass counts; passthrough mass is failure by definition.
    """
    d = pct.deadline if deadline is None else deadline
    return pct.success.mass_at_or_before(d)


def _check_mass(out_mass: float, in_mass: float) -> None:
    # Convolution must conserve mass by construction; a violation is a bug.
    if abs(out_mass - in_mass) > MASS_TOL:
        raise PmfError(
            f"convolution broke mass conservation: {out_mass!r} vs {in_mass!r}"
        )


def _convolve(release: Pmf, pet: Pmf) -> Pmf:
    if len(release) == 0 or len(pet) == 0:
        return Pmf.empty()
    t, p = _kernels.convolve_impulses(
        release.times, release.probs, pet.times, pet.probs
    )
    t, p = _kernels.merge_tiny_impulses(t, p)
    return Pmf(t, p, _validated=True)


def convolve_no_drop(prev: Pct, pet: Pmf, deadline: int) -> Pct:
    """Queue fold when no task is ever dropped: plain convolution."""
    release = prev.release_view()
    out = _convolve(release, pet)
    _check_mass(out.mass, release.mass)
    return Pct(out, Pmf.empty(), deadline)


def convolve_pending(prev: Pct, pet: Pmf, deadline: int) -> Pct:
    """Queue fold when tasks that cannot start before their deadline drop.

    Machine-release impulses at t >= deadline mean this task never starts:
    they pass through unchanged. Impulses at t < deadline let the task run
    to completion, even past the deadline.
    """
    release = prev.release_view()
    startable = release.times < deadline
    out = _convolve(release.restrict(startable), pet)
    passthrough = release.restrict(~startable)
    _check_mass(out.mass + passthrough.mass, release.mass)
    return Pct(out, passthrough, deadline)


def convolve_evict(prev: Pct, pet: Pmf, deadline: int) -> Pct:
    """Queue fold when even the running task is evicted at its deadline.

    Success mass past the deadline collapses onto a passthrough impulse at
    the deadline (the machine frees exactly then); completion exactly at
    the deadline still counts as success.
    """
    pend = convolve_pending(prev, pet, deadline)
    succ = pend.success
    ontime = succ.times <= deadline
    kept = succ.restrict(ontime)
    evicted_mass = float(succ.probs[~ontime].sum())
    passthrough = pend.passthrough
    if evicted_mass > 0.0:
        evict_impulse = Pmf(
            np.array([deadline], dtype=np.int64),
            np.array([evicted_mass]),
            _validated=True,
        )
        passthrough = evict_impulse.merged_with(passthrough)
    _check_mass(kept.mass + passthrough.mass, prev.release_view().mass)
    return Pct(kept, passthrough, deadline)
