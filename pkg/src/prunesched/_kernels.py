"""Hot numeric kernels for impulse-train convolution.

Two implementations of each kernel exist: a numba ``@njit`` version and a
pure-numpy fallback. The fallback is selected by setting the environment
variable ``PRUNESCHED_NO_NUMBA=1`` before import (useful on platforms where
numba is unavailable or for debugging). ``benchmarks/bench_convolve.py``
compares the two.

All kernels operate on parallel arrays: ``times`` (int64, strictly
increasing) and ``probs`` (float64, positive). Results are returned in the
same layout with zero-mass slots stripped.
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("PRUNESCHED_NO_NUMBA", "").lower() not in ("1", "true", "yes")


def _convolve_dense_np(t1, p1, t2, p2):
    lo = int(t1[0] + t2[0])
    hi = int(t1[-1] + t2[-1])
    dense = np.zeros(hi - lo + 1, dtype=np.float64)
    idx = (t1[:, None] + t2[None, :] - lo).ravel()
    np.add.at(dense, idx, np.outer(p1, p2).ravel())
    nz = np.nonzero(dense)[0]
    return nz + lo, dense[nz]


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _convolve_dense_accum(t1, p1, t2, p2, lo, dense):
        for i in range(t1.shape[0]):
            ti = t1[i]
            pi = p1[i]
            for j in range(t2.shape[0]):
                dense[ti + t2[j] - lo] += pi * p2[j]

    def _convolve_dense_nb(t1, p1, t2, p2):
        lo = int(t1[0] + t2[0])
        hi = int(t1[-1] + t2[-1])
        dense = np.zeros(hi - lo + 1, dtype=np.float64)
        _convolve_dense_accum(t1, p1, t2, p2, lo, dense)
        nz = np.nonzero(dense)[0]
        return nz + lo, dense[nz]

    convolve_impulses = _convolve_dense_nb
else:
    convolve_impulses = _convolve_dense_np


def merge_tiny_impulses(times, probs, floor=1e-12):
    """Fold impulses with mass below ``floor`` into their nearest neighbor.

    The only lossy step in the PMF pipeline: each merge moves at most
    ``floor`` of mass per impulse to an adjacent support point. Total mass is
    preserved up to floating-point rounding of the folded additions.
    """
    if times.shape[0] <= 1:
        return times, probs
    tiny = probs < floor
    if not tiny.any():
        return times, probs
    n = times.shape[0]
    out_p = probs.copy()
    for i in np.nonzero(tiny)[0]:
        if out_p[i] == 0.0:
            continue
        # nearest surviving neighbor by time distance; prefer left on ties
        left = i - 1
        while left >= 0 and tiny[left]:
            left -= 1
        right = i + 1
        while right < n and tiny[right]:
            right += 1
        if left < 0 and right >= n:
            return times, probs  # everything tiny: keep as-is
        if left < 0:
            j = right
        elif right >= n:
            j = left
        else:
            j = left if times[i] - times[left] <= times[right] - times[i] else right
        out_p[j] += out_p[i]
        out_p[i] = 0.0
    keep = out_p > 0.0
    return times[keep], out_p[keep]


def merge_impulse_trains(ta, pa, tb, pb):
    """Merge two impulse trains, summing masses at shared times."""
    if ta.shape[0] == 0:
        return tb, pb
    if tb.shape[0] == 0:
        return ta, pa
    t = np.concatenate([ta, tb])
    p = np.concatenate([pa, pb])
    order = np.argsort(t, kind="stable")
    t = t[order]
    p = p[order]
    uniq, inverse = np.unique(t, return_inverse=True)
    summed = np.zeros(uniq.shape[0], dtype=np.float64)
    np.add.at(summed, inverse, p)
    return uniq, summed
