"""Coincidence counting over sorted time-tag streams.

The pair histogram is computed by a sliding-window merge over the two
sorted streams, linear in the number of tags for a fixed lag window, and
is bit-exact against brute-force O(N^2) pair counting.  Pairs are only
ever counted within a run: separate runs are physically independent and
cross-run pairs would be pure accidentals.

Lag binning is closed-open [k*D - D/2, k*D + D/2) so that the lag-0 bin is
centered at zero; coincidence conventions differ silently between tools,
so this one is stated explicitly.  For integer lags and odd bin width the
bins are symmetric in integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RawCorrelation:
    """Unnormalized pair-count histogram over signed lag bins."""

    lag_bin_ns: int
    max_lag_ns: int
    counts: np.ndarray          # int64, length 2*(max_lag/bin) + 1
    n_a: int                    # total A tags in the analyzed range
    n_b: int
    n_a_per_run: np.ndarray
    n_b_per_run: np.ndarray
    duration_ns: int            # length of the analyzed time range
    n_runs: int

    @property
    def lags_ns(self) -> np.ndarray:
        k = self.max_lag_ns // self.lag_bin_ns
        return np.arange(-k, k + 1, dtype=np.int64) * self.lag_bin_ns


def cross_correlate(a, b, lag_bin_ns: int, max_lag_ns: int,
                    time_range=None, chunk=1 << 19) -> RawCorrelation:
    """Histogram of pair lags t_b - t_a for same-run pairs of two streams.

    counts[j] is the number of pairs whose lag falls in bin j (bin centers
    j * lag_bin_ns, j = -K..K with K = max_lag_ns / lag_bin_ns).  Equals
    brute-force pair counting exactly.  Reversing the inputs reverses the
    histogram.

    Parameters
    ----------
    a, b : TimeTagStream
        Sorted streams with identical run partitioning.  Select channels
        beforehand (``stream.select(channels=[0])``).
    lag_bin_ns, max_lag_ns : int
        Bin width and histogram half-span; the width must divide the span.
    time_range : (lo, hi) ns, optional
        Restrict both streams to this window first.
    chunk : int
        A-tags processed per vectorized block, bounds peak memory.
    """
    if lag_bin_ns <= 0 or max_lag_ns <= 0:
        raise ValueError("lag_bin_ns and max_lag_ns must be positive")
    if max_lag_ns % lag_bin_ns != 0:
        raise ValueError(f"lag_bin_ns={lag_bin_ns} does not divide max_lag_ns={max_lag_ns}")
    if a.n_runs != b.n_runs:
        raise ValueError(f"mismatched run sets: {a.n_runs} vs {b.n_runs} runs")
    if time_range is not None:
        a = a.select(time_range=time_range)
        b = b.select(time_range=time_range)
        duration = int(time_range[1] - time_range[0])
    else:
        duration = max(a.duration_ns, b.duration_ns)

    k = max_lag_ns // lag_bin_ns
    nbins = 2 * k + 1
    counts = np.zeros(nbins, dtype=np.int64)
    span = max_lag_ns + lag_bin_ns  # generous search span; exactness from the bin mask

    slices_a = a.run_slices()
    slices_b = b.run_slices()
    for sa, sb in zip(slices_a, slices_b):
        ta = a.t_ns[sa].astype(np.int64)
        tb = b.t_ns[sb].astype(np.int64)
        if ta.size == 0 or tb.size == 0:
            continue
        for lo in range(0, ta.size, chunk):
            _accumulate_pairs(ta[lo:lo + chunk], tb, span, lag_bin_ns, k, counts)

    return RawCorrelation(
        lag_bin_ns=lag_bin_ns, max_lag_ns=max_lag_ns, counts=counts,
        n_a=len(a), n_b=len(b),
        n_a_per_run=a.counts_per_run(), n_b_per_run=b.counts_per_run(),
        duration_ns=duration, n_runs=a.n_runs)


def _accumulate_pairs(ta, tb, span, lag_bin_ns, k, counts):
    b_lo = np.searchsorted(tb, ta - span, side="left")
    b_hi = np.searchsorted(tb, ta + span, side="right")
    occ = b_hi - b_lo
    m = int(occ.max(initial=0))
    for r in range(m):
        sel = np.nonzero(occ > r)[0]
        lag = tb[b_lo[sel] + r] - ta[sel]
        # bin index floor((lag + D/2)/D), exact in integer arithmetic
        j = (2 * lag + lag_bin_ns) // (2 * lag_bin_ns)
        j = j[(j >= -k) & (j <= k)]
        counts += np.bincount((j + k).astype(np.intp), minlength=2 * k + 1)


def brute_force_correlate(a, b, lag_bin_ns: int, max_lag_ns: int) -> np.ndarray:
    """O(N^2) reference pair counter, for oracle tests on small streams."""
    k = max_lag_ns // lag_bin_ns
    counts = np.zeros(2 * k + 1, dtype=np.int64)
    for sa, sb in zip(a.run_slices(), b.run_slices()):
        ta = a.t_ns[sa].astype(np.int64)
        tb = b.t_ns[sb].astype(np.int64)
        if ta.size == 0 or tb.size == 0:
            continue
        lag = (tb[None, :] - ta[:, None]).ravel()
        j = (2 * lag + lag_bin_ns) // (2 * lag_bin_ns)
        j = j[(j >= -k) & (j <= k)]
        counts += np.bincount((j + k).astype(np.intp), minlength=2 * k + 1)
    return counts


def coincidences(a, b, window_ns: int, time_range) -> int:
    """Count same-run pairs with |t_b - t_a| <= window_ns / 2, both tags in range.

    The comparison is exact in integers (|2*lag| <= window_ns).  For odd
    lag_bin_ns and window_ns = (2k+1)*lag_bin_ns - 1 this equals the sum of
    the central 2k+1 bins of :func:`cross_correlate`.
    """
    if window_ns <= 0:
        raise ValueError(f"window_ns must be positive: {window_ns}")
    lo, hi = time_range
    if hi <= lo:
        raise ValueError(f"empty time range: {time_range}")
    a = a.select(time_range=(lo, hi))
    b = b.select(time_range=(lo, hi))
    half = window_ns // 2  # |2 lag| <= w  <=>  |lag| <= floor(w/2) for integers

    total = 0
    for sa, sb in zip(a.run_slices(), b.run_slices()):
        ta = a.t_ns[sa].astype(np.int64)
        tb = b.t_ns[sb].astype(np.int64)
        if ta.size == 0 or tb.size == 0:
            continue
        n_lo = np.searchsorted(tb, ta - half, side="left")
        n_hi = np.searchsorted(tb, ta + half, side="right")
        total += int((n_hi - n_lo).sum())
    return total


def pair_lags(a, b, max_abs_lag_ns: int, time_range=None, chunk=1 << 19):
    """All same-run pair lags t_b - t_a with |lag| <= max_abs_lag_ns, per run.

    Yields (run_index, lags int64 array).  Used by local-rate normalization,
    which needs raw lags rather than a fixed-bin histogram.
    """
    if time_range is not None:
        a = a.select(time_range=time_range)
        b = b.select(time_range=time_range)
    for run, (sa, sb) in enumerate(zip(a.run_slices(), b.run_slices())):
        ta = a.t_ns[sa].astype(np.int64)
        tb = b.t_ns[sb].astype(np.int64)
        if ta.size == 0 or tb.size == 0:
            continue
        out = []
        for lo in range(0, ta.size, chunk):
            tc = ta[lo:lo + chunk]
            b_lo = np.searchsorted(tb, tc - max_abs_lag_ns, side="left")
            b_hi = np.searchsorted(tb, tc + max_abs_lag_ns, side="right")
            occ = b_hi - b_lo
            m = int(occ.max(initial=0))
            for r in range(m):
                sel = np.nonzero(occ > r)[0]
                lag = tb[b_lo[sel] + r] - tc[sel]
                out.append(lag[np.abs(lag) <= max_abs_lag_ns])
        if out:
            yield run, np.concatenate(out)
