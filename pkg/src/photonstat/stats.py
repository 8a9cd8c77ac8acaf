"""Counting-statistics analysis chain for time-tag streams.

Binned count moments and the Fano ratio, counts-per-atom extraction from
the variance-mean relation, time-interval analysis, normalized second-order
correlation, and the windowed g2(0)-vs-flux series.

Normalization of g2 for a nonstationary, bursty source uses a local-rate
estimate built from kernel-smoothed rates.  For a box kernel of bandwidth
h, the product of the two smoothed rates integrates to a triangle-weighted
pair count, so the normalization is computed directly from pair lags within
+-h; this is exact (up to edge effects much smaller than T/h) and avoids
materializing rate grids.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from photonstat.correlate import RawCorrelation, coincidences, cross_correlate, pair_lags
from photonstat.model import NS_PER_S, TimeTagStream
from photonstat.theory import g2_zero_vs_flux


# ---------------------------------------------------------------------------
# binned counts and Fano ratio

@dataclass
class BinnedCounts:
    bin_ns: int
    counts: np.ndarray          # (n_runs, n_bins) uint32
    channels: tuple[int, ...] | None

    @property
    def n_runs(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    def bin_centers_ns(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_ns


def bin_counts(stream: TimeTagStream, bin_ns: int, channels=None) -> BinnedCounts:
    """Exact per-run count histogram on a shared bin grid.

    ``bin_ns`` must divide the run duration.  The matrix sums to the number
    of tags in the selected channels.
    """
    if bin_ns <= 0 or stream.duration_ns % bin_ns != 0:
        raise ValueError(f"bin_ns={bin_ns} does not divide duration={stream.duration_ns}")
    sub = stream.select(channels=channels) if channels is not None else stream
    n_bins = stream.duration_ns // bin_ns
    idx = sub.run_id.astype(np.int64) * n_bins + (sub.t_ns // np.uint64(bin_ns)).astype(np.int64)
    flat = np.bincount(idx, minlength=stream.n_runs * n_bins)
    return BinnedCounts(bin_ns=bin_ns,
                        counts=flat.reshape(stream.n_runs, n_bins).astype(np.uint32),
                        channels=tuple(channels) if channels is not None else None)


@dataclass
class FanoSeries:
    """Across-run mean, variance and their ratio per time bin, with bootstrap CIs."""

    bin_ns: int
    t_ns: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    m3: np.ndarray              # unbiased third central moment (regression corrections)
    ratio: np.ndarray           # var/mean; nan where mean == 0
    ratio_lo: np.ndarray        # 95% bootstrap interval
    ratio_hi: np.ndarray
    n_boot: int
    n_runs: int
    boot_mean: np.ndarray = field(repr=False)   # (n_boot, n_bins) replicate moments
    boot_var: np.ndarray = field(repr=False)
    boot_m3: np.ndarray = field(repr=False)


def _moments(counts):
    n = counts.shape[0]
    mean = counts.mean(axis=0)
    dev = counts - mean
    var = (dev**2).sum(axis=0) / (n - 1)
    # unbiased third central moment; with only 2 runs the correction terms
    # that use it are dropped rather than blowing up
    factor = n * n / ((n - 1) * (n - 2)) if n >= 3 else 0.0
    m3 = (dev**3).mean(axis=0) * factor
    return mean, var, m3


def fano_series(bc: BinnedCounts, n_boot: int = 200, seed: int = 0) -> FanoSeries:
    """Per-bin mean/variance across runs and the var/mean ratio.

    Bootstrap resamples whole runs (the physically independent unit); the
    replicate moments are kept so that downstream fits can reuse the same
    resampling.
    """
    if bc.n_runs < 2:
        raise ValueError("need at least 2 runs for across-run variance")
    counts = bc.counts.astype(np.float64)
    mean, var, m3 = _moments(counts)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(mean > 0, var / mean, np.nan)

    rng = np.random.default_rng(seed)
    boot_mean = np.empty((n_boot, bc.n_bins))
    boot_var = np.empty((n_boot, bc.n_bins))
    boot_m3 = np.empty((n_boot, bc.n_bins))
    for i in range(n_boot):
        idx = rng.integers(0, bc.n_runs, size=bc.n_runs)
        boot_mean[i], boot_var[i], boot_m3[i] = _moments(counts[idx])
    with np.errstate(invalid="ignore", divide="ignore"):
        boot_ratio = np.where(boot_mean > 0, boot_var / boot_mean, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-nan columns in empty bins
        ratio_lo = np.nanpercentile(boot_ratio, 2.5, axis=0)
        ratio_hi = np.nanpercentile(boot_ratio, 97.5, axis=0)
    return FanoSeries(bin_ns=bc.bin_ns, t_ns=bc.bin_centers_ns(), mean=mean, var=var,
                      m3=m3, ratio=ratio, ratio_lo=ratio_lo, ratio_hi=ratio_hi,
                      n_boot=n_boot, n_runs=bc.n_runs,
                      boot_mean=boot_mean, boot_var=boot_var, boot_m3=boot_m3)


# ---------------------------------------------------------------------------
# counts-per-atom fit

@dataclass
class AlphaFit:
    """Counts per atom and Poissonian background from the variance-mean relation."""

    alpha: float
    background_b: float         # counts per bin
    alpha_sigma: float
    ci: tuple[float, float]     # 95% bootstrap interval
    covariance: dict            # alpha/background variances and covariance
    residual_chi2: float        # weighted reduced chi^2 of the fit
    n_background_bins: int
    warnings: list[str]


def fit_alpha(fs: FanoSeries, bc: BinnedCounts, background_window) -> AlphaFit:
    """Extract counts per atom from var = (1+alpha) mean - alpha b.

    The background b is the mean count in an atom-free time window (not fit
    jointly: the two parameters are weakly identified together).  With b
    fixed, the relation collapses to the one-parameter line
    (var - mean) = alpha (mean - b), fit by weighted least squares through
    the origin.  The sample mean enters both axes, so the per-bin moment
    noise is removed with the exact small-sample identities
    Var(mean) = var/R and Cov(mean, var) = mu3/R; without these the slope
    attenuates wherever weights favor low-flux bins.  Uncertainties come
    from the run-level bootstrap carried by ``fs``.
    """
    lo_ns, hi_ns = background_window
    bins = np.nonzero((fs.t_ns >= lo_ns) & (fs.t_ns < hi_ns))[0]
    if bins.size < 10:
        raise ValueError(f"background window holds {bins.size} bins; need >= 10 atom-free bins")
    warnings = []
    bg_ratio = np.nanmean(fs.ratio[bins])
    if bg_ratio > 1.2:
        warnings.append("background_window_superpoissonian")

    b_hat = float(fs.mean[bins].mean())
    r = fs.n_runs

    def weights(mean, b, alpha):
        # variance of (var - mean) from the model-predicted variance, not the
        # per-bin sample variance: data-correlated weights pull the slope down
        vm = np.maximum((1.0 + alpha) * mean - alpha * b, 1e-3)
        return 1.0 / (2.0 * vm**2 / (r - 1) + vm / r)

    def gate_of(mean, var, b):
        # bins whose net signal is indistinguishable from zero carry no slope
        # information and only inject regressor noise
        x = mean - b
        return x > 5.0 * np.sqrt(np.maximum(var, 1e-6) / r)

    def solve(mean, var, m3, b, gate):
        if gate is None:
            # weak-signal fallback: no bin carries slope information, so the
            # regression would fit noise on noise; report the pooled Fano
            # excess instead (0-centered for Poisson data)
            return float(var.mean() / max(mean.mean(), 1e-9) - 1.0)
        x = mean - b
        y = var - mean
        cov_xy = (m3 - var) / r          # Cov(mean - b, var - mean)
        var_x = var / r                  # Var(mean)
        alpha = 0.0
        for _ in range(3):
            w = weights(mean, b, alpha) * gate
            denom = float((w * (x * x - var_x)).sum())
            if denom <= 0:
                return 0.0
            alpha = float((w * (x * y - cov_xy)).sum() / denom)
        return alpha

    gate = gate_of(fs.mean, fs.var, b_hat)
    if gate.sum() < 5:
        gate = None
        warnings.append("weak_signal")
    alpha = solve(fs.mean, fs.var, fs.m3, b_hat, gate)

    boot_alpha = np.empty(fs.n_boot)
    boot_b = np.empty(fs.n_boot)
    for i in range(fs.n_boot):
        bb = float(fs.boot_mean[i, bins].mean())
        boot_b[i] = bb
        boot_alpha[i] = solve(fs.boot_mean[i], fs.boot_var[i], fs.boot_m3[i], bb, gate)
    sigma = float(boot_alpha.std(ddof=1))
    # normal-approximation interval from the bootstrap spread, centered on the
    # point estimate: the percentile interval inherits a small resampling
    # shift from the moment-noise corrections under duplicated runs
    ci = (alpha - 1.96 * sigma, alpha + 1.96 * sigma)
    if not ci[0] < ci[1]:
        warnings.append("degenerate_ci")

    x = fs.mean - b_hat
    y = fs.var - fs.mean
    w = weights(fs.mean, b_hat, alpha) * (gate if gate is not None else 1.0)
    resid = y - alpha * x
    n_fit = int(gate.sum()) if gate is not None else fs.mean.size
    chi2 = float((w * resid**2).sum() / max(n_fit - 1, 1))

    return AlphaFit(alpha=alpha, background_b=b_hat, alpha_sigma=sigma, ci=ci,
                    covariance={"alpha_var": sigma**2,
                                "b_var": float(boot_b.var(ddof=1)),
                                "alpha_b_cov": float(np.cov(boot_alpha, boot_b)[0, 1])},
                    residual_chi2=chi2, n_background_bins=int(bins.size),
                    warnings=warnings)


def scattered_photons(alpha: float, p_det: float) -> float:
    """Emitted photons per atom implied by detected counts per atom: alpha / p_det."""
    if p_det <= 0:
        raise ValueError(f"p_det must be > 0: {p_det}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0: {alpha}")
    return alpha / p_det


# ---------------------------------------------------------------------------
# time-interval analysis

@dataclass
class TiaComponent:
    amplitude: float            # counts at k = 0
    q: float                    # per-bin survival, in (0,1)
    rate_cps: float             # -ln(q) / bin


@dataclass
class TiaFit:
    """Histogram of gaps between successive detections with a two-geometric fit."""

    interval_bin_ns: int
    k: np.ndarray               # bin index
    counts: np.ndarray
    probs: np.ndarray           # counts / total intervals
    components: list[TiaComponent]   # ordered fast to slow
    single_component: bool
    two_sloped: bool            # rate separation > 10x
    n_intervals: int

    @property
    def rate_fast_cps(self) -> float:
        return self.components[0].rate_cps

    @property
    def rate_slow_cps(self) -> float:
        return self.components[-1].rate_cps


def _interval_histogram(stream, interval_bin_ns, time_range, channels):
    sub = stream.select(channels=channels) if channels is not None else stream
    if time_range is not None:
        sub = sub.select(time_range=time_range)
    gaps = []
    for sl in sub.run_slices():
        t = sub.t_ns[sl].astype(np.int64)
        if t.size > 1:
            gaps.append(np.diff(t))
    if not gaps:
        return np.zeros(0, dtype=np.int64), 0
    g = np.concatenate(gaps)
    k = g // interval_bin_ns
    return k, g.size


def _merge_bins(counts, target):
    """Greedy left-to-right merge of fine bins until each holds >= target counts.

    Returns (lo, hi, merged) edge arrays in fine-bin units; a trailing
    under-filled group is folded into its predecessor.
    """
    lo, hi, tot = [], [], []
    acc, start = 0, 0
    for i, c in enumerate(counts):
        acc += int(c)
        if acc >= target:
            lo.append(start)
            hi.append(i + 1)
            tot.append(acc)
            acc, start = 0, i + 1
    if acc > 0 and lo:
        hi[-1] = len(counts)
        tot[-1] += acc
    elif acc > 0:
        lo, hi, tot = [0], [len(counts)], [acc]
    return np.array(lo, float), np.array(hi, float), np.array(tot, float)


def _geometric_group_model(amps, cs, lo, hi):
    """Counts predicted in merged bins [lo, hi) by sum_j A_j exp(-c_j k)."""
    out = np.zeros_like(lo)
    for a, c in zip(amps, cs):
        c = max(c, 1e-12)
        out += a * (np.exp(-c * lo) - np.exp(-c * hi)) / -np.expm1(-c)
    return out


def _fit_groups(lo, hi, tot, init):
    """Poisson-weighted log least squares of a geometric mixture on merged bins."""
    theta0 = np.log(np.asarray(init, float))

    def resid(theta):
        p = np.exp(theta)
        m = np.maximum(_geometric_group_model(p[0::2], p[1::2], lo, hi), 1e-300)
        return np.sqrt(tot) * (np.log(tot) - np.log(m))

    sol = least_squares(resid, theta0, method="lm" if lo.size >= theta0.size else "trf",
                        max_nfev=4000)
    p = np.exp(sol.x)
    return list(zip(p[0::2], p[1::2]))


def tia(stream: TimeTagStream, interval_bin_ns: int, time_range=None,
        channels=None, group_target: int | None = None) -> TiaFit:
    """Time-interval analysis: gap histogram plus a two-geometric fit.

    Gaps are taken between successive detections within each run (never
    across runs) on the merged selected channels.  For fitting, fine bins
    are merged until each group holds enough counts for log-space Poisson
    weighting to be sane; the geometric mixture is summed exactly over each
    group, so coarse groups in the sparse tail do not bias the rates.  A
    fast component is only kept when the short-interval excess over the
    slow branch is significant (> 3 sigma) and the two rates differ by more
    than 10%; otherwise the fit falls back to a single component, flagged.
    """
    k_all, n_intervals = _interval_histogram(stream, interval_bin_ns, time_range, channels)
    if n_intervals < 100:
        raise ValueError(f"only {n_intervals} intervals in range; need >= 100")
    kmax = int(np.quantile(k_all, 0.999))
    counts_full = np.bincount(k_all[k_all <= kmax].astype(np.intp), minlength=kmax + 1)
    k = np.arange(kmax + 1)

    if group_target is None:
        group_target = int(np.clip(n_intervals // 60, 10, 400))
    lo, hi, tot = _merge_bins(counts_full, group_target)
    if lo.size < 3:
        raise ValueError("too few populated interval groups to fit")
    mid = 0.5 * (lo + hi)

    def lin_init(sel_lo, sel_hi, sel_tot):
        # log-linear fit on group densities for starting values
        dens = sel_tot / (sel_hi - sel_lo)
        ctr = 0.5 * (sel_lo + sel_hi)
        slope, intercept = np.polyfit(ctr, np.log(np.maximum(dens, 1e-300)), 1,
                                      w=np.sqrt(sel_tot))
        return math.exp(intercept), max(-slope, 1e-9)

    # slow branch from the long-interval tail
    split = max(mid[0] + 1.0, 0.25 * mid[-1])
    tail = mid >= split
    single = tail.sum() < 3 or (~tail).sum() < 1
    if not single:
        a_s, c_s = lin_init(lo[tail], hi[tail], tot[tail])
        slow_pred = _geometric_group_model([a_s], [c_s], lo[~tail], hi[~tail])
        excess = float((tot[~tail] - slow_pred).sum())
        if excess < 3.0 * math.sqrt(float(np.maximum(slow_pred, 1.0).sum())):
            single = True

    if not single:
        resid0 = tot[~tail] - slow_pred
        pos = resid0 > 0
        if pos.sum() < 2:
            single = True
        else:
            a_f, c_f = lin_init(lo[~tail][pos], hi[~tail][pos], resid0[pos])

    if not single:
        pairs = _fit_groups(lo, hi, tot, [a_f, c_f, a_s, c_s])
        pairs.sort(key=lambda p: -p[1])
        if pairs[1][1] <= 0 or pairs[0][1] / pairs[1][1] < 1.1:
            single = True

    if single:
        a0, c0 = lin_init(lo, hi, tot)
        pairs = _fit_groups(lo, hi, tot, [a0, c0])

    bin_s = interval_bin_ns / NS_PER_S
    components = [TiaComponent(amplitude=float(a), q=float(math.exp(-c)),
                               rate_cps=float(c / bin_s)) for a, c in pairs]
    two_sloped = (len(components) == 2
                  and components[0].rate_cps > 10 * components[1].rate_cps)
    return TiaFit(interval_bin_ns=interval_bin_ns, k=k, counts=counts_full,
                  probs=counts_full / n_intervals, components=components,
                  single_component=bool(single), two_sloped=two_sloped,
                  n_intervals=n_intervals)


# ---------------------------------------------------------------------------
# normalized g2

@dataclass
class G2Histogram:
    lag_ns: np.ndarray
    counts: np.ndarray
    norm: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    mode: str


def g2_normalize(raw: RawCorrelation, mode: str = "stationary", a=None, b=None,
                 time_range=None, bandwidth_ns: float | None = None) -> G2Histogram:
    """Turn a raw pair histogram into g2 with Poisson error bars.

    ``stationary``: per-run accidental rate N_a N_b D (T - |tau|) / T^2,
    summed over runs (edge-corrected; assumes rates constant over the
    analyzed range).

    ``local``: triangle-weighted smoothing of the pair histogram itself,
    equivalent to normalizing by the product of box-kernel rate estimates of
    bandwidth ``bandwidth_ns`` (default 2x the maximum lag).  The bandwidth
    must sit above the correlation features of interest and below the time
    scale of rate variations; for transit fluorescence that means well above
    the Rabi period and below the burst duration.
    """
    k = raw.max_lag_ns // raw.lag_bin_ns
    lags = raw.lags_ns
    if mode == "stationary":
        t_eff = float(raw.duration_ns)
        per_run = raw.n_a_per_run.astype(float) * raw.n_b_per_run.astype(float)
        norm = per_run.sum() * raw.lag_bin_ns * (t_eff - np.abs(lags)) / t_eff**2
    elif mode == "local":
        if a is None or b is None:
            raise ValueError("local mode needs the two streams")
        if bandwidth_ns is None:
            bandwidth_ns = 2.0 * raw.max_lag_ns
        m = int(math.ceil(bandwidth_ns / raw.lag_bin_ns))
        ext = cross_correlate(a, b, raw.lag_bin_ns, (k + m) * raw.lag_bin_ns,
                              time_range=time_range)
        offsets = np.arange(-m, m + 1) * raw.lag_bin_ns
        tri = np.maximum(0.0, 1.0 - np.abs(offsets) / bandwidth_ns)
        smooth = np.convolve(ext.counts.astype(float), tri, mode="same")
        norm = smooth[m:m + 2 * k + 1] * raw.lag_bin_ns / bandwidth_ns
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if np.any(norm <= 0):
        raise ValueError("zero normalization in some lag bins (empty streams?)")
    g2 = raw.counts / norm
    sigma = np.sqrt(np.maximum(raw.counts, 1)) / norm
    return G2Histogram(lag_ns=lags, counts=raw.counts.copy(), norm=norm,
                       g2=g2, sigma=sigma, mode=mode)


def g2_subtract_accidentals(hist: G2Histogram, signal_rate_a: float, signal_rate_b: float,
                            background_rate_a: float, background_rate_b: float,
                            live_time_s: float) -> G2Histogram:
    """Remove background-involving accidentals from a local-normalized g2.

    An independent Poissonian background adds a flat pedestal of
    (Sa Bb + Ba Sb + Ba Bb) D T pairs to every lag bin, and the same amount
    to the smoothed normalization; subtracting it from both yields the
    signal-only correlation.  This is the burst-normalized counterpart of
    :func:`g2_background_correct`, which assumes stationary normalization.
    """
    if hist.lag_ns.size < 2:
        raise ValueError("need at least two lag bins")
    lag_bin_s = float(hist.lag_ns[1] - hist.lag_ns[0]) * 1e-9
    pair_rate = (signal_rate_a * background_rate_b
                 + background_rate_a * signal_rate_b
                 + background_rate_a * background_rate_b)
    acc = pair_rate * lag_bin_s * live_time_s
    norm_sig = np.maximum(hist.norm - acc, 1e-300)
    counts_sig = hist.counts - acc
    g2 = counts_sig / norm_sig
    sigma = np.sqrt(np.maximum(hist.counts, 1)) / norm_sig
    return G2Histogram(lag_ns=hist.lag_ns, counts=counts_sig, norm=norm_sig,
                       g2=g2, sigma=sigma, mode=hist.mode + "+bgsub")


@dataclass
class CorrectedG2:
    value: float
    sigma: float | None
    inconsistent: bool          # corrected value below -3 sigma


def g2_background_correct(g2_meas_zero: float, signal_rate: float,
                          background_rate: float, sigma: float | None = None) -> CorrectedG2:
    """Remove accidental coincidences of an independent Poissonian background.

    With per-channel rates I = S + B and an uncorrelated background, the
    measured zero-lag correlation decomposes as
    g2_meas I^2 = g2_sig S^2 + 2 S B + B^2, hence
    g2_sig = (g2_meas I^2 - 2 S B - B^2) / S^2.  B = 0 is the identity.
    """
    if signal_rate <= 0:
        raise ValueError(f"signal_rate must be > 0: {signal_rate}")
    if background_rate < 0:
        raise ValueError(f"background_rate must be >= 0: {background_rate}")
    i_tot = signal_rate + background_rate
    value = ((g2_meas_zero * i_tot**2
              - 2.0 * signal_rate * background_rate
              - background_rate**2) / signal_rate**2)
    sigma_corr = None if sigma is None else sigma * i_tot**2 / signal_rate**2
    inconsistent = sigma_corr is not None and value < -3.0 * sigma_corr
    return CorrectedG2(value=value, sigma=sigma_corr, inconsistent=inconsistent)


# ---------------------------------------------------------------------------
# windowed g2(0) vs arrival time

@dataclass
class G2ZeroSeries:
    """g2(0) per arrival-time window with the flux-bound overlay."""

    window_lo_ns: np.ndarray
    window_hi_ns: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray
    coincidences: np.ndarray
    norm: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    usable: np.ndarray          # bool; too few counts otherwise
    mean_atoms: np.ndarray      # estimated <N> per window
    overlay: np.ndarray         # g2_zero_vs_flux(alpha, <N>)


def g2_zero_series(a: TimeTagStream, b: TimeTagStream, window_ms: float,
                   coincidence_window_ns: int, alpha: float, dwell_ns: float,
                   background_cps: float = 0.0,
                   bandwidth_ns: float | None = None) -> G2ZeroSeries:
    """Windowed zero-lag correlation across the run, with local-rate normalization.

    Windows tile [0, duration) without overlap; all runs pool into each
    window.  g2(0) = coincidences / accidentals where the accidental count
    uses the triangle-weighted pair sum within the normalization bandwidth.
    The default bandwidth is 100x the coincidence window, which places it
    above the correlation features (Rabi oscillation, antibunching dip) and
    below typical transit durations; a bandwidth comparable to the window
    itself would normalize the antibunching dip away.  Windows with fewer
    than 10 tags per channel are marked unusable, not dropped.

    The mean atom number per window is estimated from the net count rate:
    <N> = (rate - background) * dwell / alpha, with ``dwell_ns`` the
    configured interaction time; the overlay column is the flux bound
    evaluated at that estimate.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0: {alpha}")
    if coincidence_window_ns <= 0:
        raise ValueError("coincidence window must be positive")
    if bandwidth_ns is None:
        bandwidth_ns = 100.0 * coincidence_window_ns
    window_ns = int(round(window_ms * 1e6))
    duration = max(a.duration_ns, b.duration_ns)
    n_win = int(math.ceil(duration / window_ns))
    lo = np.arange(n_win, dtype=np.int64) * window_ns
    hi = np.minimum(lo + window_ns, duration)

    w_eff = 2 * (coincidence_window_ns // 2) + 1  # integer lags accepted
    n_runs = max(a.n_runs, 1)

    cc = np.zeros(n_win, dtype=np.int64)
    norm = np.zeros(n_win)
    n_a = np.zeros(n_win, dtype=np.int64)
    n_b = np.zeros(n_win, dtype=np.int64)
    for i in range(n_win):
        aw = a.select(time_range=(lo[i], hi[i]))
        bw = b.select(time_range=(lo[i], hi[i]))
        n_a[i] = len(aw)
        n_b[i] = len(bw)
        if n_a[i] == 0 or n_b[i] == 0:
            continue
        cc[i] = coincidences(aw, bw, coincidence_window_ns, (lo[i], hi[i]))
        tri_sum = 0.0
        for _, lags in pair_lags(aw, bw, int(bandwidth_ns)):
            tri_sum += float(np.maximum(0.0, 1.0 - np.abs(lags) / bandwidth_ns).sum())
        norm[i] = w_eff * tri_sum / bandwidth_ns

    usable = (n_a >= 10) & (n_b >= 10) & (norm > 0)
    g2 = np.full(n_win, np.nan)
    sigma = np.full(n_win, np.nan)
    g2[usable] = cc[usable] / norm[usable]
    sigma[usable] = np.sqrt(np.maximum(cc[usable], 1)) / norm[usable]

    window_s = (hi - lo) / NS_PER_S
    rate = (n_a + n_b) / np.maximum(n_runs * window_s, 1e-300)
    mean_atoms = np.maximum(rate - background_cps, 0.0) * (dwell_ns / NS_PER_S) / alpha
    overlay = np.array([g2_zero_vs_flux(alpha, n) for n in mean_atoms])
    return G2ZeroSeries(window_lo_ns=lo, window_hi_ns=hi, g2=g2, sigma=sigma,
                        coincidences=cc, norm=norm, n_a=n_a, n_b=n_b,
                        usable=usable, mean_atoms=mean_atoms, overlay=overlay)
