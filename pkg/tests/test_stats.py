import numpy as np
import pytest

from photonstat.correlate import cross_correlate
from photonstat.model import TimeTagStream
from photonstat import stats
from photonstat.stats import (
    BinnedCounts,
    bin_counts,
    fano_series,
    fit_alpha,
    g2_background_correct,
    g2_normalize,
    g2_zero_series,
    scattered_photons,
    tia,
)


def poisson_stream(rng, rate_cps, duration_ns, n_runs, channel=0):
    runs, times = [], []
    for r in range(n_runs):
        n = rng.poisson(rate_cps * duration_ns * 1e-9)
        runs.append(np.full(n, r))
        times.append(rng.integers(0, duration_ns, size=n, dtype=np.int64))
    return TimeTagStream(np.concatenate(runs), np.full(sum(map(len, times)), channel),
                         np.concatenate(times), duration_ns=duration_ns,
                         n_runs=n_runs, sort=True)


def compound_poisson_counts(rng, n_runs, atom_mean_per_bin, alpha, b):
    """Independent oracle for the variance-mean relation: atoms Poisson per
    bin, detected counts Poisson(alpha*m), plus Poisson background b."""
    lam = np.broadcast_to(atom_mean_per_bin, (n_runs, len(atom_mean_per_bin)))
    m = rng.poisson(lam)
    return rng.poisson(alpha * m + b).astype(np.uint32)


class TestBinCounts:
    def test_empty_stream(self):
        s = TimeTagStream([], [], [], duration_ns=1000, n_runs=2)
        bc = bin_counts(s, 100)
        assert bc.counts.shape == (2, 10)
        assert bc.counts.sum() == 0

    def test_single_tag(self):
        s = TimeTagStream([1], [0], [250], duration_ns=1000, n_runs=3)
        bc = bin_counts(s, 100)
        assert bc.counts.sum() == 1
        assert bc.counts[1, 2] == 1

    def test_conservation_and_channel_selection(self):
        rng = np.random.default_rng(0)
        s = poisson_stream(rng, 5000, 1_000_000, 4)
        bc = bin_counts(s, 1000)
        assert bc.counts.sum() == len(s)
        assert bin_counts(s, 1000, channels=[1]).counts.sum() == 0

    def test_rejects_nondividing_bin(self):
        s = TimeTagStream([], [], [], duration_ns=1000, n_runs=1)
        with pytest.raises(ValueError, match="divide"):
            bin_counts(s, 300)

    def test_dark_rate_mean(self):
        # 250 cps in 200 us bins -> 0.05 counts/bin grand mean
        rng = np.random.default_rng(1)
        s = poisson_stream(rng, 250.0, 2_000_000_000, 100)
        bc = bin_counts(s, 200_000)
        grand = bc.counts.mean()
        sigma = np.sqrt(0.05 / bc.counts.size)
        assert abs(grand - 0.05) < 3 * sigma


class TestFanoSeries:
    def test_poisson_background_ratio_one(self):
        rng = np.random.default_rng(2)
        counts = rng.poisson(0.8, size=(300, 200)).astype(np.uint32)
        fs = fano_series(BinnedCounts(200_000, counts, None), n_boot=120, seed=3)
        assert np.nanmean(fs.ratio) == pytest.approx(1.0, abs=0.02)
        covered = (fs.ratio_lo <= 1.0) & (1.0 <= fs.ratio_hi)
        assert covered.mean() >= 0.90

    def test_compound_poisson_plateau(self):
        rng = np.random.default_rng(4)
        counts = compound_poisson_counts(rng, 400, np.full(150, 2.0), 1.08, 0.05)
        fs = fano_series(BinnedCounts(200_000, counts, None), n_boot=60)
        # Eq-2 value at atom mean 2: ((1+a) a m + b)/(a m + b)
        expect = (2.08 * 1.08 * 2 + 0.05) / (1.08 * 2 + 0.05)
        assert np.nanmean(fs.ratio) == pytest.approx(expect, abs=0.05)

    def test_single_run_rejected(self):
        with pytest.raises(ValueError, match="2 runs"):
            fano_series(BinnedCounts(100, np.zeros((1, 5), dtype=np.uint32), None))


class TestFitAlpha:
    def make(self, rng, alpha=1.08, b=0.05, n_runs=400):
        # 50 atom-free bins then a flux ramp spanning two decades
        lam = np.concatenate([np.zeros(50), np.geomspace(0.02, 4.0, 300)])
        counts = compound_poisson_counts(rng, n_runs, lam, alpha, b)
        bc = BinnedCounts(200_000, counts, None)
        fs = fano_series(bc, n_boot=150, seed=9)
        return fs, bc

    def test_variance_mean_relation_point(self):
        # the fitted line var = (1+a) mean - a b at mean 1.13 (a=1.08, b=0.05)
        a, b, mean = 1.08, 0.05, 1.13
        var = (1 + a) * mean - a * b
        assert var == pytest.approx(2.2964, abs=1e-4)
        assert var / mean == pytest.approx(2.0322, abs=1e-4)

    def test_recovers_alpha(self):
        fs, bc = self.make(np.random.default_rng(5))
        fit = fit_alpha(fs, bc, (0, 50 * 200_000))
        assert fit.alpha == pytest.approx(1.08, abs=0.05)
        assert fit.background_b == pytest.approx(0.05, abs=0.01)
        assert fit.ci[0] < 1.08 < fit.ci[1]
        assert fit.alpha_sigma < 0.05
        assert fit.warnings == []

    def test_atom_free_covers_zero(self):
        rng = np.random.default_rng(6)
        counts = rng.poisson(0.05, size=(300, 350)).astype(np.uint32)
        bc = BinnedCounts(200_000, counts, None)
        fs = fano_series(bc, n_boot=150, seed=2)
        fit = fit_alpha(fs, bc, (0, 50 * 200_000))
        assert fit.ci[0] < 0.0 < fit.ci[1] or abs(fit.alpha) < 0.05

    def test_contaminated_background_window_warns(self):
        fs, bc = self.make(np.random.default_rng(7))
        # window overlapping the high-flux region
        fit = fit_alpha(fs, bc, (300 * 200_000, 350 * 200_000))
        assert "background_window_superpoissonian" in fit.warnings

    def test_small_window_rejected(self):
        fs, bc = self.make(np.random.default_rng(8))
        with pytest.raises(ValueError, match="10"):
            fit_alpha(fs, bc, (0, 200_000))

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha,flux", [(0.25, 20_000.0), (4.5, 1_000.0)])
    def test_recovery_across_alpha_range(self, alpha, flux):
        # end-to-end through the simulator: fitted slope 1 + alpha within 5%
        from photonstat.model import (AtomSourceConfig, DetectorConfig,
                                      ExperimentConfig, FixedDwell,
                                      IdealPoissonEmission, RunConfig)
        from photonstat.simulate import run_experiment
        cfg = ExperimentConfig(
            source=AtomSourceConfig(
                profile=((0.0, 0.0), (30e6, 0.0), (32e6, flux), (500e6, flux)),
                duration_ns=500_000_000),
            emission=IdealPoissonEmission(alpha_emitted=alpha / 0.009,
                                          dwell=FixedDwell(12_000.0)),
            detector=DetectorConfig(p_det=0.009, n_channels=1, split_ratio=1.0,
                                    dark_rate_cps=250.0, dead_time_ns=50,
                                    stray_rate_cps=0.0),
            run=RunConfig(n_runs=200, master_seed=31, duration_ms=500.0))
        stream = run_experiment(cfg)
        bc = bin_counts(stream, 500_000)
        fs = fano_series(bc, n_boot=60, seed=3)
        fit = fit_alpha(fs, bc, (0, 30_000_000))
        assert (1 + fit.alpha) == pytest.approx(1 + alpha, rel=0.05)


class TestScatteredPhotons:
    def test_values(self):
        assert scattered_photons(1.08, 0.009) == pytest.approx(120.0)
        assert scattered_photons(0.0, 0.009) == 0.0
        assert scattered_photons(4.5, 0.0375) == pytest.approx(120.0)
        with pytest.raises(ValueError):
            scattered_photons(1.0, 0.0)


class TestTia:
    def test_pure_poisson_single_component(self):
        rng = np.random.default_rng(10)
        rate = 5000.0
        s = poisson_stream(rng, rate, 2_000_000_000, 10)
        fit = tia(s, interval_bin_ns=20_000)
        assert fit.single_component
        assert fit.rate_slow_cps == pytest.approx(rate, rel=0.05)

    def test_two_scale_stream(self):
        # synthetic bursts: slow arrivals at 200/s, each burst 6 detections
        # with exponential gaps of mean 11 us -> fast rate ~ 9.1e4 cps
        rng = np.random.default_rng(11)
        runs, times = [], []
        for r in range(5):
            starts = np.cumsum(rng.exponential(1 / 200.0, size=350)) * 1e9
            starts = starts[starts < 1.9e9]
            offsets = np.cumsum(rng.exponential(11_000.0, size=(starts.size, 6)), axis=1)
            t = (starts[:, None] + offsets).ravel()
            times.append(np.sort(t).astype(np.int64))
            runs.append(np.full(t.size, r))
        s = TimeTagStream(np.concatenate(runs), np.zeros(sum(map(len, times))),
                          np.concatenate(times), duration_ns=2_100_000_000,
                          n_runs=5, sort=True)
        fit = tia(s, interval_bin_ns=2_000)
        assert not fit.single_component
        assert fit.two_sloped
        assert fit.rate_fast_cps == pytest.approx(1e9 / 11_000.0, rel=0.15)
        assert fit.rate_slow_cps == pytest.approx(200.0, rel=0.15)

    def test_too_few_intervals(self):
        s = TimeTagStream([0] * 5, [0] * 5, np.arange(5) * 100,
                          duration_ns=1000, n_runs=1)
        with pytest.raises(ValueError, match="100"):
            tia(s, interval_bin_ns=10)

    def test_probabilities_normalize(self):
        rng = np.random.default_rng(12)
        s = poisson_stream(rng, 3000.0, 1_000_000_000, 4)
        fit = tia(s, interval_bin_ns=50_000)
        assert fit.probs.sum() == pytest.approx(1.0, abs=0.01)
        # fitted model accounts for the histogram mass within a few percent
        model = sum(c.amplitude * c.q ** fit.k for c in fit.components)
        assert model.sum() == pytest.approx(fit.counts.sum(), rel=0.05)


class TestG2Normalize:
    def test_independent_poisson_stationary(self):
        rng = np.random.default_rng(13)
        a = poisson_stream(rng, 20_000, 1_000_000_000, 3)
        b = poisson_stream(rng, 25_000, 1_000_000_000, 3, channel=1)
        raw = cross_correlate(a, b, 100, 10_000)
        h = g2_normalize(raw, "stationary")
        assert np.nanmean(h.g2) == pytest.approx(1.0, abs=0.02)
        covered = np.abs(h.g2 - 1.0) <= 2 * h.sigma
        assert covered.mean() >= 0.90

    def test_independent_poisson_local(self):
        rng = np.random.default_rng(14)
        a = poisson_stream(rng, 30_000, 500_000_000, 2)
        b = poisson_stream(rng, 30_000, 500_000_000, 2, channel=1)
        raw = cross_correlate(a, b, 100, 5_000)
        h = g2_normalize(raw, "local", a=a, b=b, bandwidth_ns=50_000)
        assert np.nanmean(h.g2) == pytest.approx(1.0, abs=0.03)

    def test_rate_doubling_invariance(self):
        rng = np.random.default_rng(15)
        g2s = []
        for rate in (10_000, 20_000):
            a = poisson_stream(rng, rate, 1_000_000_000, 2)
            b = poisson_stream(rng, rate, 1_000_000_000, 2, channel=1)
            raw = cross_correlate(a, b, 200, 10_000)
            g2s.append(g2_normalize(raw, "stationary"))
        diff = np.abs(g2s[0].g2 - g2s[1].g2)
        band = 2 * np.hypot(g2s[0].sigma, g2s[1].sigma)
        assert (diff <= band).mean() >= 0.90

    def test_empty_stream_rejected(self):
        empty = TimeTagStream([], [], [], duration_ns=1000, n_runs=1)
        raw = cross_correlate(empty, empty, 10, 100)
        with pytest.raises(ValueError, match="normalization"):
            g2_normalize(raw, "stationary")


class TestBackgroundCorrect:
    def test_identity_without_background(self):
        out = g2_background_correct(0.4, 1000.0, 0.0, sigma=0.05)
        assert out.value == pytest.approx(0.4)
        assert out.sigma == pytest.approx(0.05)
        assert not out.inconsistent

    def test_removes_known_accidentals(self):
        # with true g2_sig = 0: measured = (2SB + B^2)/I^2
        s_rate, b_rate = 3500.0, 250.0
        i_tot = s_rate + b_rate
        g_meas = (2 * s_rate * b_rate + b_rate**2) / i_tot**2
        out = g2_background_correct(g_meas, s_rate, b_rate, sigma=0.01)
        assert out.value == pytest.approx(0.0, abs=1e-12)
        assert not out.inconsistent

    def test_flags_inconsistent(self):
        out = g2_background_correct(0.0, 1000.0, 1000.0, sigma=0.01)
        assert out.value < 0
        assert out.inconsistent


class TestG2ZeroSeries:
    def test_independent_poisson_near_one(self):
        rng = np.random.default_rng(16)
        a = poisson_stream(rng, 50_000, 1_000_000_000, 4)
        b = poisson_stream(rng, 50_000, 1_000_000_000, 4, channel=1)
        series = g2_zero_series(a, b, window_ms=100.0, coincidence_window_ns=500,
                                alpha=1.0, dwell_ns=12_000.0, bandwidth_ns=100_000.0)
        assert series.usable.all()
        assert np.abs(series.g2[series.usable] - 1.0).mean() < 0.1

    def test_sparse_windows_marked_unusable(self):
        a = TimeTagStream([0], [0], [5], duration_ns=1_000_000_000, n_runs=1)
        b = TimeTagStream([0], [1], [9], duration_ns=1_000_000_000, n_runs=1)
        series = g2_zero_series(a, b, 100.0, 100, alpha=1.0, dwell_ns=12_000.0)
        assert not series.usable.any()
        assert np.isnan(series.g2).all()

    def test_window_grid_tiles_duration(self):
        a = TimeTagStream([0], [0], [5], duration_ns=950_000_000, n_runs=1)
        series = g2_zero_series(a, a, 100.0, 100, alpha=1.0, dwell_ns=12_000.0)
        assert series.window_lo_ns[0] == 0
        assert series.window_hi_ns[-1] == 950_000_000
        assert np.all(series.window_lo_ns[1:] == series.window_hi_ns[:-1])
