"""Command-line surface: simulate, analyze, theory curves, full report.

Exit codes: 0 success, 2 validation/usage failure, 1 runtime error.  Every
run writes a manifest (config hash, seed, package versions) alongside its
outputs, sufficient to reproduce them exactly.  All randomness flows from
one seed: --seed wins, then the PHOTONSTAT_SEED environment variable, then
the master_seed in the config file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

import photonstat
from photonstat import theory
from photonstat.correlate import cross_correlate
from photonstat.model import (
    NS_PER_S,
    BurstEmission,
    ExperimentConfig,
    FixedDwell,
    IdealPoissonEmission,
    McwfEmission,
    RunConfig,
    TwoLevelParams,
    config_to_dict,
    load_config,
    validate,
)
from photonstat.simulate import JumpGapSampler, run_experiment
from photonstat import stats
from photonstat.ttag import import_csv, read_ttag, write_ttag

GAMMA_DEFAULT_MHZ = 6.07


class CliError(Exception):
    """Validation failure surfaced as exit code 2."""


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure
        print(f"runtime error: {err}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonstat",
                                description="single-atom fluorescence simulation and photon statistics")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a TTAG1 time-tag file from a config")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--runs", type=int, default=None, help="override n_runs")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument("--mode", choices=["ideal", "burst", "mcwf"], default=None,
                     help="override emission mode (defaults for the new mode apply)")
    sim.add_argument("--threads", type=int, default=1,
                     help="parallelism hint; results are identical for any value")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="run one analysis on a time-tag file")
    ana_sub = ana.add_subparsers(dest="analysis", required=True)

    a_stats = ana_sub.add_parser("stats", help="binned moments, Fano ratio, counts-per-atom fit")
    a_stats.add_argument("--in", dest="infile", required=True)
    a_stats.add_argument("--out", required=True, help="output directory")
    a_stats.add_argument("--bin-us", type=float, default=200.0)
    a_stats.add_argument("--background-ms", default="0:50", help="atom-free window lo:hi, ms")
    a_stats.add_argument("--channels", default=None, help="comma list, default all")
    a_stats.add_argument("--boot", type=int, default=200)
    a_stats.add_argument("--seed", type=int, default=None, help="bootstrap seed")
    a_stats.add_argument("--p-det", type=float, default=0.009,
                         help="detection probability used for the scattered-photon estimate")
    a_stats.set_defaults(func=cmd_analyze_stats)

    a_tia = ana_sub.add_parser("tia", help="time-interval analysis")
    a_tia.add_argument("--in", dest="infile", required=True)
    a_tia.add_argument("--out", required=True)
    a_tia.add_argument("--bin-ns", type=int, default=2000)
    a_tia.add_argument("--range-ms", default=None)
    a_tia.add_argument("--channels", default=None)
    a_tia.set_defaults(func=cmd_analyze_tia)

    a_g2 = ana_sub.add_parser("g2", help="normalized cross-correlation of channels 0 and 1")
    a_g2.add_argument("--in", dest="infile", required=True)
    a_g2.add_argument("--out", required=True)
    a_g2.add_argument("--bin-ns", type=int, default=4)
    a_g2.add_argument("--max-lag-us", type=float, default=1.0)
    a_g2.add_argument("--mode", choices=["stationary", "local"], default="local")
    a_g2.add_argument("--bandwidth-ns", type=float, default=None)
    a_g2.add_argument("--range-ms", default=None)
    a_g2.set_defaults(func=cmd_analyze_g2)

    a_gz = ana_sub.add_parser("g2zero", help="windowed g2(0) vs arrival time with flux overlay")
    a_gz.add_argument("--in", dest="infile", required=True)
    a_gz.add_argument("--out", required=True)
    a_gz.add_argument("--window-ms", type=float, default=100.0)
    a_gz.add_argument("--coinc-window-ns", type=int, default=10)
    a_gz.add_argument("--alpha", type=float, required=True)
    a_gz.add_argument("--dwell-us", type=float, default=12.0)
    a_gz.add_argument("--background-cps", type=float, default=0.0)
    a_gz.add_argument("--bandwidth-ns", type=float, default=None)
    a_gz.set_defaults(func=cmd_analyze_g2zero)

    th = sub.add_parser("theory", help="reference curves and bounds")
    th_sub = th.add_subparsers(dest="curve", required=True)

    t_g2 = th_sub.add_parser("g2", help="two-level-atom g2(tau) as CSV")
    t_g2.add_argument("--omega-over-gamma", type=float, default=2.3)
    t_g2.add_argument("--gamma-mhz", type=float, default=GAMMA_DEFAULT_MHZ,
                      help="natural linewidth / 2 pi, MHz")
    t_g2.add_argument("--delta-mhz", type=float, default=0.0)
    t_g2.add_argument("--max-lag-ns", type=float, default=1000.0)
    t_g2.add_argument("--bin-ns", type=float, default=4.0)
    t_g2.add_argument("--out", required=True)
    t_g2.set_defaults(func=cmd_theory_g2)

    t_b = th_sub.add_parser("bounds", help="g2(0) lower bound vs mean atom number as CSV")
    t_b.add_argument("--alpha", type=float, default=1.08)
    t_b.add_argument("--n-min", type=float, default=1e-3)
    t_b.add_argument("--n-max", type=float, default=100.0)
    t_b.add_argument("--points", type=int, default=200)
    t_b.add_argument("--out", required=True)
    t_b.set_defaults(func=cmd_theory_bounds)

    t_r = th_sub.add_parser("rates", help="steady-state population and scattering rate as JSON")
    t_r.add_argument("--s", type=float, default=3.5)
    t_r.add_argument("--gamma-mhz", type=float, default=GAMMA_DEFAULT_MHZ)
    t_r.add_argument("--alpha", type=float, default=None,
                     help="also report detection probability for this counts/atom")
    t_r.add_argument("--p-det", type=float, default=None)
    t_r.add_argument("--out", required=True)
    t_r.set_defaults(func=cmd_theory_rates)

    imp = sub.add_parser("import", help="convert a CSV tag list to TTAG1")
    imp.add_argument("--in", dest="infile", required=True)
    imp.add_argument("--out", required=True)
    imp.add_argument("--time-unit", choices=["s", "ms", "us", "ns"], default="ns")
    imp.add_argument("--run-column", default="run")
    imp.add_argument("--channel-column", default="channel")
    imp.add_argument("--time-column", default="time")
    imp.set_defaults(func=cmd_import)

    rep = sub.add_parser("report", help="full counting-statistics pipeline from one config")
    rep.add_argument("--config", required=True)
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--runs", type=int, default=None, help="override n_runs")
    rep.add_argument("--threads", type=int, default=1)
    rep.add_argument("--save-tags", action="store_true", help="also write tags.ttag")
    rep.set_defaults(func=cmd_report)
    return p


# ---------------------------------------------------------------------------
# helpers

def resolve_seed(cli_seed, config_seed):
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("PHOTONSTAT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as err:
            raise CliError(f"PHOTONSTAT_SEED is not an integer: {env!r}") from err
    return int(config_seed)


def load_valid_config(path) -> ExperimentConfig:
    try:
        config = load_config(path)
    except (OSError, KeyError, ValueError) as err:
        raise CliError(f"cannot load config {path}: {err}") from err
    problems = validate(config)
    if problems:
        raise CliError(f"invalid config {path}: " + "; ".join(str(v) for v in problems))
    return config


def apply_overrides(config: ExperimentConfig, runs=None, seed=None, mode=None) -> ExperimentConfig:
    run = config.run
    if runs is not None or seed is not None:
        run = RunConfig(n_runs=runs if runs is not None else run.n_runs,
                        master_seed=seed if seed is not None else run.master_seed,
                        duration_ms=run.duration_ms)
    emission = config.emission
    current = {IdealPoissonEmission: "ideal", BurstEmission: "burst",
               McwfEmission: "mcwf"}[type(emission)]
    if mode is not None and mode != current:
        emission = {"ideal": IdealPoissonEmission(),
                    "burst": BurstEmission(),
                    "mcwf": McwfEmission()}[mode]
    return ExperimentConfig(source=config.source, emission=emission,
                            detector=config.detector, run=run)


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir: Path, command: str, config: ExperimentConfig | None,
                   seed, inputs=None, filename: str = "manifest.json") -> None:
    manifest = {
        "command": command,
        "config_sha256": config_hash(config) if config is not None else None,
        "seed": seed,
        "inputs": inputs or {},
        "versions": {
            "photonstat": photonstat.__version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    write_json(out_dir / filename, manifest)


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], columns) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = zip(*columns)
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{float(v):.10g}"


def parse_range_ms(text, duration_ns):
    if text is None:
        return None
    try:
        lo, hi = text.split(":")
        rng = (int(float(lo) * 1e6), int(float(hi) * 1e6))
    except ValueError as err:
        raise CliError(f"bad range {text!r}, expected lo:hi in ms") from err
    if not 0 <= rng[0] < rng[1] <= duration_ns:
        raise CliError(f"range {text} outside run duration")
    return rng


def parse_channels(text):
    if text is None:
        return None
    try:
        return [int(c) for c in text.split(",")]
    except ValueError as err:
        raise CliError(f"bad channel list {text!r}") from err


def expected_counts_per_atom(config: ExperimentConfig) -> float:
    """Detected counts per atom implied by the emission model and p_det."""
    em = config.emission
    p = config.detector.p_det
    if isinstance(em, IdealPoissonEmission):
        return em.alpha_emitted * p
    if isinstance(em, BurstEmission):
        mean_dwell = em.dwell.tau_ns if isinstance(em.dwell, FixedDwell) else em.dwell.mean_ns
        return em.scatter_rate_cps * mean_dwell / NS_PER_S * p
    mean_gap = JumpGapSampler(em.two_level).mean_gap_ns
    mean_transit = mean_gap / em.p_dark
    fraction = -math.expm1(-em.max_dwell_ns / mean_transit)  # truncation by max dwell
    return fraction / em.p_dark * p


def expected_dwell_ns(config: ExperimentConfig) -> float:
    """Mean transit duration implied by the emission model."""
    em = config.emission
    if isinstance(em, (IdealPoissonEmission, BurstEmission)):
        return em.dwell.tau_ns if isinstance(em.dwell, FixedDwell) else em.dwell.mean_ns
    mean_gap = JumpGapSampler(em.two_level).mean_gap_ns
    mean_transit = mean_gap / em.p_dark
    return mean_transit * -math.expm1(-em.max_dwell_ns / mean_transit)


def background_window_from_profile(config: ExperimentConfig):
    """Atom-free window: from 0 to the last zero-rate knot before the onset."""
    onset = None
    prev_t = 0.0
    for t, r in config.source.profile:
        if r > 0:
            onset = prev_t
            break
        prev_t = t
    if onset is None or onset <= 0:
        return None
    return (0, int(onset))


def low_density_range(config: ExperimentConfig, alpha: float, dwell_ns: float):
    """Time range where at most one atom occupies the detection region.

    Scans the profile for the first time the expected occupancy
    alpha * rate * dwell stays below 0.05; correlation curves built from
    this tail see isolated transits.
    """
    dur = config.run.duration_ns
    max_rate = 0.05 / (alpha * dwell_ns / NS_PER_S)
    grid = np.linspace(0.0, dur, 2001)
    rate = config.source.rate_at(grid)
    start = None
    for t, r in zip(grid, rate):
        if r > max_rate:
            start = None
        elif start is None:
            start = t
    if start is None or dur - start < 0.05 * dur:
        start = 0.75 * dur  # profile never settles; fall back to the last quarter
    return (int(start), dur)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args) -> int:
    config = load_valid_config(args.config)
    seed = resolve_seed(args.seed, config.run.master_seed)
    config = apply_overrides(config, runs=args.runs, seed=seed, mode=args.mode)
    stream = run_experiment(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ttag(stream, out)
    write_manifest(out.parent, "simulate", config, seed,
                   inputs={"config": str(args.config), "out": out.name})
    print(f"wrote {len(stream)} tags over {config.run.n_runs} runs to {out}")
    return 0


def cmd_import(args) -> int:
    stream = import_csv(args.infile, run_column=args.run_column,
                        channel_column=args.channel_column,
                        time_column=args.time_column, time_unit=args.time_unit)
    out = Path(args.out)
    write_ttag(stream, out)
    write_manifest(out.parent, "import", None, None,
                   inputs={"in": str(args.infile), "time_unit": args.time_unit},
                   filename=out.name + ".manifest.json")
    print(f"imported {len(stream)} tags to {args.out}")
    return 0


def cmd_analyze_stats(args) -> int:
    stream = read_ttag(args.infile)
    out = Path(args.out)
    bin_ns = int(round(args.bin_us * 1000))
    window = parse_range_ms(args.background_ms, stream.duration_ns)
    bc = stats.bin_counts(stream, bin_ns, channels=parse_channels(args.channels))
    fs = stats.fano_series(bc, n_boot=args.boot, seed=args.seed if args.seed is not None else 0)
    fit = stats.fit_alpha(fs, bc, window)
    write_csv(out / "fano.csv",
              ["t_ms", "mean", "variance", "ratio", "ratio_lo", "ratio_hi"],
              [fs.t_ns / 1e6, fs.mean, fs.var, fs.ratio, fs.ratio_lo, fs.ratio_hi])
    write_json(out / "alpha.json", alpha_fit_dict(fit, args.p_det))
    write_manifest(out, "analyze stats", None, args.seed,
                   inputs={"in": str(args.infile), "bin_us": args.bin_us,
                           "background_ms": args.background_ms})
    print(f"alpha = {fit.alpha:.4f} +- {fit.alpha_sigma:.4f}  "
          f"(b = {fit.background_b:.4f}/bin)")
    return 0


def alpha_fit_dict(fit, p_det=None) -> dict:
    d = {
        "alpha": fit.alpha,
        "alpha_sigma": fit.alpha_sigma,
        "ci95": list(fit.ci),
        "background_per_bin": fit.background_b,
        "covariance": fit.covariance,
        "residual_chi2": fit.residual_chi2,
        "n_background_bins": fit.n_background_bins,
        "warnings": fit.warnings,
        "p_detection": theory.detection_probability(max(fit.alpha, 0.0)),
    }
    if p_det:
        d["scattered_photons_per_atom"] = stats.scattered_photons(max(fit.alpha, 0.0), p_det)
    return d


def cmd_analyze_tia(args) -> int:
    stream = read_ttag(args.infile)
    out = Path(args.out)
    rng = parse_range_ms(args.range_ms, stream.duration_ns)
    fit = stats.tia(stream, args.bin_ns, time_range=rng,
                    channels=parse_channels(args.channels))
    write_csv(out / "tia.csv", ["interval_ns", "count", "prob"],
              [fit.k * args.bin_ns, fit.counts, fit.probs])
    write_json(out / "tia_fit.json", tia_fit_dict(fit))
    write_manifest(out, "analyze tia", None, None,
                   inputs={"in": str(args.infile), "bin_ns": args.bin_ns,
                           "range_ms": args.range_ms})
    rates = ", ".join(f"{c.rate_cps:.1f}/s" for c in fit.components)
    print(f"tia: {len(fit.components)} component(s), rates {rates}")
    return 0


def tia_fit_dict(fit) -> dict:
    return {
        "interval_bin_ns": fit.interval_bin_ns,
        "n_intervals": fit.n_intervals,
        "single_component": fit.single_component,
        "two_sloped": fit.two_sloped,
        "components": [{"amplitude": c.amplitude, "q": c.q, "rate_cps": c.rate_cps}
                       for c in fit.components],
    }


def cmd_analyze_g2(args) -> int:
    stream = read_ttag(args.infile)
    if stream.n_channels < 2:
        raise CliError("g2 needs a two-channel (HBT) stream")
    out = Path(args.out)
    rng = parse_range_ms(args.range_ms, stream.duration_ns)
    a = stream.select(channels=[0])
    b = stream.select(channels=[1])
    max_lag = int(round(args.max_lag_us * 1000))
    max_lag -= max_lag % args.bin_ns
    raw = cross_correlate(a, b, args.bin_ns, max_lag, time_range=rng)
    hist = stats.g2_normalize(raw, args.mode, a=a, b=b, time_range=rng,
                              bandwidth_ns=args.bandwidth_ns)
    write_csv(out / "g2.csv", ["lag_ns", "g2", "sigma", "counts", "norm"],
              [hist.lag_ns, hist.g2, hist.sigma, hist.counts, hist.norm])
    write_manifest(out, "analyze g2", None, None,
                   inputs={"in": str(args.infile), "bin_ns": args.bin_ns,
                           "max_lag_us": args.max_lag_us, "mode": args.mode,
                           "bandwidth_ns": args.bandwidth_ns, "range_ms": args.range_ms})
    mid = hist.g2.size // 2
    print(f"g2(0) = {hist.g2[mid]:.4f} +- {hist.sigma[mid]:.4f} (raw)")
    return 0


def cmd_analyze_g2zero(args) -> int:
    stream = read_ttag(args.infile)
    if stream.n_channels < 2:
        raise CliError("g2zero needs a two-channel (HBT) stream")
    out = Path(args.out)
    series = stats.g2_zero_series(stream.select(channels=[0]), stream.select(channels=[1]),
                                  window_ms=args.window_ms,
                                  coincidence_window_ns=args.coinc_window_ns,
                                  alpha=args.alpha, dwell_ns=args.dwell_us * 1000,
                                  background_cps=args.background_cps,
                                  bandwidth_ns=args.bandwidth_ns)
    write_g2zero_csv(out / "g2zero.csv", series)
    write_manifest(out, "analyze g2zero", None, None,
                   inputs={"in": str(args.infile), "window_ms": args.window_ms,
                           "coinc_window_ns": args.coinc_window_ns,
                           "alpha": args.alpha, "dwell_us": args.dwell_us})
    n_use = int(series.usable.sum())
    print(f"g2zero: {n_use}/{series.usable.size} usable windows")
    return 0


def write_g2zero_csv(path, series) -> None:
    write_csv(path,
              ["t_lo_ms", "t_hi_ms", "g2", "sigma", "mean_atoms", "overlay",
               "usable", "coincidences", "n_a", "n_b"],
              [series.window_lo_ns / 1e6, series.window_hi_ns / 1e6, series.g2,
               series.sigma, series.mean_atoms, series.overlay, series.usable,
               series.coincidences, series.n_a, series.n_b])


def cmd_theory_g2(args) -> int:
    gamma = 2 * math.pi * args.gamma_mhz * 1e6
    p = TwoLevelParams(gamma=gamma, omega=args.omega_over_gamma * gamma,
                       delta=2 * math.pi * args.delta_mhz * 1e6)
    lags = np.arange(0.0, args.max_lag_ns + 0.5 * args.bin_ns, args.bin_ns)
    curve = theory.g2_analytic(p, lags)
    out = Path(args.out)
    write_csv(out, ["lag_ns", "g2"], [curve.lags_ns, curve.values])
    write_manifest(out.parent, "theory g2", None, None,
                   inputs={"omega_over_gamma": args.omega_over_gamma,
                           "gamma_mhz": args.gamma_mhz, "delta_mhz": args.delta_mhz},
                   filename=out.name + ".manifest.json")
    print(f"wrote {curve.lags_ns.size} lags to {args.out}")
    return 0


def cmd_theory_bounds(args) -> int:
    n = np.geomspace(args.n_min, args.n_max, args.points)
    flux = [theory.g2_zero_vs_flux(args.alpha, x) for x in n]
    fixed = [theory.g2_lower_bound_n(x) for x in n]
    out = Path(args.out)
    write_csv(out, ["mean_atoms", "g2_bound_flux", "g2_bound_fixed_n"],
              [n, flux, fixed])
    write_manifest(out.parent, "theory bounds", None, None,
                   inputs={"alpha": args.alpha},
                   filename=out.name + ".manifest.json")
    print(f"wrote {args.points} points to {args.out}")
    return 0


def cmd_theory_rates(args) -> int:
    gamma = 2 * math.pi * args.gamma_mhz * 1e6
    p = TwoLevelParams(gamma=gamma, s=args.s)
    out = {
        "saturation": args.s,
        "gamma_rad_per_s": gamma,
        "excited_population_ss": theory.excited_population_ss(p),
        "scattering_rate_per_s": theory.scattering_rate(p),
    }
    if args.alpha is not None:
        out["alpha"] = args.alpha
        out["p_detection"] = theory.detection_probability(args.alpha)
        if args.p_det:
            out["scattered_photons_per_atom"] = stats.scattered_photons(args.alpha, args.p_det)
    path = Path(args.out)
    write_json(path, out)
    write_manifest(path.parent, "theory rates", None, None,
                   inputs={"s": args.s, "gamma_mhz": args.gamma_mhz},
                   filename=path.name + ".manifest.json")
    print(f"wrote rates to {args.out}")
    return 0


def cmd_report(args) -> int:
    config = load_valid_config(args.config)
    seed = resolve_seed(args.seed, config.run.master_seed)
    config = apply_overrides(config, runs=args.runs, seed=seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    stream = run_experiment(config)
    if args.save_tags:
        write_ttag(stream, out / "tags.ttag")

    dur = config.run.duration_ns
    alpha_cfg = expected_counts_per_atom(config)
    dwell_cfg = expected_dwell_ns(config)
    det = config.detector
    summary: dict = {
        "config_sha256": config_hash(config),
        "seed": seed,
        "n_runs": config.run.n_runs,
        "n_tags": len(stream),
        "model_alpha": alpha_cfg,
        "model_dwell_ns": dwell_cfg,
    }

    # counting statistics (Fig 2 style): 200 us bins, all channels
    window = background_window_from_profile(config)
    if window is not None and window[1] - window[0] >= 10 * 200_000:
        bc = stats.bin_counts(stream, 200_000)
        fs = stats.fano_series(bc, n_boot=200, seed=seed)
        fit = stats.fit_alpha(fs, bc, window)
        write_csv(out / "fig2_fano.csv",
                  ["t_ms", "mean", "variance", "ratio", "ratio_lo", "ratio_hi"],
                  [fs.t_ns / 1e6, fs.mean, fs.var, fs.ratio, fs.ratio_lo, fs.ratio_hi])
        summary["alpha_fit"] = alpha_fit_dict(fit, det.p_det)
    else:
        summary["alpha_fit"] = None

    # low-density tail used for interval analysis and the correlation curve
    tail = low_density_range(config, alpha_cfg, dwell_cfg)
    tail_s = (tail[1] - tail[0]) / NS_PER_S * config.run.n_runs
    summary["low_density_range_ms"] = [tail[0] / 1e6, tail[1] / 1e6]
    bg_total = det.n_channels * det.dark_rate_cps + det.stray_rate_cps

    try:
        tia_fit = stats.tia(stream, 2_000, time_range=tail)
        write_csv(out / "fig3_tia.csv", ["interval_ns", "count", "prob"],
                  [tia_fit.k * 2_000, tia_fit.counts, tia_fit.probs])
        summary["tia"] = tia_fit_dict(tia_fit)
    except ValueError as err:
        summary["tia"] = {"error": str(err)}

    if det.n_channels == 2:
        a = stream.select(channels=[0])
        b = stream.select(channels=[1])
        try:
            raw = cross_correlate(a, b, 4, 1000, time_range=tail)
            hist = stats.g2_normalize(raw, "local", a=a, b=b, time_range=tail)
            write_csv(out / "fig4a_g2.csv", ["lag_ns", "g2", "sigma", "counts", "norm"],
                      [hist.lag_ns, hist.g2, hist.sigma, hist.counts, hist.norm])
            mid = hist.g2.size // 2
            bg_ch = det.dark_rate_cps + det.stray_rate_cps / 2
            n_a_tail = len(a.select(time_range=tail))
            n_b_tail = len(b.select(time_range=tail))
            sub = stats.g2_subtract_accidentals(
                hist, max(n_a_tail / tail_s - bg_ch, 1e-9),
                max(n_b_tail / tail_s - bg_ch, 1e-9), bg_ch, bg_ch, tail_s)
            summary["g2_zero_raw"] = float(hist.g2[mid])
            summary["g2_zero_raw_sigma"] = float(hist.sigma[mid])
            summary["g2_zero_corrected"] = float(sub.g2[mid])
            summary["g2_zero_corrected_sigma"] = float(sub.sigma[mid])
        except ValueError as err:
            summary["g2_zero_raw"] = None
            summary["g2_curve_error"] = str(err)

        # overlay dwell: for quantum-jump transits the pair-based estimator
        # tracks the flux bound when <N> uses 2 x mean transit / alpha
        if isinstance(config.emission, McwfEmission):
            overlay_dwell = 2.0 * dwell_cfg / alpha_cfg
        else:
            overlay_dwell = dwell_cfg
        series = stats.g2_zero_series(a, b, window_ms=100.0, coincidence_window_ns=10,
                                      alpha=alpha_cfg, dwell_ns=overlay_dwell,
                                      background_cps=bg_total)
        write_g2zero_csv(out / "fig4b_g2zero.csv", series)
        summary["g2zero_usable_windows"] = int(series.usable.sum())
        summary["g2zero_overlay_dwell_ns"] = overlay_dwell

    write_json(out / "summary.json", summary)
    write_manifest(out, "report", config, seed, inputs={"config": str(args.config)})
    print(f"report written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
