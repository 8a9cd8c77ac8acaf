"""Core domain types: time-tag streams, atom/detector/emission configuration.

Times are integer nanoseconds throughout (1 ns is far below the shortest
physical scale in play, the ~70 ns Rabi period), which keeps coincidence
logic free of float-comparison ambiguity.  Rates are given in physical
units noted per field (rad/s for atomic frequencies, counts/s for
detector rates).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000

# Rb-87 D2 natural linewidth, rad/s.  A config default, overridable.
GAMMA_RB87 = 2.0 * math.pi * 6.07e6


@dataclass(frozen=True)
class TwoLevelParams:
    """Driven two-level atom: linewidth, drive strength, detuning.

    ``s`` and ``(omega, delta)`` are stored independently and never
    reconciled automatically; experimental reports commonly quote both and
    the quoted pairs do not always satisfy any one saturation convention.
    Steady-state quantities use ``s``; dynamical quantities use ``omega``
    and ``delta`` (falling back to a value derived from ``s`` only when
    ``omega`` is zero, see :func:`photonstat.theory.effective_rabi`).
    """

    gamma: float = GAMMA_RB87   # natural linewidth, rad/s
    omega: float = 0.0          # Rabi frequency, rad/s
    delta: float = 0.0          # detuning, rad/s
    s: float = 0.0              # saturation parameter, dimensionless


@dataclass(frozen=True)
class DetectorConfig:
    """Detection chain: thinning probability, HBT split, backgrounds, dead time."""

    p_det: float = 0.009           # per-photon end-to-end detection probability
    n_channels: int = 2            # 1 = single counter, 2 = HBT pair
    split_ratio: float = 0.5       # fraction of detected photons to channel 0
    dark_rate_cps: float = 250.0   # per-channel dark count rate
    dead_time_ns: int = 50         # non-paralyzable dead time per channel
    stray_rate_cps: float = 30.0   # excitation-light background, total


@dataclass(frozen=True)
class AtomSourceConfig:
    """Poissonian atom arrivals with a piecewise-linear rate profile.

    ``profile`` is a tuple of (time_ns, atoms_per_s) knots, sorted in time.
    The rate is interpolated linearly between knots and clamped to the edge
    values outside the knot span.
    """

    profile: tuple[tuple[float, float], ...]
    duration_ns: int

    def rate_at(self, t_ns) -> np.ndarray:
        t = np.asarray(self.profile, dtype=float)
        return np.interp(np.asarray(t_ns, dtype=float), t[:, 0], t[:, 1])

    def max_rate(self) -> float:
        return max(r for _, r in self.profile)

    def expected_atoms(self) -> float:
        """Integral of the rate profile over the run, in atoms."""
        t = np.asarray(self.profile, dtype=float)
        grid = np.unique(np.clip(np.append(t[:, 0], [0.0, self.duration_ns]),
                                 0.0, self.duration_ns))
        r = self.rate_at(grid)
        return float(np.trapezoid(r, grid) / NS_PER_S)


@dataclass(frozen=True)
class FixedDwell:
    tau_ns: float = 12_000.0


@dataclass(frozen=True)
class ExponentialDwell:
    mean_ns: float = 12_000.0


Dwell = FixedDwell | ExponentialDwell


@dataclass(frozen=True)
class IdealPoissonEmission:
    """Per-atom photon number exactly Poisson(alpha_emitted), times uniform in the dwell.

    ``alpha_emitted`` is the mean *emitted* photon count per atom; after
    thinning at p_det the detected count per atom is Poisson(alpha_emitted * p_det).
    """

    alpha_emitted: float = 120.0
    dwell: Dwell = field(default_factory=FixedDwell)


@dataclass(frozen=True)
class BurstEmission:
    """Homogeneous Poisson emission at scatter_rate during a sampled dwell.

    A fixed dwell gives Poisson per-atom counts; an exponential dwell gives
    geometric per-atom counts (overdispersed: var = alpha(1+alpha)).
    """

    scatter_rate_cps: float = 1.0e7
    dwell: Dwell = field(default_factory=FixedDwell)


@dataclass(frozen=True)
class McwfEmission:
    """Quantum-jump emission from a driven two-level atom.

    Each scattered photon pumps the atom into a non-fluorescing ground state
    with probability ``p_dark`` (ending the transit); otherwise the transit
    runs until ``max_dwell_ns``.
    """

    two_level: TwoLevelParams = field(
        default_factory=lambda: TwoLevelParams(omega=2.3 * GAMMA_RB87))
    p_dark: float = 1.0 / 120.0
    max_dwell_ns: float = 100_000.0


EmissionConfig = IdealPoissonEmission | BurstEmission | McwfEmission


@dataclass(frozen=True)
class RunConfig:
    n_runs: int = 1
    master_seed: int = 0
    duration_ms: float = 2000.0

    @property
    def duration_ns(self) -> int:
        return int(round(self.duration_ms * NS_PER_MS))


@dataclass(frozen=True)
class ExperimentConfig:
    source: AtomSourceConfig
    emission: EmissionConfig
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    run: RunConfig = field(default_factory=RunConfig)


@dataclass(frozen=True)
class Violation:
    """One invariant violation; a machine-readable code plus a human message."""

    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate(config: ExperimentConfig) -> list[Violation]:
    """Check every config invariant; an empty list means the config is valid.

    Violations are data, not exceptions: callers decide whether to abort.
    """
    v: list[Violation] = []

    det = config.detector
    if not 0.0 <= det.p_det <= 1.0:
        v.append(Violation("p_det_range", f"p_det out of [0,1]: {det.p_det}"))
    if det.n_channels not in (1, 2):
        v.append(Violation("n_channels", f"n_channels must be 1 or 2: {det.n_channels}"))
    if not 0.0 <= det.split_ratio <= 1.0:
        v.append(Violation("split_ratio_range", f"split_ratio out of [0,1]: {det.split_ratio}"))
    if det.n_channels == 1 and det.split_ratio != 1.0:
        v.append(Violation("split_single_channel", "split_ratio must be 1 for a single channel"))
    if det.dark_rate_cps < 0:
        v.append(Violation("dark_rate_negative", f"dark rate < 0: {det.dark_rate_cps}"))
    if det.stray_rate_cps < 0:
        v.append(Violation("stray_rate_negative", f"stray rate < 0: {det.stray_rate_cps}"))
    if det.dead_time_ns < 0:
        v.append(Violation("dead_time_negative", f"dead time < 0: {det.dead_time_ns}"))

    src = config.source
    if len(src.profile) == 0:
        v.append(Violation("profile_empty", "arrival profile has no knots"))
    else:
        times = [t for t, _ in src.profile]
        if any(t1 > t2 for t1, t2 in zip(times, times[1:])):
            v.append(Violation("profile_unsorted", "profile knots not sorted in time"))
        if any(r < 0 for _, r in src.profile):
            v.append(Violation("profile_negative_rate", "negative arrival rate"))
        if not all(math.isfinite(t) and math.isfinite(r) for t, r in src.profile):
            v.append(Violation("profile_nonfinite", "non-finite profile knot"))
    if src.duration_ns <= 0:
        v.append(Violation("duration_nonpositive", f"duration_ns <= 0: {src.duration_ns}"))

    em = config.emission
    if isinstance(em, IdealPoissonEmission):
        if em.alpha_emitted <= 0:
            v.append(Violation("alpha_nonpositive", f"alpha_emitted <= 0: {em.alpha_emitted}"))
        v.extend(_validate_dwell(em.dwell))
    elif isinstance(em, BurstEmission):
        if em.scatter_rate_cps <= 0:
            v.append(Violation("scatter_rate_nonpositive",
                               f"scatter_rate <= 0: {em.scatter_rate_cps}"))
        v.extend(_validate_dwell(em.dwell))
    elif isinstance(em, McwfEmission):
        if not 0.0 < em.p_dark <= 1.0:
            v.append(Violation("p_dark_range", f"p_dark out of (0,1]: {em.p_dark}"))
        if em.max_dwell_ns <= 0:
            v.append(Violation("max_dwell_nonpositive", f"max_dwell_ns <= 0: {em.max_dwell_ns}"))
        tl = em.two_level
        if tl.gamma <= 0:
            v.append(Violation("gamma_nonpositive", f"gamma <= 0: {tl.gamma}"))
        if tl.s < 0:
            v.append(Violation("s_negative", f"saturation parameter < 0: {tl.s}"))
        if tl.omega <= 0 and tl.s <= 0:
            v.append(Violation("no_drive", "omega and s both zero: atom never fluoresces"))
    else:
        v.append(Violation("emission_unknown", f"unknown emission config {type(em).__name__}"))

    if config.run.n_runs < 0:
        v.append(Violation("n_runs_negative", f"n_runs < 0: {config.run.n_runs}"))
    if config.run.duration_ms <= 0:
        v.append(Violation("run_duration_nonpositive",
                           f"duration_ms <= 0: {config.run.duration_ms}"))
    if src.duration_ns > config.run.duration_ns:
        v.append(Violation("profile_exceeds_run",
                           "source profile duration exceeds run duration"))
    return v


def _validate_dwell(dwell) -> list[Violation]:
    if isinstance(dwell, FixedDwell):
        if dwell.tau_ns <= 0:
            return [Violation("dwell_nonpositive", f"fixed dwell <= 0: {dwell.tau_ns}")]
    elif isinstance(dwell, ExponentialDwell):
        if dwell.mean_ns <= 0:
            return [Violation("dwell_nonpositive", f"exponential dwell mean <= 0: {dwell.mean_ns}")]
    else:
        return [Violation("dwell_unknown", f"unknown dwell {type(dwell).__name__}")]
    return []


# ---------------------------------------------------------------------------
# config file round trip (JSON with sections source/emission/detector/run)

def _dwell_to_dict(d: Dwell) -> dict:
    if isinstance(d, FixedDwell):
        return {"kind": "fixed", "tau_ns": d.tau_ns}
    return {"kind": "exponential", "mean_ns": d.mean_ns}


def _dwell_from_dict(d: dict) -> Dwell:
    if d["kind"] == "fixed":
        return FixedDwell(tau_ns=d["tau_ns"])
    if d["kind"] == "exponential":
        return ExponentialDwell(mean_ns=d["mean_ns"])
    raise ValueError(f"unknown dwell kind {d['kind']!r}")


def config_to_dict(config: ExperimentConfig) -> dict:
    em = config.emission
    if isinstance(em, IdealPoissonEmission):
        em_d = {"mode": "ideal", "alpha_emitted": em.alpha_emitted,
                "dwell": _dwell_to_dict(em.dwell)}
    elif isinstance(em, BurstEmission):
        em_d = {"mode": "burst", "scatter_rate_cps": em.scatter_rate_cps,
                "dwell": _dwell_to_dict(em.dwell)}
    else:
        tl = em.two_level
        em_d = {"mode": "mcwf",
                "two_level": {"gamma": tl.gamma, "omega": tl.omega,
                              "delta": tl.delta, "s": tl.s},
                "p_dark": em.p_dark, "max_dwell_ns": em.max_dwell_ns}
    det = config.detector
    return {
        "source": {
            "profile": [[t, r] for t, r in config.source.profile],
            "duration_ns": config.source.duration_ns,
        },
        "emission": em_d,
        "detector": {
            "p_det": det.p_det, "n_channels": det.n_channels,
            "split_ratio": det.split_ratio, "dark_rate_cps": det.dark_rate_cps,
            "dead_time_ns": det.dead_time_ns, "stray_rate_cps": det.stray_rate_cps,
        },
        "run": {
            "n_runs": config.run.n_runs,
            "master_seed": config.run.master_seed,
            "duration_ms": config.run.duration_ms,
        },
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    em_d = d["emission"]
    mode = em_d["mode"]
    if mode == "ideal":
        emission: EmissionConfig = IdealPoissonEmission(
            alpha_emitted=em_d["alpha_emitted"],
            dwell=_dwell_from_dict(em_d.get("dwell", {"kind": "fixed", "tau_ns": 12_000.0})))
    elif mode == "burst":
        emission = BurstEmission(
            scatter_rate_cps=em_d["scatter_rate_cps"],
            dwell=_dwell_from_dict(em_d["dwell"]))
    elif mode == "mcwf":
        tl = em_d["two_level"]
        emission = McwfEmission(
            two_level=TwoLevelParams(gamma=tl["gamma"], omega=tl["omega"],
                                     delta=tl["delta"], s=tl["s"]),
            p_dark=em_d["p_dark"], max_dwell_ns=em_d["max_dwell_ns"])
    else:
        raise ValueError(f"unknown emission mode {mode!r}")
    src = d["source"]
    det = d["detector"]
    run = d["run"]
    return ExperimentConfig(
        source=AtomSourceConfig(
            profile=tuple((float(t), float(r)) for t, r in src["profile"]),
            duration_ns=int(src["duration_ns"])),
        emission=emission,
        detector=DetectorConfig(
            p_det=det["p_det"], n_channels=det["n_channels"],
            split_ratio=det["split_ratio"], dark_rate_cps=det["dark_rate_cps"],
            dead_time_ns=det["dead_time_ns"], stray_rate_cps=det["stray_rate_cps"]),
        run=RunConfig(n_runs=int(run["n_runs"]), master_seed=int(run["master_seed"]),
                      duration_ms=float(run["duration_ms"])))


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# time-tag streams

@dataclass(frozen=True)
class TimeTag:
    run_id: int
    channel: int
    t_ns: int


class TimeTagStream:
    """Sorted photon detection timestamps, possibly spanning several runs.

    Tags are held as parallel numpy arrays sorted by (run_id, t_ns); channel
    breaks ties so that identical inputs always produce identical streams.
    Unsorted input is rejected unless ``sort=True`` is passed explicitly --
    silently accepting unsorted data is the one thing this class never does.
    """

    def __init__(self, run_id, channel, t_ns, *, duration_ns, n_runs,
                 n_channels=2, resolution_ns=1, sort=False):
        run_id = np.ascontiguousarray(run_id, dtype=np.uint32)
        channel = np.ascontiguousarray(channel, dtype=np.uint8)
        t_ns = np.ascontiguousarray(t_ns, dtype=np.uint64)
        if not (run_id.shape == channel.shape == t_ns.shape):
            raise ValueError("run_id, channel, t_ns must have equal length")
        if resolution_ns <= 0:
            raise ValueError(f"resolution_ns must be positive: {resolution_ns}")

        order_ok = _is_sorted_run_time(run_id, t_ns)
        if not order_ok:
            if not sort:
                raise ValueError("tags not sorted by (run_id, t_ns); pass sort=True to sort")
            idx = np.lexsort((channel, t_ns, run_id))
            run_id, channel, t_ns = run_id[idx], channel[idx], t_ns[idx]

        if t_ns.size:
            if int(t_ns.max()) >= duration_ns:
                raise ValueError("tag at or beyond duration_ns")
            if int(channel.max()) >= n_channels:
                raise ValueError("channel index out of range")
            if int(run_id.max()) >= n_runs:
                raise ValueError("run_id out of range")
            if resolution_ns > 1 and np.any(t_ns % np.uint64(resolution_ns)):
                raise ValueError("tag time not a multiple of resolution_ns")

        self.run_id = run_id
        self.channel = channel
        self.t_ns = t_ns
        self.duration_ns = int(duration_ns)
        self.n_runs = int(n_runs)
        self.n_channels = int(n_channels)
        self.resolution_ns = int(resolution_ns)

    def __len__(self) -> int:
        return self.t_ns.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (self.duration_ns == other.duration_ns
                and self.n_runs == other.n_runs
                and self.n_channels == other.n_channels
                and self.resolution_ns == other.resolution_ns
                and np.array_equal(self.run_id, other.run_id)
                and np.array_equal(self.channel, other.channel)
                and np.array_equal(self.t_ns, other.t_ns))

    def tags(self):
        """Iterate tags as TimeTag records (convenience, not the fast path)."""
        for r, c, t in zip(self.run_id, self.channel, self.t_ns):
            yield TimeTag(int(r), int(c), int(t))

    def select(self, channels=None, time_range=None) -> "TimeTagStream":
        """Sub-stream restricted to the given channels and/or (lo, hi) ns window."""
        mask = np.ones(len(self), dtype=bool)
        if channels is not None:
            mask &= np.isin(self.channel, np.asarray(list(channels), dtype=np.uint8))
        if time_range is not None:
            lo, hi = time_range
            mask &= (self.t_ns >= np.uint64(lo)) & (self.t_ns < np.uint64(hi))
        return TimeTagStream(self.run_id[mask], self.channel[mask], self.t_ns[mask],
                             duration_ns=self.duration_ns, n_runs=self.n_runs,
                             n_channels=self.n_channels, resolution_ns=self.resolution_ns)

    def run_slices(self) -> list[slice]:
        """Per-run index slices; empty runs yield empty slices."""
        bounds = np.searchsorted(self.run_id, np.arange(self.n_runs + 1))
        return [slice(int(bounds[i]), int(bounds[i + 1])) for i in range(self.n_runs)]

    def counts_per_run(self) -> np.ndarray:
        return np.bincount(self.run_id, minlength=self.n_runs).astype(np.int64)


def _is_sorted_run_time(run_id: np.ndarray, t_ns: np.ndarray) -> bool:
    if run_id.size < 2:
        return True
    dr = np.diff(run_id.astype(np.int64))
    if np.any(dr < 0):
        return False
    dt = np.diff(t_ns.astype(np.int64))
    return bool(np.all((dr > 0) | (dt >= 0)))


def concat_streams(streams) -> TimeTagStream:
    """Concatenate per-run streams (already in run order) into one stream."""
    streams = list(streams)
    if not streams:
        raise ValueError("no streams to concatenate")
    first = streams[0]
    return TimeTagStream(
        np.concatenate([s.run_id for s in streams]),
        np.concatenate([s.channel for s in streams]),
        np.concatenate([s.t_ns for s in streams]),
        duration_ns=max(s.duration_ns for s in streams),
        n_runs=max(s.n_runs for s in streams),
        n_channels=first.n_channels,
        resolution_ns=first.resolution_ns)
