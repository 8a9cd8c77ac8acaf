"""Synthetic time-tag generation: atom arrivals, emission, detection chain.

Emission comes in three fidelities.  ``IdealPoissonEmission`` realizes the
textbook compound-Poisson regime exactly (per-atom detected counts are
Poisson after thinning); ``BurstEmission`` adds finite in-burst rate and,
with an exponential dwell, intentionally overdispersed (geometric) per-atom
counts; ``McwfEmission`` unravels the driven two-level atom so antibunching
emerges from the dynamics instead of being imposed.

All randomness is drawn from per-run, per-stage generators seeded by
``derive_seed``; outputs are byte-identical for identical config + seed
regardless of execution order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from photonstat.model import (
    NS_PER_S,
    AtomSourceConfig,
    DetectorConfig,
    ExperimentConfig,
    ExponentialDwell,
    FixedDwell,
    IdealPoissonEmission,
    BurstEmission,
    McwfEmission,
    TimeTagStream,
    validate,
)
from photonstat.theory import effective_rabi

DARK_STATE = "dark_state"
LEFT_REGION = "left_region"

_SEED_DOMAIN = b"photonstat-seed-v1"


class McwfIntegrationError(RuntimeError):
    """No-jump norm increased: the fixed integration step is broken."""


@dataclass
class AtomTransit:
    """One atom's passage: arrival, dwell, emission times, why it stopped."""

    arrival_ns: float
    dwell_ns: float
    emitted: np.ndarray          # absolute emission times, float ns, increasing
    terminated_by: str           # DARK_STATE or LEFT_REGION


def derive_seed(master_seed: int, run_id: int, stage: str) -> int:
    """Per-run, per-stage RNG seed: SHA-256 over (domain, master, run, stage).

    Fixed and documented (docs/formats.md) so runs can execute in any order,
    in parallel, and still reproduce byte-identical output.
    """
    h = hashlib.sha256()
    h.update(_SEED_DOMAIN)
    h.update((master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update(int(run_id).to_bytes(4, "little"))
    h.update(stage.encode())
    return int.from_bytes(h.digest()[:8], "little")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def gen_atom_arrivals(source: AtomSourceConfig, seed) -> np.ndarray:
    """Inhomogeneous Poisson arrival times (float ns, sorted) by thinning.

    A homogeneous candidate process at the profile's maximum rate is thinned
    by rate(t)/max_rate.  A zero-everywhere profile yields an empty array.
    """
    rng = _rng(seed)
    rmax = source.max_rate()
    if rmax <= 0:
        return np.empty(0)
    n = rng.poisson(rmax * source.duration_ns / NS_PER_S)
    t = np.sort(rng.uniform(0.0, source.duration_ns, size=n))
    accept = rng.random(n) * rmax < source.rate_at(t)
    return t[accept]


def _sample_dwell(dwell, n: int, rng) -> np.ndarray:
    if isinstance(dwell, FixedDwell):
        return np.full(n, float(dwell.tau_ns))
    if isinstance(dwell, ExponentialDwell):
        return rng.exponential(dwell.mean_ns, size=n)
    raise TypeError(f"unknown dwell {type(dwell).__name__}")


def _segmented_sorted_uniform(arrivals, dwells, counts, rng) -> np.ndarray:
    """Uniform times within each atom's dwell window, sorted within atoms."""
    total = int(counts.sum())
    atom_idx = np.repeat(np.arange(arrivals.size), counts)
    u = rng.random(total) * np.repeat(dwells, counts)
    order = np.lexsort((u, atom_idx))
    return np.repeat(arrivals, counts) + u[order]


def _build_transits(arrivals, dwells, counts, times_flat, terminated=None):
    bounds = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
    out = []
    for i, arrival in enumerate(arrivals):
        term = LEFT_REGION if terminated is None else terminated[i]
        out.append(AtomTransit(
            arrival_ns=float(arrival), dwell_ns=float(dwells[i]),
            emitted=times_flat[bounds[i]:bounds[i + 1]], terminated_by=term))
    return out


def emit_ideal_poisson(arrivals, alpha_emitted: float, dwell, seed) -> list[AtomTransit]:
    """Per-atom photon number exactly Poisson(alpha_emitted), times uniform in the dwell.

    Bernoulli thinning downstream keeps the per-atom law Poisson, so this
    mode reproduces the compound-Poisson counting statistics exactly.
    """
    if alpha_emitted <= 0:
        raise ValueError(f"alpha_emitted must be > 0: {alpha_emitted}")
    rng = _rng(seed)
    arrivals = np.asarray(arrivals, dtype=float)
    dwells = _sample_dwell(dwell, arrivals.size, rng)
    counts = rng.poisson(alpha_emitted, size=arrivals.size)
    times = _segmented_sorted_uniform(arrivals, dwells, counts, rng)
    return _build_transits(arrivals, dwells, counts, times)


def emit_burst(arrivals, scatter_rate_cps: float, dwell, seed) -> list[AtomTransit]:
    """Homogeneous Poisson emission at scatter_rate during a sampled dwell.

    Fixed dwell: per-atom counts Poisson(rate * tau).  Exponential dwell:
    geometric counts with var = alpha(1 + alpha), deliberately violating the
    Poisson-per-atom assumption so its effect can be quantified.
    """
    if scatter_rate_cps <= 0:
        raise ValueError(f"scatter_rate must be > 0: {scatter_rate_cps}")
    rng = _rng(seed)
    arrivals = np.asarray(arrivals, dtype=float)
    dwells = _sample_dwell(dwell, arrivals.size, rng)
    counts = rng.poisson(scatter_rate_cps * dwells / NS_PER_S)
    times = _segmented_sorted_uniform(arrivals, dwells, counts, rng)
    return _build_transits(arrivals, dwells, counts, times)


class JumpGapSampler:
    """Waiting times between quantum jumps of a driven two-level atom.

    Every emission resets the atom to the ground state, so successive gaps
    are independent draws from one waiting-time law: evolve the ground and
    excited amplitudes under the non-Hermitian Hamiltonian
    (coupling Omega/2, detuning delta, decay -i Gamma/2 on the excited
    amplitude), and emit when the squared norm falls to a uniform variate.
    The no-jump trajectory from the ground state is deterministic, so it is
    tabulated once on the fixed step grid dt = min(1e-2/Gamma, 1e-2/Omega,
    1 ns) and each draw is a binary search plus linear interpolation.
    """

    def __init__(self, params, dt_ns: float | None = None, survival_floor: float = 1e-13):
        gamma = params.gamma
        omega = effective_rabi(params)
        delta = params.delta
        if dt_ns is None:
            dt_ns = min(1e-2 / gamma * NS_PER_S, 1e-2 / omega * NS_PER_S, 1.0)
        self.dt_ns = float(dt_ns)

        per_ns = 1.0 / NS_PER_S  # rad/s -> rad/ns
        h_eff = np.array([[0.0, 0.5 * omega * per_ns],
                          [0.5 * omega * per_ns, -delta * per_ns - 0.5j * gamma * per_ns]])
        evals, vecs = np.linalg.eig(-1j * h_eff)
        coeff = np.linalg.solve(vecs, np.array([1.0, 0.0], dtype=complex))

        # extend the grid until the survival drops below the floor
        block = 4096
        chunks = []
        t0 = 0.0
        for _ in range(4000):
            t = t0 + np.arange(block) * self.dt_ns
            psi = vecs @ (np.exp(np.outer(evals, t)) * coeff[:, None])
            surv = np.abs(psi[0]) ** 2 + np.abs(psi[1]) ** 2
            chunks.append(surv)
            if surv[-1] < survival_floor:
                break
            t0 = t[-1] + self.dt_ns
        else:
            raise McwfIntegrationError("survival never dropped below floor; drive too weak?")
        surv = np.concatenate(chunks)
        if np.any(np.diff(surv) > 1e-12):
            raise McwfIntegrationError("no-jump norm increased along the trajectory")
        stop = int(np.argmax(surv < survival_floor)) + 1
        self.survival = surv[:stop]
        self.mean_gap_ns = float(np.trapezoid(self.survival) * self.dt_ns)

    def sample(self, u) -> np.ndarray:
        """Gap times (float ns) for uniform variates u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        s = self.survival
        k = np.searchsorted(-s, -u, side="left")
        k = np.clip(k, 1, s.size - 1)
        s_hi = s[k - 1]
        s_lo = s[k]
        frac = np.clip((s_hi - u) / np.maximum(s_hi - s_lo, 1e-300), 0.0, 1.0)
        return (k - 1 + frac) * self.dt_ns


def emit_mcwf(arrivals, cfg: McwfEmission, seed) -> list[AtomTransit]:
    """Quantum-jump emission: iid waiting-time gaps, dark-state stopping, hard cutoff.

    After each emission the atom is pumped dark with probability ``p_dark``
    (geometric per-atom emission count, mean 1/p_dark); otherwise it keeps
    scattering until ``max_dwell_ns``.  Gap statistics reproduce the
    analytic g2 of the driven two-level atom.
    """
    if not 0.0 < cfg.p_dark <= 1.0:
        raise ValueError(f"p_dark out of (0,1]: {cfg.p_dark}")
    rng = _rng(seed)
    arrivals = np.asarray(arrivals, dtype=float)
    sampler = JumpGapSampler(cfg.two_level)

    n = arrivals.size
    k = rng.geometric(cfg.p_dark, size=n) if n else np.zeros(0, dtype=np.int64)
    total = int(k.sum())
    gaps = sampler.sample(rng.random(total))

    # segmented cumulative sum: emission times relative to each arrival
    cs = np.cumsum(gaps)
    offsets = np.concatenate([[0], np.cumsum(k)]).astype(np.intp)
    base = np.where(k > 0, cs[offsets[:-1]] - gaps[offsets[:-1]], 0.0)
    rel = cs - np.repeat(base, k)

    keep = rel <= cfg.max_dwell_ns
    atom_idx = np.repeat(np.arange(n), k)
    kept_counts = np.bincount(atom_idx[keep], minlength=n).astype(np.int64)
    truncated = kept_counts < k

    dwells = np.full(n, float(cfg.max_dwell_ns))
    last_idx = offsets[1:] - 1
    ended_dark = ~truncated & (k > 0)
    dwells[ended_dark] = rel[last_idx[ended_dark]]

    times = np.repeat(arrivals, k)[keep] + rel[keep]
    terminated = np.where(truncated, LEFT_REGION, DARK_STATE)
    return _build_transits(arrivals, dwells, kept_counts, times, terminated)


def dead_time_filter(t: np.ndarray, dead_ns: int) -> np.ndarray:
    """Non-paralyzable dead time on one sorted channel: after an accepted tag,
    reject everything closer than dead_ns; the window restarts only at
    accepted tags.  Idempotent."""
    if dead_ns <= 0 or t.size < 2:
        return t
    d = np.diff(t.astype(np.int64))
    if np.all(d >= dead_ns):
        return t
    keep = np.ones(t.size, dtype=bool)
    last = int(t[0])
    tt = t.astype(np.int64)
    for i in range(1, t.size):
        if tt[i] - last >= dead_ns:
            last = int(tt[i])
        else:
            keep[i] = False
    return t[keep]


def detect(transits, det: DetectorConfig, duration_ns: int, seed, *,
           run_id: int = 0, n_runs: int = 1, resolution_ns: int = 1) -> TimeTagStream:
    """Detection chain for one run's transits, in this fixed order:

    1. Bernoulli thinning of emitted photons at p_det;
    2. channel assignment by split_ratio;
    3. per-channel Poisson dark counts plus split stray counts over the full
       duration;
    4. quantization to the tag resolution and sorting;
    5. non-paralyzable dead-time filter per channel.

    Emissions falling at or beyond duration_ns (transits crossing the run
    end) are discarded.  Dark counts are per channel; stray light is a total
    rate split like the signal.
    """
    rng = _rng(seed)
    if transits:
        emitted = np.concatenate([tr.emitted for tr in transits])
    else:
        emitted = np.empty(0)
    detected = emitted[rng.random(emitted.size) < det.p_det]

    if det.n_channels == 1:
        per_channel = [detected]
    else:
        to_ch0 = rng.random(detected.size) < det.split_ratio
        per_channel = [detected[to_ch0], detected[~to_ch0]]

    dur_s = duration_ns / NS_PER_S
    channels, times = [], []
    for ch, sig in enumerate(per_channel):
        share = 1.0 if det.n_channels == 1 else (det.split_ratio if ch == 0 else 1.0 - det.split_ratio)
        bg_rate = det.dark_rate_cps + det.stray_rate_cps * share
        n_bg = rng.poisson(bg_rate * dur_s)
        bg = rng.uniform(0.0, duration_ns, size=n_bg)
        t = np.concatenate([sig, bg])
        t = t[t < duration_ns]
        q = (t / resolution_ns).astype(np.uint64) * np.uint64(resolution_ns)
        q.sort()
        q = dead_time_filter(q, det.dead_time_ns)
        channels.append(np.full(q.size, ch, dtype=np.uint8))
        times.append(q)

    channel = np.concatenate(channels)
    t_ns = np.concatenate(times)
    order = np.lexsort((channel, t_ns))
    return TimeTagStream(np.full(t_ns.size, run_id, dtype=np.uint32),
                         channel[order], t_ns[order],
                         duration_ns=duration_ns, n_runs=n_runs,
                         resolution_ns=resolution_ns)


def simulate_run(config: ExperimentConfig, run_id: int) -> TimeTagStream:
    """One run of the full pipeline with seeds derived from the master seed."""
    master = config.run.master_seed
    arrivals = gen_atom_arrivals(config.source, derive_seed(master, run_id, "arrivals"))
    em = config.emission
    emit_seed = derive_seed(master, run_id, "emission")
    if isinstance(em, IdealPoissonEmission):
        transits = emit_ideal_poisson(arrivals, em.alpha_emitted, em.dwell, emit_seed)
    elif isinstance(em, BurstEmission):
        transits = emit_burst(arrivals, em.scatter_rate_cps, em.dwell, emit_seed)
    elif isinstance(em, McwfEmission):
        transits = emit_mcwf(arrivals, em, emit_seed)
    else:
        raise TypeError(f"unknown emission config {type(em).__name__}")
    return detect(transits, config.detector, config.run.duration_ns,
                  derive_seed(master, run_id, "detect"),
                  run_id=run_id, n_runs=max(config.run.n_runs, run_id + 1))


def run_experiment(config: ExperimentConfig) -> TimeTagStream:
    """All runs of an experiment; deterministic given config + master seed.

    Runs are independent given their derived seeds, so they may execute in
    any order (or in parallel) without changing the result; output tags are
    ordered by (run_id, t_ns).  n_runs = 0 yields a valid empty stream.
    """
    violations = validate(config)
    if violations:
        raise ValueError("invalid config: " + "; ".join(str(v) for v in violations))
    n_runs = config.run.n_runs
    duration_ns = config.run.duration_ns
    if n_runs == 0:
        return TimeTagStream(np.empty(0), np.empty(0), np.empty(0),
                             duration_ns=duration_ns, n_runs=0,
                             n_channels=config.detector.n_channels)
    parts = [simulate_run(config, r) for r in range(n_runs)]
    return TimeTagStream(
        np.concatenate([p.run_id for p in parts]),
        np.concatenate([p.channel for p in parts]),
        np.concatenate([p.t_ns for p in parts]),
        duration_ns=duration_ns, n_runs=n_runs,
        n_channels=config.detector.n_channels)
