"""Reference physics for a driven two-level atom and photon-counting bounds.

Everything here is closed-form or deterministic ODE integration; the
simulator and the estimators in :mod:`photonstat.stats` are tested against
these curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NS = 1e-9


@dataclass(frozen=True)
class G2Curve:
    """Second-order correlation sampled on a lag grid (ns)."""

    lags_ns: np.ndarray
    values: np.ndarray


def excited_population_ss(p) -> float:
    """Steady-state excited-state population s / (2(1+s)).

    Uses the stored saturation parameter; 0 for no drive, -> 1/2 at
    infinite saturation.
    """
    if p.s < 0:
        raise ValueError(f"saturation parameter must be >= 0: {p.s}")
    return p.s / (2.0 * (1.0 + p.s))


def scattering_rate(p) -> float:
    """Photon scattering rate gamma * rho_ee, photons/s."""
    return p.gamma * excited_population_ss(p)


def saturation_from_rabi(omega: float, delta: float, gamma: float) -> float:
    """Saturation parameter implied by (omega, delta): s = (omega^2/2)/(delta^2 + gamma^2/4)."""
    return 0.5 * omega**2 / (delta**2 + 0.25 * gamma**2)


def effective_rabi(p) -> float:
    """Rabi frequency used for dynamics.

    Returns ``p.omega`` when set; otherwise derives it from the stored
    saturation parameter and detuning.  Raises when both are zero (no
    fluorescence, correlation undefined).
    """
    if p.omega > 0:
        return p.omega
    if p.s > 0:
        return math.sqrt(2.0 * p.s * (p.delta**2 + 0.25 * p.gamma**2))
    raise ValueError("omega and s both zero: no fluorescence, g2 undefined")


def bloch_excited_population(p, t_s, dt_s=None, tol=1e-8):
    """Excited population vs time from the ground state, via the Bloch equations.

    Fixed-step fourth-order Runge-Kutta on (rho_ee, Re rho_eg, Im rho_eg),
    starting step dt = min(1e-2/gamma, 1e-2/omega), halved until two
    successive refinements agree to ``tol`` everywhere on the requested
    grid.  Deterministic by construction; no adaptive stepping.

    Parameters
    ----------
    p : TwoLevelParams
    t_s : array of requested times, seconds, nondecreasing, >= 0.
    """
    omega = effective_rabi(p)
    t_s = np.asarray(t_s, dtype=float)
    if t_s.size and (t_s[0] < 0 or np.any(np.diff(t_s) < 0)):
        raise ValueError("times must be nondecreasing and >= 0")
    if dt_s is None:
        dt_s = min(1e-2 / p.gamma, 1e-2 / omega)
    prev = _rk4_excited(p.gamma, omega, p.delta, t_s, dt_s)
    for _ in range(20):
        dt_s *= 0.5
        cur = _rk4_excited(p.gamma, omega, p.delta, t_s, dt_s)
        if np.max(np.abs(cur - prev), initial=0.0) < tol:
            return cur
        prev = cur
    raise RuntimeError("Bloch integration did not converge")


def _rk4_excited(gamma, omega, delta, t_s, dt):
    def deriv(y):
        ree, u, v = y
        return np.array([
            -omega * v - gamma * ree,
            -delta * v - 0.5 * gamma * u,
            delta * u - 0.5 * omega * (1.0 - 2.0 * ree) - 0.5 * gamma * v,
        ])

    out = np.empty(t_s.size)
    y = np.zeros(3)
    t = 0.0
    for i, target in enumerate(t_s):
        while t < target - 1e-18 * max(target, 1.0):
            h = min(dt, target - t)
            k1 = deriv(y)
            k2 = deriv(y + 0.5 * h * k1)
            k3 = deriv(y + 0.5 * h * k2)
            k4 = deriv(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[i] = y[0]
    return out


def excited_population_ss_obe(p) -> float:
    """Steady state of the Bloch equations for the stored (omega, delta)."""
    omega = effective_rabi(p)
    return 0.25 * omega**2 / (p.delta**2 + 0.25 * p.gamma**2 + 0.5 * omega**2)


def g2_analytic(p, lags_ns) -> G2Curve:
    """g2(tau) of a single driven two-level atom.

    g2(tau) = rho_ee(tau | ground at 0) / rho_ee(inf), from Bloch-equation
    integration.  Starts at exactly 0 (a single emitter cannot emit twice
    at once) and decorrelates to 1.  On resonance the closed form
    :func:`g2_on_resonance` agrees to better than 1e-6.
    """
    lags_ns = np.asarray(lags_ns, dtype=float)
    if np.any(lags_ns < 0):
        raise ValueError("lags must be >= 0")
    order = np.argsort(lags_ns, kind="stable")
    ree = bloch_excited_population(p, lags_ns[order] * NS)
    values = np.empty_like(ree)
    values[order] = ree / excited_population_ss_obe(p)
    return G2Curve(lags_ns=lags_ns, values=values)


def g2_on_resonance(gamma: float, omega: float, tau_s) -> np.ndarray:
    """Closed-form resonant g2: 1 - exp(-3*gamma*tau/4) [cos(mu tau) + (3 gamma/4 mu) sin(mu tau)].

    mu = sqrt(omega^2 - gamma^2/16).  Valid for omega > gamma/4 (the
    oscillatory regime used throughout this package).
    """
    if omega <= 0.25 * gamma:
        raise ValueError("closed form implemented for omega > gamma/4 only")
    tau = np.asarray(tau_s, dtype=float)
    mu = math.sqrt(omega**2 - gamma**2 / 16.0)
    return 1.0 - np.exp(-0.75 * gamma * tau) * (
        np.cos(mu * tau) + (0.75 * gamma / mu) * np.sin(mu * tau))


def g2_lower_bound_n(mean_photon_number: float) -> float:
    """Lower bound on g2(0) for mean photon number n: max(0, 1 - 1/n)."""
    if mean_photon_number < 0:
        raise ValueError(f"mean photon number must be >= 0: {mean_photon_number}")
    if mean_photon_number < 1.0:
        return 0.0
    return 1.0 - 1.0 / mean_photon_number


def g2_zero_vs_flux(alpha: float, mean_atoms: float) -> float:
    """g2(0) bound vs atomic flux: 1 - (1 - exp(-alpha*N)) / (alpha*N).

    This is :func:`g2_lower_bound_n` evaluated at the mean photon number
    conditioned on at least one detection, n = aN / (1 - exp(-aN)).
    Tends to 0 in the single-atom limit and to 1 in dense flux.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0: {alpha}")
    if mean_atoms < 0:
        raise ValueError(f"mean atom number must be >= 0: {mean_atoms}")
    x = alpha * mean_atoms
    if x < 1e-12:
        return 0.5 * x  # series limit; avoids 0/0
    return 1.0 - (1.0 - math.exp(-x)) / x


def detection_probability(alpha: float) -> float:
    """Probability that an atom produces at least one count: 1 - exp(-alpha)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0: {alpha}")
    return 1.0 - math.exp(-alpha)


def collection_fraction(na: float) -> float:
    """Solid-angle fraction collected by a fiber of numerical aperture NA."""
    if not 0.0 < na <= 1.0:
        raise ValueError(f"NA must be in (0, 1]: {na}")
    return 0.5 * (1.0 - math.sqrt(1.0 - na**2))


def alpha_na_scaling(alpha_ref: float, na_ref: float, na_new: float) -> float:
    """Counts per atom rescaled to a new collection NA by the solid-angle ratio."""
    return alpha_ref * collection_fraction(na_new) / collection_fraction(na_ref)
