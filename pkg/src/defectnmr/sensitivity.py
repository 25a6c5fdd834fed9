"""Volume-normalized AC sensitivity of a dynamical-decoupling measurement.

The pipeline per signal frequency f:

    k      = pulse count from the stretched-exponential optimum, capped and
             rounded down to whole XY8 blocks
    tau    = k / (2 f) minus the time spent inside the k pi pulses
    t_R    = readout time minimizing readout noise times duty cycle
    eta    = shot-noise limited sensitivity for N defects per cubic micron
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import CONSTANTS, DefectSystemParams

T_R_BOUNDS = (1e-9, 1e-1)
_SCAN_POINTS = 64
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class SensitivityPoint:
    frequency: float
    eta_vol: float          # T Hz^-1/2 um^3/2, nan when infeasible
    k: int
    tau_full: float
    tau_effective: float
    t_r: float
    contrast_avg: float
    exp_term: float
    feasible: bool
    t_r_at_bound: bool = False
    coherence_saturated: bool = False


def average_contrast(contrast0, t_r, t_i):
    """Contrast averaged over a readout window with exponential decay time t_i."""
    t_r = np.asarray(t_r, dtype=float)
    if np.any(t_r <= 0) or t_i <= 0:
        raise ValueError("t_r and t_i must be positive")
    x = t_r / t_i
    # -expm1(-x)/x keeps full precision as x -> 0
    out = contrast0 * (-np.expm1(-x) / x)
    return float(out) if out.ndim == 0 else out


def readout_objective(t_r, t_i, tau_full, counts_rate, contrast0, n_defects=1.0):
    """Readout-noise factor times duty-cycle factor, the t_R dependent part of eta."""
    c = average_contrast(contrast0, t_r, t_i)
    n_avg = counts_rate * np.asarray(t_r) * n_defects
    return np.sqrt(1 + 1 / (c * c * n_avg)) * np.sqrt((t_i + t_r + tau_full) / tau_full)


def optimize_readout(t_i, tau_full, counts_rate, contrast0, n_defects=1.0,
                     bounds=T_R_BOUNDS, xtol=1e-4, full_output=False):
    """Optimal readout time on ``bounds``.

    A 64-point log scan brackets the minimum, then golden-section search on
    log(t_r) narrows it to relative tolerance ``xtol``. If the scan minimum
    sits on a boundary that boundary is returned and, with
    ``full_output=True``, flagged in the info dict.
    """
    for name, v in (("t_i", t_i), ("tau_full", tau_full), ("counts_rate", counts_rate),
                    ("contrast0", contrast0), ("n_defects", n_defects)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")

    def f(log_t):
        return float(readout_objective(math.exp(log_t), t_i, tau_full, counts_rate,
                                       contrast0, n_defects))

    lo, hi = math.log(bounds[0]), math.log(bounds[1])
    grid = np.linspace(lo, hi, _SCAN_POINTS)
    vals = readout_objective(np.exp(grid), t_i, tau_full, counts_rate, contrast0, n_defects)
    i = int(np.argmin(vals))
    at_bound = i in (0, _SCAN_POINTS - 1)
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, _SCAN_POINTS - 1)]

    tol = math.log1p(xtol)
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    n_iter = 0
    while b - a > tol:
        n_iter += 1
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    if fx > vals[i]:
        x, fx = grid[i], float(vals[i])
    if at_bound and abs(x - grid[i]) <= tol:
        x = grid[i]
    t_r = math.exp(x)
    if full_output:
        return t_r, {"objective": fx, "at_bound": bool(at_bound and x == grid[i]),
                     "iterations": n_iter}
    return t_r


def k_raw(f, params: DefectSystemParams):
    """Unrounded optimal pulse count for a signal at frequency f."""
    p, s = params.p_stretch, params.s_exponent
    base = (2 * params.t2_echo * f) ** p / (2 * p * (1 - s))
    return base ** (1 / (p * (1 - s)))


def k_cap(params: DefectSystemParams):
    """Largest k before k^s T2 reaches the saturated coherence time."""
    return (params.t2_max / params.t2_echo) ** (1 / params.s_exponent)


def k_optimal(f, params: DefectSystemParams) -> int:
    if not f > 0:
        raise ValueError("frequency must be positive")
    k = min(k_raw(f, params), k_cap(params))
    return max(8, int(math.floor(k / 8)) * 8)


def coherence_time(k, params: DefectSystemParams):
    """Decoupled coherence time k^s T2, saturated at t2_max."""
    return min(k ** params.s_exponent * params.t2_echo, params.t2_max)


def eta_formula(params: DefectSystemParams, k, tau, t_r, n_per_um3=None):
    """Sensitivity for a given pulse count, interrogation time and readout time.

    Returns (eta_vol, contrast_avg, exp_term).
    """
    n = params.defects_per_um3 if n_per_um3 is None else n_per_um3
    gamma_e = CONSTANTS.gamma_e_from_g(params.g_factor)
    decay = (tau / coherence_time(k, params)) ** params.p_stretch
    exp_term = math.exp(-decay)
    c = average_contrast(params.contrast0, t_r, params.t_init)
    n_avg = params.counts_per_defect * t_r
    base = (math.pi / 2 / gamma_e / math.sqrt(n * tau)
            * math.sqrt(1 + 1 / (c * c * n_avg))
            * math.sqrt((params.t_init + tau + t_r) / tau))
    # fully decayed signal: exp(decay) overflows, eta is infinite
    eta = base * math.exp(decay) if decay < 700 else math.inf
    return eta, c, exp_term


def pulse_time(params: DefectSystemParams):
    return 1 / (2 * params.rabi_hz)


def sensitivity_at(f, params: DefectSystemParams) -> SensitivityPoint:
    k = k_optimal(f, params)
    tau_full = k / (2 * f)
    tau_eff = tau_full - k * pulse_time(params)
    saturated = k ** params.s_exponent * params.t2_echo > params.t2_max
    if tau_eff <= 0:
        nan = math.nan
        return SensitivityPoint(f, nan, k, tau_full, tau_eff, nan, nan, nan, False,
                                coherence_saturated=saturated)
    # counts_per_defect is per defect, so the readout optimum is a single-defect one
    t_r, info = optimize_readout(params.t_init, tau_eff, params.counts_per_defect,
                                 params.contrast0, 1.0, full_output=True)
    eta, c, exp_term = eta_formula(params, k, tau_eff, t_r)
    return SensitivityPoint(f, eta, k, tau_full, tau_eff, t_r, c, exp_term, True,
                            t_r_at_bound=info["at_bound"], coherence_saturated=saturated)


def default_frequency_grid(f_min=1e4, f_max=1e8, n=200):
    return np.logspace(math.log10(f_min), math.log10(f_max), n)


def sweep_sensitivity(params: DefectSystemParams, f_grid=None):
    if f_grid is None:
        f_grid = default_frequency_grid()
    f_grid = np.asarray(f_grid, dtype=float)
    if f_grid.size == 0:
        raise ValueError("empty frequency grid")
    if np.any(f_grid <= 0) or np.any(np.diff(f_grid) <= 0):
        raise ValueError("frequency grid must be positive and strictly increasing")
    return [sensitivity_at(float(f), params) for f in f_grid]
