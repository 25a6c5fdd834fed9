"""Diffusion-limited nanoscale NMR lineshapes seen through an XY8-k filter.

The sample field is statistical-polarization noise with rms amplitude B_rms
and a Lorentzian spectrum at the Larmor frequency whose width is set by the
nuclear dephasing time (itself limited by diffusion through the sensing
volume). The sensor phase variance is the overlap of that spectrum with the
pulse-sequence filter function, and the contrast is exp(-<phi^2>/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import CONSTANTS, DefectSystemParams, SampleSpec
from .sensitivity import coherence_time
from .snr import b_rms

SMALL_SIGNAL_DIP = 0.3


def correlation_time(depth, diffusion_coeff):
    """Time a diffusing spin stays in the sensing volume, d^2 / (6 D).

    A frozen sample (D = 0) returns ``math.inf``.
    """
    if not depth > 0:
        raise ValueError("depth must be positive")
    if diffusion_coeff < 0:
        raise ValueError("diffusion coefficient must be non-negative")
    if diffusion_coeff == 0:
        return math.inf
    return depth * depth / (6 * diffusion_coeff)


def effective_t2n(t2n_intrinsic, t_d):
    """Harmonic combination 1/T2* = 1/T2n + 1/T_D (either may be infinite)."""
    if not t2n_intrinsic > 0 or not t_d > 0:
        raise ValueError("dephasing times must be positive")
    rate = 1 / t2n_intrinsic + 1 / t_d
    return math.inf if rate == 0 else 1 / rate


def filter_function(nu, tau, k):
    """Complex filter F(nu) (s) of k instantaneous pi pulses spaced by tau.

    Pulses sit at (m - 1/2) tau within a free evolution of length k tau;
    |F|^2 peaks at (2 k tau / pi)^2 for nu = 1/(2 tau).
    """
    nu = np.asarray(nu, dtype=float)
    w = np.atleast_1d(2 * np.pi * nu)
    z = np.exp(1j * w * tau)
    # sum_{m=1..k} (-1)^(m-1) exp(i w (m - 1/2) tau) is geometric in -z;
    # sum it directly where the ratio is close to 1
    near = np.abs(1 + z) < 1e-6
    series = np.empty(w.shape, dtype=complex)
    far = ~near
    theta = w[far] * tau
    series[far] = np.exp(0.5j * theta) * (1 - np.exp(1j * k * (theta + np.pi))) / (1 + z[far])
    if near.any():
        m = np.arange(1, k + 1)
        series[near] = ((-1.0) ** (m - 1)
                        * np.exp(1j * np.multiply.outer(w[near], (m - 0.5) * tau))).sum(-1)
    bracket = -1 + (-1) ** k * np.exp(1j * w * k * tau) + 2 * series
    out = np.zeros(w.shape, dtype=complex)
    nz = w != 0
    out[nz] = bracket[nz] / (1j * w[nz])
    return out.reshape(nu.shape) if nu.ndim else out[0]


def filter_power(nu, tau, k):
    f = filter_function(nu, tau, k)
    return (f * f.conj()).real


def lorentzian(nu, center, hwhm):
    return hwhm / np.pi / ((np.asarray(nu) - center) ** 2 + hwhm**2)


def phase_variance(b_rms_t, gamma_e, tau, k, larmor, hwhm, rtol=1e-4, n0=256, max_points=1 << 20):
    """<phi^2> = gamma_e^2 B_rms^2 integral S(nu) |F(nu)|^2 dnu.

    S is a unit-area Lorentzian (HWHM ``hwhm``, Hz) at ``larmor``; hwhm = 0
    means a delta line. The integral uses nu = larmor + hwhm tan(u), a
    midpoint rule in u, doubled until the result changes by < ``rtol``.
    """
    scale = (gamma_e * b_rms_t) ** 2
    if scale == 0:
        return 0.0
    if hwhm == 0:
        return scale * float(filter_power(larmor, tau, k))
    n = n0
    prev = None
    while True:
        u = (np.arange(n) + 0.5) * (np.pi / n) - np.pi / 2
        val = filter_power(larmor + hwhm * np.tan(u), tau, k).mean()
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return scale * val
        if n >= max_points:
            return scale * val
        prev = val
        n *= 2


@dataclass(frozen=True)
class LineshapeConfig:
    defect: DefectSystemParams
    sample: SampleSpec
    k: int
    tau_grid: np.ndarray
    depth: float | None = None
    alpha: float | None = None
    sensor_decay: bool = True

    def __post_init__(self):
        tau = np.asarray(self.tau_grid, dtype=float)
        if tau.size == 0 or np.any(tau <= 0) or np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be positive and strictly increasing")
        if self.k < 8 or self.k % 8:
            raise ValueError("k must be a positive multiple of 8")
        object.__setattr__(self, "tau_grid", tau)

    @property
    def larmor(self):
        return self.sample.gamma * self.sample.bias_field / (2 * math.pi)

    @property
    def sensor_depth(self):
        return self.depth if self.depth is not None else self.defect.depth_min

    @property
    def sensor_alpha(self):
        return self.alpha if self.alpha is not None else self.defect.alpha

    @property
    def t2n_star(self):
        t_d = correlation_time(self.sensor_depth, self.sample.diffusion_coeff)
        return effective_t2n(self.sample.t2n_intrinsic, t_d)

    @property
    def b_rms(self):
        return b_rms(self.sample, self.sensor_depth, self.sensor_alpha)


@dataclass(frozen=True)
class ContrastCurve:
    tau: np.ndarray
    contrast: np.ndarray        # including sensor decay when enabled
    nmr_contrast: np.ndarray    # statistical-polarization factor alone
    equivalent_freq: np.ndarray

    @property
    def dip_index(self):
        return int(np.argmin(self.nmr_contrast))

    @property
    def peak_dip(self):
        return float(1 - self.nmr_contrast.min())

    def dip_fwhm_hz(self):
        """Width of the dip 1 - C on the equivalent-frequency axis."""
        y = 1 - self.nmr_contrast
        f = self.equivalent_freq
        order = np.argsort(f)
        f, y = f[order], y[order]
        half = y.max() / 2
        above = np.flatnonzero(y >= half)
        lo, hi = above[0], above[-1]

        def cross(i_in, i_out):
            if i_out < 0 or i_out >= y.size:
                return f[i_in]
            t = (half - y[i_out]) / (y[i_in] - y[i_out])
            return f[i_out] + t * (f[i_in] - f[i_out])

        return float(cross(hi, hi + 1) - cross(lo, lo - 1))


def contrast_curve(cfg: LineshapeConfig) -> ContrastCurve:
    gamma_e = CONSTANTS.gamma_e_from_g(cfg.defect.g_factor)
    t2s = cfg.t2n_star
    hwhm = 0.0 if math.isinf(t2s) else 1 / (math.pi * t2s)
    brms = cfg.b_rms
    phi2 = np.array([phase_variance(brms, gamma_e, t, cfg.k, cfg.larmor, hwhm)
                     for t in cfg.tau_grid])
    c_nmr = np.exp(-phi2 / 2)
    c = c_nmr.copy()
    if cfg.sensor_decay:
        t2 = coherence_time(cfg.k, cfg.defect)
        c *= np.exp(-((cfg.k * cfg.tau_grid / t2) ** cfg.defect.p_stretch))
    return ContrastCurve(cfg.tau_grid, c, c_nmr, 1 / (2 * cfg.tau_grid))


def tau_grid_around(larmor, k, n=401, half_width=None):
    """Linear tau grid centred on the resonance tau = 1/(2 f_L).

    The default half width covers ten filter widths.
    """
    tau0 = 1 / (2 * larmor)
    hw = half_width if half_width is not None else 10 * tau0 / k
    hw = min(hw, 0.9 * tau0)
    return np.linspace(tau0 - hw, tau0 + hw, n)


def vb_nv_contrast_ratio(vb: LineshapeConfig, nv: LineshapeConfig, full_output=False):
    """Ratio of peak NMR dips (1 - C), V_B over NV.

    In the small-signal regime both dips are below 0.3 and the ratio tends to
    the ratio of (gamma_e B_rms)^2. ``small_signal`` in the info dict is
    False when either dip saturates.
    """
    a, b = contrast_curve(vb), contrast_curve(nv)
    ratio = a.peak_dip / b.peak_dip
    ok = a.peak_dip < SMALL_SIGNAL_DIP and b.peak_dip < SMALL_SIGNAL_DIP
    if full_output:
        return ratio, {"small_signal": ok, "vb_dip": a.peak_dip, "nv_dip": b.peak_dip}
    return ratio
