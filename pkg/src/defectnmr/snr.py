"""Statistical-polarization field amplitude and AC-sensing SNR.

Samples are either a half-space on the surface, a layer of thickness h, or
(for thick sensing layers) the SNR averaged over defect depth.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import g_statistical
from .params import (CONSTANTS, PROTON_DENSITY_NANO, BulkAverage, DefectSystemParams, HalfSpace,
                     SampleSpec, Slab)
from .sensitivity import sweep_sensitivity


@dataclass(frozen=True)
class SnrInput:
    sample: SampleSpec
    depth: float
    alpha: float
    eta: float
    averaging_time: float = 1.0

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("depth must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.averaging_time > 0:
            raise ValueError("averaging_time must be positive")


def _prefactor(sample: SampleSpec):
    # mu0 hbar gamma_n
    return 4 * math.pi * CONSTANTS.mu0_over_4pi * CONSTANTS.hbar * sample.gamma


def _abs_g(alpha):
    # the sign of G only sets a phase; the amplitude uses |G|
    return abs(g_statistical(alpha))


def b_rms(sample: SampleSpec, depth, alpha):
    """RMS field (T) at a defect ``depth`` below a statistically polarized half-space."""
    if not depth > 0:
        raise ValueError("depth must be positive")
    k = _prefactor(sample) / (4 * math.pi)
    return math.sqrt(sample.density * k * k * math.pi * _abs_g(alpha) / (128 * depth**3))


def _snr(inp: SnrInput, inv_d3):
    rho = inp.sample.density
    return (_prefactor(inp.sample) / (32 * inp.eta)
            * math.sqrt(_abs_g(inp.alpha) * rho * inv_d3 / (2 * math.pi))
            * math.sqrt(inp.averaging_time))


def snr_halfspace(inp: SnrInput):
    return _snr(inp, inp.depth ** -3)


def snr_flake(inp: SnrInput, h):
    """SNR for a sample layer of thickness ``h`` resting on the surface."""
    if not h > 0:
        raise ValueError("layer thickness must be positive")
    d = inp.depth
    return _snr(inp, d ** -3 - (d + h) ** -3)


def _check_range(d_min, d_max):
    if not 0 < d_min < d_max:
        raise ValueError("need 0 < d_min < d_max")


def snr_bulk(inp: SnrInput, d_min, d_max):
    """Half-space SNR averaged over defect depths uniform in [d_min, d_max]."""
    _check_range(d_min, d_max)
    rho, g = inp.sample.density, _abs_g(inp.alpha)
    val = (-_prefactor(inp.sample) * (d_max ** -0.5 - d_min ** -0.5) * math.sqrt(rho * g)
           / (16 * math.sqrt(2 * math.pi) * inp.eta * (d_max - d_min)))
    return val * math.sqrt(inp.averaging_time)


def snr_flake_bulk(inp: SnrInput, d_min, d_max, h, full_output=False):
    """Depth-averaged layer SNR, third-order expansion in small ``h``.

    The expansion needs h << d_min; for h > d_min/5 a warning is issued and
    the flag ``thin_layer_ok`` in the info dict is False.
    """
    _check_range(d_min, d_max)
    if not h > 0:
        raise ValueError("layer thickness must be positive")
    ok = h <= d_min / 5
    if not ok:
        warnings.warn("layer thickness exceeds d_min/5; small-h expansion is inaccurate",
                      stacklevel=2)
    rho, g = inp.sample.density, _abs_g(inp.alpha)
    sh = math.sqrt(h)
    bracket = (sh * (9 * h * d_max - 18 * d_max**2 - 7 * h * h) / d_max**3
               + sh * (-9 * h * d_min + 18 * d_min**2 + 7 * h * h) / d_min**3)
    val = (_prefactor(inp.sample) * math.sqrt(rho * g)
           / (192 * math.sqrt(6 * math.pi) * inp.eta * (d_max - d_min)) * bracket)
    val *= math.sqrt(inp.averaging_time)
    if full_output:
        return val, {"thin_layer_ok": ok}
    return val


GEOMETRY_KINDS = ("halfspace", "flake", "bulk", "flake_bulk")


def geometry_kind(params: DefectSystemParams, sample: SampleSpec):
    """Pick the SNR form from the sensor depth range and the sample shape."""
    geom = sample.geometry
    layered = isinstance(geom, Slab) or (isinstance(geom, BulkAverage) and geom.slab_thickness)
    if params.is_bulk or isinstance(geom, BulkAverage):
        return "flake_bulk" if layered else "bulk"
    return "flake" if layered else "halfspace"


def _thickness(sample: SampleSpec):
    geom = sample.geometry
    if isinstance(geom, Slab):
        return geom.thickness
    if isinstance(geom, BulkAverage):
        return geom.slab_thickness
    return None


def snr_for(params: DefectSystemParams, sample: SampleSpec, eta, kind=None,
            averaging_time=1.0):
    kind = kind or geometry_kind(params, sample)
    if kind not in GEOMETRY_KINDS:
        raise ValueError(f"geometry must be one of {GEOMETRY_KINDS}")
    geom = sample.geometry
    if isinstance(geom, BulkAverage):
        d_min, d_max = geom.d_min, geom.d_max
    else:
        d_min, d_max = params.depth_min, params.depth_max
    inp = SnrInput(sample, d_min, params.alpha, eta, averaging_time)
    h = _thickness(sample)
    if kind in ("flake", "flake_bulk") and h is None:
        raise ValueError(f"{kind} geometry needs a sample layer thickness")
    if kind == "halfspace":
        return snr_halfspace(inp)
    if kind == "flake":
        return snr_flake(inp, h)
    if kind == "bulk":
        return snr_bulk(inp, d_min, d_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return snr_flake_bulk(inp, d_min, d_max, h)


def sweep_snr(params: DefectSystemParams, sample: SampleSpec, f_grid=None, kind=None,
              averaging_time=1.0):
    """Per-frequency SNR using the optimized sensitivity at each frequency.

    The standoff equals the defect depth. Frequencies where the pulse overhead
    exhausts the interrogation time get eta = nan and snr = 0.
    """
    kind = kind or geometry_kind(params, sample)
    points = sweep_sensitivity(params, f_grid)
    brms = b_rms(sample, params.depth_min, params.alpha)
    rows = {"frequency_hz": [], "eta": [], "b_rms_T": [], "snr": [], "geometry": [],
            "depth_m": []}
    for pt in points:
        snr = snr_for(params, sample, pt.eta_vol, kind, averaging_time) if pt.feasible else 0.0
        rows["frequency_hz"].append(pt.frequency)
        rows["eta"].append(pt.eta_vol)
        rows["b_rms_T"].append(brms)
        rows["snr"].append(snr)
        rows["geometry"].append(kind)
        rows["depth_m"].append(params.depth_min)
    return {k: (np.asarray(v) if k != "geometry" else v) for k, v in rows.items()}


def default_sample(thickness=None, density=None):
    """Proton sample used for the SNR comparisons (64 spins/nm^3)."""
    geom = HalfSpace() if thickness is None else Slab(thickness)
    return SampleSpec(species="1H", density=density or PROTON_DENSITY_NANO, geometry=geom)
