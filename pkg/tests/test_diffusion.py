import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from defectnmr import diffusion as df
from defectnmr.figures import fig7_configs
from defectnmr.params import MAGIC_ANGLE, RunOptions, SampleSpec, preset

F_L = 42.577478e6 * 0.0197


def test_correlation_times():
    assert df.correlation_time(2.5e-9, 5e5 * 1e-18) == pytest.approx(2.0833e-6, rel=1e-4)
    assert df.correlation_time(2.5e-9, 0.038e-18) == pytest.approx(27.4, rel=1e-2)
    assert df.correlation_time(2.5e-9, 0.038e-18) == pytest.approx(6.25 / (6 * 0.038),
                                                                   rel=1e-12)
    assert df.correlation_time(2.5e-9, 0.0) == math.inf
    with pytest.raises(ValueError):
        df.correlation_time(0.0, 1.0)


def test_effective_t2n():
    assert df.effective_t2n(math.inf, 9e-6) == 9e-6
    assert df.effective_t2n(3e-3, math.inf) == 3e-3
    assert df.effective_t2n(2e-3, 2e-3) == pytest.approx(1e-3)
    assert df.effective_t2n(math.inf, math.inf) == math.inf


def _filter_by_quadrature(nu, tau, k):
    """Integrate the +-1 switching function times exp(i w t) piece by piece."""
    w = 2 * math.pi * nu
    edges = np.r_[0.0, (np.arange(1, k + 1) - 0.5) * tau, k * tau]
    total = 0j
    for m in range(k + 1):
        sign = (-1) ** m
        re, _ = integrate.quad(lambda t: math.cos(w * t), edges[m], edges[m + 1])
        im, _ = integrate.quad(lambda t: math.sin(w * t), edges[m], edges[m + 1])
        total += sign * (re + 1j * im)
    return total


@pytest.mark.parametrize("nu, k", [(3.1e5, 8), (5e5, 16), (8.2e5, 8), (1.7e6, 24)])
def test_filter_against_quadrature(nu, k):
    tau = 1e-6
    assert df.filter_function(nu, tau, k) == pytest.approx(_filter_by_quadrature(nu, tau, k),
                                                           rel=1e-7, abs=1e-14)


def test_filter_peak():
    tau, k = 0.6e-6, 104
    assert df.filter_power(1 / (2 * tau), tau, k) == pytest.approx((2 * k * tau / math.pi) ** 2,
                                                                  rel=1e-10)


def test_filter_near_pole_matches_direct_sum():
    tau, k = 1e-6, 8
    nu = 1 / (2 * tau) * (1 + 1e-9)
    assert df.filter_function(nu, tau, k) == pytest.approx(_filter_by_quadrature(nu, tau, k),
                                                           rel=1e-6)


def test_lorentzian_normalized_on_quadrature_grid():
    n = 4096
    u = (np.arange(n) + 0.5) * (math.pi / n) - math.pi / 2
    hwhm = 3.5e4
    nu = 8e5 + hwhm * np.tan(u)
    jac = hwhm / np.cos(u) ** 2 * (math.pi / n)
    assert np.sum(df.lorentzian(nu, 8e5, hwhm) * jac) == pytest.approx(1.0, abs=1e-6)


def test_zero_field_no_dip():
    assert df.phase_variance(0.0, 1.76e11, 1e-6, 8, 5e5, 1e3) == 0.0


def _cfg(t2n=math.inf, density=1e27, system="vb_aggregated", depth=2.5e-9, alpha=0.0, k=104,
         n=81, sensor_decay=False):
    s = SampleSpec(density=density, bias_field=0.0197, t2n_intrinsic=t2n)
    tau = df.tau_grid_around(F_L, k, n, half_width=0.15 / (2 * F_L))
    return df.LineshapeConfig(preset(system), s, k, tau, depth=depth, alpha=alpha,
                              sensor_decay=sensor_decay)


def test_contrast_in_unit_interval_and_dip_centre():
    cfg = _cfg()
    c = df.contrast_curve(cfg)
    assert np.all((c.contrast > 0) & (c.contrast <= 1))
    step = cfg.tau_grid[1] - cfg.tau_grid[0]
    assert abs(c.tau[c.dip_index] - 1 / (2 * F_L)) <= step
    assert F_L == pytest.approx(838.8e3, abs=50)


def test_contrast_to_one_at_short_tau():
    s = SampleSpec(density=1e27, bias_field=0.0197)
    cfg = df.LineshapeConfig(preset("vb_aggregated"), s, 8, np.array([1e-10, 2e-10]),
                             sensor_decay=False)
    assert df.contrast_curve(cfg).contrast[0] == pytest.approx(1.0, abs=1e-6)


def test_sensor_decay_multiplies():
    a = df.contrast_curve(_cfg(n=11))
    b = df.contrast_curve(_cfg(n=11, sensor_decay=True))
    np.testing.assert_array_equal(a.nmr_contrast, b.nmr_contrast)
    assert np.all(b.contrast < a.contrast)


def test_diffusion_broadens_and_shallows():
    frozen = df.contrast_curve(_cfg(density=1e25, n=121))
    fast = df.contrast_curve(_cfg(t2n=9e-6, density=1e25, n=121))
    faster = df.contrast_curve(_cfg(t2n=4e-6, density=1e25, n=121))
    assert frozen.peak_dip > fast.peak_dip > faster.peak_dip
    assert frozen.dip_fwhm_hz() < fast.dip_fwhm_hz() < faster.dip_fwhm_hz()


def test_ratio_identity_and_small_signal():
    cfg = _cfg(density=1e25, n=41)
    assert df.vb_nv_contrast_ratio(cfg, cfg) == pytest.approx(1.0)
    nv = _cfg(density=1e25, system="single_nv", depth=6e-9, alpha=MAGIC_ANGLE, n=41)
    r, info = df.vb_nv_contrast_ratio(cfg, nv, full_output=True)
    assert info["small_signal"]
    g2 = (2.001 / 2.003) ** 2
    assert r == pytest.approx(g2 * (8 / 2.5**3) / ((8 - 3 * 4 / 9) / 6**3), rel=0.02)


def test_ratio_flags_saturation():
    vb = _cfg(n=41)
    nv = _cfg(system="single_nv", depth=6e-9, alpha=MAGIC_ANGLE, n=41)
    _, info = df.vb_nv_contrast_ratio(vb, nv, full_output=True)
    assert not info["small_signal"]


def test_ratio_density_invariance_small_signal():
    def ratio(rho):
        return df.vb_nv_contrast_ratio(
            _cfg(density=rho, n=41),
            _cfg(density=rho, system="single_nv", depth=6e-9, alpha=MAGIC_ANGLE, n=41))
    assert ratio(1e24) == pytest.approx(ratio(1e25), rel=0.02)


def test_config_validation():
    s = SampleSpec(bias_field=0.0197)
    with pytest.raises(ValueError, match="multiple of 8"):
        df.LineshapeConfig(preset("vb_gao"), s, 100, np.array([1e-7, 2e-7]))
    with pytest.raises(ValueError):
        df.LineshapeConfig(preset("vb_gao"), s, 104, np.array([2e-7, 1e-7]))


def test_grid_centre():
    g = df.tau_grid_around(F_L, 104, 401)
    assert g[200] == pytest.approx(1 / (2 * F_L), rel=1e-14)
    assert g[0] > 0


def test_fig7_recipe_configs():
    vb, nv = fig7_configs(RunOptions(), diffusing=True)
    assert vb.k == 104 and not vb.sensor_decay
    assert vb.t2n_star == pytest.approx(9e-6)
    assert vb.sensor_depth == 2.5e-9 and nv.sensor_depth == 6e-9
    assert nv.sensor_alpha == pytest.approx(MAGIC_ANGLE)


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-7, 2e-6))
def test_contrast_bounded(tau):
    s = SampleSpec(density=1e27, bias_field=0.0197, t2n_intrinsic=9e-6)
    cfg = df.LineshapeConfig(preset("vb_gao"), s, 16, np.array([tau]))
    c = df.contrast_curve(cfg).contrast[0]
    assert 0 < c <= 1
