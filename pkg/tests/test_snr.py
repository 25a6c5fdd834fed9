import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from defectnmr.params import NV_PRESETS, BulkAverage, SampleSpec, Slab, preset
from defectnmr.sensitivity import default_frequency_grid, sensitivity_at
from defectnmr.snr import (SnrInput, b_rms, default_sample, geometry_kind, snr_bulk, snr_flake,
                           snr_flake_bulk, snr_for, snr_halfspace, sweep_snr)

H = default_sample()


def _inp(depth=2.5e-9, alpha=0.0, eta=1e-9, sample=H):
    return SnrInput(sample, depth, alpha, eta)


def test_b_rms_value():
    # frozen from an independent evaluation of mu0 hbar gamma sqrt(rho pi G / 128 d^3) / 4pi
    assert b_rms(H, 2.5e-9, 0.0) == pytest.approx(2.5300604e-6, rel=1e-7)


def test_b_rms_oracle():
    mu0, hbar = 1.25663706212e-6, 1.054571817e-34
    g = 2 * math.pi * 42.577478e6
    want = mu0 * hbar * g / (4 * math.pi) * math.sqrt(64e27 * math.pi * 8 / (128 * (2.5e-9) ** 3))
    assert b_rms(H, 2.5e-9, 0.0) == pytest.approx(want, rel=1e-9)


def test_b_rms_depth_scaling():
    assert b_rms(H, 2.5e-9, 0.3) / b_rms(H, 5e-9, 0.3) == pytest.approx(2 ** 1.5, rel=1e-13)


def test_b_rms_vanishes_with_density():
    ratio = b_rms(SampleSpec(density=1e-30), 2.5e-9, 0.0) / b_rms(H, 2.5e-9, 0.0)
    assert ratio == pytest.approx(math.sqrt(1e-30 / 64e27), rel=1e-12)


def test_snr_inverse_eta():
    assert snr_halfspace(_inp(eta=2e-9)) == pytest.approx(snr_halfspace(_inp()) / 2, rel=1e-14)


@pytest.mark.parametrize("depth, alpha, rho", [(2.5e-9, 0.0, 64e27), (10e-9, 0.9553, 1e27),
                                               (3e-8, 1.2, 3e29)])
def test_snr_equals_brms_over_eta(depth, alpha, rho):
    s = SampleSpec(density=rho)
    inp = _inp(depth, alpha, 3e-8, s)
    assert snr_halfspace(inp) == pytest.approx(b_rms(s, depth, alpha) / 3e-8, rel=1e-12)


def test_vb_beats_single_nv_at_1mhz():
    vb, nv = preset("vb_aggregated"), preset("single_nv")
    a = snr_for(vb, H, sensitivity_at(1e6, vb).eta_vol)
    b = snr_for(nv, H, sensitivity_at(1e6, nv).eta_vol)
    assert a > b


def test_flake_limits():
    inp = _inp()
    assert snr_flake(inp, 1.0) == pytest.approx(snr_halfspace(inp), rel=1e-12)
    assert snr_flake(inp, 1e-18) < 1e-3 * snr_halfspace(inp)
    with pytest.raises(ValueError):
        snr_flake(inp, 0.0)


def test_flake_ratio_hand_value():
    a = snr_flake(_inp(2.5e-9), 1e-9)
    b = snr_flake(_inp(10e-9), 1e-9)
    want = math.sqrt((2.5**-3 - 3.5**-3) / (10.0**-3 - 11.0**-3))
    assert a / b == pytest.approx(want, rel=1e-12)
    assert a / b == pytest.approx(12.789, abs=5e-4)


def test_bulk_degenerate_limit():
    inp = _inp(2e-9)
    assert snr_bulk(inp, 5e-9, 5e-9 * (1 + 1e-7)) == pytest.approx(snr_halfspace(_inp(5e-9)),
                                                                  rel=1e-6)


def test_bulk_matches_quadrature():
    d0, d1 = 10e-9, 10e-6
    val, _ = integrate.quad(lambda d: snr_halfspace(_inp(d)), d0, d1, limit=200,
                            points=[1e-8, 1e-7, 1e-6])
    assert snr_bulk(_inp(d0), d0, d1) == pytest.approx(val / (d1 - d0), rel=1e-6)


def test_flake_bulk_matches_quadrature():
    d0, d1, h = 10e-9, 10e-6, 1e-9
    val, _ = integrate.quad(lambda d: snr_flake(_inp(d), h), d0, d1, limit=200,
                            points=[1e-8, 1e-7, 1e-6])
    got = snr_flake_bulk(_inp(d0), d0, d1, h)
    assert got > 0
    assert got == pytest.approx(val / (d1 - d0), rel=1e-2)


def test_flake_bulk_small_h():
    thin = snr_flake_bulk(_inp(), 10e-9, 10e-6, 1e-15)
    # leading order is sqrt(h)
    assert thin / snr_flake_bulk(_inp(), 10e-9, 10e-6, 1e-13) == pytest.approx(0.1, rel=1e-4)


def test_flake_bulk_warns_for_thick_layer():
    with pytest.warns(UserWarning, match="d_min/5"):
        _, info = snr_flake_bulk(_inp(), 10e-9, 10e-6, 5e-9, full_output=True)
    assert not info["thin_layer_ok"]


def test_geometry_kind():
    assert geometry_kind(preset("vb_gao"), H) == "halfspace"
    assert geometry_kind(preset("vb_gao"), default_sample(1e-9)) == "flake"
    assert geometry_kind(preset("bulk_nv"), H) == "bulk"
    assert geometry_kind(preset("bulk_nv"), default_sample(1e-9)) == "flake_bulk"
    s = SampleSpec(geometry=BulkAverage(5e-9, 50e-9, 1e-9))
    assert geometry_kind(preset("vb_gao"), s) == "flake_bulk"


def test_bulk_nv_far_below_vb():
    f = default_frequency_grid(1e5, 2e7, 25)
    bulk = sweep_snr(preset("bulk_nv"), H, f)["snr"]
    agg = sweep_snr(preset("vb_aggregated"), H, f)["snr"]
    assert np.all(bulk <= 0.5 * agg)
    # vb_gao's short T2 lets bulk NV win below about 1 MHz
    f = default_frequency_grid(1e6, 2e7, 25)
    bulk = sweep_snr(preset("bulk_nv"), H, f)["snr"]
    gao = sweep_snr(preset("vb_gao"), H, f)["snr"]
    assert np.all(bulk <= 0.6 * gao)


def test_slab_widens_gap():
    f = default_frequency_grid(5e5, 2e7, 25)
    vb_h = sweep_snr(preset("vb_aggregated"), H, f)["snr"]
    vb_s = sweep_snr(preset("vb_aggregated"), default_sample(1e-9), f)["snr"]
    for name in NV_PRESETS:
        nv_h = sweep_snr(preset(name), H, f)["snr"]
        nv_s = sweep_snr(preset(name), default_sample(1e-9), f)["snr"]
        ok = nv_h > 0
        assert np.all(vb_s[ok] / nv_s[ok] > vb_h[ok] / nv_h[ok])


def test_sweep_columns_and_errors():
    t = sweep_snr(preset("vb_gao"), H, default_frequency_grid(n=5))
    assert list(t) == ["frequency_hz", "eta", "b_rms_T", "snr", "geometry", "depth_m"]
    with pytest.raises(ValueError):
        sweep_snr(preset("vb_gao"), H, [])


def test_sweep_deterministic():
    f = default_frequency_grid(n=10)
    a = sweep_snr(preset("shallow_nv"), H, f)
    b = sweep_snr(preset("shallow_nv"), H, f)
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_infeasible_snr_is_zero():
    t = sweep_snr(preset("single_nv"), H, [1e8])
    assert t["snr"][0] == 0 and math.isnan(t["eta"][0])


def test_input_validation():
    with pytest.raises(ValueError):
        _inp(depth=0)
    with pytest.raises(ValueError):
        _inp(eta=-1)
    with pytest.raises(ValueError):
        snr_bulk(_inp(), 5e-9, 1e-9)
    with pytest.raises(ValueError):
        snr_for(preset("vb_gao"), H, 1e-9, kind="flake")
