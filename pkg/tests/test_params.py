import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from defectnmr.params import (CONSTANTS, PRESET_NAMES, BulkAverage, ConfigError, HalfSpace,
                              RunOptions, SampleSpec, Slab, dump_config, load_config,
                              parse_config, ppm_to_density, preset)


def test_vb_gao_preset():
    p = preset("vb_gao")
    assert p.t2_echo == 1.1e-6
    assert p.density_ppm == 192
    assert p.contrast0 == 0.0425
    assert p.counts_per_defect == 87.5


def test_bulk_nv_preset():
    p = preset("bulk_nv")
    assert (p.t2_echo, p.t2_max, p.s_exponent, p.p_stretch, p.density_ppm) == \
        (10.7e-6, 77e-6, 0.44, 1.0, 2.7)
    assert p.is_bulk


def test_vb_aggregated_preset():
    p = preset("vb_aggregated")
    assert (p.t2_echo, p.t2_max, p.contrast0, p.counts_per_defect, p.density_ppm) == \
        (2e-6, 4.4e-6, 0.18, 6000, 236)
    assert p.depth == 2.5e-9


def test_single_nv_preset():
    p = preset("single_nv")
    assert p.p_stretch == 2 and p.s_exponent == 0.5 and p.counts_per_defect == 1e6
    assert p.density_ppm is None and p.defects_per_um3 == 1.0


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("nv_magic")


def test_ppm_conversion():
    # 236 ppm of the hBN atom density
    assert ppm_to_density(236, "hbn") == pytest.approx(236e-6 * 1.10e29, rel=1e-15)
    assert preset("vb_aggregated").defects_per_um3 == pytest.approx(2.596e7, rel=1e-12)


def test_gamma_values():
    assert CONSTANTS.gamma("1H") / (2 * math.pi) == pytest.approx(42.577478e6)
    # g = 2.0023 gives 28.025 GHz/T
    assert CONSTANTS.gamma_e_from_g(2.00231930436) / (2 * math.pi) == pytest.approx(28.0249514e9,
                                                                                     rel=1e-7)
    with pytest.raises(ValueError):
        CONSTANTS.gamma("99X")


def test_invariant_named():
    with pytest.raises(ConfigError, match=r"t2_max >= t2_echo"):
        replace(preset("vb_gao"), t2_max=1e-7)


def test_empty_config():
    with pytest.raises(ConfigError, match="missing required key: system"):
        parse_config("")


def test_t2_max_below_echo():
    with pytest.raises(ConfigError, match="invariant violated"):
        parse_config("system = vb_gao\nt2_max_us = 0.5\n")


def test_units_and_depth_key():
    d, s, r = parse_config("system = single_nv\nt2_echo_us = 3\ndepth_nm = 4\n"
                           "contrast0_pct = 20\nalpha_deg = 90\nsample_density_nm3 = 50\n"
                           "n_freq = 7\n# comment\n\n")
    assert d.t2_echo == pytest.approx(3e-6)
    assert d.depth_min == d.depth_max == pytest.approx(4e-9)
    assert d.contrast0 == pytest.approx(0.2)
    assert d.alpha == pytest.approx(math.pi / 2)
    assert s.density == pytest.approx(5e28)
    assert r.n_freq == 7


@pytest.mark.parametrize("text, msg", [
    ("system = vb_gao\nnot a pair\n", "line 2: expected 'key = value'"),
    ("system = vb_gao\nfoo_bar = 1\n", "line 2: unknown key"),
    ("system = vb_gao\nn_freq = 3\nn_freq = 4\n", "line 3: duplicate key"),
    ("system = vb_gao\nn_freq = lots\n", "cannot parse"),
    ("system = vb_gao\nsample_geometry = slab\n", "sample_thickness"),
    ("system = vb_gao\nsample_geometry = torus\n", "sample_geometry must be"),
    ("system = vb_gao\nsensor_decay = maybe\n", "cannot parse"),
    ("system = vb_gao\npulses = 100\n", "multiple of 8"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_geometries():
    _, s, _ = parse_config("system = vb_gao\nsample_geometry = slab\nsample_thickness_nm = 1\n")
    assert s.geometry == Slab(1e-9)
    _, s, _ = parse_config("system = bulk_nv\nsample_geometry = bulk_average\n")
    assert s.geometry == BulkAverage(10e-9, 10e-6)
    _, s, _ = parse_config("system = bulk_nv\n")
    assert s.geometry == HalfSpace()


def test_load_config_missing(tmp_path):
    with pytest.raises(FileNotFoundError, match="file not found"):
        load_config(tmp_path / "missing.cfg")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_dump_round_trip(name):
    sample = SampleSpec(density=1.2345678901234e28, geometry=Slab(1.1e-9), bias_field=0.0197)
    run = RunOptions(n_freq=17, seed=5, sensor_decay=True)
    again = parse_config(dump_config(preset(name), sample, run))
    assert again == (preset(name), sample, run)


@settings(max_examples=60, deadline=None)
@given(t2=st.floats(1e-7, 1e-4), ratio=st.floats(1.0, 100.0), c0=st.floats(1e-3, 0.99),
       dens=st.floats(1e24, 1e30), field=st.floats(1e-3, 10.0))
def test_round_trip_bit_exact(t2, ratio, c0, dens, field):
    d = replace(preset("vb_aggregated"), t2_echo=t2, t2_max=t2 * ratio, contrast0=c0)
    s = SampleSpec(density=dens, bias_field=field)
    assert parse_config(dump_config(d, s, RunOptions())) == (d, s, RunOptions())


def test_run_options_validation():
    with pytest.raises(ConfigError):
        RunOptions(f_min_hz=10, f_max_hz=1)
    with pytest.raises(ConfigError):
        RunOptions(pulses=12)
    assert RunOptions().pulses % 8 == 0


def test_sample_validation():
    with pytest.raises(ConfigError):
        SampleSpec(density=0)
    with pytest.raises(ValueError):
        SampleSpec(species="7Q")
    with pytest.raises(ConfigError):
        Slab(0)
    with pytest.raises(ConfigError):
        BulkAverage(2e-9, 1e-9)
