"""One-call recipes that regenerate the data behind each figure.

Every recipe returns a dict of named tables (column dicts) plus optional
plot specs; the CLI writes them to disk. Parameter values come from
:mod:`defectnmr.params` only.
"""
from __future__ import annotations

import math

import numpy as np

from . import backaction as ba
from . import diffusion as df
from . import fewspin as fs
from .geometry import geometry_table
from .params import (BACKACTION_DEPTHS, BACKACTION_SITES, BACKACTION_SITES_FULL,
                     FIG7_BIAS_FIELD, FIG7_NV_DEPTH, FIG7_PROTON_DENSITY,
                     FIG7_VB_DEPTH, FLAKE_THICKNESS_2D, MAGIC_ANGLE, PRESET_NAMES,
                     PROTON_DENSITY_NANO, VB_ALPHA, RunOptions, SampleSpec, preset)
from .sensitivity import default_frequency_grid, sweep_sensitivity
from .snr import default_sample, sweep_snr

FIGURE_IDS = ("3a", "3b", "3c", "5", "6", "7", "s4", "s5", "s6", "s7", "s8", "s9")
FIG6_DEPTHS = (1e-9, 2e-9, 3e-9, 4e-9, 5e-9)
FIG7_T2N_DIFFUSING = 9e-6
SCAN_POINTS = 80
NV_G = 2.003
VB_G = 2.001


class Figure:
    def __init__(self):
        self.tables = {}
        self.plots = []

    def table(self, name, cols):
        self.tables[name] = cols

    def plot(self, name, series, **style):
        self.plots.append((name, series, style))


def _grid(opts: RunOptions):
    return default_frequency_grid(opts.f_min_hz, opts.f_max_hz, opts.n_freq)


def fig3a(opts, **_):
    f = _grid(opts)
    fig = Figure()
    cols = {"frequency_hz": f}
    for name in PRESET_NAMES:
        cols[f"eta_{name}"] = np.array([p.eta_vol for p in sweep_sensitivity(preset(name), f)])
    fig.table("fig3a_sensitivity", cols)
    fig.plot("fig3a_sensitivity", [(n, f, cols[f"eta_{n}"]) for n in PRESET_NAMES],
             xlabel="frequency (Hz)", ylabel="eta (T Hz^-1/2 um^3/2)", logx=True, logy=True)
    return fig


def _snr_fig(opts, name, sample):
    f = _grid(opts)
    fig = Figure()
    cols = {"frequency_hz": f}
    for p in PRESET_NAMES:
        cols[f"snr_{p}"] = sweep_snr(preset(p), sample, f)["snr"]
    fig.table(name, cols)
    series = []
    for p in PRESET_NAMES:
        y = cols[f"snr_{p}"]
        keep = y > 0
        if keep.any():
            series.append((p, f[keep], y[keep]))
    fig.plot(name, series, xlabel="frequency (Hz)", ylabel="SNR (1 s)", logx=True, logy=True)
    return fig


def fig3b(opts, **_):
    return _snr_fig(opts, "fig3b_snr_halfspace", default_sample())


def fig3c(opts, **_):
    return _snr_fig(opts, "fig3c_snr_2d", default_sample(FLAKE_THICKNESS_2D))


def figs4(opts, **_):
    f = _grid(opts)
    fig = Figure()
    cols = {"frequency_hz": f}
    for name in PRESET_NAMES:
        pts = sweep_sensitivity(preset(name), f)
        cols[f"k_{name}"] = np.array([p.k for p in pts])
        cols[f"t_r_s_{name}"] = np.array([p.t_r for p in pts])
        cols[f"contrast_avg_{name}"] = np.array([p.contrast_avg for p in pts])
    fig.table("figs4_parameters", cols)
    return fig


def figs5(opts, **_):
    f = _grid(opts)
    fig = Figure()
    cols = {"frequency_hz": f}
    for name in PRESET_NAMES:
        cols[f"exp_term_{name}"] = np.array([p.exp_term for p in sweep_sensitivity(preset(name), f)])
    fig.table("figs5_exp_term", cols)
    fig.plot("figs5_exp_term", [(n, f, cols[f"exp_term_{n}"]) for n in PRESET_NAMES],
             xlabel="frequency (Hz)", ylabel="exp term", logx=True)
    return fig


def figs6(opts, **_):
    fig = Figure()
    cols = geometry_table(opts.alpha_points)
    fig.table("figs6_geometry", cols)
    fig.plot("figs6_geometry", [("G statistical", cols["alpha_deg"], cols["g_statistical"])],
             xlabel="alpha (deg)", ylabel="G")
    return fig


def _sites(opts, full):
    return BACKACTION_SITES_FULL if full else opts.n_sites


def _single(depth, system):
    if system == "nv":
        return ba.DefectLayout.single(depth, MAGIC_ANGLE, NV_G)
    return ba.DefectLayout.single(depth, VB_ALPHA, VB_G)


def _lattice_kw(opts, full):
    kw = {"n_sites": _sites(opts, full), "density": PROTON_DENSITY_NANO}
    if opts.seed:
        kw["jitter_seed"] = opts.seed
    return kw


def _spectrum_cols(sp):
    return {"freq_hz": sp.freq_grid, "amplitude": sp.amplitude}


def _summary(rows):
    keys = ("system", "depth_m", "fwhm_hz", "mean_shift_hz", "peak_hz")
    return {k: [r[i] for r in rows] for i, k in enumerate(keys)}


def fig5(opts, full=False, threads=None, **_):
    fig = Figure()
    kw = _lattice_kw(opts, full)
    rows = []
    for system in ("nv", "vb"):
        for d in BACKACTION_DEPTHS:
            sp = ba.lineshape(_single(d, system), ba.SampleLattice(depth=d, **kw), threads=threads)
            tag = f"{system}_{round(d * 1e9)}nm"
            fig.table(f"fig5_{tag}_spectrum", _spectrum_cols(sp))
            fig.plot(f"fig5_{tag}_spectrum", [(tag, sp.freq_grid, sp.amplitude)],
                     xlabel="shift (Hz)", ylabel="amplitude")
            rows.append((system, d, sp.fwhm, sp.mean_shift, sp.peak))
    fig.table("fig5_summary", _summary(rows))
    return fig


def dense_layout_factory(opts, full=False):
    return ba.dense_layout_for(_lattice_kw(opts, full))


def fig6(opts, full=False, threads=None, **_):
    fig = Figure()
    kw = _lattice_kw(opts, full)
    cols = {"depth_m": np.array(FIG6_DEPTHS)}
    fits = {}
    makers = {
        "single_nv": lambda d: _single(d, "nv"),
        "single_vb": lambda d: _single(d, "vb"),
        "dense_vb": dense_layout_factory(opts, full),
    }
    for name, make in makers.items():
        fit = ba.linewidth_vs_depth(make, FIG6_DEPTHS, kw, threads=threads)
        cols[f"fwhm_hz_{name}"] = fit.fwhm
        fits[name] = fit
    fig.table("fig6_linewidth", cols)
    fig.table("fig6_fit", {"system": list(fits), "exponent": [f.exponent for f in fits.values()],
                           "prefactor": [f.prefactor for f in fits.values()],
                           "flatness": [f.flatness for f in fits.values()]})
    fig.plot("fig6_linewidth", [(n, cols["depth_m"], cols[f"fwhm_hz_{n}"]) for n in makers],
             xlabel="depth (m)", ylabel="FWHM (Hz)", logx=True, logy=True)
    return fig


def figs7(opts, full=False, threads=None, **_):
    fig = Figure()
    kw = _lattice_kw(opts, full)
    rows = []
    for d in BACKACTION_DEPTHS:
        tag = f"{round(d * 1e9)}nm"
        lat = ba.SampleLattice(depth=d, **kw)
        dense = ba.lineshape(dense_layout_factory(opts, full)(d), lat, threads=threads)
        single = ba.lineshape(_single(d, "vb"), lat, threads=threads)
        for name, sp in (("dense_vb", dense), ("single_vb", single)):
            fig.table(f"figs7_{name}_{tag}_spectrum", _spectrum_cols(sp))
            rows.append((name, d, sp.fwhm, sp.mean_shift, sp.peak))
        fig.plot(f"figs7_{tag}", [("dense V_B", dense.freq_grid, dense.amplitude),
                                  ("single V_B", single.freq_grid, single.amplitude)],
                 xlabel="shift (Hz)", ylabel="amplitude")
    fig.table("figs7_summary", _summary(rows))
    return fig


def fig7_configs(opts, diffusing=False, k=None, density=FIG7_PROTON_DENSITY, sensor_decay=None):
    """V_B and NV contrast-curve configs for the statistical-polarization comparison."""
    k = k or opts.pulses
    if sensor_decay is None:
        sensor_decay = opts.sensor_decay
    sample = SampleSpec(species="1H", density=density, bias_field=FIG7_BIAS_FIELD,
                        t2n_intrinsic=FIG7_T2N_DIFFUSING if diffusing else math.inf)
    larmor = sample.gamma * FIG7_BIAS_FIELD / (2 * math.pi)
    tau = df.tau_grid_around(larmor, k, opts.n_tau, half_width=0.25 / (2 * larmor))
    vb = df.LineshapeConfig(preset("vb_aggregated"), sample, k, tau, depth=FIG7_VB_DEPTH,
                            alpha=VB_ALPHA, sensor_decay=sensor_decay)
    nv = df.LineshapeConfig(preset("single_nv"), sample, k, tau, depth=FIG7_NV_DEPTH,
                            alpha=MAGIC_ANGLE, sensor_decay=sensor_decay)
    return vb, nv


def fig7(opts, **_):
    fig = Figure()
    cols = {}
    series = []
    for diffusing in (False, True):
        vb, nv = fig7_configs(opts, diffusing)
        tag = "diffusing" if diffusing else "frozen"
        for name, cfg in (("vb", vb), ("nv", nv)):
            curve = df.contrast_curve(cfg)
            cols.setdefault("tau_s", curve.tau)
            cols.setdefault("equivalent_freq_hz", curve.equivalent_freq)
            cols[f"contrast_{name}_{tag}"] = curve.contrast
            series.append((f"{name} {tag}", curve.equivalent_freq, curve.contrast))
    fig.table("fig7_contrast", cols)
    fig.plot("fig7_contrast", series, xlabel="equivalent frequency (Hz)", ylabel="contrast")
    return fig


def _scan_series(table, ms):
    pos = np.array(table["position_m"])
    peak = np.array(table["peak_hz"])
    sel = np.array([m == ms for m in table["m_s"]])
    return pos[sel], peak[sel]


def figs8(opts, threads=None, **_):
    fig = Figure()
    for panel, axis, carbon in (("a", "z", False), ("b", "x", False), ("c", "z", True),
                                ("d", "x", True)):
        system = fs.single_defect_system(axis, with_carbon=carbon)
        start = 0.5e-9 if axis == "z" else -20e-9
        tab = fs.shift_vs_distance(system, axis, start, 20e-9, SCAN_POINTS,
                                   threads=threads)
        fig.table(f"figs8{panel}_shift", tab)
        series = [(f"m_s={m:+d}", *_scan_series(tab, m)) for m in (-1, 0, 1)]
        fig.plot(f"figs8{panel}_shift", [s for s in series if s[1].size],
                 xlabel=f"{axis} (m)", ylabel="peak (Hz)")
    return fig


def figs9(opts, threads=None, **_):
    fig = Figure()
    for panel, carbon in (("a", False), ("b", True)):
        tab = fs.multi_defect_shift(fs.cluster_system(with_carbon=carbon), "z", 0.5e-9, 20e-9,
                                    SCAN_POINTS, threads=threads)
        fig.table(f"figs9{panel}_shift", tab)
        fig.plot(f"figs9{panel}_shift", [("m_s=+1", *_scan_series(tab, 1))],
                 xlabel="z (m)", ylabel="peak (Hz)")
    return fig


RECIPES = {
    "3a": fig3a, "3b": fig3b, "3c": fig3c, "5": fig5, "6": fig6, "7": fig7,
    "s4": figs4, "s5": figs5, "s6": figs6, "s7": figs7, "s8": figs8, "s9": figs9,
}


def run_figure(fig_id, opts: RunOptions | None = None, full=False, threads=None):
    if fig_id not in RECIPES:
        raise ValueError(f"unknown figure {fig_id!r}; choose from {', '.join(FIGURE_IDS)}")
    return RECIPES[fig_id](opts or RunOptions(), full=full, threads=threads)
