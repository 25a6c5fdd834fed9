"""Dipolar back-action of defect electron spins on nearby sample nuclei.

Sample spins sit on a cubic lattice in a box above the surface (z > 0);
defects sit at z <= 0. Each spin is shifted by the secular dipolar field of
every defect within the coupling cutoff, and contributes to the detected
spectrum with a weight set by its coupling to the reference (sensing) defect.

Histograms are accumulated from integer-quantized weights per fixed-size
chunk, so the result is bit-identical for any number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .params import (CONSTANTS, DENSE_VB_LAYERS, DENSE_VB_SPACING,
                     HBN_INTERLAYER, PROTON_DENSITY_NANO, ppm_to_density)

DEFAULT_CUTOFF = 10e-9
MAX_SITES = 30_000_000
CHUNK_SITES = 1 << 18
_QUANT = float(1 << 24)
WEIGHTINGS = ("amplitude", "power", "uniform")
CUTOFF_MODES = ("radial", "lateral")


def dipolar_constant(gamma_e, gamma_n):
    """(mu0/4pi) gamma_e gamma_n hbar in rad s^-1 m^3."""
    return CONSTANTS.mu0_over_4pi * gamma_e * gamma_n * CONSTANTS.hbar


def _relative(defect_pos, spin_pos):
    r_vec = np.asarray(spin_pos, dtype=float) - np.asarray(defect_pos, dtype=float)
    r = np.sqrt(np.sum(r_vec * r_vec, axis=-1))
    if np.any(r == 0):
        raise ValueError("sample spin coincides with a defect")
    return r_vec, r


def _cos_theta(r_vec, r, axis):
    axis = np.asarray(axis, dtype=float)
    return (r_vec @ axis) / r


def secular_shift(defect_pos, defect_axis, spin_pos, gamma_e, gamma_n, factor=0.5,
                  cutoff=DEFAULT_CUTOFF, cutoff_mode="radial"):
    """Secular dipolar frequency shift (Hz) of a nucleus at ``spin_pos``.

    ``factor`` is the effective <S_z> of the electron (1/2 for an equal
    superposition of m_s = 0 and +1). Spins farther than ``cutoff`` get 0;
    pass ``cutoff=None`` to disable. With ``cutoff_mode="lateral"`` only the
    in-plane (x, y) distance is compared with the cutoff.
    """
    r_vec, r = _relative(defect_pos, spin_pos)
    c = _cos_theta(r_vec, r, defect_axis)
    shift = factor * dipolar_constant(gamma_e, gamma_n) * (1 - 3 * c * c) / (2 * math.pi * r**3)
    if cutoff is not None:
        if cutoff_mode == "lateral":
            dist = np.hypot(r_vec[..., 0], r_vec[..., 1])
        elif cutoff_mode == "radial":
            dist = r
        else:
            raise ValueError(f"cutoff_mode must be one of {CUTOFF_MODES}")
        shift = np.where(dist > cutoff, 0.0, shift)
    return float(shift) if np.ndim(shift) == 0 else shift


def detection_weight(defect_pos, defect_axis, spin_pos):
    """Squared transverse coupling (m^-6) of a spin to the sensing defect.

    Summed over spins times density and cell volume, and multiplied by
    (mu0 hbar gamma_n / 4 pi)^2, this gives B_rms^2.
    """
    r_vec, r = _relative(defect_pos, spin_pos)
    c = _cos_theta(r_vec, r, defect_axis)
    w = 2.25 * c * c * (1 - c * c) / r**6
    return float(w) if np.ndim(w) == 0 else w


# --------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class DefectLayout:
    positions: np.ndarray
    axes: np.ndarray
    superposition_factor: float = 0.5
    coupling_cutoff: float = DEFAULT_CUTOFF
    g_factor: float = 2.001
    cutoff_mode: str = "radial"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        axes = np.atleast_2d(np.asarray(self.axes, dtype=float))
        if axes.shape[0] == 1 and pos.shape[0] > 1:
            axes = np.repeat(axes, pos.shape[0], axis=0)
        if pos.shape != axes.shape or pos.shape[1] != 3:
            raise ValueError("positions and axes must be (n, 3) arrays of equal length")
        if np.any(np.abs(np.linalg.norm(axes, axis=1) - 1) > 1e-12):
            raise ValueError("defect axes must be unit vectors")
        if np.any(pos[:, 2] > 0):
            raise ValueError("defects must sit at or below the surface (z <= 0)")
        if self.cutoff_mode not in CUTOFF_MODES:
            raise ValueError(f"cutoff_mode must be one of {CUTOFF_MODES}")
        if not 0 <= self.superposition_factor <= 1:
            raise ValueError("superposition_factor must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "axes", axes)

    @property
    def gamma_e(self):
        return CONSTANTS.gamma_e_from_g(self.g_factor)

    @classmethod
    def single(cls, depth, alpha, g_factor=2.001, **kw):
        axis = (math.sin(alpha), 0.0, math.cos(alpha))
        return cls(np.array([[0.0, 0.0, -depth]]), np.array([axis]), g_factor=g_factor, **kw)


def triangular_sites(spacing, half_width):
    """In-plane triangular lattice points with |x|, |y| <= half_width.

    Returns x, y and the integer lattice indices (i, j).
    """
    n = int(math.ceil(half_width / spacing)) + 2
    i, j = np.meshgrid(np.arange(-2 * n, 2 * n + 1), np.arange(-n, n + 1), indexing="ij")
    x = spacing * (i + 0.5 * j)
    y = spacing * (math.sqrt(3) / 2) * j
    keep = (np.abs(x) <= half_width) & (np.abs(y) <= half_width)
    return x[keep], y[keep], i[keep], j[keep]


def dense_vb_layout(depth, half_width, spacing=DENSE_VB_SPACING, layers=DENSE_VB_LAYERS,
                    interlayer=HBN_INTERLAYER, g_factor=2.001, cutoff_mode="lateral", **kw):
    """Dense V_B ensemble in a multilayer flake whose top layer sits at ``depth``.

    Triangular lateral lattice; layer index (i + 4j) mod layers so that
    neighbouring sites land in different layers. Defect 0 is the one at the
    origin in the top layer and serves as the reference sensor. The coupling
    cutoff of the other defects is lateral by default: a spherical one leaves
    the far part of a deep sampling box with no back-action at all, which
    shows up as a spurious zero-shift spike.
    """
    x, y, i, j = triangular_sites(spacing, half_width)
    layer = (i + 4 * j) % layers
    pos = np.column_stack([x, y, -(depth + layer * interlayer)])
    ref = int(np.argmin(x * x + y * y))
    order = np.r_[ref, np.delete(np.arange(len(x)), ref)]
    return DefectLayout(pos[order], np.array([[0.0, 0.0, 1.0]]), g_factor=g_factor,
                        cutoff_mode=cutoff_mode, **kw)


def areal_spacing(areal_density):
    """Mean nearest-neighbour scale 1/sqrt(n) for an areal density (m^-2)."""
    if not areal_density > 0:
        raise ValueError("areal density must be positive")
    return 1 / math.sqrt(areal_density)


def nv_lateral_spacing(density_ppm, thickness, host="hbn"):
    """Lateral defect spacing for a layer of ``thickness`` at ``density_ppm``."""
    if not density_ppm > 0 or not thickness > 0:
        raise ValueError("density and thickness must be positive")
    return areal_spacing(ppm_to_density(density_ppm, host) * thickness)


def hbn_stack_spacing(density_ppm, layers=DENSE_VB_LAYERS):
    return nv_lateral_spacing(density_ppm, layers * HBN_INTERLAYER, "hbn")


# --------------------------------------------------------------------------
# sample lattice


@dataclass(frozen=True)
class SampleLattice:
    """Cubic lattice of sample spins in a box of side ``box_factor * depth``.

    The box spans z in (0, L] and is laterally centred on ``center``. With
    ``n_sites`` unset the spacing is density^(-1/3); otherwise it is chosen
    to give about ``n_sites`` points and each point stands for density*a^3
    spins. Points are cell centred; ``jitter_seed`` adds a uniform offset of
    up to half a spacing per axis.
    """

    depth: float
    density: float = PROTON_DENSITY_NANO
    species: str = "1H"
    box_factor: float = 4.0
    min_side: float = 4e-9
    n_sites: int | None = None
    jitter_seed: int | None = None
    quarter_turns: int = 0
    max_sites: int = MAX_SITES
    center: tuple = (0.0, 0.0)
    chunk_sites: int = CHUNK_SITES

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("depth must be positive")
        if self.count > self.max_sites:
            raise ValueError(f"lattice has {self.count} sites, above the limit {self.max_sites}")

    @property
    def side(self):
        return max(self.box_factor * self.depth, self.min_side)

    @property
    def n_side(self):
        if self.n_sites is not None:
            n = round(self.n_sites ** (1 / 3))
        else:
            n = round(self.side * self.density ** (1 / 3))
        return max(int(n), 1)

    @property
    def spacing(self):
        return self.side / self.n_side

    @property
    def count(self):
        return self.n_side**3

    @property
    def site_weight(self):
        """Number of real spins represented by one lattice point."""
        return self.density * self.spacing**3

    @property
    def gamma(self):
        return CONSTANTS.gamma(self.species)

    def chunk_bounds(self):
        n = self.count
        return [(s, min(s + self.chunk_sites, n)) for s in range(0, n, self.chunk_sites)]

    def positions(self, start=0, stop=None):
        """Coordinates (m) of flat site indices [start, stop), x slowest."""
        stop = self.count if stop is None else stop
        n, a, side = self.n_side, self.spacing, self.side
        idx = np.arange(start, stop)
        ix, rem = np.divmod(idx, n * n)
        iy, iz = np.divmod(rem, n)
        pts = np.empty((idx.size, 3))
        pts[:, 0] = (ix + 0.5) * a - side / 2
        pts[:, 1] = (iy + 0.5) * a - side / 2
        pts[:, 2] = (iz + 0.5) * a
        if self.jitter_seed is not None:
            ss = np.random.SeedSequence(self.jitter_seed, spawn_key=(start,))
            pts += np.random.default_rng(ss).uniform(-a / 2, a / 2, pts.shape)
            np.clip(pts[:, 2], 1e-6 * a, None, out=pts[:, 2])
        for _ in range(self.quarter_turns % 4):
            pts[:, 0], pts[:, 1] = -pts[:, 1], pts[:, 0].copy()
        pts[:, 0] += self.center[0]
        pts[:, 1] += self.center[1]
        return pts

    def all_positions(self):
        return self.positions(0, self.count)


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Spectrum:
    freq_grid: np.ndarray
    amplitude: np.ndarray
    fwhm: float
    mean_shift: float
    peak: float
    info: dict = field(default_factory=dict)

    @classmethod
    def from_histogram(cls, freq_grid, counts, mean_shift=None, info=None):
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if not total > 0:
            raise ValueError("spectrum has zero total weight")
        amp = counts / total
        freq_grid = np.asarray(freq_grid, dtype=float)
        if mean_shift is None:
            mean_shift = float(np.sum(amp * freq_grid))
        i = int(np.argmax(amp))
        return cls(freq_grid, amp, fwhm_of(freq_grid, amp), mean_shift, float(freq_grid[i]),
                   dict(info or {}))


def fwhm_of(freq, amp):
    """Full width at half maximum with linear interpolation between bins.

    The outermost bins at or above half maximum set the width, so ties and
    secondary lobes resolve toward the wider answer.
    """
    freq = np.asarray(freq, dtype=float)
    amp = np.asarray(amp, dtype=float)
    half = amp.max() / 2
    above = np.flatnonzero(amp >= half)
    lo, hi = above[0], above[-1]

    def cross(i_in, i_out):
        if i_out < 0 or i_out >= amp.size:
            return freq[i_in]
        y0, y1 = amp[i_out], amp[i_in]
        t = (half - y0) / (y1 - y0)
        return freq[i_out] + t * (freq[i_in] - freq[i_out])

    return float(cross(hi, hi + 1) - cross(lo, lo - 1))


def _spectral_weight(w_det, weighting):
    if weighting == "amplitude":
        return np.sqrt(w_det)
    if weighting == "power":
        return w_det
    if weighting == "uniform":
        return np.ones_like(w_det)
    raise ValueError(f"weighting must be one of {WEIGHTINGS}")


def _chunk_fields(layout: DefectLayout, lattice: SampleLattice, reference, bounds):
    """Total shift (Hz) and squared coupling to the reference for one chunk."""
    start, stop = bounds
    pts = lattice.positions(start, stop)
    gamma_e, gamma_n = layout.gamma_e, lattice.gamma
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    shift = np.zeros(len(pts))
    cutoff, mode = layout.coupling_cutoff, layout.cutoff_mode
    dims = 2 if mode == "lateral" else 3
    for k, (pos, axis) in enumerate(zip(layout.positions, layout.axes)):
        if k != reference:
            # skip defects whose cutoff region misses the chunk's bounding box
            gap = np.maximum(np.maximum(lo - pos, pos - hi), 0.0)[:dims]
            if cutoff is not None and np.sqrt(np.sum(gap * gap)) > cutoff:
                continue
        shift += secular_shift(pos, axis, pts, gamma_e, gamma_n, layout.superposition_factor,
                               None if k == reference else cutoff, mode)
    w = detection_weight(layout.positions[reference], layout.axes[reference], pts)
    return shift, w


def _map(fn, items, threads):
    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def lineshape(layout: DefectLayout, lattice: SampleLattice, reference_defect=0,
              weighting="amplitude", n_bins=2001, span_factor=5.0, threads=None):
    """Detected NMR lineshape of the sample under back-action.

    Each spin's shift is the sum over defects; its spectral weight comes from
    its coupling to ``reference_defect``: ``"amplitude"`` uses the coupling
    magnitude, ``"power"`` its square, ``"uniform"`` counts spins equally.
    The frequency grid has ``n_bins`` points spanning +-span_factor times
    the 99th percentile of |shift|.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}")
    if lattice.count == 0:
        raise ValueError("empty lattice")
    bounds = lattice.chunk_bounds()
    parts = _map(lambda b: _chunk_fields(layout, lattice, reference_defect, b), bounds, threads)
    shift = np.concatenate([p[0] for p in parts])
    weight = _spectral_weight(np.concatenate([p[1] for p in parts]), weighting)
    w_max = weight.max()
    if not w_max > 0:
        raise ValueError("all detection weights are zero")

    p99 = float(np.percentile(np.abs(shift), 99))
    span = span_factor * p99 if p99 > 0 else 1.0
    freq = np.linspace(-span, span, n_bins)
    width = freq[1] - freq[0]

    def hist(b):
        s, w = shift[b[0]:b[1]], weight[b[0]:b[1]]
        q = np.floor(w / w_max * _QUANT + 0.5)
        idx = np.rint((s + span) / width).astype(np.int64)
        inside = (idx >= 0) & (idx < n_bins)
        counts = np.bincount(idx[inside], weights=q[inside], minlength=n_bins)
        return counts, math.fsum(q), math.fsum(q * s)

    parts = _map(hist, bounds, threads)
    counts = np.zeros(n_bins)
    for c, _, _ in parts:
        counts += c
    q_total = math.fsum(p[1] for p in parts)
    mean = math.fsum(p[2] for p in parts) / q_total
    info = {"p99_abs_shift": p99, "sites": lattice.count, "weighting": weighting,
            "outside_weight": 1 - counts.sum() / q_total, "depth": lattice.depth}
    return Spectrum.from_histogram(freq, counts, mean_shift=mean, info=info)


def lattice_b_rms(layout: DefectLayout, lattice: SampleLattice, reference_defect=0,
                  threads=None):
    """B_rms (T) from summing detection weights over the lattice."""
    bounds = lattice.chunk_bounds()
    pos, axis = layout.positions[reference_defect], layout.axes[reference_defect]

    def part(b):
        return math.fsum(detection_weight(pos, axis, lattice.positions(*b)))

    total = math.fsum(_map(part, bounds, threads))
    k = CONSTANTS.mu0_over_4pi * CONSTANTS.hbar * lattice.gamma
    return k * math.sqrt(total * lattice.site_weight)


# --------------------------------------------------------------------------
# depth scaling


@dataclass(frozen=True)
class LinewidthFit:
    exponent: float
    prefactor: float          # Hz * m^-exponent
    depths: np.ndarray
    fwhm: np.ndarray
    flatness: float           # max/min FWHM over the depth list
    spectra: tuple = ()


def fit_power_law(depths, widths):
    depths = np.asarray(depths, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if depths.size < 3 or np.unique(depths).size != depths.size:
        raise ValueError("need at least 3 distinct depths")
    if np.any(depths <= 0) or np.any(widths <= 0):
        raise ValueError("depths and widths must be positive")
    slope, intercept = np.polyfit(np.log(depths), np.log(widths), 1)
    return float(slope), float(math.exp(intercept))


def linewidth_vs_depth(layout_for_depth, depths, lattice_kw=None, threads=None, **lineshape_kw):
    """FWHM at each depth and a least-squares power law FWHM = A d^n.

    ``layout_for_depth`` maps a depth (m) to a DefectLayout.
    """
    depths = np.asarray(depths, dtype=float)
    if depths.size < 3 or np.unique(depths).size != depths.size:
        raise ValueError("need at least 3 distinct depths")
    if np.any(depths <= 0):
        raise ValueError("depths must be positive")
    lattice_kw = dict(lattice_kw or {})
    spectra = []
    for d in depths:
        lat = SampleLattice(depth=float(d), **lattice_kw)
        spectra.append(lineshape(layout_for_depth(float(d)), lat, threads=threads,
                                 **lineshape_kw))
    widths = np.array([s.fwhm for s in spectra])
    n, a = fit_power_law(depths, widths)
    return LinewidthFit(n, a, depths, widths, float(widths.max() / widths.min()), tuple(spectra))


def dense_layout_for(lattice_kw=None, **kw):
    """Depth -> dense V_B layout covering the sampling box plus the cutoff."""
    lattice_kw = dict(lattice_kw or {})

    def make(depth):
        lat = SampleLattice(depth=depth, **lattice_kw)
        return dense_vb_layout(depth, lat.side / 2 + kw.get("coupling_cutoff", DEFAULT_CUTOFF), **kw)

    return make

