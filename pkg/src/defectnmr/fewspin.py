"""Exact dynamics of a handful of nuclear spins next to frozen defect spins.

Each defect electron is held in a fixed m_s state, so it acts on the nuclei
as a static hyperfine field from the point-dipole tensor. The nuclear
Hamiltonian (Zeeman, chemical shifts, scalar couplings, hyperfine) is
diagonalized once and the FID is sampled in a frame rotating at each
nucleus' bare Larmor frequency, which keeps kHz-scale shifts inside the
Nyquist window of a 0.2 s / 5000-step record.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .backaction import DEFAULT_CUTOFF, Spectrum, fwhm_of
from .params import (C13_OFFSET, C13_SHIFT_PPM, CONSTANTS, FEWSPIN_BIAS, FEWSPIN_J_HZ,
                     FEWSPIN_VB_DEPTH, FID_DURATION, FID_STEPS, FOUR_DEFECT_POSITIONS,
                     PROTON_SHIFT_PPM)

MAX_NUCLEI = 5

_SX = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
_SY = np.array([[0, -0.5j], [0.5j, 0]], dtype=complex)
_SZ = np.array([[0.5, 0], [0, -0.5]], dtype=complex)
_SP = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class Nucleus:
    species: str
    position: tuple          # m
    shift_ppm: float = 0.0

    @property
    def gamma(self):
        return CONSTANTS.gamma(self.species)


@dataclass(frozen=True)
class SpinSystem:
    nuclei: tuple
    defects: tuple = ()                      # positions (m)
    axes: tuple = ((0.0, 0.0, 1.0),)         # one axis, or one per defect
    g_factor: float = 2.001
    couplings: dict = field(default_factory=dict)   # (i, j) -> J in Hz
    bias_field: float = FEWSPIN_BIAS
    pseudo_secular: bool = True
    weak_coupling: bool = False
    cutoff: float | None = DEFAULT_CUTOFF

    def __post_init__(self):
        n = len(self.nuclei)
        if not 1 <= n <= MAX_NUCLEI:
            raise ValueError(f"need 1 to {MAX_NUCLEI} nuclei, got {n}")
        pos = [tuple(x.position) for x in self.nuclei]
        if len(set(pos)) != n:
            raise ValueError("nuclear coordinates must be distinct")
        for (i, j) in self.couplings:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"scalar coupling ({i}, {j}) must join two distinct nuclei")
        if len(self.axes) not in (1, len(self.defects)) and self.defects:
            raise ValueError("give one defect axis or one per defect")

    @property
    def dim(self):
        return 2 ** len(self.nuclei)

    def defect_axis(self, k):
        a = np.asarray(self.axes[0] if len(self.axes) == 1 else self.axes[k], dtype=float)
        return a / np.linalg.norm(a)

    def with_defects(self, defects):
        return replace(self, defects=tuple(tuple(d) for d in defects))


def _embed(op, i, n):
    out = np.array([[1.0 + 0j]])
    for k in range(n):
        out = np.kron(out, op if k == i else np.eye(2))
    return out


def hyperfine_vector(defect_pos, axis, nucleus_pos, gamma_e, gamma_n):
    """Point-dipole coupling (rad/s) of the electron's S_z to I_x, I_y, I_z.

    With S quantized along ``axis`` (taken as z here, the bias direction), the
    nucleus sees a_j = -(mu0/4pi) gamma_e gamma_n hbar (3 (n.r) r_j - n_j)/r^3.
    """
    r_vec = np.asarray(nucleus_pos, dtype=float) - np.asarray(defect_pos, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0:
        raise ValueError("nucleus coincides with a defect")
    u = r_vec / r
    n = np.asarray(axis, dtype=float)
    k = CONSTANTS.mu0_over_4pi * gamma_e * gamma_n * CONSTANTS.hbar
    return -k * (3 * np.dot(n, u) * u - n) / r**3, r


def _ms_list(system, m_s):
    if np.ndim(m_s) == 0:
        return [float(m_s)] * len(system.defects)
    m_s = list(m_s)
    if len(m_s) != len(system.defects):
        raise ValueError("need one m_s per defect")
    return m_s


def build_manifold_hamiltonian(system: SpinSystem, m_s, lab_frame=False):
    """Nuclear Hamiltonian (rad/s) for fixed electron m_s.

    ``m_s`` is one value for every defect or a sequence with one per defect.
    By default the bare Larmor terms are dropped (rotating frame); the
    pseudo-secular hyperfine terms are then only meaningful together with
    ``lab_frame=True``, which is what :func:`simulate_fid` uses.
    """
    n = len(system.nuclei)
    ms = _ms_list(system, m_s)
    for v in ms:
        if v not in (-1, 0, 1):
            raise ValueError("m_s must be -1, 0 or +1")
    gamma_e = CONSTANTS.gamma_e_from_g(system.g_factor)
    ops = [(_embed(_SX, i, n), _embed(_SY, i, n), _embed(_SZ, i, n)) for i in range(n)]
    h = np.zeros((system.dim, system.dim), dtype=complex)
    for i, nuc in enumerate(system.nuclei):
        ix, iy, iz = ops[i]
        w0 = nuc.gamma * system.bias_field
        # shielding-free convention: positive ppm raises the precession frequency
        offset = w0 * nuc.shift_ppm * 1e-6
        h += (offset + (w0 if lab_frame else 0.0)) * iz
        a = np.zeros(3)
        for k, dpos in enumerate(system.defects):
            if ms[k] == 0:
                continue
            vec, r = hyperfine_vector(dpos, system.defect_axis(k), nuc.position, gamma_e,
                                      nuc.gamma)
            if system.cutoff is not None and r > system.cutoff:
                continue
            a += ms[k] * vec
        h += a[2] * iz
        if system.pseudo_secular:
            h += a[0] * ix + a[1] * iy
    for (i, j), jc in system.couplings.items():
        w = 2 * math.pi * jc
        if system.weak_coupling:
            h += w * ops[i][2] @ ops[j][2]
        else:
            h += w * sum(ops[i][c] @ ops[j][c] for c in range(3))
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class FidRecord:
    dt: float
    samples: np.ndarray
    duration: float

    @property
    def steps(self):
        return self.samples.size

    @property
    def times(self):
        return self.dt * np.arange(self.samples.size)


def simulate_fid(system: SpinSystem, m_s, duration=FID_DURATION, steps=FID_STEPS, observe=None):
    """FID of the nuclei after a pi/2 pulse about y, every nucleus along +x.

    ``observe`` selects which nuclei contribute (default all). Each
    contribution is <I+> demodulated at that nucleus' bare Larmor frequency.
    """
    if steps < 2:
        raise ValueError("need at least 2 time steps")
    n = len(system.nuclei)
    if system.dim > 2**MAX_NUCLEI:
        raise ValueError("Hilbert space too large")
    h = build_manifold_hamiltonian(system, m_s, lab_frame=True)
    evals, evecs = np.linalg.eigh(h)
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    psi0 = np.array([1.0 + 0j])
    for _ in range(n):
        psi0 = np.kron(psi0, plus)
    c0 = evecs.conj().T @ psi0
    dt = duration / steps
    t = dt * np.arange(steps)
    # amplitudes in the eigenbasis; exact at every sample time
    phases = np.exp(-1j * np.outer(t, evals))
    psi_t = (phases * c0) @ evecs.T
    obs = range(n) if observe is None else observe
    sig = np.zeros(steps, dtype=complex)
    for i in obs:
        # with H = w I_z, <I+> turns as exp(+i w t): offsets above the
        # Larmor frequency land at positive FFT frequencies
        op = _embed(_SP, i, n)
        val = np.einsum("ti,ij,tj->t", psi_t.conj(), op, psi_t)
        w0 = system.nuclei[i].gamma * system.bias_field
        sig += val * np.exp(-1j * w0 * t)
    return FidRecord(dt, sig, duration)


def propagator(system: SpinSystem, m_s, t, lab_frame=True):
    """exp(-i H t) for the manifold Hamiltonian."""
    h = build_manifold_hamiltonian(system, m_s, lab_frame=lab_frame)
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def spectrum_of(fid: FidRecord, window="hann", peak_threshold=0.05):
    """Magnitude spectrum of an FID on its FFT grid (zero frequency centred).

    The complex spectrum in ``info["values"]`` is scaled by sqrt(dt/N) so that
    sum |values|^2 equals sum |window * fid|^2 dt. ``amplitude`` is |values|
    normalized to unit sum. ``info["peaks"]`` lists local maxima above
    ``peak_threshold`` of the largest, refined by a three-point parabola.
    The Hann window keeps leakage sidelobes below the peak threshold.
    """
    x = np.asarray(fid.samples)
    n = x.size
    if not np.any(x != 0):
        raise ValueError("FID is identically zero")
    if window == "hann":
        x = x * np.hanning(n + 1)[:n]
    elif window is not None:
        raise ValueError("window must be 'hann' or None")
    values = np.fft.fftshift(np.fft.fft(x)) * math.sqrt(fid.dt / n)
    freq = np.fft.fftshift(np.fft.fftfreq(n, fid.dt))
    mag = np.abs(values)
    peaks = find_peaks(freq, mag, peak_threshold)
    amp = mag / mag.sum()
    info = {"values": values, "peaks": peaks, "resolution": 1 / (n * fid.dt),
            "nyquist": 1 / (2 * fid.dt)}
    return Spectrum(freq, amp, fwhm_of(freq, amp), float(np.sum(amp * freq)),
                    float(freq[np.argmax(mag)]), info)


def find_peaks(freq, mag, threshold=0.05):
    """Local maxima of ``mag`` above ``threshold * max``, sorted by frequency."""
    level = threshold * mag.max()
    left = np.r_[-np.inf, mag[:-1]]
    right = np.r_[mag[1:], -np.inf]
    idx = np.flatnonzero((mag > left) & (mag >= right) & (mag >= level))
    df = freq[1] - freq[0]
    out = []
    for i in idx:
        if 0 < i < mag.size - 1:
            a, b, c = mag[i - 1], mag[i], mag[i + 1]
            denom = a - 2 * b + c
            shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
            out.append(float(freq[i] + shift * df))
        else:
            out.append(float(freq[i]))
    return out


def secular_offsets(system: SpinSystem, m_s, nucleus=0):
    """First-order line positions (Hz) of one nucleus: shift + hyperfine +- J/2."""
    ms = _ms_list(system, m_s)
    nuc = system.nuclei[nucleus]
    gamma_e = CONSTANTS.gamma_e_from_g(system.g_factor)
    w = nuc.gamma * system.bias_field * nuc.shift_ppm * 1e-6
    for k, dpos in enumerate(system.defects):
        vec, r = hyperfine_vector(dpos, system.defect_axis(k), nuc.position, gamma_e, nuc.gamma)
        if system.cutoff is None or r <= system.cutoff:
            w += ms[k] * vec[2]
    lines = [w / (2 * math.pi)]
    for (i, j), jc in system.couplings.items():
        if nucleus in (i, j):
            lines = [f + s * jc / 2 for f in lines for s in (-1, 1)]
    return lines


def proton_system(position=(0.0, 0.0, 0.0), with_carbon=False, j_hz=FEWSPIN_J_HZ,
                  defects=((0.0, 0.0, 0.0),), **kw):
    """Proton (optionally bonded to a 13C) near V_B defects along z at 0.1 T."""
    pos = np.asarray(position, dtype=float)
    nuclei = [Nucleus("1H", tuple(pos), PROTON_SHIFT_PPM)]
    couplings = {}
    if with_carbon:
        nuclei.append(Nucleus("13C", tuple(pos + np.asarray(C13_OFFSET)), C13_SHIFT_PPM))
        couplings[(0, 1)] = j_hz
    return SpinSystem(tuple(nuclei), tuple(tuple(d) for d in defects), couplings=couplings, **kw)


SCAN_FIELDS = ("position_m", "m_s", "peak_hz", "aliased")


def _translate(system, shift, move):
    if move == "nuclei":
        nuclei = tuple(replace(nu, position=tuple(np.asarray(nu.position) + shift))
                       for nu in system.nuclei)
        return replace(system, nuclei=nuclei)
    return system.with_defects(np.asarray(system.defects, dtype=float) + shift)


def _scan(system, axis, start, stop, points, ms_values, move, observe, duration, steps,
          threads):
    if axis not in ("x", "z"):
        raise ValueError("axis must be 'x' or 'z'")
    if points < 2:
        raise ValueError("need at least 2 scan points")
    if not stop > start:
        raise ValueError("scan range must be increasing")
    unit = np.array([1.0, 0, 0]) if axis == "x" else np.array([0, 0, 1.0])
    positions = np.linspace(start, stop, points)
    jobs = [(p, ms) for p in positions for ms in ms_values]
    nyquist = steps / (2 * duration)

    def run(job):
        p, ms = job
        sys_p = _translate(system, p * unit, move)
        fid = simulate_fid(sys_p, ms, duration, steps, observe=observe)
        peaks = spectrum_of(fid).info["peaks"]
        expected = secular_offsets(sys_p, ms, observe[0])
        aliased = any(abs(f) > nyquist for f in expected)
        return [(float(p), ms, f, aliased) for f in peaks]

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rows = [r for res in results for r in res]
    return {name: [r[i] for r in rows] for i, name in enumerate(SCAN_FIELDS)}


def shift_vs_distance(system: SpinSystem, axis="z", start=0.5e-9, stop=20e-9, points=40,
                      ms_values=(-1, 0, 1), observe=(0,), duration=FID_DURATION,
                      steps=FID_STEPS, threads=None):
    """Peak frequencies of the observed nucleus as the nuclei move along ``axis``.

    The nuclei of ``system`` are displaced by s along x or z for each s in
    linspace(start, stop, points); defects stay put. One row per detected
    peak, so a J doublet gives two rows per position and m_s.
    """
    return _scan(system, axis, start, stop, points, tuple(ms_values), "nuclei", tuple(observe),
                 duration, steps, threads)


def multi_defect_shift(system: SpinSystem, axis="z", start=0.5e-9, stop=20e-9, points=40,
                       m_s=1, observe=(0,), duration=FID_DURATION, steps=FID_STEPS,
                       threads=None):
    """As :func:`shift_vs_distance` but the whole defect cluster moves.

    Every defect is held at the same ``m_s`` (default +1); pass a tuple with
    one value per defect to mix manifolds.
    """
    return _scan(system, axis, start, stop, points, (m_s,), "defects", tuple(observe),
                 duration, steps, threads)


def cluster_system(with_carbon=False, **kw):
    """Proton at the origin with the four-defect V_B cluster."""
    return proton_system((0.0, 0.0, 0.0), with_carbon, defects=FOUR_DEFECT_POSITIONS, **kw)


def single_defect_system(axis="z", with_carbon=False, **kw):
    """Geometry of the single-sensor scans: defect at the origin; for the x scan
    the nuclei sit at height 2.5 nm."""
    base = (0.0, 0.0, 0.0) if axis == "z" else (0.0, 0.0, FEWSPIN_VB_DEPTH)
    return proton_system(base, with_carbon, **kw)
