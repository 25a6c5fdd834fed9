"""Physical constants, sensor presets, sample descriptions and config I/O.

Everything inside the package is SI (m, s, T, Hz, rad). Conversions from
ppm, nm, us and friends happen only here, at the config boundary.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Union

from scipy import constants as _sc


class ConfigError(ValueError):
    """Raised for malformed config text or records violating an invariant."""


# --------------------------------------------------------------------------
# constants

# gamma / 2pi in MHz/T
_GAMMA_MHZ_PER_T = {
    "1H": 42.577478,
    "2H": 6.535903,
    "13C": 10.708395,
    "14N": 3.077706,
    "19F": 40.078,
    "31P": 17.25144,
}


@dataclass(frozen=True)
class PhysicalConstants:
    mu0_over_4pi: float = _sc.mu_0 / (4 * math.pi)
    hbar: float = _sc.hbar
    bohr_magneton: float = _sc.physical_constants["Bohr magneton"][0]
    gamma_map: Mapping[str, float] = field(
        default_factory=lambda: {k: 2 * math.pi * v * 1e6 for k, v in _GAMMA_MHZ_PER_T.items()}
    )

    def gamma(self, species: str) -> float:
        """Nuclear gyromagnetic ratio in rad s^-1 T^-1."""
        try:
            return self.gamma_map[species]
        except KeyError:
            raise ValueError(f"unknown nuclear species {species!r}") from None

    def gamma_e_from_g(self, g: float) -> float:
        """Electron gyromagnetic ratio magnitude g*mu_B/hbar (rad s^-1 T^-1)."""
        return g * self.bohr_magneton / self.hbar


CONSTANTS = PhysicalConstants()

# atoms per m^3, bulk
ATOMIC_DENSITY = {"hbn": 1.10e29, "diamond": 1.76e29}

HBN_INTERLAYER = 0.333e-9
MAGIC_ANGLE = math.acos(1 / math.sqrt(3))
# NV axis in [100]/[110]-cut diamond sits at the magic angle to the surface normal
NV_ALPHA = MAGIC_ANGLE
VB_ALPHA = 0.0
NV_RABI_HZ = 10e6
VB_RABI_HZ = math.sqrt(3) * NV_RABI_HZ


def ppm_to_density(ppm: float, host: str) -> float:
    """Defect number density (m^-3) for a ppm concentration in ``host``."""
    return ppm * 1e-6 * ATOMIC_DENSITY[host]


# --------------------------------------------------------------------------
# sensor systems


@dataclass(frozen=True)
class DefectSystemParams:
    """Coherence, optical and geometric parameters for one sensor system.

    ``density_ppm=None`` stands for a single defect; volume normalization then
    assumes one defect per cubic micron.
    """

    name: str
    t2_echo: float
    t2_max: float
    depth_min: float
    depth_max: float
    contrast0: float
    counts_per_defect: float
    density_ppm: float | None
    t_init: float
    g_factor: float
    s_exponent: float
    p_stretch: float
    alpha: float
    rabi_hz: float
    host: str = "diamond"

    def __post_init__(self):
        checks = [
            (self.t2_echo > 0, "t2_echo > 0"),
            (self.t2_max >= self.t2_echo, "t2_max >= t2_echo"),
            (0 < self.contrast0 < 1, "0 < contrast0 < 1"),
            (0 < self.s_exponent < 1, "0 < s_exponent < 1"),
            (self.p_stretch > 0, "p_stretch > 0"),
            (0 <= self.alpha <= math.pi / 2, "0 <= alpha <= pi/2"),
            (0 < self.depth_min <= self.depth_max, "0 < depth_min <= depth_max"),
            (self.counts_per_defect > 0, "counts_per_defect > 0"),
            (self.t_init > 0, "t_init > 0"),
            (self.g_factor > 0, "g_factor > 0"),
            (self.rabi_hz > 0, "rabi_hz > 0"),
            (self.density_ppm is None or self.density_ppm > 0, "density_ppm > 0"),
            (self.host in ATOMIC_DENSITY, f"host in {sorted(ATOMIC_DENSITY)}"),
        ]
        for ok, rule in checks:
            if not ok:
                raise ConfigError(f"{self.name}: invariant violated: {rule}")

    @property
    def depth(self) -> float:
        """Representative (shallowest) defect depth."""
        return self.depth_min

    @property
    def is_bulk(self) -> bool:
        return self.depth_max > self.depth_min

    @property
    def defects_per_um3(self) -> float:
        if self.density_ppm is None:
            return 1.0
        return ppm_to_density(self.density_ppm, self.host) * 1e-18


_PRESETS = {
    "vb_gao": DefectSystemParams(
        name="vb_gao", t2_echo=1.1e-6, t2_max=4.4e-6, depth_min=2.5e-9, depth_max=2.5e-9,
        contrast0=0.0425, counts_per_defect=87.5, density_ppm=192.0, t_init=100e-9,
        g_factor=2.001, s_exponent=0.52, p_stretch=1.0, alpha=VB_ALPHA,
        rabi_hz=VB_RABI_HZ, host="hbn",
    ),
    "vb_aggregated": DefectSystemParams(
        name="vb_aggregated", t2_echo=2e-6, t2_max=4.4e-6, depth_min=2.5e-9, depth_max=2.5e-9,
        contrast0=0.18, counts_per_defect=6000.0, density_ppm=236.0, t_init=100e-9,
        g_factor=2.001, s_exponent=0.52, p_stretch=1.0, alpha=VB_ALPHA,
        rabi_hz=VB_RABI_HZ, host="hbn",
    ),
    "single_nv": DefectSystemParams(
        name="single_nv", t2_echo=4e-6, t2_max=50e-6, depth_min=10e-9, depth_max=10e-9,
        contrast0=0.27, counts_per_defect=1e6, density_ppm=None, t_init=2000e-9,
        g_factor=2.003, s_exponent=0.5, p_stretch=2.0, alpha=NV_ALPHA,
        rabi_hz=NV_RABI_HZ, host="diamond",
    ),
    "shallow_nv": DefectSystemParams(
        name="shallow_nv", t2_echo=1.62e-6, t2_max=45.6e-6, depth_min=10e-9, depth_max=10e-9,
        contrast0=0.09, counts_per_defect=50000.0, density_ppm=0.6, t_init=2000e-9,
        g_factor=2.003, s_exponent=0.58, p_stretch=1.0, alpha=NV_ALPHA,
        rabi_hz=NV_RABI_HZ, host="diamond",
    ),
    "bulk_nv": DefectSystemParams(
        name="bulk_nv", t2_echo=10.7e-6, t2_max=77e-6, depth_min=10e-9, depth_max=10e-6,
        contrast0=0.09, counts_per_defect=50000.0, density_ppm=2.7, t_init=2000e-9,
        g_factor=2.003, s_exponent=0.44, p_stretch=1.0, alpha=NV_ALPHA,
        rabi_hz=NV_RABI_HZ, host="diamond",
    ),
}

PRESET_NAMES = tuple(_PRESETS)
NV_PRESETS = ("single_nv", "shallow_nv", "bulk_nv")
VB_PRESETS = ("vb_gao", "vb_aggregated")


def preset(name: str) -> DefectSystemParams:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class HalfSpace:
    pass


@dataclass(frozen=True)
class Slab:
    thickness: float

    def __post_init__(self):
        if not self.thickness > 0:
            raise ConfigError("invariant violated: slab thickness > 0")


@dataclass(frozen=True)
class BulkAverage:
    d_min: float
    d_max: float
    slab_thickness: float | None = None

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ConfigError("invariant violated: 0 < d_min < d_max")
        if self.slab_thickness is not None and not self.slab_thickness > 0:
            raise ConfigError("invariant violated: slab thickness > 0")


Geometry = Union[HalfSpace, Slab, BulkAverage]


@dataclass(frozen=True)
class SampleSpec:
    species: str = "1H"
    density: float = 64e27
    geometry: Geometry = HalfSpace()
    diffusion_coeff: float = 0.0
    t2n_intrinsic: float = math.inf
    bias_field: float = 0.1

    def __post_init__(self):
        CONSTANTS.gamma(self.species)
        if not self.density > 0:
            raise ConfigError("invariant violated: sample density > 0")
        if self.diffusion_coeff < 0:
            raise ConfigError("invariant violated: diffusion_coeff >= 0")
        if not self.t2n_intrinsic > 0:
            raise ConfigError("invariant violated: t2n_intrinsic > 0")

    @property
    def gamma(self) -> float:
        return CONSTANTS.gamma(self.species)


# Sample and scenario values used throughout the figures.
PROTON_DENSITY_NANO = 64e27          # statistically polarized 1H, m^-3
FIG7_PROTON_DENSITY = 1e27
FIG7_PROTON_DENSITY_TEXT = 2.95e27
FIG7_BIAS_FIELD = 0.0197
FIG7_VB_DEPTH = 2.5e-9
FIG7_NV_DEPTH = 6e-9
FIG7_PULSES = 100
FIG7_PULSES_K = 104                  # nearest multiple of 8 to FIG7_PULSES
FIG7_PULSES_TEXT = 64
D_BULK_LIQUID = 5e5 * 1e-18          # m^2/s
D_NANOWELL = 0.038 * 1e-18           # m^2/s
NANOWELL_TD_REPORTED = 118.0         # s, as printed next to the nanowell diffusion value
FLAKE_THICKNESS_2D = 1e-9
BACKACTION_DEPTHS = (1e-9, 5e-9)
BACKACTION_SITES = 1_000_000
BACKACTION_SITES_FULL = 28_000_000
DENSE_VB_SPACING = 1.4e-9
DENSE_VB_LAYERS = 10
FEWSPIN_BIAS = 0.1
FEWSPIN_VB_DEPTH = 2.5e-9
PROTON_SHIFT_PPM = 3.25
C13_SHIFT_PPM = 2.25
N14_SHIFT_PPM = 61.2
C13_OFFSET = (0.0, 1.1e-10, 0.0)     # 13C next to the scanned proton
FEWSPIN_J_HZ = 200.0
FID_DURATION = 0.2
FID_STEPS = 5000
# four-sensor cluster, metres; first entry is the scanned sensor
FOUR_DEFECT_POSITIONS = (
    (0.0, 0.0, 0.0),
    (-16.6e-10, -43.7e-10, 8.4e-10),
    (30.0e-10, 52.8e-10, -13.3e-10),
    (-4.3e-10, -0.5e-10, 5.8e-10),
)


# --------------------------------------------------------------------------
# config files

@dataclass(frozen=True)
class RunOptions:
    f_min_hz: float = 1e4
    f_max_hz: float = 1e8
    n_freq: int = 200
    seed: int = 0
    n_sites: int = BACKACTION_SITES
    pulses: int = FIG7_PULSES_K
    n_tau: int = 401
    alpha_points: int = 181
    sensor_decay: bool = False

    def __post_init__(self):
        if not 0 < self.f_min_hz < self.f_max_hz:
            raise ConfigError("invariant violated: 0 < f_min_hz < f_max_hz")
        if self.n_freq < 1 or self.n_sites < 1 or self.n_tau < 3 or self.alpha_points < 2:
            raise ConfigError("invariant violated: grid sizes must be positive")
        if self.pulses < 8 or self.pulses % 8:
            raise ConfigError("invariant violated: pulses is a positive multiple of 8")


# key -> (record, field, multiplier to SI)
_UNIT_KEYS = {
    "t2_echo": ("defect", "t2_echo", {"s": 1.0, "us": 1e-6}),
    "t2_max": ("defect", "t2_max", {"s": 1.0, "us": 1e-6}),
    "depth": ("defect", "depth", {"m": 1.0, "nm": 1e-9, "um": 1e-6}),
    "depth_min": ("defect", "depth_min", {"m": 1.0, "nm": 1e-9, "um": 1e-6}),
    "depth_max": ("defect", "depth_max", {"m": 1.0, "nm": 1e-9, "um": 1e-6}),
    "contrast0": ("defect", "contrast0", {"frac": 1.0, "pct": 1e-2}),
    "counts_per_defect": ("defect", "counts_per_defect", {"hz": 1.0}),
    "density": ("defect", "density_ppm", {"ppm": 1.0}),
    "t_init": ("defect", "t_init", {"s": 1.0, "ns": 1e-9}),
    "alpha": ("defect", "alpha", {"rad": 1.0, "deg": math.pi / 180}),
    "rabi": ("defect", "rabi_hz", {"hz": 1.0, "mhz": 1e6}),
    "sample_density": ("sample", "density", {"m3": 1.0, "nm3": 1e27}),
    "sample_thickness": ("sample", "thickness", {"m": 1.0, "nm": 1e-9}),
    "diffusion": ("sample", "diffusion_coeff", {"m2_s": 1.0, "nm2_s": 1e-18}),
    "t2n_intrinsic": ("sample", "t2n_intrinsic", {"s": 1.0}),
    "bias_field": ("sample", "bias_field", {"t": 1.0, "mt": 1e-3}),
}
_PLAIN_KEYS = {
    "g_factor": ("defect", "g_factor", float),
    "s_exponent": ("defect", "s_exponent", float),
    "p_stretch": ("defect", "p_stretch", float),
    "host": ("defect", "host", str),
    "sample_species": ("sample", "species", str),
    "sample_geometry": ("sample", "geometry", str),
    "f_min_hz": ("run", "f_min_hz", float),
    "f_max_hz": ("run", "f_max_hz", float),
    "n_freq": ("run", "n_freq", int),
    "seed": ("run", "seed", int),
    "n_sites": ("run", "n_sites", int),
    "pulses": ("run", "pulses", int),
    "n_tau": ("run", "n_tau", int),
    "alpha_points": ("run", "alpha_points", int),
    "sensor_decay": ("run", "sensor_decay", bool),
}
_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}
_GEOMETRIES = ("half_space", "slab", "bulk_average")


def _resolve_key(key: str):
    if key in _PLAIN_KEYS:
        return _PLAIN_KEYS[key] + (1.0,)
    for base, (record, name, units) in _UNIT_KEYS.items():
        if key.startswith(base + "_"):
            unit = key[len(base) + 1:]
            if unit in units:
                return record, name, float, units[unit]
    return None


def _parse_lines(text: str):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[a-z][a-z0-9_]*", key) or not value:
            raise ConfigError(f"line {lineno}: malformed entry {raw.strip()!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (lineno, value)
    return entries


def parse_config(text: str):
    """Parse config text into ``(DefectSystemParams, SampleSpec, RunOptions)``."""
    entries = _parse_lines(text)
    if "system" not in entries:
        raise ConfigError("missing required key: system")
    _, system = entries.pop("system")
    base = preset(system)

    values = {"defect": {}, "sample": {}, "run": {}}
    for key, (lineno, raw) in entries.items():
        resolved = _resolve_key(key)
        if resolved is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        record, name, kind, scale = resolved
        try:
            if kind is str:
                value = raw
            elif kind is int:
                value = int(raw)
            elif kind is bool:
                if raw.lower() not in _BOOLS:
                    raise ValueError(raw)
                value = _BOOLS[raw.lower()]
            elif raw.lower() in ("none", "na") and name == "density_ppm":
                value = None
            else:
                value = float(raw) * scale if scale != 1.0 else float(raw)
        except ValueError:
            raise ConfigError(f"line {lineno}: cannot parse value {raw!r} for {key!r}") from None
        values[record][name] = value

    d = values["defect"]
    if "depth" in d:
        if "depth_min" in d or "depth_max" in d:
            raise ConfigError("depth_* conflicts with depth_min_*/depth_max_*")
        d["depth_min"] = d["depth_max"] = d.pop("depth")
    defect = replace(base, **d)

    s = values["sample"]
    kind = s.pop("geometry", "half_space")
    thickness = s.pop("thickness", None)
    if kind not in _GEOMETRIES:
        raise ConfigError(f"sample_geometry must be one of {', '.join(_GEOMETRIES)}")
    if kind == "half_space":
        geometry = HalfSpace()
    elif kind == "slab":
        if thickness is None:
            raise ConfigError("missing required key: sample_thickness_nm (slab geometry)")
        geometry = Slab(thickness)
    else:
        geometry = BulkAverage(defect.depth_min, defect.depth_max, thickness)
    if thickness is not None and kind == "half_space":
        raise ConfigError("sample_thickness_* requires slab or bulk_average geometry")
    sample = SampleSpec(geometry=geometry, **s)

    run = RunOptions(**values["run"])
    return defect, sample, run


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def dump_config(defect: DefectSystemParams, sample: SampleSpec | None = None,
                run: RunOptions | None = None) -> str:
    """Serialize records to config text using SI-suffixed keys.

    Floats are written with ``repr`` so :func:`parse_config` gives back
    bit-identical records.
    """
    if defect.name not in _PRESETS:
        raise ConfigError(f"cannot serialize system {defect.name!r}: not a preset name")
    lines = [f"system = {defect.name}"]
    si = {
        "t2_echo": "t2_echo_s", "t2_max": "t2_max_s", "depth_min": "depth_min_m",
        "depth_max": "depth_max_m", "contrast0": "contrast0_frac",
        "counts_per_defect": "counts_per_defect_hz", "density_ppm": "density_ppm",
        "t_init": "t_init_s", "g_factor": "g_factor", "s_exponent": "s_exponent",
        "p_stretch": "p_stretch", "alpha": "alpha_rad", "rabi_hz": "rabi_hz", "host": "host",
    }
    for f in fields(defect):
        if f.name == "name":
            continue
        value = getattr(defect, f.name)
        lines.append(f"{si[f.name]} = {'none' if value is None else _fmt(value)}")
    if sample is not None:
        geom = sample.geometry
        kind = {HalfSpace: "half_space", Slab: "slab", BulkAverage: "bulk_average"}[type(geom)]
        lines += [
            f"sample_species = {sample.species}",
            f"sample_density_m3 = {_fmt(sample.density)}",
            f"sample_geometry = {kind}",
        ]
        thickness = getattr(geom, "thickness", None) or getattr(geom, "slab_thickness", None)
        if thickness is not None:
            lines.append(f"sample_thickness_m = {_fmt(thickness)}")
        lines += [
            f"diffusion_m2_s = {_fmt(sample.diffusion_coeff)}",
            f"t2n_intrinsic_s = {_fmt(sample.t2n_intrinsic)}",
            f"bias_field_t = {_fmt(sample.bias_field)}",
        ]
    if run is not None:
        for f in fields(run):
            lines.append(f"{f.name} = {_fmt(getattr(run, f.name))}")
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
