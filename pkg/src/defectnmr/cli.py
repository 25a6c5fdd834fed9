"""Command-line front end.

Each subcommand reads an optional config file, runs one computation and
writes CSV (plus optional SVG) into ``--out`` together with a JSON run
manifest. Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import backaction as ba
from . import diffusion as df
from . import fewspin as fs
from . import figures
from .geometry import geometry_table
from .output import RunManifest, emit_csv, emit_svg
from .params import (BACKACTION_SITES_FULL, ConfigError, RunOptions, dump_config,
                     parse_config, preset)
from .sensitivity import default_frequency_grid, sweep_sensitivity
from .snr import sweep_snr

DEFAULT_SYSTEM = "vb_aggregated"
SUBCOMMANDS = ("sensitivity", "snr", "geometry", "backaction", "fewspin", "lineshape", "figure")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# config


_FEWSPIN_PREFIXES = ("nucleus_", "defect_", "j_hz_", "scan_")
_FEWSPIN_KEYS = ("m_s", "move", "pseudo_secular", "defect_axis")


def _is_fewspin_key(key):
    return key.startswith(_FEWSPIN_PREFIXES) or key in _FEWSPIN_KEYS


def _split_config(text):
    """Separate few-spin keys from the record keys understood by parse_config."""
    main, extra = [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        key = line.split("=", 1)[0].strip() if "=" in line else ""
        if key and _is_fewspin_key(key):
            if key in extra:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            extra[key] = (lineno, line.split("=", 1)[1].strip())
            main.append("")
        else:
            main.append(raw)
    return "\n".join(main), extra


def _load(args, default_system=DEFAULT_SYSTEM):
    """Return (defect, sample, run, fewspin_keys, snapshot_text)."""
    text = ""
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"file not found: {path}")
        text = path.read_text(encoding="utf-8")
    main, extra = _split_config(text)
    if not any(ln.split("#", 1)[0].strip().startswith("system") for ln in main.splitlines()):
        # appended so that line numbers in error messages match the file
        main += f"\nsystem = {getattr(args, 'system', None) or default_system}\n"
    defect, sample, run = parse_config(main)
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    snapshot = dump_config(defect, sample, run)
    if extra:
        snapshot += "".join(f"{k} = {v}\n" for k, (_, v) in extra.items())
    return defect, sample, run, extra, snapshot


def _floats(lineno, key, raw, n=None):
    try:
        vals = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse numbers in {key!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"line {lineno}: {key!r} needs {n} numbers, got {len(vals)}")
    return vals


def fewspin_from_keys(extra, defect):
    """Build (SpinSystem, scan settings) from inline few-spin config keys.

    ``nucleus_<i> = species, x_nm, y_nm, z_nm, shift_ppm``,
    ``defect_<i> = x_nm, y_nm, z_nm``, ``j_hz_<i>_<j> = J``,
    ``scan_axis``, ``scan_start_nm``, ``scan_stop_nm``, ``scan_points``,
    ``m_s`` (comma list), ``move`` (nuclei or defects), ``pseudo_secular``.
    With no nucleus keys the single-defect proton system is used.
    """
    nuclei, defects, couplings = {}, {}, {}
    scan = {"axis": "z", "start": 0.5e-9, "stop": 20e-9, "points": 40, "m_s": (-1, 0, 1),
            "move": "nuclei"}
    pseudo = True
    axis = (0.0, 0.0, 1.0)
    for key, (lineno, raw) in sorted(extra.items(), key=lambda kv: kv[1][0]):
        if key.startswith("nucleus_"):
            parts = [p for p in raw.replace(",", " ").split()]
            if len(parts) not in (4, 5):
                raise ConfigError(f"line {lineno}: {key} = species, x_nm, y_nm, z_nm[, shift_ppm]")
            xyz = _floats(lineno, key, " ".join(parts[1:4]), 3)
            shift = _floats(lineno, key, parts[4], 1)[0] if len(parts) == 5 else 0.0
            nuclei[key[8:]] = fs.Nucleus(parts[0], tuple(v * 1e-9 for v in xyz), shift)
        elif key == "defect_axis":
            axis = tuple(_floats(lineno, key, raw, 3))
        elif key.startswith("defect_"):
            defects[key[7:]] = tuple(v * 1e-9 for v in _floats(lineno, key, raw, 3))
        elif key.startswith("j_hz_"):
            ids = key[5:].split("_")
            if len(ids) != 2:
                raise ConfigError(f"line {lineno}: scalar coupling key is j_hz_<i>_<j>")
            couplings[tuple(ids)] = _floats(lineno, key, raw, 1)[0]
        elif key == "scan_axis":
            scan["axis"] = raw
        elif key in ("scan_start_nm", "scan_stop_nm"):
            scan[key[5:-3]] = _floats(lineno, key, raw, 1)[0] * 1e-9
        elif key == "scan_points":
            scan["points"] = int(_floats(lineno, key, raw, 1)[0])
        elif key == "m_s":
            scan["m_s"] = tuple(int(v) for v in _floats(lineno, key, raw))
        elif key == "move":
            if raw not in ("nuclei", "defects"):
                raise ConfigError(f"line {lineno}: move must be 'nuclei' or 'defects'")
            scan["move"] = raw
        elif key == "pseudo_secular":
            pseudo = raw.lower() in ("1", "true", "yes")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if not nuclei:
        if couplings:
            raise ConfigError("j_hz_* keys need nucleus_* keys")
        system = fs.single_defect_system(scan["axis"], g_factor=defect.g_factor,
                                         pseudo_secular=pseudo)
        if defects:
            system = system.with_defects(list(defects.values()))
    else:
        order = list(nuclei)
        index = {name: i for i, name in enumerate(order)}
        try:
            cpl = {(index[a], index[b]): j for (a, b), j in couplings.items()}
        except KeyError as exc:
            raise ConfigError(f"scalar coupling names unknown nucleus {exc.args[0]!r}") from None
        system = fs.SpinSystem(tuple(nuclei[n] for n in order),
                               tuple(defects.values()) or ((0.0, 0.0, 0.0),), axes=(axis,),
                               g_factor=defect.g_factor, couplings=cpl, pseudo_secular=pseudo)
    return system, scan


# --------------------------------------------------------------------------
# subcommands


def _grid(run: RunOptions):
    return default_frequency_grid(run.f_min_hz, run.f_max_hz, run.n_freq)


def _svg_or_none(args, series, path, **style):
    if args.svg:
        return [emit_svg(series, path, **style)]
    return []


def cmd_sensitivity(args, defect, sample, run, extra):
    f = _grid(run)
    pts = sweep_sensitivity(defect, f)
    table = {
        "frequency_hz": f,
        "eta_vol": [p.eta_vol for p in pts],
        "k": [p.k for p in pts],
        "tau_full_s": [p.tau_full for p in pts],
        "tau_effective_s": [p.tau_effective for p in pts],
        "t_r_s": [p.t_r for p in pts],
        "contrast_avg": [p.contrast_avg for p in pts],
        "exp_term": [p.exp_term for p in pts],
        "feasible": [p.feasible for p in pts],
    }
    out = [emit_csv(table, args.out / "sensitivity.csv")]
    eta = np.array(table["eta_vol"])
    ok = np.isfinite(eta)
    if ok.any():
        out += _svg_or_none(args, [(defect.name, f[ok], eta[ok])], args.out / "sensitivity.svg",
                            xlabel="frequency (Hz)", ylabel="eta (T Hz^-1/2 um^3/2)",
                            logx=True, logy=True)
    return out


def cmd_snr(args, defect, sample, run, extra):
    f = _grid(run)
    table = sweep_snr(defect, sample, f)
    out = [emit_csv(table, args.out / "snr.csv")]
    y = np.asarray(table["snr"], dtype=float)
    keep = y > 0
    if keep.any():
        out += _svg_or_none(args, [(defect.name, f[keep], y[keep])], args.out / "snr.svg",
                            xlabel="frequency (Hz)", ylabel="SNR", logx=True, logy=True)
    return out


def cmd_geometry(args, defect, sample, run, extra):
    table = geometry_table(run.alpha_points)
    out = [emit_csv(table, args.out / "geometry.csv")]
    out += _svg_or_none(args, [(name, table["alpha_deg"], table[name])
                               for name in ("g_transverse", "g_longitudinal", "g_statistical")],
                        args.out / "geometry.svg", xlabel="alpha (deg)", ylabel="G")
    return out


def cmd_backaction(args, defect, sample, run, extra):
    depth = defect.depth_min
    layout = ba.DefectLayout.single(depth, defect.alpha, defect.g_factor)
    n_sites = BACKACTION_SITES_FULL if args.full else run.n_sites
    lattice = ba.SampleLattice(depth=depth, density=sample.density, species=sample.species,
                               n_sites=n_sites, jitter_seed=run.seed or None)
    sp = ba.lineshape(layout, lattice, threads=args.threads)
    out = [emit_csv({"freq_hz": sp.freq_grid, "amplitude": sp.amplitude},
                    args.out / "backaction_spectrum.csv"),
           emit_csv({"depth_m": [depth], "fwhm_hz": [sp.fwhm], "mean_shift_hz": [sp.mean_shift]},
                    args.out / "backaction_summary.csv")]
    out += _svg_or_none(args, [(defect.name, sp.freq_grid, sp.amplitude)],
                        args.out / "backaction_spectrum.svg", xlabel="shift (Hz)",
                        ylabel="amplitude")
    return out


def cmd_fewspin(args, defect, sample, run, extra):
    system, scan = fewspin_from_keys(extra, defect)
    if scan["move"] == "defects":
        ms = scan["m_s"][0] if len(scan["m_s"]) == 1 else scan["m_s"]
        table = fs.multi_defect_shift(system, scan["axis"], scan["start"], scan["stop"],
                                      scan["points"], m_s=ms, threads=args.threads)
    else:
        table = fs.shift_vs_distance(system, scan["axis"], scan["start"], scan["stop"],
                                     scan["points"], ms_values=scan["m_s"], threads=args.threads)
    out = [emit_csv(table, args.out / "fewspin.csv")]
    pos = np.array(table["position_m"])
    peak = np.array(table["peak_hz"])
    ms = np.array(table["m_s"])
    series = [(f"m_s={m:+d}", pos[ms == m], peak[ms == m]) for m in sorted(set(ms.tolist()))]
    if series:
        out += _svg_or_none(args, series, args.out / "fewspin.svg",
                            xlabel=f"{scan['axis']} (m)", ylabel="peak (Hz)")
    return out


def cmd_lineshape(args, defect, sample, run, extra):
    larmor = sample.gamma * sample.bias_field / (2 * math.pi)
    tau = df.tau_grid_around(larmor, run.pulses, run.n_tau)
    cfg = df.LineshapeConfig(defect, sample, run.pulses, tau, sensor_decay=run.sensor_decay)
    curve = df.contrast_curve(cfg)
    table = {"tau_s": curve.tau, "contrast": curve.contrast,
             "equivalent_freq_hz": curve.equivalent_freq}
    out = [emit_csv(table, args.out / "lineshape.csv")]
    out += _svg_or_none(args, [(defect.name, curve.equivalent_freq, curve.contrast)],
                        args.out / "lineshape.svg", xlabel="equivalent frequency (Hz)",
                        ylabel="contrast")
    return out


def cmd_figure(args, defect, sample, run, extra):
    fig = figures.run_figure(args.figure_id, run, full=args.full, threads=args.threads)
    out = [emit_csv(cols, args.out / f"{name}.csv") for name, cols in fig.tables.items()]
    if args.svg:
        for name, series, style in fig.plots:
            if series:
                out.append(emit_svg(series, args.out / f"{name}.svg", title=name, **style))
    return out


COMMANDS = {
    "sensitivity": cmd_sensitivity, "snr": cmd_snr, "geometry": cmd_geometry,
    "backaction": cmd_backaction, "fewspin": cmd_fewspin, "lineshape": cmd_lineshape,
    "figure": cmd_figure,
}


# --------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return v


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--threads", metavar="N", type=_positive_int, default=None,
                        help="worker threads (default: available CPUs)")
    common.add_argument("--seed", metavar="N", type=_seed, default=None,
                        help="seed for lattice jitter (0 = regular lattice)")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--full", action="store_true",
                        help=f"large back-action runs ({BACKACTION_SITES_FULL:.1e} sites)")
    common.add_argument("--system", metavar="NAME", default=None,
                        help=f"preset when the config has no 'system' key "
                             f"(default {DEFAULT_SYSTEM})")

    parser = _Parser(prog="defectnmr", description="Defect-based nanoscale NMR model toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    helps = {
        "sensitivity": "AC sensitivity sweep over frequency",
        "snr": "single-shot SNR sweep over frequency",
        "geometry": "geometry factors over the polar angle",
        "backaction": "dipolar back-action lineshape of a single defect",
        "fewspin": "exact few-spin FID peak positions versus distance",
        "lineshape": "XY8 contrast curve of a statistically polarized sample",
        "figure": "regenerate the data behind one figure",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "figure":
            p.add_argument("figure_id", choices=figures.FIGURE_IDS, metavar="ID",
                           help="one of " + ", ".join(figures.FIGURE_IDS))
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            raise UsageError(parser.format_usage().rstrip())
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    try:
        if args.system is not None:
            preset(args.system)
        defect, sample, run, extra, snapshot = _load(args)
        if extra and args.command != "fewspin":
            lineno = min(v[0] for v in extra.values())
            raise ConfigError(f"line {lineno}: few-spin keys are only valid for 'fewspin'")
        args.out = Path(args.out)
        args.out.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(args.command if args.command != "figure"
                               else f"figure {args.figure_id}",
                               {"text": snapshot, "full": args.full, "threads": args.threads},
                               seed=run.seed)
        manifest.outputs = COMMANDS[args.command](args, defect, sample, run, extra)
        stem = args.command if args.command != "figure" else f"figure_{args.figure_id}"
        manifest.finish(args.out / f"{stem}_manifest.json")
    except (ConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
