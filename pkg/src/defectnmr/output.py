"""CSV, SVG and run-manifest writers.

CSV cells use 9 significant digits in exponent form; integers and strings
are written as-is. SVG output is built from plain string templates so
identical inputs give identical bytes.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.8e}"
    return str(v)


def emit_csv(table, path):
    """Write a column dict (name -> sequence) as CSV with LF line endings."""
    names = list(table)
    cols = [list(table[n]) for n in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"table is not rectangular: column lengths {sorted(lengths)}")
    n_rows = lengths.pop() if lengths else 0
    lines = [",".join(names)]
    for i in range(n_rows):
        lines.append(",".join(format_cell(c[i]) for c in cols))
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """Read a CSV written by :func:`emit_csv`; numeric-looking cells become floats."""
    import csv
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {h: [] for h in header}
    for row in body:
        for h, cell in zip(header, row):
            try:
                out[h].append(float(cell))
            except ValueError:
                out[h].append(cell)
    return out


# --------------------------------------------------------------------------
# SVG

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")
_W, _H = 640, 420
_L, _R, _T, _B = 80, 150, 30, 60


def _fmt(x):
    return f"{x:.2f}"


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(e) for e in range(a, b + 1) if lo - 1e-9 <= e <= hi + 1e-9]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / 4)) if span > 0 else 1.0
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 6:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _tick_label(v, log):
    if log:
        return f"1e{int(v)}"
    return f"{v:.3g}"


def emit_svg(series, path, xlabel="", ylabel="", logx=False, logy=False, title=""):
    """Write line plots as a standalone SVG.

    ``series`` is a list of (label, x, y). Non-finite points are dropped; a
    series with a single point is drawn as a marker.
    """
    if not series:
        raise ValueError("nothing to plot")
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        for flag, arr, axis in ((logx, x, "x"), (logy, y, "y")):
            if flag and np.any(arr[ok] <= 0):
                raise ValueError(f"series {label!r} has non-positive {axis} values on a log axis")
        x, y = x[ok], y[ok]
        if x.size == 0:
            raise ValueError(f"series {label!r} has no finite points")
        cleaned.append((label, np.log10(x) if logx else x, np.log10(y) if logy else y))
    xs = np.concatenate([c[1] for c in cleaned])
    ys = np.concatenate([c[2] for c in cleaned])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _L - _R, _H - _T - _B

    def px(v):
        return _L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _T + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{_L + pw / 2:.2f}" y="18" text-anchor="middle">{_esc(title)}</text>')
    for t in _ticks(x0, x1, logx):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{_T + ph}" x2="{_fmt(px(t))}" '
                   f'y2="{_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{_T + ph + 18}" text-anchor="middle">'
                   f'{_tick_label(t, logx)}</text>')
    for t in _ticks(y0, y1, logy):
        out.append(f'<line x1="{_L - 5}" y1="{_fmt(py(t))}" x2="{_L}" y2="{_fmt(py(t))}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{_L - 8}" y="{_fmt(py(t) + 4)}" text-anchor="end">'
                   f'{_tick_label(t, logy)}</text>')
    out.append(f'<text x="{_L + pw / 2:.2f}" y="{_H - 15}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="18" y="{_T + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_T + ph / 2:.2f})">{_esc(ylabel)}</text>')
    for i, (label, x, y) in enumerate(cleaned):
        color = _COLORS[i % len(_COLORS)]
        if x.size == 1:
            out.append(f'<circle cx="{_fmt(px(x[0]))}" cy="{_fmt(py(y[0]))}" r="3" fill="{color}"/>')
        else:
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _T + 15 + 18 * i
        out.append(f'<line x1="{_W - _R + 10}" y1="{ly}" x2="{_W - _R + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_W - _R + 35}" y="{ly + 4}">{_esc(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# --------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int | None = None
    version: str = __version__
    outputs: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)
    duration_s: float | None = None

    def finish(self, path):
        self.duration_s = time.perf_counter() - self.started
        data = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "tool_version": self.version,
            "wall_clock_s": round(self.duration_s, 3),
            "outputs": [str(p) for p in self.outputs],
        }
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
