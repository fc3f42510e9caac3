"""CSV tables, JSON fit records, and dependency-free SVG plots.

Everything written here is deterministic for identical inputs: no
timestamps, no locale formatting, floats serialized with shortest
round-trip repr in CSV/JSON and fixed precision in SVG coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .estimator import PowerLawFit
from .stats import BinStats

REPORT_SCHEMA_VERSION = 1

FIT_CSV_HEADER = "window,k,se_k,lambda,se_lambda"
BIN_CSV_HEADER = "z_lo,z_hi,z_center,count,kurtosis"


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips; integers stay integral."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def window_label(z_lo: float, z_hi: float) -> str:
    return f"{z_lo:.2f}-{z_hi:.2f} m"


def fit_csv(fits: list[PowerLawFit]) -> str:
    lines = [FIT_CSV_HEADER]
    for f in fits:
        lines.append(
            ",".join(
                [
                    window_label(*f.data_range),
                    _fmt(f.scale),
                    _fmt(f.se_scale),
                    _fmt(f.exponent),
                    _fmt(f.se_exponent),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def bin_csv(bins: list[BinStats]) -> str:
    lines = [BIN_CSV_HEADER]
    for b in bins:
        lines.append(
            ",".join(
                [_fmt(b.z_lo), _fmt(b.z_hi), _fmt(b.center), str(b.count), _fmt(b.kurtosis)]
            )
        )
    return "\n".join(lines) + "\n"


def curve_csv(z, columns: dict[str, np.ndarray]) -> str:
    """Generic (z, named columns) table, e.g. fitted or baseline curves."""
    names = list(columns)
    lines = [",".join(["z"] + names)]
    for i, zi in enumerate(np.asarray(z, dtype=float)):
        lines.append(",".join([_fmt(zi)] + [_fmt(columns[n][i]) for n in names]))
    return "\n".join(lines) + "\n"


def fit_record(
    fits: list[PowerLawFit],
    dataset_hash: str = "",
    config: dict | None = None,
) -> str:
    """Versioned JSON record of one or more fits."""
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool": "stereonoise",
        "tool_version": __version__,
        "dataset_sha256": dataset_hash,
        "config": config or {},
        "fits": [
            {
                "window_lo_m": f.data_range[0],
                "window_hi_m": f.data_range[1],
                "k": f.scale,
                "se_k": f.se_scale,
                "lambda": f.exponent,
                "se_lambda": f.se_exponent,
                "log_likelihood": f.log_likelihood,
                "n_samples": f.n_samples,
                "converged": f.converged,
            }
            for f in fits
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# SVG plotting

_WIDTH, _HEIGHT = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 55  # margins
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#7f7f7f", "#ff7f0e")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    kind: str = "line"  # "line" | "points"
    color: str | None = None


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def svg_plot(
    series: list[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    xlim: tuple[float, float] | None = None,
    ylim: tuple[float, float] | None = None,
) -> str:
    """Render a small scatter/line chart as standalone SVG text."""
    finite = [
        (np.asarray(s.x, float), np.asarray(s.y, float)) for s in series
    ]
    xs = np.concatenate([x[np.isfinite(x) & np.isfinite(y)] for x, y in finite]) if finite else np.array([0.0])
    ys = np.concatenate([y[np.isfinite(x) & np.isfinite(y)] for x, y in finite]) if finite else np.array([0.0])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x_lo, x_hi = xlim if xlim else (float(xs.min()), float(xs.max()))
    y_lo, y_hi = ylim if ylim else (float(ys.min()), float(ys.max()))
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad_y = 0.05 * (y_hi - y_lo)
    if ylim is None:
        y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    px_w = _WIDTH - _ML - _MR
    px_h = _HEIGHT - _MT - _MB

    def to_px(x, y):
        sx = _ML + (x - x_lo) / (x_hi - x_lo) * px_w
        sy = _HEIGHT - _MB - (y - y_lo) / (y_hi - y_lo) * px_h
        return sx, sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes frame
    out.append(
        f'<rect x="{_ML}" y="{_MT}" width="{px_w}" height="{px_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    )
    for t in _ticks(x_lo, x_hi):
        sx, _ = to_px(t, y_lo)
        out.append(
            f'<line x1="{sx:.2f}" y1="{_HEIGHT - _MB}" x2="{sx:.2f}" '
            f'y2="{_HEIGHT - _MB + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{sx:.2f}" y="{_HEIGHT - _MB + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        _, sy = to_px(x_lo, t)
        out.append(
            f'<line x1="{_ML - 5}" y1="{sy:.2f}" x2="{_ML}" y2="{sy:.2f}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_ML - 8}" y="{sy + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{t:g}</text>'
        )
    out.append(
        f'<text x="{_ML + px_w / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{xlabel}</text>'
    )
    out.append(
        f'<text x="18" y="{_MT + px_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_MT + px_h / 2:.1f})">{ylabel}</text>'
    )

    for i, s in enumerate(series):
        color = s.color or _COLORS[i % len(_COLORS)]
        x = np.asarray(s.x, float)
        y = np.asarray(s.y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = x[ok], y[ok]
        if s.kind == "line":
            pts = " ".join(f"{to_px(a, b)[0]:.2f},{to_px(a, b)[1]:.2f}" for a, b in zip(x, y))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        else:
            for a, b in zip(x, y):
                sx, sy = to_px(a, b)
                out.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="2" fill="{color}"/>')
        if s.label:
            ly = _MT + 16 + 16 * i
            out.append(
                f'<line x1="{_ML + 8}" y1="{ly - 4}" x2="{_ML + 28}" y2="{ly - 4}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            out.append(
                f'<text x="{_ML + 33}" y="{ly}" font-family="sans-serif" '
                f'font-size="12">{s.label}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path: Path, content: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)
