"""Dependency-free SVG figures with CSV companions.

Figures use a fixed viewBox so the polyline coordinates of a given input are
stable and can be compared textually. Numbers are written with a fixed
number of decimals for the same reason.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .evaluation import CURVE_COLUMNS, EpochCurve

WIDTH, HEIGHT = 640, 320
MARGIN = 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    if hi == lo:
        # a flat series sits in the middle of the plot
        return np.full(values.shape, (out_lo + out_hi) / 2.0)
    return out_lo + (values - lo) * (out_hi - out_lo) / (hi - lo)


def polyline_points(y, lo: float | None = None, hi: float | None = None, x=None) -> str:
    """The ``points`` attribute of a polyline drawing ``y`` inside the plot frame."""
    y = np.asarray(y, dtype=np.float64)
    lo = float(y.min()) if lo is None else lo
    hi = float(y.max()) if hi is None else hi
    xs = np.arange(y.size, dtype=np.float64) if x is None else np.asarray(x, dtype=np.float64)
    px = _scale(xs, float(xs.min()), float(xs.max()), MARGIN, WIDTH - MARGIN)
    # SVG y grows downwards
    py = _scale(y, lo, hi, HEIGHT - MARGIN, MARGIN)
    return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))


def _svg(body: list[str], title: str | None) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="#bbbbbb"/>',
    ]
    if title:
        head.append(f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axis_labels(lo: float, hi: float) -> list[str]:
    return [
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" font-size="10">{hi:.3g}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN + 4}" text-anchor="end" font-size="10">{lo:.3g}</text>',
    ]


def beat_svg(beat, title: str | None = None, annotations: dict | None = None, template=None) -> str:
    """One beat as a polyline, optionally over a template, with text notes.

    The amplitude axis is scaled to the joint range of beat and template.
    """
    y = np.asarray(beat, dtype=np.float64)
    series = [y] if template is None else [y, np.asarray(template, dtype=np.float64)]
    lo = min(float(s.min()) for s in series)
    hi = max(float(s.max()) for s in series)
    body = _axis_labels(lo, hi)
    for k, s in enumerate(reversed(series)):
        color = COLORS[len(series) - 1 - k]
        dash = ' stroke-dasharray="4 3"' if (template is not None and k == 0) else ""
        body.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{polyline_points(s, lo, hi)}"/>'
        )
    for k, (key, val) in enumerate((annotations or {}).items()):
        text = f"{key} = {val:.4f}" if isinstance(val, float) else f"{key} = {val}"
        body.append(f'<text x="{MARGIN + 6}" y="{MARGIN + 14 + 14 * k}" font-size="11">{escape(text)}</text>')
    return _svg(body, title)


def beat_csv(beat, template=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "amplitude"] + (["template"] if template is not None else []))
    y = np.asarray(beat, dtype=np.float64)
    tpl = None if template is None else np.asarray(template, dtype=np.float64)
    for i, v in enumerate(y):
        w.writerow([i, repr(float(v))] + ([repr(float(tpl[i]))] if tpl is not None else []))
    return buf.getvalue()


def curve_svg(curve: EpochCurve, columns=CURVE_COLUMNS[1:], title: str | None = None) -> str:
    """Each column over epochs, min-max scaled separately (shapes, not levels).

    The legend lists every column's range.
    """
    epochs = np.asarray(curve.epochs, dtype=np.float64)
    body = []
    for k, name in enumerate(columns):
        y = np.asarray(curve.column(name), dtype=np.float64)
        color = COLORS[k % len(COLORS)]
        if y.size == 1:
            y, xs = np.repeat(y, 2), np.array([epochs[0], epochs[0] + 1.0])
        else:
            xs = epochs
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{polyline_points(y, x=xs)}"/>')
        body.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 14 + 14 * k}" text-anchor="end" font-size="11" '
            f'fill="{color}">{escape(name)} [{y.min():.4g}, {y.max():.4g}]</text>'
        )
    body.append(f'<text x="{MARGIN}" y="{HEIGHT - 12}" font-size="10">epoch {epochs.min():.0f}</text>')
    body.append(
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - 12}" text-anchor="end" font-size="10">epoch {epochs.max():.0f}</text>'
    )
    return _svg(body, title)


def write_beat_figure(out_stem, beat, title=None, annotations=None, template=None) -> tuple[Path, Path]:
    """Write ``<stem>.svg`` and ``<stem>.csv``; returns both paths."""
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    svg, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    svg.write_text(beat_svg(beat, title, annotations, template), encoding="utf-8")
    csv_path.write_text(beat_csv(beat, template), encoding="utf-8")
    return svg, csv_path


def write_curve_figure(out_stem, curve: EpochCurve, title=None, columns=CURVE_COLUMNS[1:]) -> tuple[Path, Path]:
    stem = Path(out_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    svg, csv_path = stem.with_suffix(".svg"), stem.with_suffix(".csv")
    svg.write_text(curve_svg(curve, columns, title), encoding="utf-8")
    curve.to_csv(csv_path)
    return svg, csv_path
