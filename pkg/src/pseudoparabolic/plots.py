"""Minimal SVG line plots (trajectory curve against a theorem envelope)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
PAD_L, PAD_R, PAD_T, PAD_B = 70, 20, 30, 45
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def svg_lines(series, title: str = "", xlabel: str = "t", ylabel: str = "", logy: bool = True) -> str:
    """``series`` is a list of ``(label, x, y)``; nonpositive y is dropped on log axes."""
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logy:
            keep &= y > 0
        if keep.sum() >= 1:
            cleaned.append((label, x[keep], np.log10(y[keep]) if logy else y[keep]))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
             f'<text x="{WIDTH / 2}" y="18" text-anchor="middle">{escape(title)}</text>']
    if not cleaned:
        parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle">no data</text></svg>')
        return "\n".join(parts)
    xs = np.concatenate([c[1] for c in cleaned])
    ys = np.concatenate([c[2] for c in cleaned])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y0 + 0.5
    pw, ph = WIDTH - PAD_L - PAD_R, HEIGHT - PAD_T - PAD_B

    def px(x):
        return PAD_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return PAD_T + (y1 - y) / (y1 - y0) * ph

    parts.append(f'<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for xv in _ticks(x0, x1):
        parts.append(f'<text x="{px(xv):.1f}" y="{HEIGHT - PAD_B + 16}" text-anchor="middle">{xv:.3g}</text>')
    for yv in _ticks(y0, y1):
        lab = f"1e{yv:.1f}" if logy else f"{yv:.3g}"
        parts.append(f'<text x="{PAD_L - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{lab}</text>')
        parts.append(f'<line x1="{PAD_L}" x2="{PAD_L + pw}" y1="{py(yv):.1f}" y2="{py(yv):.1f}" stroke="#eee"/>')
    parts.append(f'<text x="{PAD_L + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="14" y="{PAD_T + ph / 2}" transform="rotate(-90 14 {PAD_T + ph / 2})" '
                 f'text-anchor="middle">{escape(ylabel + (" (log10)" if logy else ""))}</text>')
    for k, (label, x, y) in enumerate(cleaned):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{PAD_L + 8}" y="{PAD_T + 16 + 15 * k}" fill="{color}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path, series, **kw) -> None:
    Path(path).write_text(svg_lines(series, **kw), encoding="utf-8")


def envelope_plots(directory, report) -> list:
    """One SVG per applicable check that recorded envelope samples."""
    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for chk in report.checks:
        samples = chk.details.get("samples") if chk.applicable else None
        if not samples:
            continue
        arr = np.array(samples, float)
        logy = bool(np.all(arr[:, 1:] > 0))
        path = d / f"{chk.name}.svg"
        write_svg(path, [("trajectory", arr[:, 0], arr[:, 1]), ("envelope", arr[:, 0], arr[:, 2])],
                  title=f"{chk.name} ({'pass' if chk.passed else 'FAIL'}, margin {chk.margin:.3g})",
                  ylabel="value", logy=logy)
        out.append(str(path))
    return out
