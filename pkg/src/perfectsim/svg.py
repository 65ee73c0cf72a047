"""Minimal standalone SVG plots: scatter plots and line plots with a few styles."""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["scatter_svg", "line_svg"]

W, H, PAD = 480, 400, 48

_STYLES = {
    "solid": "",
    "dashed": ' stroke-dasharray="6,4"',
    "dotted": ' stroke-dasharray="2,3"',
}


def _f(v):
    return f"{v:.2f}"


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return PAD + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, y):
        return H - PAD - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)


def _axes(fr, xlabel, ylabel, title):
    out = [
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
    ]
    for x in np.linspace(fr.x0, fr.x1, 5):
        out.append(f'<text x="{_f(fr.px(x))}" y="{H - PAD + 16}" font-size="10" text-anchor="middle">{x:.3g}</text>')
    for y in np.linspace(fr.y0, fr.y1, 5):
        out.append(f'<text x="{PAD - 4}" y="{_f(fr.py(y) + 3)}" font-size="10" text-anchor="end">{y:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{W / 2}" y="{H - 8}" font-size="12" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="12" y="{H / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 12 {H / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{W / 2}" y="20" font-size="13" text-anchor="middle">{title}</text>')
    return out


def _write(path, body):
    doc = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">\n'
           + "\n".join(body) + "\n</svg>\n")
    Path(path).write_text(doc)


def scatter_svg(path, points, window, title=""):
    x0, y0, x1, y1 = window
    fr = _Frame((x0, x1), (y0, y1))
    body = _axes(fr, "x", "y", title)
    pts = np.asarray(points, float).reshape(-1, 2)
    for x, y in zip(fr.px(pts[:, 0]), fr.py(pts[:, 1])):
        body.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="2.5" fill="black"/>')
    _write(path, body)


def line_svg(path, series, xlabel="", ylabel="", title=""):
    """``series`` is a list of (x, y, style, colour, label); style in solid/dashed/dotted."""
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = ys[np.isfinite(ys)]
    fr = _Frame((xs.min(), xs.max()), (ys.min(), ys.max()))
    body = _axes(fr, xlabel, ylabel, title)
    for n, (x, y, style, colour, label) in enumerate(series):
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(fr.px(x), fr.py(y)))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.2"{_STYLES[style]}/>')
        if label:
            ly = PAD + 14 + 14 * n
            body.append(f'<line x1="{W - PAD - 90}" y1="{ly - 4}" x2="{W - PAD - 70}" y2="{ly - 4}" '
                        f'stroke="{colour}"{_STYLES[style]}/>')
            body.append(f'<text x="{W - PAD - 66}" y="{ly}" font-size="10">{label}</text>')
    _write(path, body)
