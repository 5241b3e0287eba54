"""Minimal SVG line and heat-map plots, written without a plotting library."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=30, bottom=50)
PALETTE = ("#1f4e99", "#b22222", "#2e8b57", "#8b5a2b", "#6a3d9a", "#444444")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    dashed: bool = False
    color: str | None = None


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(v):
    return f"{v:.3g}"


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1 - (y - self.y0) / (self.y1 - self.y0)) * self.ph

    def axes(self, xlabel, ylabel, title, ytick_fmt=_fmt):
        out = [f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{self.pw}" '
               f'height="{self.ph}" fill="none" stroke="black"/>']
        for t in _nice_ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{x:.1f}" y1="{MARGIN["top"] + self.ph}" x2="{x:.1f}" '
                       f'y2="{MARGIN["top"] + self.ph + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.1f}" y="{MARGIN["top"] + self.ph + 18}" '
                       f'text-anchor="middle" font-size="11">{_fmt(t)}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            y = self.py(t)
            out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.1f}" x2="{MARGIN["left"]}" '
                       f'y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.1f}" text-anchor="end" '
                       f'font-size="11">{escape(ytick_fmt(t))}</text>')
        out.append(f'<text x="{MARGIN["left"] + self.pw / 2:.1f}" y="{HEIGHT - 10}" '
                   f'text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
        out.append(f'<text x="16" y="{MARGIN["top"] + self.ph / 2:.1f}" text-anchor="middle" '
                   f'font-size="13" transform="rotate(-90 16 {MARGIN["top"] + self.ph / 2:.1f})">'
                   f'{escape(ylabel)}</text>')
        out.append(f'<text x="{MARGIN["left"] + self.pw / 2:.1f}" y="18" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
        return out


def _document(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def line_plot(series: list[Series], xlabel: str, ylabel: str, title: str = "",
              logy: bool = False) -> str:
    """Overlaid curves; NaN values break a curve into segments."""
    ys = []
    for s in series:
        y = np.asarray(s.y, float)
        ys.append(np.log10(np.where(y > 0, y, np.nan)) if logy else y)
    xs_all = np.concatenate([np.asarray(s.x, float) for s in series]) if series else np.array([0, 1])
    ys_all = np.concatenate(ys) if ys else np.array([0, 1])
    ys_all = ys_all[np.isfinite(ys_all)]
    xlim = (float(np.min(xs_all)), float(np.max(xs_all)))
    if xlim[0] == xlim[1]:
        xlim = (xlim[0] - 0.5, xlim[1] + 0.5)
    ylim = (float(ys_all.min()), float(ys_all.max())) if ys_all.size else (0.0, 1.0)
    pad = 0.05 * (ylim[1] - ylim[0] or 1.0)
    frame = _Frame(xlim, (ylim[0] - pad, ylim[1] + pad))
    tick_fmt = (lambda t: f"1e{t:g}") if logy else _fmt
    body = frame.axes(xlabel, f"log10 {ylabel}" if logy else ylabel, title, tick_fmt)

    for k, (s, y) in enumerate(zip(series, ys)):
        color = s.color or PALETTE[k % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        seg = []
        for xv, yv in zip(np.asarray(s.x, float), y):
            if np.isfinite(yv):
                seg.append(f"{frame.px(xv):.2f},{frame.py(yv):.2f}")
            elif seg:
                body.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" '
                            f'stroke-width="1.5"{dash}/>')
                seg = []
        if len(seg) == 1:
            x, y1 = seg[0].split(",")
            body.append(f'<circle cx="{x}" cy="{y1}" r="2.5" fill="{color}"/>')
        elif seg:
            body.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" '
                        f'stroke-width="1.5"{dash}/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 10
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" '
                    f'stroke-width="1.5"{dash}/>')
        body.append(f'<text x="{lx + 30}" y="{ly + 4}" font-size="11">{escape(s.label)}</text>')
    return _document(body)


def _diverging(v):
    """Blue below 0, white at 0, red above; ``v`` clipped to [-1, 1]."""
    v = max(-1.0, min(1.0, v))
    if v < 0:
        r = g = int(255 * (1 + v))
        b = 255
    else:
        r = 255
        g = b = int(255 * (1 - v))
    return f"#{r:02x}{g:02x}{b:02x}"


def heat_map(x: np.ndarray, y: np.ndarray, z: np.ndarray, xlabel: str, ylabel: str,
             title: str = "", zlabel: str = "log10 g2", zlim: float | None = None) -> str:
    """Cell plot of ``z[i, j]`` at ``(x[i], y[j])``; NaN cells are grey.

    Colours diverge around ``z = 0``; ``zlim`` sets the saturation level.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    finite = z[np.isfinite(z)]
    if zlim is None:
        zlim = float(np.max(np.abs(finite))) if finite.size else 1.0
        zlim = zlim or 1.0

    def edges(c):
        if c.size == 1:
            return np.array([c[0] - 0.5, c[0] + 0.5])
        mid = 0.5 * (c[1:] + c[:-1])
        return np.concatenate([[2 * c[0] - mid[0]], mid, [2 * c[-1] - mid[-1]]])

    ex, ey = edges(x), edges(y)
    frame = _Frame((ex[0], ex[-1]), (ey[0], ey[-1]))
    body = []
    for i in range(x.size):
        for j in range(y.size):
            v = z[i, j]
            color = "#bbbbbb" if not np.isfinite(v) else _diverging(v / zlim)
            x0, x1 = frame.px(ex[i]), frame.px(ex[i + 1])
            y0, y1 = frame.py(ey[j + 1]), frame.py(ey[j])
            body.append(f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0 + 0.3:.2f}" '
                        f'height="{y1 - y0 + 0.3:.2f}" fill="{color}"/>')
    body.extend(frame.axes(xlabel, ylabel, title))

    # colour bar
    bx = WIDTH - MARGIN["right"] + 30
    steps = 40
    bh = frame.ph / steps
    for k in range(steps):
        v = 1 - 2 * (k + 0.5) / steps
        body.append(f'<rect x="{bx}" y="{MARGIN["top"] + k * bh:.2f}" width="18" '
                    f'height="{bh + 0.3:.2f}" fill="{_diverging(v)}"/>')
    for v, label in ((1, f"{zlim:.2g}"), (0, "0"), (-1, f"{-zlim:.2g}")):
        yy = MARGIN["top"] + (1 - v) / 2 * frame.ph
        body.append(f'<text x="{bx + 24}" y="{yy + 4:.1f}" font-size="11">{label}</text>')
    body.append(f'<text x="{bx}" y="{MARGIN["top"] + frame.ph + 18}" font-size="11">'
                f'{escape(zlabel)}</text>')
    return _document(body)
