"""Static SVG plot emission.

Hand-rolled SVG so plots carry no rendering dependency and the output is a
pure function of the input data (byte-identical across runs). Supports line
plots with optional log-scale y and legends, and decimated scatter plots.
"""

import math
from pathlib import Path

import numpy as np

WIDTH = 720
HEIGHT = 480
MARGIN_LEFT = 72
MARGIN_RIGHT = 24
MARGIN_TOP = 40
MARGIN_BOTTOM = 56

PALETTE = ("#1f6f8b", "#d1495b", "#66a182", "#edae49", "#574ae2",
           "#8d6a9f", "#2e4057", "#c03221")

MAX_SCATTER_POINTS = 50000


def _ticks(lo: float, hi: float, target: int = 6):
    """Round tick positions covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Canvas:
    def __init__(self, title, xlabel, ylabel, x_range, y_range, log_y=False):
        self.parts = []
        self.log_y = log_y
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">'
        )
        self.parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
        if title:
            self.parts.append(
                f'<text x="{WIDTH / 2:.1f}" y="24" font-family="sans-serif" font-size="15" '
                f'text-anchor="middle">{title}</text>'
            )
        if xlabel:
            self.parts.append(
                f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" font-family="sans-serif" '
                f'font-size="12" text-anchor="middle">{xlabel}</text>'
            )
        if ylabel:
            y_mid = (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2
            self.parts.append(
                f'<text x="16" y="{y_mid:.1f}" font-family="sans-serif" font-size="12" '
                f'text-anchor="middle" transform="rotate(-90 16 {y_mid:.1f})">{ylabel}</text>'
            )

    def x_pix(self, v: float) -> float:
        span = self.x_hi - self.x_lo
        frac = (v - self.x_lo) / span if span else 0.5
        return MARGIN_LEFT + frac * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def y_pix(self, v: float) -> float:
        span = self.y_hi - self.y_lo
        frac = (v - self.y_lo) / span if span else 0.5
        return HEIGHT - MARGIN_BOTTOM - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)

    def axes(self):
        x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
        x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
        self.parts.append(
            f'<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" stroke="black" fill="none"/>'
        )
        for v in _ticks(self.x_lo, self.x_hi):
            px = self.x_pix(v)
            self.parts.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" stroke="black"/>')
            self.parts.append(
                f'<text x="{px:.2f}" y="{y0 + 18}" font-family="sans-serif" font-size="11" '
                f'text-anchor="middle">{_fmt(v)}</text>'
            )
        for v in _ticks(self.y_lo, self.y_hi):
            py = self.y_pix(v)
            label = _fmt(10.0 ** v) if self.log_y else _fmt(v)
            self.parts.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
            self.parts.append(
                f'<text x="{x0 - 8}" y="{py + 4:.2f}" font-family="sans-serif" font-size="11" '
                f'text-anchor="end">{label}</text>'
            )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot(curves, path, *, title="", xlabel="", ylabel="", log_y=False) -> None:
    """Write a polyline plot. ``curves`` is a list of ``(label, x, y)``.

    With ``log_y`` the y values must be positive and are drawn on a log10
    axis. The y range is padded by 5%. Raises ``ValueError`` (writing no
    file) when no curve has data.
    """
    prepared = []
    for label, x, y in curves:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size != y.size:
            raise ValueError(f"curve {label!r}: x and y lengths differ")
        if x.size:
            prepared.append((str(label), x, y))
    if not prepared:
        raise ValueError("no data to plot")
    if log_y:
        if any((y <= 0).any() for _, _, y in prepared):
            raise ValueError("log-scale plot requires positive y values")
        prepared = [(lab, x, np.log10(y)) for lab, x, y in prepared]

    x_lo = min(float(x.min()) for _, x, _ in prepared)
    x_hi = max(float(x.max()) for _, x, _ in prepared)
    y_lo = min(float(y.min()) for _, _, y in prepared)
    y_hi = max(float(y.max()) for _, _, y in prepared)
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 0.05 * max(abs(y_hi), 1.0)
    canvas = _Canvas(title, xlabel, ylabel, (x_lo, x_hi), (y_lo - pad, y_hi + pad), log_y)
    canvas.axes()
    for i, (label, x, y) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{canvas.x_pix(a):.2f},{canvas.y_pix(b):.2f}" for a, b in zip(x, y))
        canvas.parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.2"/>'
        )
        if label:
            ly = MARGIN_TOP + 14 + 16 * i
            lx = WIDTH - MARGIN_RIGHT - 150
            canvas.parts.append(
                f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            canvas.parts.append(
                f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" font-size="11">{label}</text>'
            )
    Path(path).write_text(canvas.render())


def scatter_plot(points, path, *, title="", xlabel="", ylabel="",
                 max_points=MAX_SCATTER_POINTS) -> None:
    """Write a scatter plot of ``(n, 2)`` points, keeping every k-th point so
    at most ``max_points`` marks are emitted."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("no data to plot")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got {pts.shape}")
    if pts.shape[0] > max_points:
        stride = int(math.ceil(pts.shape[0] / max_points))
        pts = pts[::stride]
    x_lo, x_hi = float(pts[:, 0].min()), float(pts[:, 0].max())
    y_lo, y_hi = float(pts[:, 1].min()), float(pts[:, 1].max())
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 1.0
    canvas = _Canvas(title, xlabel, ylabel, (x_lo, x_hi), (y_lo - pad, y_hi + pad))
    canvas.axes()
    marks = "".join(
        f'<circle cx="{canvas.x_pix(a):.2f}" cy="{canvas.y_pix(b):.2f}" r="0.6" fill="#2e6045"/>'
        for a, b in pts
    )
    canvas.parts.append(f"<g>{marks}</g>")
    Path(path).write_text(canvas.render())
