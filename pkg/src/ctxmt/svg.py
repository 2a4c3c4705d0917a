"""Minimal deterministic SVG charts (no plotting dependency, stable bytes)."""

from __future__ import annotations

__all__ = ["line_chart", "scatter_chart"]

_WIDTH, _HEIGHT = 640, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60, 160, 30, 50

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _axis_range(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.1 or 0.5
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xlabel: str, ylabel: str, title: str,
                 xs: list[float], ys: list[float]):
        self.parts: list[str] = []
        self.x_lo, self.x_hi = _axis_range(xs)
        self.y_lo, self.y_hi = _axis_range(ys)
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">'
        )
        self.parts.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
        self.parts.append(
            f'<text x="{_WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{title}</text>'
        )
        x0, y0 = _MARGIN_L, _HEIGHT - _MARGIN_B
        x1, y1 = _WIDTH - _MARGIN_R, _MARGIN_T
        self.parts.append(
            f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>'
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>'
        )
        for frac in (0.0, 0.5, 1.0):
            xv = self.x_lo + frac * (self.x_hi - self.x_lo)
            yv = self.y_lo + frac * (self.y_hi - self.y_lo)
            px = self.px(xv)
            py = self.py(yv)
            self.parts.append(
                f'<text x="{_fmt(px)}" y="{y0 + 16}" text-anchor="middle">{_fmt(xv)}</text>'
            )
            self.parts.append(
                f'<text x="{x0 - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_fmt(yv)}</text>'
            )
        self.parts.append(
            f'<text x="{(x0 + x1) // 2}" y="{_HEIGHT - 10}" text-anchor="middle">{xlabel}</text>'
        )
        self.parts.append(
            f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(y0 + y1) // 2})">{ylabel}</text>'
        )

    def px(self, x: float) -> float:
        span = self.x_hi - self.x_lo
        frac = (x - self.x_lo) / span if span else 0.5
        return _MARGIN_L + frac * (_WIDTH - _MARGIN_L - _MARGIN_R)

    def py(self, y: float) -> float:
        span = self.y_hi - self.y_lo
        frac = (y - self.y_lo) / span if span else 0.5
        return (_HEIGHT - _MARGIN_B) - frac * (_HEIGHT - _MARGIN_T - _MARGIN_B)

    def legend(self, index: int, label: str, color: str) -> None:
        lx = _WIDTH - _MARGIN_R + 10
        ly = _MARGIN_T + 14 + 16 * index
        self.parts.append(
            f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" fill="{color}"/>'
            f'<text x="{lx + 14}" y="{ly}">{label}</text>'
        )

    def render(self) -> str:
        return "".join(self.parts) + "</svg>"


def line_chart(
    series: dict[str, list[tuple[float, float]]], xlabel: str, ylabel: str, title: str = ""
) -> str:
    """One polyline per named series of (x, y) points."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    canvas = _Canvas(xlabel, ylabel, title, xs, ys)
    for i, (label, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        if pts:
            coords = " ".join(f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in sorted(pts))
            canvas.parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
            for x, y in pts:
                canvas.parts.append(
                    f'<circle cx="{_fmt(canvas.px(x))}" cy="{_fmt(canvas.py(y))}" r="3" fill="{color}"/>'
                )
        canvas.legend(i, label, color)
    return canvas.render()


def scatter_chart(
    points: dict[str, tuple[float, float]], xlabel: str, ylabel: str, title: str = ""
) -> str:
    """One labeled marker per named point."""
    xs = [x for x, _ in points.values()]
    ys = [y for _, y in points.values()]
    canvas = _Canvas(xlabel, ylabel, title, xs, ys)
    for i, (label, (x, y)) in enumerate(points.items()):
        color = _PALETTE[i % len(_PALETTE)]
        canvas.parts.append(
            f'<circle cx="{_fmt(canvas.px(x))}" cy="{_fmt(canvas.py(y))}" r="4" fill="{color}"/>'
        )
        canvas.legend(i, label, color)
    return canvas.render()
