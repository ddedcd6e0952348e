"""Minimal SVG line plots written without a plotting library."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    dashed: bool = False
    markers: bool = False
    yerr: np.ndarray | None = None


@dataclass
class Arrow:
    x: float
    label: str = ""
    dashed: bool = False
    color: str = "#000000"


@dataclass
class Panel:
    series: list
    xlabel: str
    ylabel: str
    title: str = ""
    logy: bool = False
    arrows: list = field(default_factory=list)
    hlines: list = field(default_factory=list)  # (y, label)


def _nice_ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _panel(p: Panel, x0, y0, w, h, font=12):
    out = []
    xs = [s.x for s in p.series if len(s.x)]
    ys = [s.y for s in p.series if len(s.y)]
    xlo = min(float(np.min(x)) for x in xs)
    xhi = max(float(np.max(x)) for x in xs)
    yall = np.concatenate([np.asarray(y, float) for y in ys] + [np.array([v for v, _ in p.hlines], float)])
    if p.logy:
        pos = yall[yall > 0]
        ylo = math.floor(math.log10(pos.min())) if pos.size else -1
        yhi = math.ceil(math.log10(pos.max())) if pos.size else 0
        if yhi == ylo:
            yhi += 1
        fy = lambda v: y0 + h - (math.log10(max(v, 10**ylo)) - ylo) / (yhi - ylo) * h
        yt = [10.0**e for e in range(int(ylo), int(yhi) + 1)]
    else:
        ylo, yhi = min(0.0, float(yall.min())), float(yall.max())
        if yhi <= ylo:
            yhi = ylo + 1.0
        yhi += 0.05 * (yhi - ylo)
        fy = lambda v: y0 + h - (v - ylo) / (yhi - ylo) * h
        yt = [t for t in _nice_ticks(ylo, yhi) if ylo <= t <= yhi]
    fx = lambda v: x0 + (v - xlo) / (xhi - xlo if xhi > xlo else 1.0) * w

    out.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>')
    for t in _nice_ticks(xlo, xhi):
        if xlo <= t <= xhi:
            X = fx(t)
            out.append(f'<line x1="{X:.2f}" y1="{y0 + h}" x2="{X:.2f}" y2="{y0 + h + 5}" stroke="#000"/>')
            out.append(f'<text x="{X:.2f}" y="{y0 + h + 18}" font-size="{font}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yt:
        Y = fy(t)
        out.append(f'<line x1="{x0 - 5}" y1="{Y:.2f}" x2="{x0}" y2="{Y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{x0 - 8}" y="{Y + 4:.2f}" font-size="{font}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{y0 + h + 36}" font-size="{font + 1}" text-anchor="middle">{escape(p.xlabel)}</text>')
    out.append(
        f'<text x="{x0 - 62}" y="{y0 + h / 2}" font-size="{font + 1}" text-anchor="middle" '
        f'transform="rotate(-90 {x0 - 62} {y0 + h / 2})">{escape(p.ylabel)}</text>'
    )
    if p.title:
        out.append(f'<text x="{x0 + w / 2}" y="{y0 - 10}" font-size="{font + 2}" text-anchor="middle">{escape(p.title)}</text>')

    for y, label in p.hlines:
        Y = fy(y)
        out.append(f'<line x1="{x0}" y1="{Y:.2f}" x2="{x0 + w}" y2="{Y:.2f}" stroke="#777" stroke-dasharray="6,4"/>')
        if label:
            out.append(f'<text x="{x0 + w - 4}" y="{Y - 4:.2f}" font-size="{font - 1}" text-anchor="end" fill="#555">{escape(label)}</text>')
    for i, s in enumerate(p.series):
        c = COLORS[i % len(COLORS)]
        dash = ' stroke-dasharray="5,3"' if s.dashed else ""
        if s.markers:
            for xv, yv in zip(s.x, s.y):
                if p.logy and yv <= 0:
                    continue
                out.append(f'<circle cx="{fx(xv):.2f}" cy="{fy(yv):.2f}" r="2.5" fill="{c}"/>')
            if s.yerr is not None:
                for xv, yv, e in zip(s.x, s.y, s.yerr):
                    lo_, hi_ = yv - e, yv + e
                    if p.logy and lo_ <= 0:
                        lo_ = 10**ylo
                    out.append(f'<line x1="{fx(xv):.2f}" y1="{fy(lo_):.2f}" x2="{fx(xv):.2f}" y2="{fy(hi_):.2f}" stroke="{c}"/>')
        else:
            pts = " ".join(f"{fx(a):.2f},{fy(b):.2f}" for a, b in zip(s.x, s.y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"{dash}/>')
        ly = y0 + 16 + 16 * i
        out.append(f'<line x1="{x0 + 10}" y1="{ly - 4}" x2="{x0 + 34}" y2="{ly - 4}" stroke="{c}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x0 + 40}" y="{ly}" font-size="{font - 1}">{escape(s.label)}</text>')
    for a in p.arrows:
        if not xlo <= a.x <= xhi:
            continue
        X = fx(a.x)
        dash = ' stroke-dasharray="4,3"' if a.dashed else ""
        out.append(f'<line x1="{X:.2f}" y1="{y0 + 6}" x2="{X:.2f}" y2="{y0 + 40}" stroke="{a.color}" stroke-width="1.5"{dash}/>')
        out.append(f'<polygon points="{X - 4:.2f},{y0 + 34} {X + 4:.2f},{y0 + 34} {X:.2f},{y0 + 42}" fill="{a.color}"/>')
        if a.label:
            out.append(f'<text x="{X + 3:.2f}" y="{y0 + 54}" font-size="{font - 2}" fill="{a.color}">{escape(a.label)}</text>')
    return out


def render(main: Panel, inset: Panel | None = None, width=720, height=480) -> str:
    x0, y0, w, h = 90, 40, width - 120, height - 100
    body = _panel(main, x0, y0, w, h)
    if inset is not None:
        iw, ih = w * 0.36, h * 0.36
        ix, iy = x0 + w - iw - 10, y0 + 70
        body.append(f'<rect x="{ix - 60}" y="{iy - 24}" width="{iw + 66}" height="{ih + 68}" fill="#fff" stroke="#ccc"/>')
        body.extend(_panel(inset, ix, iy, iw, ih, font=9))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        '<rect width="100%" height="100%" fill="#fff"/>\n' + "\n".join(body) + "\n</svg>\n"
    )
