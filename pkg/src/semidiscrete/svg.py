"""Minimal SVG scatter figures of partitions (no plotting dependency)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cost import CenterSet
from .errors import DimensionError, ValidationError
from .measures import DiscreteMeasure
from .partition import Partition

SIDES = ("source", "target", "pullback")


@dataclass(frozen=True)
class FigureSpec:
    sides: tuple = ("source", "target", "pullback")
    palette_seed: int = 0
    size: int = 480
    marker: float = 0.0        # square side in px; 0 picks one from atom spacing

    def __post_init__(self):
        for s in self.sides:
            if s not in SIDES:
                raise ValidationError(f"unknown figure side {s!r}")
        if self.size < 16:
            raise ValidationError("figure size too small")


def palette(m: int, seed: int = 0) -> list[str]:
    """``m`` colors spread around the hue circle in a seeded order.

    Hue order comes from a seeded permutation so neighbouring cell indices
    do not get neighbouring hues. The null cell of a hedonic partition is grey.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(m) if m else np.zeros(0, dtype=int)
    out = []
    for j in range(m):
        h = order[j] / max(m, 1)
        r, g, b = _hsv(h, 0.65, 0.9)
        out.append(f"#{r:02x}{g:02x}{b:02x}")
    return out


def _hsv(h: float, s: float, v: float) -> tuple[int, int, int]:
    i = int(h * 6) % 6
    f = h * 6 - int(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return tuple(int(round(255 * c)) for c in rgb)


def pullback_labels(partB: Partition) -> np.ndarray:
    """Target cells carried back to source indices.

    The target measure is the image of the source under a map applied atom by
    atom, so target atom ``k`` is the image of source atom ``k``.
    """
    return np.asarray(partB.labels).copy()


def disagreement(partA: Partition, partB: Partition) -> float:
    """Fraction of source atoms whose own cell differs from their image's cell."""
    a = np.asarray(partA.labels)
    b = pullback_labels(partB)
    if a.shape != b.shape:
        raise DimensionError("pullback needs source and target of equal size")
    return float(np.count_nonzero(a != b)) / a.size


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def render(points: np.ndarray, labels: np.ndarray, Z: Optional[CenterSet], m: int,
           spec: FigureSpec = FigureSpec()) -> str:
    """One figure: atoms as squares colored by cell, centers as crosses."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DimensionError("figures need 2-D points")
    if Z is not None and Z.dim != 2:
        raise DimensionError("figures need 2-D centers")
    allpts = points if Z is None else np.vstack([points, Z.centers])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = float(max((hi - lo).max(), 1e-12))
    pad = 0.05 * span
    S = spec.size
    scale = S / (span + 2 * pad)

    def tx(p):
        # y axis points up
        return (p[0] - lo[0] + pad) * scale, S - (p[1] - lo[1] + pad) * scale

    side = spec.marker or max(2.0, 0.6 * S / max(np.sqrt(points.shape[0]), 1.0))
    colors = palette(m, spec.palette_seed)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{S}" height="{S}" '
           f'viewBox="0 0 {S} {S}">',
           f'<rect width="{S}" height="{S}" fill="#ffffff"/>']
    for p, lab in zip(points, labels):
        x, y = tx(p)
        c = colors[lab] if lab < m else "#b0b0b0"
        out.append(f'<rect x="{_fmt(x - side / 2)}" y="{_fmt(y - side / 2)}" '
                   f'width="{_fmt(side)}" height="{_fmt(side)}" fill="{c}"/>')
    if Z is not None:
        r = max(4.0, side)
        for z in Z.centers:
            x, y = tx(z)
            out.append(f'<path d="M{_fmt(x - r)} {_fmt(y)}H{_fmt(x + r)}'
                       f'M{_fmt(x)} {_fmt(y - r)}V{_fmt(y + r)}" '
                       f'stroke="#000000" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_partitions(mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
                      partA: Partition, partB: Partition,
                      spec: FigureSpec = FigureSpec()) -> dict[str, str]:
    """SVG text per requested side, keyed by side name."""
    if mu.dim != 2 or nu.dim != 2:
        raise DimensionError("figures need 2-D measures")
    figs = {}
    for s in spec.sides:
        if s == "source":
            figs[s] = render(mu.points, partA.labels, Z, Z.m, spec)
        elif s == "target":
            figs[s] = render(nu.points, partB.labels, Z, Z.m, spec)
        else:
            if mu.n != nu.n:
                raise DimensionError("pullback needs source and target of equal size")
            figs[s] = render(mu.points, pullback_labels(partB), Z, Z.m, spec)
    return figs
