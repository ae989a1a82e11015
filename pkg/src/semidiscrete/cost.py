"""Power costs, their two legs through a center, and the routed (semi-discrete) cost."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, ValidationError

TIE_TOL = 1e-12


@dataclass(frozen=True)
class CostSpec:
    """Leg cost ``scale * |a - b|**sigma``.

    With the default ``scale = 2**(sigma - 1)`` the cheapest route through
    an arbitrary center reproduces ``|x - y|**sigma`` exactly.
    """

    sigma: float = 2.0
    scale: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 1):
            raise ValidationError(f"sigma must be >= 1, got {self.sigma}")
        if self.scale is None:
            object.__setattr__(self, "scale", 2.0 ** (self.sigma - 1))
        elif not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"scale must be > 0, got {self.scale}")

    @classmethod
    def from_config(cls, obj: dict) -> "CostSpec":
        scale = obj.get("scale", "auto")
        return cls(float(obj.get("sigma", 2.0)), None if scale == "auto" else float(scale))

    def to_config(self) -> dict:
        return {"sigma": self.sigma, "scale": self.scale}


class CenterSet:
    """The m distinct points every unit of mass is routed through."""

    def __init__(self, centers, dim: Optional[int] = None):
        c = np.array(centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None] if dim in (None, 1) else c[None, :]
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValidationError("a center set needs at least one point")
        if dim is not None and c.shape[1] != dim:
            raise DimensionError(f"centers have dimension {c.shape[1]}, expected {dim}")
        if not np.all(np.isfinite(c)):
            raise ValidationError("non-finite center")
        if np.unique(c, axis=0).shape[0] != c.shape[0]:
            raise ValidationError("centers must be distinct")
        c.setflags(write=False)
        self.centers = c

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __len__(self):
        return self.m

    def __repr__(self):
        return f"CenterSet(m={self.m}, dim={self.dim})"

    def with_center(self, z) -> "CenterSet":
        return CenterSet(np.vstack([self.centers, np.asarray(z, dtype=float)[None, :]]))


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _check_dims(*arrs):
    dims = {a.shape[-1] for a in arrs}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def power_dist(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    """``|a_i - b_j|**sigma`` for all pairs of rows; shape (len(a), len(b)).

    Differences are formed explicitly (no Gram-matrix shortcut) so that
    zero distances come out exactly zero.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    _check_dims(a, b)
    sq = np.zeros((a.shape[0], b.shape[0]))
    for k in range(a.shape[1]):
        diff = a[:, k, None] - b[None, :, k]
        sq += diff * diff
    if sigma == 2.0:
        return sq
    if sigma == 1.0:
        return np.sqrt(sq)
    return sq ** (sigma / 2.0)


def leg_matrix(points: np.ndarray, Z: CenterSet, spec: CostSpec) -> np.ndarray:
    """Leg costs from every atom to every center, shape (n, m)."""
    return spec.scale * power_dist(points, Z.centers, spec.sigma)


def leg1_cost(x, z, spec: CostSpec) -> float:
    x, z = _vec(x), _vec(z)
    _check_dims(x, z)
    return float(leg_matrix(x[None, :], CenterSet(z[None, :]), spec)[0, 0])


def leg2_cost(z, y, spec: CostSpec) -> float:
    return leg1_cost(y, z, spec)


def ground_cost(x, y, spec: CostSpec) -> float:
    """``|x - y|**sigma``: the cost recovered when every center is allowed."""
    x, y = _vec(x), _vec(y)
    _check_dims(x, y)
    return float(power_dist(x[None, :], y[None, :], spec.sigma)[0, 0])


def argmin_tol(values: np.ndarray, tol: float = TIE_TOL) -> int:
    """Smallest index whose value is within ``tol`` of the minimum."""
    best = values.min()
    return int(np.flatnonzero(values <= best + tol)[0])


def semidiscrete_cost(x, y, Z: CenterSet, spec: CostSpec,
                      spec2: Optional[CostSpec] = None) -> tuple[float, int]:
    """Cheapest route ``x -> z -> y`` over the centers, and the center used."""
    x, y = _vec(x), _vec(y)
    _check_dims(x, y, Z.centers)
    spec2 = spec2 or spec
    route = leg_matrix(x[None, :], Z, spec)[0] + leg_matrix(y[None, :], Z, spec2)[0]
    return float(route.min()), argmin_tol(route)


def semidiscrete_matrix(X: np.ndarray, Y: np.ndarray, Z: CenterSet, spec: CostSpec,
                        spec2: Optional[CostSpec] = None) -> np.ndarray:
    """Routed cost for all atom pairs, shape (len(X), len(Y))."""
    spec2 = spec2 or spec
    _check_dims(X, Y, Z.centers)
    L1 = leg_matrix(X, Z, spec)
    L2 = leg_matrix(Y, Z, spec2)
    out = np.full((X.shape[0], Y.shape[0]), np.inf)
    for j in range(Z.m):
        np.minimum(out, L1[:, j, None] + L2[None, :, j], out=out)
    return out


def ground_matrix(X: np.ndarray, Y: np.ndarray, spec: CostSpec) -> np.ndarray:
    return power_dist(X, Y, spec.sigma)
