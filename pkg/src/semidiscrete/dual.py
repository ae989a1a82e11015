"""The concave price function and its supergradient for atomic measures.

For prices ``p`` on the m centers the objective is

    sum_i s_i min_j [c1(x_i, z_j) + p_j]  +  sum_k t_k min_j [c2(z_j, y_k) - p_j]

and its maximum over ``p`` equals the optimal transport cost under the
routed cost ``min_j c1(x, z_j) + c2(z_j, y)``. The hedonic variant clamps
every per-atom minimum at zero (the opt-out commodity with zero price).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cost import TIE_TOL, CenterSet, CostSpec, _check_dims, _vec, leg_matrix
from .errors import DimensionError, NonFiniteError
from .measures import DiscreteMeasure


def canonical(p) -> np.ndarray:
    """Representative of ``p + R*1`` with zero sum."""
    p = np.asarray(p, dtype=float)
    return p - p.mean()


@dataclass(frozen=True, eq=False)
class LegScan:
    value: float
    labels: np.ndarray      # smallest index within tie tolerance; m means "null"
    masses: np.ndarray      # length m, or m + 1 with the null cell last
    tie_count: int
    margin: float           # smallest best-vs-runner-up gap over atoms
    shifted: np.ndarray     # (n, m[+1]) price-adjusted leg costs
    best: np.ndarray        # per-atom minimum


@dataclass(frozen=True, eq=False)
class DualEval:
    value: float
    supergradient: np.ndarray
    mu_masses: np.ndarray
    nu_masses: np.ndarray
    tie_count: int
    margin: float = np.inf
    mu_null: float = 0.0
    nu_null: float = 0.0


def scan_leg(L: np.ndarray, prices: np.ndarray, weights: np.ndarray,
             clamp: bool = False, tol: float = TIE_TOL) -> LegScan:
    """Price-adjusted assignment of one side's atoms."""
    V = L + prices[None, :]
    if clamp:
        V = np.hstack([V, np.zeros((V.shape[0], 1))])
    best = V.min(axis=1)
    near = V <= best[:, None] + tol
    labels = near.argmax(axis=1)
    tie_count = int(np.count_nonzero(near.sum(axis=1) > 1))
    if V.shape[1] > 1:
        part = np.partition(V, 1, axis=1)
        margin = float((part[:, 1] - part[:, 0]).min())
    else:
        margin = np.inf
    masses = np.bincount(labels, weights=weights, minlength=V.shape[1]).astype(float)
    value = float(np.dot(weights, best))
    if not np.isfinite(value):
        raise NonFiniteError("objective is not finite; check input data")
    return LegScan(value, labels, masses, tie_count, margin, V, best)


class DualProblem:
    """Leg-cost matrices cached for repeated evaluation at different prices."""

    def __init__(self, mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
                 spec: CostSpec, spec2: Optional[CostSpec] = None,
                 hedonic: bool = False):
        if not (mu.dim == nu.dim == Z.dim):
            raise DimensionError(
                f"dimensions differ: mu {mu.dim}, nu {nu.dim}, centers {Z.dim}")
        self.mu, self.nu, self.Z = mu, nu, Z
        self.spec = spec
        self.spec2 = spec2 or spec
        self.hedonic = hedonic
        self.L1 = leg_matrix(mu.points, Z, self.spec)
        self.L2 = leg_matrix(nu.points, Z, self.spec2)

    @property
    def m(self) -> int:
        return self.Z.m

    def cost_spread(self) -> float:
        hi = max(self.L1.max(), self.L2.max())
        lo = min(self.L1.min(), self.L2.min())
        return float(hi - lo)

    def scan(self, p, tol: float = TIE_TOL) -> tuple[LegScan, LegScan]:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.m,):
            raise DimensionError(f"price vector has shape {p.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("non-finite price vector")
        a = scan_leg(self.L1, p, self.mu.weights, self.hedonic, tol)
        b = scan_leg(self.L2, -p, self.nu.weights, self.hedonic, tol)
        return a, b

    def evaluate(self, p, tol: float = TIE_TOL) -> DualEval:
        a, b = self.scan(p, tol)
        m = self.m
        mu_m, nu_m = a.masses[:m], b.masses[:m]
        return DualEval(
            value=a.value + b.value,
            supergradient=mu_m - nu_m,
            mu_masses=mu_m,
            nu_masses=nu_m,
            tie_count=a.tie_count + b.tie_count,
            margin=min(a.margin, b.margin),
            mu_null=float(a.masses[m]) if self.hedonic else 0.0,
            nu_null=float(b.masses[m]) if self.hedonic else 0.0,
        )


def xi_leg(p, point, Z: CenterSet, leg: int, spec: CostSpec,
           tol: float = TIE_TOL) -> tuple[float, int]:
    """``min_j leg_cost(point, z_j) + p_j`` and the smallest minimizing j.

    Leg 1 and leg 2 differ only in argument order, which is immaterial for
    power costs; ``leg`` is validated for interface symmetry.
    """
    if leg not in (1, 2):
        raise ValueError("leg must be 1 or 2")
    x = _vec(point)
    _check_dims(x, Z.centers)
    p = np.asarray(p, dtype=float)
    if p.shape != (Z.m,):
        raise DimensionError(f"price vector has shape {p.shape}, expected ({Z.m},)")
    vals = leg_matrix(x[None, :], Z, spec)[0] + p
    best = vals.min()
    return float(best), int(np.flatnonzero(vals <= best + tol)[0])


def dual_eval(p, mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
              spec: CostSpec, spec2: Optional[CostSpec] = None) -> DualEval:
    return DualProblem(mu, nu, Z, spec, spec2).evaluate(p)


def hedonic_eval(p, mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
                 spec1: CostSpec, spec2: Optional[CostSpec] = None) -> DualEval:
    """Hedonic objective: consumer losses and producer profits clamped at 0."""
    return DualProblem(mu, nu, Z, spec1, spec2, hedonic=True).evaluate(p)
