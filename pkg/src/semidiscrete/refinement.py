"""Monotone improvement of the center set.

Each round solves for optimal prices, then moves every center to the point
minimizing the transport cost of its own cell (source part via leg 1,
target part via leg 2). The optimal partition for the old centers remains
feasible for the new ones, so the optimal value can only go down.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .cost import CenterSet, CostSpec
from .dual import DualProblem
from .measures import DiscreteMeasure
from .optimizer import SolveOptions, maximize_problem
from .partition import Partition

log = logging.getLogger(__name__)

MOVE_TOL = 1e-12
IMPROVE_TOL = 1e-14


@dataclass(frozen=True)
class RefineOptions:
    rounds: int = 50
    saturation_tol: Optional[float] = 1e-7   # relative decrease; None runs every round
    patience: int = 2
    reseed: bool = False                     # move dead cells to the heaviest atom
    stop_on_cell_death: bool = False

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class RefineTrajectory:
    center_history: list = field(default_factory=list)
    value_history: list = field(default_factory=list)
    p_history: list = field(default_factory=list)
    stopped_reason: str = "max_rounds"
    reports: list = field(default_factory=list)

    @property
    def final_centers(self) -> CenterSet:
        return self.center_history[-1]

    def to_dict(self) -> dict:
        return {
            "values": list(self.value_history),
            "centers": [Z.centers.tolist() for Z in self.center_history],
            "prices": [p.tolist() for p in self.p_history],
            "stopped_reason": self.stopped_reason,
        }


def _cell_objective(pts: np.ndarray, w: np.ndarray, sigma: float, z: np.ndarray) -> float:
    d2 = ((pts - z) ** 2).sum(axis=1)
    return float(np.dot(w, d2 ** (sigma / 2.0)))


def _minimize_cell(pts: np.ndarray, w: np.ndarray, sigma: float, z0: np.ndarray) -> np.ndarray:
    """Minimizer of ``sum_i w_i |x_i - z|^sigma`` started from ``z0``."""
    if sigma == 2.0:
        return (w[:, None] * pts).sum(axis=0) / w.sum()
    if sigma < 2.0:
        # Weiszfeld-type majorize-minimize: monotone for 1 <= sigma <= 2
        z = z0.copy()
        for _ in range(2000):
            d = np.sqrt(((pts - z) ** 2).sum(axis=1))
            d = np.maximum(d, 1e-12)
            a = w * d ** (sigma - 2.0)
            z_new = (a[:, None] * pts).sum(axis=0) / a.sum()
            if np.abs(z_new - z).max() <= 1e-12 * (1.0 + np.abs(z).max()):
                z = z_new
                break
            z = z_new
        if sigma == 1.0:
            # the iteration crawls into a minimizer sitting on a data point;
            # test the nearest one against the optimality condition directly
            k = int(np.argmin(((pts - z) ** 2).sum(axis=1)))
            same = np.all(pts == pts[k], axis=1)
            diff = pts[~same] - pts[k]
            if diff.size:
                unit = diff / np.sqrt((diff ** 2).sum(axis=1))[:, None]
                pull = (w[~same, None] * unit).sum(axis=0)
                if np.sqrt((pull ** 2).sum()) <= w[same].sum():
                    return pts[k].copy()
            else:
                return pts[k].copy()
        return z

    def f(z):
        diff = z - pts
        d2 = (diff ** 2).sum(axis=1)
        val = np.dot(w, d2 ** (sigma / 2.0))
        grad = sigma * ((w * d2 ** (sigma / 2.0 - 1.0))[:, None] * diff).sum(axis=0)
        return val, grad

    res = minimize(f, z0, jac=True, method="L-BFGS-B", options={"gtol": 1e-10, "ftol": 1e-14})
    return res.x


def _improves(new: float, old: float) -> bool:
    # strict decrease only; a flat set of minimizers must not make centers drift
    return new < old - IMPROVE_TOL * (1.0 + abs(old))


def update_centers(partA: Partition, partB: Partition, mu: DiscreteMeasure,
                   nu: DiscreteMeasure, Z: CenterSet, spec: CostSpec,
                   spec2: Optional[CostSpec] = None) -> CenterSet:
    """New center per cell; empty cells and non-improving moves keep the old center.

    Leg scales enter as weights, so with equal scales and ``sigma = 2`` the
    new center is the plain weighted mean of the cell's source and target atoms.
    """
    spec2 = spec2 or spec
    new = Z.centers.copy()
    for j in range(Z.m):
        ia, wa = partA.cell_members(j)
        ib, wb = partB.cell_members(j)
        if ia.size + ib.size == 0:
            continue
        pts = np.vstack([mu.points[ia], nu.points[ib]])
        w = np.concatenate([spec.scale * wa, spec2.scale * wb])
        if spec.sigma == spec2.sigma:
            z = _minimize_cell(pts, w, spec.sigma, Z.centers[j])
            if _improves(_cell_objective(pts, w, spec.sigma, z),
                         _cell_objective(pts, w, spec.sigma, Z.centers[j])):
                new[j] = z
        else:
            def obj(z):
                return (spec.scale * _cell_objective(mu.points[ia], wa, spec.sigma, z)
                        + spec2.scale * _cell_objective(nu.points[ib], wb, spec2.sigma, z))
            res = minimize(obj, Z.centers[j], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
            if _improves(res.fun, obj(Z.centers[j])):
                new[j] = res.x
    # a move onto another center would merge two cells; keep the old point
    for j in range(Z.m):
        others = np.delete(new, j, axis=0)
        if others.size and np.any(np.all(others == new[j], axis=1)):
            new[j] = Z.centers[j]
    return CenterSet(new)


def _reseed(partA: Partition, partB: Partition, mu, nu, Z: CenterSet) -> tuple[CenterSet, bool]:
    dead = [j for j in range(Z.m)
            if partA.cell_masses[j] <= 0 and partB.cell_masses[j] <= 0]
    if not dead:
        return Z, False
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([mu.weights, nu.weights])
    order = np.argsort(-w, kind="stable")
    new = Z.centers.copy()
    used = {tuple(c) for c in new}
    for j in dead:
        for k in order:
            if tuple(pts[k]) not in used:
                new[j] = pts[k]
                used.add(tuple(pts[k]))
                break
    return CenterSet(new), True


def refine_loop(mu: DiscreteMeasure, nu: DiscreteMeasure, Z0: CenterSet, spec: CostSpec,
                ropts: RefineOptions = RefineOptions(),
                solve_opts: Optional[SolveOptions] = None,
                spec2: Optional[CostSpec] = None) -> RefineTrajectory:
    """Alternate price maximization and center updates, warm-starting the prices."""
    solve_opts = solve_opts or SolveOptions()
    traj = RefineTrajectory()
    Z = Z0
    p = solve_opts.warm_start
    calm = 0
    for rnd in range(ropts.rounds):
        opts = SolveOptions(**{**solve_opts.__dict__, "warm_start": None if p is None else tuple(p)})
        rep = maximize_problem(DualProblem(mu, nu, Z, spec, spec2), opts)
        traj.center_history.append(Z)
        traj.value_history.append(rep.value)
        traj.p_history.append(rep.p_star)
        traj.reports.append(rep)
        p = rep.p_star
        log.info("round %d: value %.12g, imbalance %.3g", rnd, rep.value, rep.grad_sup_norm)
        A, B = rep.source_partition, rep.target_partition
        dead = any(A.cell_masses[j] <= 0 and B.cell_masses[j] <= 0 for j in range(Z.m))
        if dead and ropts.stop_on_cell_death:
            traj.stopped_reason = "cell_death"
            return traj
        if len(traj.value_history) >= 2 and ropts.saturation_tol is not None:
            prev, cur = traj.value_history[-2], traj.value_history[-1]
            rel = (prev - cur) / max(abs(prev), 1e-300)
            calm = calm + 1 if rel < ropts.saturation_tol else 0
            if calm >= ropts.patience:
                traj.stopped_reason = "saturated"
                return traj
        if rnd == ropts.rounds - 1:
            break
        Z_new = update_centers(A, B, mu, nu, Z, spec, spec2)
        if ropts.reseed:
            Z_new, _ = _reseed(A, B, mu, nu, Z_new)
        moved = float(np.abs(Z_new.centers - Z.centers).max())
        if moved <= MOVE_TOL and ropts.saturation_tol is not None:
            traj.stopped_reason = "saturated"
            return traj
        Z = Z_new
    traj.stopped_reason = "max_rounds"
    return traj


def fixed_point_shift(traj: RefineTrajectory, mu, nu, spec: CostSpec,
                      spec2: Optional[CostSpec] = None) -> float:
    """Sup-norm move of the centers if one more update were applied."""
    rep = traj.reports[-1]
    Z = traj.center_history[-1]
    Z_new = update_centers(rep.source_partition, rep.target_partition, mu, nu, Z, spec, spec2)
    return float(np.abs(Z_new.centers - Z.centers).max())


__all__ = ["RefineOptions", "RefineTrajectory", "update_centers", "refine_loop",
           "fixed_point_shift"]
