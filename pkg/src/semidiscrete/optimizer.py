"""Maximization of the concave, piecewise-linear price function.

The primary loop is projected supergradient ascent with diminishing steps
and running-best tracking. With atomic measures the objective is piecewise
linear, so ascent alone approaches the maximum only at rate O(1/sqrt(k));
when ``polish`` is on, the final prices come from the epigraph linear
program of the same objective, solved to a vertex, which is exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .cost import CenterSet, CostSpec
from .dual import DualProblem, canonical
from .errors import DimensionError, NonFiniteError
from .measures import DiscreteMeasure
from .partition import Partition, assign, balance

log = logging.getLogger(__name__)

# balanced imbalance at or below this is treated as an optimality certificate
CERTIFICATE_TOL = 1e-13


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 300
    grad_tol: Optional[float] = None      # None: half the smallest atom weight
    step_policy: str = "diminishing"      # or "fixed"
    eta: Optional[float] = None           # None: 1 / (leg-cost spread)
    averaging: bool = True
    warm_start: Optional[tuple] = None
    polish: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")
        if self.step_policy not in ("diminishing", "fixed"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be > 0")

    @classmethod
    def from_config(cls, obj: dict) -> "SolveOptions":
        known = {k: obj[k] for k in ("max_iters", "grad_tol", "step_policy", "eta",
                                     "averaging", "polish") if k in obj}
        if obj.get("warm_start") is not None:
            known["warm_start"] = tuple(float(v) for v in obj["warm_start"])
        return cls(**known)


@dataclass(eq=False)
class SolveReport:
    p_star: np.ndarray
    value: float
    grad_sup_norm: float
    iterations: int
    converged: bool
    value_history: list = field(default_factory=list)
    polished: bool = False
    source_partition: Optional[Partition] = None
    target_partition: Optional[Partition] = None

    def summary(self) -> dict:
        return {
            "value": self.value,
            "grad_sup_norm": self.grad_sup_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "polished": self.polished,
            "p_star": self.p_star.tolist(),
        }


def balanced_supergradient(problem: DualProblem, p) -> tuple[np.ndarray, Partition, Partition]:
    """Supergradient after splitting tied atoms to cancel imbalance.

    This is the element of the superdifferential that the balancing routine
    reaches; its sup-norm is zero exactly when ``p`` is a maximizer (up to
    the split tolerance).
    """
    hed = problem.hedonic
    A = assign(p, problem.mu, problem.Z, problem.spec, 1, hedonic=hed)
    B = assign(p, problem.nu, problem.Z, problem.spec2, 2, hedonic=hed)
    A, B, _ = balance(A, B)
    m = problem.m
    return A.cell_masses[:m] - B.cell_masses[:m], A, B


def _lp_maximize(problem: DualProblem) -> Optional[np.ndarray]:
    """Exact maximizer from the epigraph LP; variables are (p, u, v).

    max  s.u + t.v   s.t.  u_i <= L1_ij + p_j,  v_k <= L2_kj - p_j
    (plus u, v <= 0 for the hedonic variant, sum p = 0 otherwise).
    """
    L1, L2 = problem.L1, problem.L2
    n1, m = L1.shape
    n2 = L2.shape[0]
    nvar = m + n1 + n2
    # rows for (i, j): u_i - p_j <= L1_ij
    r1 = np.arange(n1 * m)
    i1, j1 = np.divmod(r1, m)
    # rows for (k, j): v_k + p_j <= L2_kj
    r2 = np.arange(n2 * m)
    k2, j2 = np.divmod(r2, m)
    rows = np.concatenate([r1, r1, n1 * m + r2, n1 * m + r2])
    cols = np.concatenate([m + i1, j1, m + n1 + k2, j2])
    vals = np.concatenate([np.ones(n1 * m), -np.ones(n1 * m),
                           np.ones(n2 * m), np.ones(n2 * m)])
    A_ub = sp.csr_matrix((vals, (rows, cols)), shape=((n1 + n2) * m, nvar))
    b_ub = np.concatenate([L1.ravel(), L2.ravel()])
    c = np.concatenate([np.zeros(m), -problem.mu.weights, -problem.nu.weights])
    if problem.hedonic:
        bounds = [(None, None)] * m + [(None, 0.0)] * (n1 + n2)
        A_eq = b_eq = None
    else:
        bounds = [(None, None)] * nvar
        A_eq = sp.csr_matrix((np.ones(m), (np.zeros(m, dtype=int), np.arange(m))),
                             shape=(1, nvar))
        b_eq = np.zeros(1)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0 or res.x is None:
        log.warning("LP polish failed: %s", res.message)
        return None
    return np.asarray(res.x[:m], dtype=float)


def _ascend(problem: DualProblem, opts: SolveOptions, project: bool) -> SolveReport:
    m = problem.m
    if opts.warm_start is not None:
        p = np.asarray(opts.warm_start, dtype=float)
        if p.shape != (m,):
            raise DimensionError(f"warm start has length {p.size}, expected {m}")
    else:
        p = np.zeros(m)
    if project:
        p = canonical(p)
    if not np.all(np.isfinite(p)):
        raise NonFiniteError("non-finite warm start")

    min_w = min(problem.mu.weights.min(), problem.nu.weights.min())
    grad_tol = opts.grad_tol if opts.grad_tol is not None else 0.5 * min_w
    spread = problem.cost_spread()
    eta0 = opts.eta if opts.eta is not None else 1.0 / (spread if spread > 0 else 1.0)

    best_p, best_val, best_g = p.copy(), -math.inf, math.inf
    history = []
    avg, avg_w = np.zeros(m), 0.0
    it = 0
    for it in range(1, opts.max_iters + 1):
        ev = problem.evaluate(p)
        g, _, _ = balanced_supergradient(problem, p)
        g_norm = float(np.abs(g).max()) if m else 0.0
        if ev.value > best_val:
            best_val, best_p = ev.value, p.copy()
            best_g = g_norm
        history.append(best_val)
        if g_norm <= grad_tol:
            break
        step = eta0 / math.sqrt(it) if opts.step_policy == "diminishing" else eta0
        avg += step * p
        avg_w += step
        p = p + step * g
        if project:
            p = canonical(p)
    else:
        if opts.averaging and avg_w > 0:
            pa = avg / avg_w
            ev = problem.evaluate(pa)
            if ev.value > best_val:
                g, _, _ = balanced_supergradient(problem, pa)
                best_val, best_p, best_g = ev.value, pa, float(np.abs(g).max())
                history.append(best_val)
    return SolveReport(best_p, best_val, best_g, it, best_g <= grad_tol, history)


def _finish(problem: DualProblem, rep: SolveReport, opts: SolveOptions,
            project: bool) -> SolveReport:
    if opts.polish and rep.grad_sup_norm > CERTIFICATE_TOL:
        p_lp = _lp_maximize(problem)
        if p_lp is not None:
            if project:
                p_lp = canonical(p_lp)
            val = problem.evaluate(p_lp).value
            if val >= rep.value:
                g, _, _ = balanced_supergradient(problem, p_lp)
                rep = replace(rep, p_star=p_lp, value=val,
                              grad_sup_norm=float(np.abs(g).max()),
                              value_history=rep.value_history + [val], polished=True)
    min_w = min(problem.mu.weights.min(), problem.nu.weights.min())
    grad_tol = opts.grad_tol if opts.grad_tol is not None else 0.5 * min_w
    _, A, B = balanced_supergradient(problem, rep.p_star)
    return replace(rep, converged=rep.grad_sup_norm <= grad_tol,
                   source_partition=A, target_partition=B)


def maximize_problem(problem: DualProblem, opts: SolveOptions = SolveOptions()) -> SolveReport:
    project = not problem.hedonic
    rep = _ascend(problem, opts, project)
    return _finish(problem, rep, opts, project)


def maximize_dual(mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
                  spec: CostSpec, opts: SolveOptions = SolveOptions(),
                  spec2: Optional[CostSpec] = None) -> SolveReport:
    """Maximize the price function over the sum-zero hyperplane."""
    return maximize_problem(DualProblem(mu, nu, Z, spec, spec2), opts)


def maximize_hedonic(mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet,
                     spec1: CostSpec, spec2: Optional[CostSpec] = None,
                     opts: SolveOptions = SolveOptions()) -> SolveReport:
    """Equilibrium prices of the hedonic market (no sum-zero normalization)."""
    return maximize_problem(DualProblem(mu, nu, Z, spec1, spec2, hedonic=True), opts)
