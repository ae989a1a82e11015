"""Exact discrete optimal transport for small instances, gaps and sweeps.

:func:`exact_ot` is a transportation simplex (the bipartite special case of
network simplex). Masses are converted to exact integers on a common dyadic
grid, so flows are exact and uniform assignment problems return plans whose
entries equal the input weights bit for bit.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .cost import CenterSet, CostSpec, ground_matrix, power_dist
from .errors import CapacityError, DimensionError, InfeasibleError, ValidationError
from .measures import DiscreteMeasure

DEFAULT_BUDGET = 10**6


def _weights(w) -> np.ndarray:
    if isinstance(w, DiscreteMeasure):
        return w.weights
    return np.asarray(w, dtype=float)


def _integer_masses(a: np.ndarray, b: np.ndarray) -> tuple[list, list, int]:
    fa = [Fraction(float(x)) for x in a]
    fb = [Fraction(float(x)) for x in b]
    D = 1
    for f in itertools.chain(fa, fb):
        D = D * f.denominator // math.gcd(D, f.denominator)
    ia = [int(f * D) for f in fa]
    ib = [int(f * D) for f in fb]
    diff = sum(ia) - sum(ib)
    if abs(diff) > 1e-12 * D:
        raise InfeasibleError(
            f"marginal masses differ: {float(sum(fa))!r} vs {float(sum(fb))!r}")
    # absorb rounding-level mismatch into the largest atom of the lighter side
    if diff > 0:
        k = max(range(len(ib)), key=lambda t: ib[t])
        ib[k] += diff
    elif diff < 0:
        k = max(range(len(ia)), key=lambda t: ia[t])
        ia[k] -= diff
    return ia, ib, D


class _Transport:
    """Transportation simplex on a spanning-tree basis."""

    def __init__(self, a: list, b: list, C: np.ndarray):
        self.n1, self.n2 = C.shape
        self.C = C
        self.flow: dict = {}
        self.adj = [set() for _ in range(self.n1 + self.n2)]
        self._initial_basis(list(a), list(b))

    def _add(self, i, j, f):
        self.flow[(i, j)] = f
        self.adj[i].add(self.n1 + j)
        self.adj[self.n1 + j].add(i)

    def _remove(self, i, j):
        del self.flow[(i, j)]
        self.adj[i].discard(self.n1 + j)
        self.adj[self.n1 + j].discard(i)

    def _initial_basis(self, a, b):
        n1, n2 = self.n1, self.n2
        parent = list(range(n1 + n2))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        order = np.argsort(self.C, axis=None, kind="stable")
        need = n1 + n2 - 1
        for flat in order:
            i, j = divmod(int(flat), n2)
            if a[i] > 0 and b[j] > 0:
                q = min(a[i], b[j])
                a[i] -= q
                b[j] -= q
                ri, rj = find(i), find(n1 + j)
                # least-cost allocations never close a cycle
                assert ri != rj
                parent[ri] = rj
                self._add(i, j, q)
        for flat in order:
            if len(self.flow) >= need:
                break
            i, j = divmod(int(flat), n2)
            ri, rj = find(i), find(n1 + j)
            if ri != rj:
                parent[ri] = rj
                self._add(i, j, 0)

    def _potentials(self):
        n1 = self.n1
        u = np.full(self.n1, np.nan)
        v = np.full(self.n2, np.nan)
        u[0] = 0.0
        seen = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in self.adj[x]:
                if y in seen:
                    continue
                seen.add(y)
                if x < n1:
                    v[y - n1] = self.C[x, y - n1] - u[x]
                else:
                    u[y] = self.C[y, x - n1] - v[x - n1]
                queue.append(y)
        return u, v

    def _tree_path(self, start, goal):
        prev = {start: None}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            if x == goal:
                break
            for y in self.adj[x]:
                if y not in prev:
                    prev[y] = x
                    queue.append(y)
        path = [goal]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return path[::-1]

    def solve(self, max_pivots: int = 10**7):
        n1 = self.n1
        scale = max(1.0, float(np.abs(self.C).max()))
        tol = 1e-12 * scale
        degenerate_run = 0
        for _ in range(max_pivots):
            u, v = self._potentials()
            R = self.C - u[:, None] - v[None, :]
            if degenerate_run > n1 + self.n2:
                # Bland's rule: first improving cell, guards against cycling
                cand = np.flatnonzero(R.ravel() < -tol)
                if cand.size == 0:
                    return
                flat = int(cand[0])
            else:
                flat = int(np.argmin(R))
                if R.flat[flat] >= -tol:
                    return
            i, j = divmod(flat, self.n2)
            # cycle: (i,j)+, then tree path col j -> row i with alternating signs
            path = self._tree_path(n1 + j, i)
            edges = []
            for x, y in zip(path, path[1:]):
                edges.append((x, y - n1) if x < n1 else (y, x - n1))
            minus = edges[0::2]
            plus = edges[1::2]
            theta = min(self.flow[e] for e in minus)
            leave = min(e for e in minus if self.flow[e] == theta)
            degenerate_run = degenerate_run + 1 if theta == 0 else 0
            for e in minus:
                self.flow[e] -= theta
            for e in plus:
                self.flow[e] += theta
            self._remove(*leave)
            self._add(i, j, theta)
        raise RuntimeError("transportation simplex did not terminate")


@dataclass(frozen=True, eq=False)
class ExactResult:
    value: float
    plan: np.ndarray           # dense (n1, n2) coupling

    def __iter__(self):
        return iter((self.value, self.plan))


def exact_ot(mu, nu, C, budget: int = DEFAULT_BUDGET) -> ExactResult:
    """Minimize ``sum_ij pi_ij C_ij`` over couplings of the two weight vectors.

    ``mu``/``nu`` may be measures or plain weight vectors. The value is the
    row-major float sum of ``pi_ij * C_ij`` over the support of the plan.
    """
    a, b = _weights(mu), _weights(nu)
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape != (a.size, b.size):
        raise DimensionError(f"cost matrix shape {C.shape} != ({a.size}, {b.size})")
    if a.size * b.size > budget:
        raise CapacityError(f"{a.size}x{b.size} exceeds the oracle budget of {budget}")
    if not np.all(np.isfinite(C)):
        raise ValidationError("cost matrix has non-finite entries")
    if np.any(a < 0) or np.any(b < 0):
        raise ValidationError("negative mass")
    ia, ib, D = _integer_masses(a, b)
    solver = _Transport(ia, ib, C)
    solver.solve()
    plan = np.zeros(C.shape)
    value = 0.0
    for (i, j) in sorted(solver.flow):
        f = solver.flow[(i, j)]
        if f > 0:
            plan[i, j] = float(Fraction(f, D))
            value += plan[i, j] * C[i, j]
    return ExactResult(value, plan)


def brute_force_assignment(C, weights=None) -> float:
    """Best permutation of a square uniform problem, same float arithmetic."""
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise DimensionError("brute force needs a square cost matrix")
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    perms = np.array(list(itertools.permutations(range(n))), dtype=int).reshape(-1, n)
    # accumulate left to right, term by term, like a scalar loop would
    total = np.zeros(perms.shape[0])
    for i in range(n):
        total = total + w[i] * C[i, perms[:, i]]
    return float(total.min())


# ------------------------------------------------------------------ gaps

@dataclass(frozen=True)
class GapReport:
    semidiscrete_value: float
    exact_value: float
    gap: float
    m: int
    n: int

    def to_dict(self) -> dict:
        return {"semidiscrete_value": self.semidiscrete_value,
                "exact_value": self.exact_value, "gap": self.gap,
                "m": self.m, "n": self.n}


def exact_ground_value(mu: DiscreteMeasure, nu: DiscreteMeasure, spec: CostSpec,
                       budget: int = DEFAULT_BUDGET) -> float:
    """Exact OT value under ``|x-y|^sigma``.

    Identical measures are short-cut to 0 (the identity plan is free and
    costs are nonnegative), which keeps large self-transport sweeps in budget.
    """
    if mu.same_as(nu):
        return 0.0
    return exact_ot(mu, nu, ground_matrix(mu.points, nu.points, spec), budget).value


def gap(mu: DiscreteMeasure, nu: DiscreteMeasure, Z: CenterSet, spec: CostSpec,
        opts=None, budget: int = DEFAULT_BUDGET) -> GapReport:
    from .optimizer import SolveOptions, maximize_dual

    rep = maximize_dual(mu, nu, Z, spec, opts or SolveOptions())
    exact = exact_ground_value(mu, nu, spec, budget)
    return GapReport(rep.value, exact, rep.value - exact, Z.m, max(mu.n, nu.n))


def self_gap_formula(mu: DiscreteMeasure, Z: CenterSet, sigma: float) -> float:
    """``2^sigma * sum_i s_i min_z |x_i - z|^sigma`` (routed self-transport cost)."""
    d = power_dist(mu.points, Z.centers, sigma).min(axis=1)
    return float(2.0 ** sigma * np.dot(mu.weights, d))


# --------------------------------------------------------------- seeding

def kmeans_pp(points: np.ndarray, weights: np.ndarray, m: int,
              rng: np.random.Generator) -> CenterSet:
    """D^2-weighted seeding over the atoms; the chosen atoms are distinct."""
    pts = np.unique(points, axis=0, return_inverse=False)
    if pts.shape[0] < m:
        raise ValidationError(f"only {pts.shape[0]} distinct atoms for {m} centers")
    n = points.shape[0]
    first = rng.choice(n, p=weights / weights.sum())
    chosen = [points[first]]
    d2 = ((points - chosen[0]) ** 2).sum(axis=1)
    while len(chosen) < m:
        prob = weights * d2
        k = rng.choice(n, p=prob / prob.sum())
        chosen.append(points[k])
        d2 = np.minimum(d2, ((points - points[k]) ** 2).sum(axis=1))
    return CenterSet(np.array(chosen))


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)    # (m, best gap, running slope)
    slope: float = math.nan
    seeds: dict = field(default_factory=dict)   # m -> seed that achieved the best gap

    def to_csv(self) -> str:
        lines = ["m,gap,slope_running"]
        for m, g, s in self.rows:
            lines.append(f"{m},{float(g)!r},{'' if math.isnan(s) else repr(float(s))}")
        return "\n".join(lines) + "\n"


def loglog_slope(ms: Sequence[float], gaps: Sequence[float]) -> float:
    if len(ms) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(np.asarray(ms, float)), np.log(np.asarray(gaps, float)), 1)
    return float(slope)


def asymptotic_sweep(mu: DiscreteMeasure, nu: DiscreteMeasure, spec: CostSpec,
                     m_list: Sequence[int], rounds: int = 50, seeds: Sequence[int] = (0, 1, 2),
                     opts=None, budget: int = DEFAULT_BUDGET) -> SweepResult:
    """Best gap after refinement for each m, and the log-log slope against m."""
    from .refinement import RefineOptions, refine_loop

    if list(m_list) != sorted(set(m_list)):
        raise ValidationError("m_list must be strictly increasing")
    exact = exact_ground_value(mu, nu, spec, budget)
    pooled_pts = np.vstack([mu.points, nu.points])
    pooled_w = np.concatenate([mu.weights, nu.weights])
    out = SweepResult()
    ms, gaps = [], []
    for m in m_list:
        best, best_seed = math.inf, None
        for seed in seeds:
            rng = np.random.default_rng([seed, m])
            Z0 = kmeans_pp(pooled_pts, pooled_w, m, rng)
            traj = refine_loop(mu, nu, Z0, spec, RefineOptions(rounds=rounds), opts)
            g = min(traj.value_history) - exact
            if g < best:
                best, best_seed = g, seed
        ms.append(m)
        gaps.append(best)
        out.rows.append((m, best, loglog_slope(ms, gaps)))
        out.seeds[m] = best_seed
    out.slope = loglog_slope(ms, gaps)
    return out
