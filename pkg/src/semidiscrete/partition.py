"""Cells of the optimal partition, tie balancing, and the cell-wise transport plan.

Atomic measures routinely put an atom exactly on the boundary between two
cells at the optimal prices. Such atoms are the only ones allowed to be split;
:func:`balance` distributes them so that every cell receives the same mass
from both sides, and reports whatever imbalance cannot be removed.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cost import TIE_TOL, CenterSet, CostSpec, leg_matrix, power_dist
from .dual import scan_leg
from .errors import DimensionError, ImbalanceError
from .measures import DiscreteMeasure

# Atoms within SPLIT_TOL of their best cell may be split by balance(); the
# label itself still uses the strict TIE_TOL.
SPLIT_TOL = 1e-10
_EPS = 1e-15

SIDES = ("source", "target", "hedonic_source", "hedonic_target")


@dataclass(eq=False)
class Partition:
    side: str
    labels: np.ndarray
    cell_masses: np.ndarray
    weights: np.ndarray
    split_atoms: list = field(default_factory=list)   # [(atom, {cell: fraction})]
    tied: dict = field(default_factory=dict)          # atom -> tuple of admissible cells

    @property
    def m(self) -> int:
        """Number of real cells (the hedonic null cell excluded)."""
        return self.cell_masses.size - (1 if self.hedonic else 0)

    @property
    def hedonic(self) -> bool:
        return self.side.startswith("hedonic")

    def allocation(self) -> list:
        """``[(atom, cell, mass)]`` for every atom, splits included."""
        split = dict(self.split_atoms)
        out = []
        for i, (lab, w) in enumerate(zip(self.labels, self.weights)):
            if i in split:
                for c, f in sorted(split[i].items()):
                    out.append((i, c, w * f))
            else:
                out.append((i, int(lab), float(w)))
        return out

    def cell_members(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Atom indices and the mass each contributes to ``cell``."""
        contrib = np.where(self.labels == cell, self.weights, 0.0)
        for i, fr in self.split_atoms:
            contrib[i] = self.weights[i] * fr.get(cell, 0.0)
        idx = np.flatnonzero(contrib > 0)
        return idx, contrib[idx]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("atom_index,cell_index,fraction\n")
        split = dict(self.split_atoms)
        for i, lab in enumerate(self.labels):
            fr = split.get(i, {int(lab): 1.0})
            for c, f in sorted(fr.items()):
                out.write(f"{i},{c},{float(f)!r}\n")
        return out.getvalue()


@dataclass(eq=False)
class TransportPlan:
    source: np.ndarray
    target: np.ndarray
    mass: np.ndarray
    cell: np.ndarray
    residual: float = 0.0

    def __len__(self):
        return self.mass.size

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def row_sums(self, n1: int) -> np.ndarray:
        return np.bincount(self.source, weights=self.mass, minlength=n1)

    def col_sums(self, n2: int) -> np.ndarray:
        return np.bincount(self.target, weights=self.mass, minlength=n2)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("source_index,target_index,mass,cell_index\n")
        for i, k, w, c in zip(self.source, self.target, self.mass, self.cell):
            out.write(f"{i},{k},{float(w)!r},{c}\n")
        return out.getvalue()


def assign(p, measure: DiscreteMeasure, Z: CenterSet, spec: CostSpec, leg: int,
           hedonic: bool = False, tie_tol: float = TIE_TOL,
           split_tol: float = SPLIT_TOL) -> Partition:
    """Label every atom by its cheapest price-adjusted center.

    Leg 1 (source side) uses prices ``p``; leg 2 (target side) uses ``-p``,
    as both sides appear in the dual objective. Atoms within ``split_tol``
    of more than one cell are recorded in ``tied`` for :func:`balance`.
    """
    if leg not in (1, 2):
        raise ValueError("leg must be 1 or 2")
    if measure.dim != Z.dim:
        raise DimensionError(f"measure has dimension {measure.dim}, centers {Z.dim}")
    p = np.asarray(p, dtype=float)
    if p.shape != (Z.m,):
        raise DimensionError(f"price vector has shape {p.shape}, expected ({Z.m},)")
    prices = p if leg == 1 else -p
    scan = scan_leg(leg_matrix(measure.points, Z, spec), prices, measure.weights,
                    clamp=hedonic, tol=tie_tol)
    near = scan.shifted <= scan.best[:, None] + split_tol
    tied = {}
    for i in np.flatnonzero(near.sum(axis=1) > 1):
        tied[int(i)] = tuple(int(c) for c in np.flatnonzero(near[i]))
    side = ("source" if leg == 1 else "target")
    if hedonic:
        side = "hedonic_" + side
    return Partition(side, scan.labels.astype(int), scan.masses, measure.weights.copy(),
                     [], tied)


class _Balancer:
    """Moves mass of tied atoms between cells along augmenting paths.

    Node ``m`` is the hedonic null cell, which absorbs or supplies any amount.
    """

    def __init__(self, A: Partition, B: Partition):
        self.m = A.m
        self.null = A.m if A.hedonic else None
        self.alloc = {0: {}, 1: {}}
        self.tied = {0: A.tied, 1: B.tied}
        self.d = A.cell_masses - B.cell_masses
        for s, P in ((0, A), (1, B)):
            split = dict(P.split_atoms)
            for i in P.tied:
                self.alloc[s][i] = dict(split.get(i, {int(P.labels[i]): 1.0}))
                for c in self.alloc[s][i]:
                    self.alloc[s][i][c] *= P.weights[i]
        if self.null is not None:
            self.d[self.null] = 0.0

    def _edges(self):
        """Residual capacities: edges[a][b] = [(side, atom, available)]."""
        edges: dict = {}
        for s in (0, 1):
            for i, cells in sorted(self.alloc[s].items()):
                allowed = self.tied[s][i]
                for c, w in cells.items():
                    if w <= _EPS:
                        continue
                    for other in allowed:
                        if other == c:
                            continue
                        # source-side mass moves c -> other; target-side mass
                        # moving c -> other shifts surplus from other to c
                        a, b = (c, other) if s == 0 else (other, c)
                        edges.setdefault(a, {}).setdefault(b, []).append((s, i, c, other, w))
        return edges

    def _path(self, edges, starts, is_sink):
        prev = {s: None for s in starts}
        queue = deque(starts)
        while queue:
            a = queue.popleft()
            for b in sorted(edges.get(a, {})):
                if b in prev:
                    continue
                prev[b] = a
                if is_sink(b):
                    path = [b]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                queue.append(b)
        return None

    def run(self, max_rounds: int = 100000):
        null = self.null
        for _ in range(max_rounds):
            edges = self._edges()
            surplus = [j for j in range(self.m) if self.d[j] > _EPS]
            path = self._path(edges, surplus,
                              lambda b: b == null or (b < self.m and self.d[b] < -_EPS))
            if path is None and null is not None:
                path = self._path(edges, [null],
                                  lambda b: b != null and self.d[b] < -_EPS)
            if path is None:
                return
            self._push(edges, path)

    def _push(self, edges, path):
        src, dst = path[0], path[-1]
        delta = np.inf
        if src != self.null:
            delta = self.d[src]
        if dst != self.null:
            delta = min(delta, -self.d[dst])
        for a, b in zip(path, path[1:]):
            delta = min(delta, sum(e[4] for e in edges[a][b]))
        for a, b in zip(path, path[1:]):
            left = delta
            for s, i, c, other, w in edges[a][b]:
                if left <= 0:
                    break
                q = min(w, left)
                cells = self.alloc[s][i]
                cells[c] -= q
                cells[other] = cells.get(other, 0.0) + q
                left -= q
        if src != self.null:
            self.d[src] -= delta
        if dst != self.null:
            self.d[dst] += delta

    def rebuild(self, P: Partition, s: int) -> Partition:
        labels = P.labels.copy()
        masses = P.cell_masses.copy()
        old_split = dict(P.split_atoms)
        split = [(i, fr) for i, fr in P.split_atoms if i not in self.alloc[s]]
        for i, cells in sorted(self.alloc[s].items()):
            w = P.weights[i]
            for c, f in old_split.get(i, {int(P.labels[i]): 1.0}).items():
                masses[c] -= w * f
            pos = {c: q for c, q in cells.items() if q > _EPS * max(1.0, w)}
            for c, q in pos.items():
                masses[c] += q
            total = sum(pos.values())
            fr = {c: q / total for c, q in sorted(pos.items())}
            top = max(fr.values())
            labels[i] = min(c for c, f in fr.items() if f == top)
            if len(fr) > 1 or next(iter(fr)) != P.labels[i]:
                split.append((i, fr))
        split.sort(key=lambda t: t[0])
        return Partition(P.side, labels, masses, P.weights, split, P.tied)


def balance(partA: Partition, partB: Partition, mu: DiscreteMeasure = None,
            nu: DiscreteMeasure = None) -> tuple[Partition, Partition, float]:
    """Split tied atoms so each cell gets equal mass from both sides.

    Starting from the smallest-index labels, surplus is pushed to deficit
    cells along shortest augmenting paths through tied atoms until no path
    remains. Untied atoms are never moved. Returns the rebalanced partitions
    and the largest remaining per-cell imbalance.
    """
    if partA.cell_masses.size != partB.cell_masses.size:
        raise DimensionError("partitions have different numbers of cells")
    if not (partA.tied or partB.tied):
        A, B = partA, partB
    else:
        bal = _Balancer(partA, partB)
        bal.run()
        A, B = bal.rebuild(partA, 0), bal.rebuild(partB, 1)
    m = A.m
    residual = float(np.abs(A.cell_masses[:m] - B.cell_masses[:m]).max())
    return A, B, residual


def make_plan(partA: Partition, partB: Partition, mu: DiscreteMeasure = None,
              nu: DiscreteMeasure = None, tol: float = 1e-9) -> TransportPlan:
    """Product coupling inside each cell, entries sorted by (cell, source, target)."""
    m = partA.m
    src, tgt, mass, cells = [], [], [], []
    residual = 0.0
    for z in range(m):
        ia, wa = partA.cell_members(z)
        ib, wb = partB.cell_members(z)
        ra, rb = wa.sum(), wb.sum()
        residual = max(residual, abs(ra - rb))
        if ra <= _EPS and rb <= _EPS:
            continue
        if abs(ra - rb) > tol or ra <= _EPS or rb <= _EPS:
            raise ImbalanceError(
                f"cell {z}: source mass {ra:.3g} vs target mass {rb:.3g}")
        block = np.outer(wa, wb) / ra
        ii, kk = np.meshgrid(ia, ib, indexing="ij")
        keep = block > 0
        src.append(ii[keep])
        tgt.append(kk[keep])
        mass.append(block[keep])
        cells.append(np.full(int(keep.sum()), z))
    if not src:
        e = np.zeros(0)
        return TransportPlan(e.astype(int), e.astype(int), e, e.astype(int), residual)
    return TransportPlan(np.concatenate(src), np.concatenate(tgt),
                         np.concatenate(mass), np.concatenate(cells), residual)


def plan_cost(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure,
              spec: Optional[CostSpec] = None, Z: Optional[CenterSet] = None,
              matrix: Optional[np.ndarray] = None,
              spec2: Optional[CostSpec] = None) -> float:
    """Total cost of the plan.

    With ``matrix`` the explicit cost matrix is used; with ``Z`` the routed
    cost through the cheapest center; otherwise the ground cost ``|x-y|^sigma``.
    """
    if plan.mass.size == 0:
        return 0.0
    if matrix is not None:
        costs = np.asarray(matrix)[plan.source, plan.target]
    else:
        spec = spec or CostSpec()
        X = mu.points[plan.source]
        Y = nu.points[plan.target]
        if Z is None:
            diff = X - Y
            sq = np.einsum("ij,ij->i", diff, diff)
            costs = sq if spec.sigma == 2.0 else sq ** (spec.sigma / 2.0)
        else:
            spec2 = spec2 or spec
            L1 = spec.scale * power_dist(X, Z.centers, spec.sigma)
            L2 = spec2.scale * power_dist(Y, Z.centers, spec2.sigma)
            costs = (L1 + L2).min(axis=1)
    return float(np.dot(plan.mass, costs))
