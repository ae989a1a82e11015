"""Discrete probability measures: construction, I/O and synthetic generators."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np

from .errors import CapacityError, DimensionError, ParseError, ValidationError

DEFAULT_ATOM_BUDGET = 10**7

Source = Union[bytes, str, IO]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud ``sum_i w_i delta_{x_i}`` in R^dim.

    Weights are divided by their sum on construction. Duplicate points are
    kept as separate atoms so that atom indices stay stable downstream.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise DimensionError(f"points must be an (n, d) array, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise ValidationError("measure has empty support")
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise ValidationError(
                f"{pts.shape[0]} points but {w.size} weights")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("non-finite coordinate")
        if not np.all(np.isfinite(w)):
            raise ValidationError("non-finite weight")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
        total = math.fsum(w)
        # already-normalized input is kept bit-for-bit
        if abs(total - 1.0) > 1e-14:
            w = w / total
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.n

    def same_as(self, other: "DiscreteMeasure") -> bool:
        """True when both measures have identical atom lists and weights."""
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(frozen=True)
class MapSpec:
    """Gradient map used to push a source measure forward.

    ``paper_phi`` is the gradient of
    ``0.5*|x|^2 + lam*(cos(x1 + 2*x2) - sin(x1 - x2))`` on the plane.
    """

    kind: str = "identity"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "paper_phi"):
            raise ValidationError(f"unknown map kind {self.kind!r}")
        if not math.isfinite(self.lam):
            raise ValidationError("lambda must be finite")


# ---------------------------------------------------------------- parsing

def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _as_float(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{what} must be a number, got {v!r}")
    return float(v)


def measure_from_dict(obj) -> DiscreteMeasure:
    if not isinstance(obj, dict):
        raise ParseError("measure JSON must be an object")
    for key in ("dim", "points", "weights"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}")
    dim = obj["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise ParseError("dim must be an integer")
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    points, weights = obj["points"], obj["weights"]
    if not isinstance(points, list) or not isinstance(weights, list):
        raise ParseError("points and weights must be arrays")
    if not points:
        raise ValidationError("measure has empty support")
    rows = []
    for k, pt in enumerate(points):
        if not isinstance(pt, list):
            raise ParseError(f"point {k} is not an array")
        if len(pt) != dim:
            raise DimensionError(f"point {k} has {len(pt)} coordinates, expected {dim}")
        rows.append([_as_float(c, f"point {k} coordinate") for c in pt])
    w = [_as_float(v, "weight") for v in weights]
    if len(w) != len(rows):
        raise ValidationError(f"{len(rows)} points but {len(w)} weights")
    return DiscreteMeasure(np.array(rows, dtype=float).reshape(len(rows), dim),
                           np.array(w, dtype=float))


def load_measure(source: Source) -> DiscreteMeasure:
    """Parse a measure from JSON text/bytes or an open file."""
    text = _read_text(source)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return measure_from_dict(obj)


def load_measure_csv(source: Source) -> DiscreteMeasure:
    """Parse CSV with header ``x1,...,xd,w``, one atom per row."""
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[-1] != "w" or any(
            h != f"x{k + 1}" for k, h in enumerate(header[:-1])):
        raise ParseError(f"bad CSV header {header!r}")
    dim = len(header) - 1
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != dim + 1:
            raise DimensionError(f"line {lineno}: expected {dim + 1} fields")
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field") from None
    if not rows:
        raise ValidationError("measure has empty support")
    arr = np.array(rows, dtype=float)
    return DiscreteMeasure(arr[:, :dim], arr[:, dim])


def read_measure(path) -> DiscreteMeasure:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"measure file not found: {path}")
    data = path.read_bytes()
    if path.suffix.lower() == ".csv":
        return load_measure_csv(data)
    return load_measure(data)


def dump_measure(mu: DiscreteMeasure) -> str:
    return json.dumps(mu.to_dict())


def dump_measure_csv(mu: DiscreteMeasure) -> str:
    out = io.StringIO()
    header = [f"x{k + 1}" for k in range(mu.dim)] + ["w"]
    out.write(",".join(header) + "\n")
    for x, w in zip(mu.points, mu.weights):
        out.write(",".join(repr(float(c)) for c in x) + "," + repr(float(w)) + "\n")
    return out.getvalue()


# ------------------------------------------------------------- generators

def grid_uniform(d: int, k: int, max_atoms: int = DEFAULT_ATOM_BUDGET) -> DiscreteMeasure:
    """Uniform weights on the nodes ``(i_1/k, ..., i_d/k)``, ``1 <= i <= k``."""
    if d < 1 or k < 1:
        raise ValidationError("grid_uniform needs d >= 1 and k >= 1")
    if k**d > max_atoms:
        raise CapacityError(f"grid of {k}^{d} atoms exceeds budget {max_atoms}")
    axis = np.arange(1, k + 1, dtype=float) / k
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return DiscreteMeasure(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


def uniform_random(n: int, d: int, rng: np.random.Generator) -> DiscreteMeasure:
    return DiscreteMeasure(rng.random((n, d)), np.full(n, 1.0 / n))


def phi_gradient(points: np.ndarray, lam: float) -> np.ndarray:
    x1, x2 = points[:, 0], points[:, 1]
    s, c = np.sin(x1 + 2 * x2), np.cos(x1 - x2)
    return np.stack([x1 + lam * (-s - c), x2 + lam * (-2 * s + c)], axis=1)


def pushforward_gradient_map(mu: DiscreteMeasure, spec: MapSpec) -> DiscreteMeasure:
    """Move every atom by the map; atom order and weights are unchanged."""
    if spec.kind == "identity":
        return DiscreteMeasure(mu.points, mu.weights)
    if mu.dim != 2:
        raise DimensionError("paper_phi map is defined on the plane only")
    return DiscreteMeasure(phi_gradient(mu.points, spec.lam), mu.weights)
