import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semidiscrete.cost import (CenterSet, CostSpec, ground_cost, leg1_cost, leg2_cost,
                               semidiscrete_cost, semidiscrete_matrix)
from semidiscrete.errors import DimensionError, ValidationError


def test_leg_examples():
    assert leg1_cost([0], [1], CostSpec(2, 2)) == 2.0
    assert leg1_cost([0.3], [0.3], CostSpec(2, 2)) == 0.0
    assert leg1_cost([0, 0], [3, 4], CostSpec(1, 1)) == 5.0
    assert leg2_cost([1], [0], CostSpec(2, 2)) == 2.0
    with pytest.raises(DimensionError):
        leg1_cost([0, 0], [1], CostSpec())


def test_default_scale():
    assert CostSpec(2.0).scale == 2.0
    assert CostSpec(1.0).scale == 1.0
    assert CostSpec(3.0).scale == 4.0
    assert CostSpec.from_config({"sigma": 2, "scale": "auto"}).scale == 2.0
    with pytest.raises(ValidationError):
        CostSpec(0.5)
    with pytest.raises(ValidationError):
        CostSpec(2.0, -1.0)


def test_semidiscrete_examples():
    spec = CostSpec(2)
    assert semidiscrete_cost([0], [2], CenterSet([[1]]), spec) == (4.0, 0)
    assert semidiscrete_cost([0], [2], CenterSet([[0]]), spec) == (8.0, 0)
    assert semidiscrete_cost([0], [2], CenterSet([[0], [1]]), spec) == (4.0, 1)


def test_tie_breaks_to_smallest_index():
    assert semidiscrete_cost([0], [0], CenterSet([[1], [-1]]), CostSpec(2)) == (4.0, 0)


def test_ground_examples():
    assert ground_cost([0], [2], CostSpec(2)) == 4.0
    assert ground_cost([1, 1], [1, 1], CostSpec(2)) == 0.0
    assert ground_cost([0, 0], [1, 1], CostSpec(1)) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_centers_must_be_distinct():
    with pytest.raises(ValidationError):
        CenterSet([[0.0], [0.0]])
    with pytest.raises(ValidationError):
        CenterSet(np.zeros((0, 2)))


coord = st.floats(-10, 10, allow_nan=False)
sigma = st.sampled_from([1.0, 1.5, 2.0, 3.0])


@given(st.integers(1, 3).flatmap(lambda d: st.tuples(
    st.lists(coord, min_size=d, max_size=d), st.lists(coord, min_size=d, max_size=d),
    st.lists(st.lists(coord, min_size=d, max_size=d), min_size=1, max_size=4, unique_by=tuple))),
    sigma)
def test_dominance_and_symmetry(args, s):
    x, y, Z = args
    spec = CostSpec(s)
    Zs = CenterSet(Z)
    v, _ = semidiscrete_cost(x, y, Zs, spec)
    g = ground_cost(x, y, spec)
    assert v >= g - 1e-9 * (1 + g)
    assert semidiscrete_cost(y, x, Zs, spec)[0] == pytest.approx(v, rel=1e-12, abs=1e-12)


@given(st.lists(coord, min_size=2, max_size=2), st.lists(coord, min_size=2, max_size=2),
       st.lists(st.lists(coord, min_size=2, max_size=2), min_size=0, max_size=3, unique_by=tuple),
       st.sampled_from([1.5, 2.0, 3.0]))
def test_midpoint_attains_ground(x, y, extra, s):
    mid = [(a + b) / 2 for a, b in zip(x, y)]
    Z = [mid] + [z for z in extra if z != mid]
    v, _ = semidiscrete_cost(x, y, CenterSet(Z), CostSpec(s))
    g = ground_cost(x, y, CostSpec(s))
    assert abs(v - g) <= 1e-12 * max(1.0, g)


@given(st.lists(st.lists(coord, min_size=1, max_size=1), min_size=2, max_size=5, unique_by=tuple),
       coord, coord)
def test_adding_center_never_increases(Z, x, y):
    spec = CostSpec(2)
    small = CenterSet(Z[:-1])
    big = CenterSet(Z)
    assert semidiscrete_cost([x], [y], big, spec)[0] <= semidiscrete_cost([x], [y], small, spec)[0]


def test_matrix_matches_pointwise(rng):
    X, Y = rng.random((4, 2)), rng.random((3, 2))
    Z = CenterSet(rng.random((3, 2)))
    M = semidiscrete_matrix(X, Y, Z, CostSpec(1.5))
    for i in range(4):
        for k in range(3):
            assert M[i, k] == pytest.approx(semidiscrete_cost(X[i], Y[k], Z, CostSpec(1.5))[0],
                                            rel=1e-14)
