import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semidiscrete.cost import CenterSet, CostSpec, ground_matrix, semidiscrete_matrix
from semidiscrete.errors import ImbalanceError
from semidiscrete.measures import DiscreteMeasure
from semidiscrete.optimizer import maximize_dual
from semidiscrete.oracle import exact_ot
from semidiscrete.partition import Partition, assign, balance, make_plan, plan_cost

Q = CostSpec(2.0, 2.0)


def M(points, weights):
    return DiscreteMeasure(np.asarray(points, float), np.asarray(weights, float))


def test_assign_examples():
    mu = M([[0], [1]], [0.5, 0.5])
    A = assign([0, 0], mu, CenterSet([[0], [1]]), Q, 1)
    assert A.labels.tolist() == [0, 1] and A.cell_masses.tolist() == [0.5, 0.5]
    A = assign([0.0], mu, CenterSet([[0.3]]), Q, 1)
    assert A.labels.tolist() == [0, 0] and A.cell_masses.tolist() == [1.0]
    r = np.random.default_rng(0)
    mu = M(r.random((20, 1)), np.ones(20))
    A = assign([-10, 0], mu, CenterSet([[0], [1]]), Q, 1)
    assert np.all(A.labels == 0)
    # the target side sees -p, so the same prices push it the other way
    B = assign([-10, 0], mu, CenterSet([[0], [1]]), Q, 2)
    assert np.all(B.labels == 1)


def test_assign_flags_ties():
    A = assign([0, 0], M([[0.5]], [1]), CenterSet([[0], [1]]), Q, 1)
    assert A.labels.tolist() == [0] and A.tied == {0: (0, 1)}


def test_balance_already_balanced():
    mu = M([[0], [1]], [0.5, 0.5])
    Z = CenterSet([[0], [1]])
    A, B = assign([0, 0], mu, Z, Q, 1), assign([0, 0], mu, Z, Q, 2)
    A2, B2, res = balance(A, B)
    assert res == 0.0
    assert A2.labels.tolist() == A.labels.tolist() and not A2.split_atoms


def test_balance_splits_single_tied_atom():
    Z = CenterSet([[0], [1]])
    A = assign([0, 0], M([[0.5]], [1]), Z, Q, 1)
    B = assign([0, 0], M([[0], [1]], [0.4, 0.6]), Z, Q, 2)
    A2, B2, res = balance(A, B)
    assert res <= 1e-15
    (atom, fr), = A2.split_atoms
    assert atom == 0
    assert fr[0] == pytest.approx(0.4, abs=1e-15) and fr[1] == pytest.approx(0.6, abs=1e-15)
    assert A2.cell_masses == pytest.approx([0.4, 0.6], abs=1e-15)


def test_balance_leaves_untied_imbalance():
    A = Partition("source", np.array([0, 1]), np.array([0.55, 0.45]), np.array([0.55, 0.45]))
    B = Partition("target", np.array([0, 1]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    A2, B2, res = balance(A, B)
    assert res == pytest.approx(0.05, abs=1e-15)
    assert A2.labels.tolist() == [0, 1] and not A2.split_atoms


def test_plan_examples():
    Z = CenterSet([[0.5]])
    mu, nu = M([[0]], [1]), M([[1]], [1])
    plan = make_plan(assign([0.0], mu, Z, Q, 1), assign([0.0], nu, Z, Q, 2))
    assert list(zip(plan.source, plan.target, plan.mass, plan.cell)) == [(0, 0, 1.0, 0)]

    mu, nu = M([[0], [0.1]], [0.5, 0.5]), M([[0.9], [1]], [0.5, 0.5])
    plan = make_plan(assign([0.0], mu, Z, Q, 1), assign([0.0], nu, Z, Q, 2))
    assert len(plan) == 4 and np.all(plan.mass == 0.25)

    Z = CenterSet([[0], [1]])
    mu = M([[0], [1]], [0.5, 0.5])
    plan = make_plan(assign([0, 0], mu, Z, Q, 1), assign([0, 0], mu, Z, Q, 2))
    assert plan.mass.tolist() == [0.5, 0.5] and plan.cell.tolist() == [0, 1]
    assert plan_cost(plan, mu, mu, Q, Z) <= 1e-12


def test_plan_rejects_imbalance():
    A = Partition("source", np.array([0, 1]), np.array([0.6, 0.4]), np.array([0.6, 0.4]))
    B = Partition("target", np.array([0, 1]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(ImbalanceError):
        make_plan(A, B)


def test_worked_instance_plan_cost():
    mu, nu = M([[0], [1]], [0.5, 0.5]), M([[0]], [1])
    Z = CenterSet([[0], [1]])
    rep = maximize_dual(mu, nu, Z, Q)
    plan = make_plan(rep.source_partition, rep.target_partition, mu, nu)
    assert plan_cost(plan, mu, nu, Q, Z) == pytest.approx(1.0, abs=1e-12)
    assert plan_cost(plan, mu, nu, Q) <= plan_cost(plan, mu, nu, Q, Z)


def test_csv_formats():
    Z = CenterSet([[0], [1]])
    A = assign([0, 0], M([[0.5]], [1]), Z, Q, 1)
    B = assign([0, 0], M([[0], [1]], [0.5, 0.5]), Z, Q, 2)
    A, B, _ = balance(A, B)
    assert A.to_csv().splitlines() == ["atom_index,cell_index,fraction", "0,0,0.5", "0,1,0.5"]
    assert make_plan(A, B).to_csv().splitlines()[0] == "source_index,target_index,mass,cell_index"


@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0]), st.booleans())
def test_solved_plans_are_consistent(seed, sigma, grid):
    r = np.random.default_rng(seed)
    d, m = int(r.integers(1, 3)), int(r.integers(1, 4))
    n1, n2 = int(r.integers(1, 9)), int(r.integers(1, 9))
    if grid:
        # lattice data produces many exact ties
        mu = M(r.integers(0, 3, (n1, d)) / 2, np.ones(n1))
        nu = M(r.integers(0, 3, (n2, d)) / 2, np.ones(n2))
        Z = CenterSet(np.unique(r.integers(0, 3, (m, d)) / 2, axis=0))
    else:
        mu = M(r.random((n1, d)), r.random(n1) + 0.1)
        nu = M(r.random((n2, d)), r.random(n2) + 0.1)
        Z = CenterSet(r.random((m, d)))
    spec = CostSpec(sigma)
    rep = maximize_dual(mu, nu, Z, spec)
    A, B = rep.source_partition, rep.target_partition
    plan = make_plan(A, B, mu, nu)
    tol = 2 * plan.residual + 1e-12
    assert np.all(plan.mass > 0)
    assert abs(plan.total_mass - 1) <= 1e-9
    assert np.abs(plan.row_sums(mu.n) - mu.weights).max() <= tol
    assert np.abs(plan.col_sums(nu.n) - nu.weights).max() <= tol
    assert np.all(A.labels[plan.source] == plan.cell) or A.split_atoms
    assert abs(A.cell_masses.sum() - 1) <= 1e-10
    for _, fr in A.split_atoms + B.split_atoms:
        assert all(0 < f <= 1 for f in fr.values())
        assert abs(sum(fr.values()) - 1) <= 1e-12
    cost_sd = plan_cost(plan, mu, nu, spec, Z)
    assert cost_sd - rep.value <= 1e-6 * (1 + rep.value)
    exact = exact_ot(mu, nu, ground_matrix(mu.points, nu.points, spec)).value
    assert cost_sd >= exact - 1e-9
    lp = exact_ot(mu, nu, semidiscrete_matrix(mu.points, nu.points, Z, spec)).value
    assert abs(cost_sd - lp) <= 1e-6 * (1 + lp)
