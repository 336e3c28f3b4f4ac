import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.core.errors import CertificationError, OracleScopeError, SizeError
from src.core.measures import DiscreteMeasure, TransportPlan, dirac, squared_distances, uniform_measure
from src.core.transport_exact import (
    barycentric_projection,
    certify,
    w2sq,
    w2sq_lp,
    w2sq_permutation_oracle,
)
from tests.conftest import BOX_2D, discrete_measures, northwest_corner_plan


def test_diracs_cost_squared_distance():
    cost, plan = w2sq_lp(dirac([0.0, 0.0], BOX_2D), dirac([0.6, 0.8], BOX_2D))
    assert cost == pytest.approx(1.0)
    assert plan.gamma.shape == (1, 1)


def test_two_point_swap():
    mu = uniform_measure([[0.0, 0.0], [1.0, 0.0]], BOX_2D)
    nu = uniform_measure([[1.0, 0.0], [0.0, 0.0]], BOX_2D)
    assert w2sq(mu, nu) == pytest.approx(0.0, abs=1e-14)


def test_size_cap():
    mu = uniform_measure(np.linspace(-1, 1, 5))
    with pytest.raises(SizeError):
        w2sq_lp(mu, mu, max_atoms=4)


def test_duplicate_atoms_are_merged_and_split_back():
    mu = DiscreteMeasure([[0.0], [0.0], [1.0]], [0.25, 0.25, 0.5], [[-1.0, 1.0]])
    nu = DiscreteMeasure([[0.5], [1.0]], [0.5, 0.5], [[-1.0, 1.0]])
    cost, plan = w2sq_lp(mu, nu)
    assert plan.gamma.shape == (3, 2)
    np.testing.assert_allclose(plan.gamma.sum(axis=1), mu.weights)
    assert cost == pytest.approx(0.5 * 0.25)


@given(discrete_measures(dim=2), discrete_measures(dim=2))
def test_plan_is_certified_optimal(mu, nu):
    cost, plan = w2sq_lp(mu, nu)
    u, v = plan.duals
    certify(plan.cost_matrix(), plan.gamma, u, v)
    # strong duality
    assert cost == pytest.approx(float(mu.weights @ u + nu.weights @ v), abs=1e-9)


@given(discrete_measures(dim=2), discrete_measures(dim=2), st.randoms(use_true_random=False))
def test_lp_beats_any_feasible_plan(mu, nu, random):
    rows = list(range(mu.size))
    cols = list(range(nu.size))
    random.shuffle(rows)
    random.shuffle(cols)
    gamma = northwest_corner_plan(mu.weights, nu.weights, rows, cols)
    feasible = float(np.sum(gamma * squared_distances(mu.points, nu.points)))
    assert w2sq(mu, nu) <= feasible + 1e-12


@given(st.integers(1, 6).flatmap(lambda m: st.tuples(
    discrete_measures(dim=2, size=m, equal_weights=True), discrete_measures(dim=2, size=m, equal_weights=True))))
def test_lp_matches_permutation_oracle(pair):
    mu, nu = pair
    assert w2sq(mu, nu) == pytest.approx(w2sq_permutation_oracle(mu, nu), abs=1e-12)


def test_oracle_scope():
    mu = uniform_measure(np.linspace(-1, 1, 9))
    with pytest.raises(OracleScopeError):
        w2sq_permutation_oracle(mu, mu)
    nu = DiscreteMeasure([[0.0], [1.0]], [0.3, 0.7])
    with pytest.raises(OracleScopeError):
        w2sq_permutation_oracle(nu, nu)


def test_certify_rejects_suboptimal_duals():
    cost_matrix = np.array([[0.0, 1.0], [1.0, 0.0]])
    gamma = np.array([[0.0, 0.5], [0.5, 0.0]])
    with pytest.raises(CertificationError):
        certify(cost_matrix, gamma, np.zeros(2), np.zeros(2))


@given(discrete_measures(dim=2, max_atoms=4), discrete_measures(dim=2, max_atoms=4))
def test_barycentric_projection_in_convex_hull(mu, nu):
    _, plan = w2sq_lp(mu, nu)
    projected = barycentric_projection(plan)
    lo, hi = nu.points.min(axis=0), nu.points.max(axis=0)
    assert np.all(projected >= lo - 1e-12) and np.all(projected <= hi + 1e-12)


def test_barycentric_projection_of_identity_plan():
    mu = uniform_measure([[0.0, 0.0], [0.5, 0.5]], BOX_2D)
    plan = TransportPlan(np.diag(mu.weights), mu, mu)
    np.testing.assert_allclose(barycentric_projection(plan), mu.points)
