import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.core.errors import DimensionError, DomainError, InvariantError, RangeError
from src.core.measures import (
    AffineMap,
    DiscreteMeasure,
    GridDensity,
    GridSpec,
    TransportPlan,
    as_box,
    dirac,
    discretize,
    uniform_measure,
)
from src.core.templates import triangular_template
from tests.conftest import discrete_measures


# ==========================================
# DiscreteMeasure
# ==========================================
def test_weights_must_sum_to_one():
    with pytest.raises(InvariantError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])


def test_near_unit_weights_are_renormalized():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5 + 5e-7])
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_negligible_atoms_are_pruned():
    mu = DiscreteMeasure([[0.0], [1.0], [2.0]], [0.5, 0.5, 1e-18])
    assert mu.size == 2


def test_negative_weight_rejected():
    with pytest.raises(InvariantError):
        DiscreteMeasure([[0.0], [1.0]], [1.5, -0.5])


def test_atoms_outside_domain_rejected():
    with pytest.raises(DomainError):
        DiscreteMeasure([[0.0], [2.0]], [0.5, 0.5], [[-1.0, 1.0]])


def test_empty_measure_rejected():
    with pytest.raises(InvariantError):
        DiscreteMeasure(np.empty((0, 1)), np.empty(0))


def test_default_domain_is_bounding_box():
    mu = uniform_measure([[0.0, 1.0], [2.0, -1.0]])
    assert mu.domain.tolist() == [[0.0, 2.0], [-1.0, 1.0]]


def test_arrays_are_read_only():
    mu = dirac([0.5])
    with pytest.raises(ValueError):
        mu.points[0, 0] = 1.0


@given(discrete_measures(dim=2))
def test_merged_preserves_mass_and_mean(mu):
    merged, inverse = mu.merged()
    assert merged.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(merged.mean(), mu.mean(), atol=1e-12)
    np.testing.assert_array_equal(merged.points[inverse], mu.points)


def test_as_box_checks_orientation():
    with pytest.raises(InvariantError):
        as_box([[1.0, 0.0]])
    with pytest.raises(DimensionError):
        as_box([[0.0, 1.0]], dim=2)


# ==========================================
# GridDensity / GridSpec
# ==========================================
def test_grid_density_mass_checked():
    with pytest.raises(InvariantError):
        GridDensity([0.0], [0.5], [1.0, 1.0, 1.0])


def test_from_values_normalizes():
    q = GridDensity.from_values([0.0], [0.25], [1.0, 3.0, 0.0, 0.0])
    assert q.cell_masses().sum() == pytest.approx(1.0)
    assert q.values[1] == pytest.approx(3.0)


def test_second_moment_of_uniform_is_exact():
    q = GridDensity.on_box([[0.0, 1.0]], [7], np.ones(7))
    assert q.second_moment() == pytest.approx(1.0 / 3.0, abs=1e-14)


def test_evaluate_is_zero_outside():
    q = GridDensity.on_box([[0.0, 1.0]], [4], np.ones(4))
    np.testing.assert_allclose(q.evaluate([[-0.1], [0.3], [1.1]]), [0.0, 1.0, 0.0])


def test_grid_spec_centers_match_density_centers():
    q = GridDensity.on_box([[0.0, 1.0], [-1.0, 1.0]], [3, 4], np.ones((3, 4)))
    np.testing.assert_allclose(q.grid.centers(), q.centers())
    np.testing.assert_allclose(q.grid.box, q.domain)


def test_grid_spec_needs_cells():
    with pytest.raises(RangeError):
        GridSpec.on_box([[0.0, 1.0]], 0)


# ==========================================
# discretize
# ==========================================
def test_discretize_centers_keeps_cell_masses():
    q = GridDensity.on_box([[0.0, 1.0]], [4], [1.0, 2.0, 3.0, 4.0])
    mu = discretize(q)
    np.testing.assert_allclose(mu.points[:, 0], [0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(mu.weights, [0.1, 0.2, 0.3, 0.4])


def test_discretize_rebins_whole_cells():
    q = GridDensity.on_box([[0.0, 1.0]], [4], [1.0, 2.0, 3.0, 4.0])
    mu = discretize(q, m=2)
    np.testing.assert_allclose(mu.points[:, 0], [0.0875 / 0.3, 0.5375 / 0.7])
    np.testing.assert_allclose(mu.weights, [0.3, 0.7])


def test_discretize_uniform_onto_two_cells():
    q = GridDensity.on_box([[0.0, 1.0]], [8], np.ones(8))
    mu = discretize(q, m=2)
    np.testing.assert_allclose(mu.points[:, 0], [0.25, 0.75])
    np.testing.assert_allclose(mu.weights, [0.5, 0.5])


def test_discretize_delta_like_grid_gives_one_atom():
    q = GridDensity.on_box([[0.0, 1.0]], [4], [0.0, 1.0, 0.0, 0.0])
    mu = discretize(q, m=3)
    assert mu.size == 1
    np.testing.assert_allclose(mu.points, [[0.375]])


@given(st.integers(1, 12), st.integers(0, 7), st.integers(0, 7), st.integers(1, 2))
def test_single_cell_density_stays_a_single_atom(m, i, j, dim):
    values = np.zeros((8,) * dim)
    values[(i, j)[:dim]] = 1.0
    q = GridDensity.on_box([[-1.0, 1.0]] * dim, [8] * dim, values)
    mu = discretize(q, m=m)
    assert mu.size == 1
    np.testing.assert_allclose(mu.points[0], -1.0 + 0.25 * (np.array([i, j][:dim]) + 0.5))
    assert mu.weights[0] == 1.0


def test_discretize_triangle_matches_analytic_cell_masses():
    q = triangular_template(center=1.0, half_width=1.0, cells=64)
    mu = discretize(q, m=4)
    # F(x) = x²/2 on [0, 1] and 1 - (2 - x)²/2 on [1, 2]
    np.testing.assert_allclose(mu.weights, [0.125, 0.375, 0.375, 0.125], atol=1e-12)
    assert float(mu.weights.sum()) == pytest.approx(1.0, abs=1e-15)


def test_discretize_sample_mode_is_seeded():
    q = GridDensity.on_box([[0.0, 1.0]], [4], np.ones(4))
    a = discretize(q, m=50, mode="sample", seed=3)
    b = discretize(q, m=50, mode="sample", seed=3)
    np.testing.assert_array_equal(a.points, b.points)
    assert np.all((a.points >= 0) & (a.points <= 1))


def test_discretize_rejects_zero_atoms():
    q = GridDensity.on_box([[0.0, 1.0]], [4], np.ones(4))
    with pytest.raises(RangeError):
        discretize(q, m=0)


# ==========================================
# AffineMap
# ==========================================
def test_affine_map_needs_spd_matrix():
    with pytest.raises(InvariantError):
        AffineMap([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(InvariantError):
        AffineMap([[-1.0]], [0.0])


@given(st.floats(0.2, 3.0), st.floats(-2.0, 2.0))
def test_affine_inverse_roundtrip(scale, shift):
    phi = AffineMap([[scale]], [shift])
    x = np.linspace(-1, 1, 5).reshape(-1, 1)
    np.testing.assert_allclose(phi.inverse()(phi(x)), x, atol=1e-12)


def _spd(angle: float, eigenvalues) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    A = R @ np.diag(eigenvalues) @ R.T
    return (A + A.T) / 2.0


eigenvalue = st.floats(0.2, 3.0)
offset = st.floats(-2.0, 2.0)


@given(st.floats(0.0, np.pi), eigenvalue, eigenvalue, offset, offset)
def test_affine_inverse_roundtrip_in_the_plane(angle, l1, l2, b1, b2):
    phi = AffineMap(_spd(angle, [l1, l2]), [b1, b2])
    x = np.stack(np.meshgrid(np.linspace(-1, 1, 4), np.linspace(-1, 1, 3)), axis=-1).reshape(-1, 2)
    np.testing.assert_allclose(phi.inverse()(phi(x)), x, atol=1e-10)
    np.testing.assert_allclose(phi(phi.inverse()(x)), x, atol=1e-10)


@given(st.floats(0.0, np.pi), eigenvalue, eigenvalue, eigenvalue, eigenvalue, offset, offset,
       discrete_measures(dim=2))
def test_composed_pushforward_equals_successive_pushforwards(angle, s1, s2, t1, t2, b1, b2, mu):
    # same eigenvectors, so T∘S has a symmetric matrix
    first = AffineMap(_spd(angle, [s1, s2]), [b1, 0.0])
    second = AffineMap(_spd(angle, [t1, t2]), [0.0, b2])
    composed = first.then(second)
    np.testing.assert_allclose(composed(mu.points), second(first(mu.points)), atol=1e-10)
    direct = DiscreteMeasure(composed(mu.points), mu.weights, [[-30.0, 30.0]] * 2)
    stepwise = DiscreteMeasure(second(first(mu.points)), mu.weights, [[-30.0, 30.0]] * 2)
    np.testing.assert_array_equal(direct.weights, stepwise.weights)
    np.testing.assert_allclose(direct.points, stepwise.points, atol=1e-10)


def test_image_box_of_scaled_shift():
    phi = AffineMap(np.diag([2.0, 0.5]), [1.0, -1.0])
    np.testing.assert_allclose(phi.image_box([[0.0, 1.0], [0.0, 2.0]]), [[1.0, 3.0], [-1.0, 0.0]])


# ==========================================
# TransportPlan
# ==========================================
def test_plan_marginals_checked():
    mu = uniform_measure([[0.0], [1.0]])
    with pytest.raises(InvariantError):
        TransportPlan(np.array([[0.5, 0.0], [0.0, 0.4]]), mu, mu)


def test_plan_cost():
    mu = uniform_measure([[0.0], [1.0]])
    plan = TransportPlan(np.array([[0.0, 0.5], [0.5, 0.0]]), mu, mu)
    assert plan.cost() == pytest.approx(1.0)
