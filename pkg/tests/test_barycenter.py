import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.core.barycenter import (
    empirical_barycenter_1d,
    empirical_barycenter_affine,
    empirical_barycenter_affine_measure,
    empirical_barycenter_fixed_support,
    empirical_objective,
    euclidean_mean,
    sample_mean_map,
)
from src.core.errors import GridMismatchError, InvariantError, MaxIterWarning, RangeError
from src.core.measures import DiscreteMeasure, GridDensity, dirac, uniform_measure
from src.core.models import sample_theta
from src.core.transport1d import barycenter_1d, w2sq_1d
from tests.conftest import BOX_2D, discrete_measures


# ==========================================
# Exact 1D and affine
# ==========================================
def test_empirical_1d_needs_inputs():
    with pytest.raises(RangeError):
        empirical_barycenter_1d([])


def test_empirical_1d_of_identical_inputs(triangle_template):
    bary = empirical_barycenter_1d([triangle_template] * 3)
    assert w2sq_1d(bary, triangle_template) < 1e-4


def test_sample_mean_map(location_scale_family):
    mean = sample_mean_map([[1.0, -0.5], [2.0, 0.5]], location_scale_family)
    assert mean.A[0, 0] == pytest.approx(1.5)
    assert mean.b[0] == pytest.approx(0.0)


def test_affine_barycenter_matches_quantile_average(location_scale_family):
    thetas = sample_theta(location_scale_family, 5, 7)
    closed = empirical_barycenter_affine_measure(thetas, location_scale_family)
    members = [location_scale_family.member_measure(theta) for theta in thetas]
    exact = barycenter_1d(members)
    assert w2sq_1d(closed, exact) == pytest.approx(0.0, abs=1e-12)


def test_affine_barycenter_density_on_omega(affine_family_2d):
    thetas = sample_theta(affine_family_2d, 3, 10)
    density = empirical_barycenter_affine(thetas, affine_family_2d, affine_family_2d.omega_grid(48))
    assert density.shape == (48, 48)
    np.testing.assert_allclose(density.domain, affine_family_2d.domain)
    np.testing.assert_allclose(density.mean(), 0.3 * thetas.mean(axis=0), atol=2e-2)


def test_sample_mean_map_needs_thetas(shift_family):
    with pytest.raises(RangeError):
        sample_mean_map(np.empty((0, 1)), shift_family)


# ==========================================
# Fixed-support iteration
# ==========================================
def test_fixed_support_of_identical_inputs_stops_at_once():
    mu = uniform_measure([[0.0, 0.0], [0.5, -0.5], [-0.25, 0.75]], BOX_2D)
    bary, trace = empirical_barycenter_fixed_support([mu, mu, mu])
    assert len(trace) == 1
    assert trace[0] == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(bary.points, mu.points)


def test_fixed_support_recovers_translation_average():
    base = np.array([[0.0, 0.0], [0.2, 0.1], [-0.1, 0.3], [0.15, -0.2]])
    shifts = np.array([[-0.3, 0.1], [0.2, 0.2], [0.4, -0.3]])
    measures = [uniform_measure(base + s, BOX_2D) for s in shifts]
    bary, trace = empirical_barycenter_fixed_support(measures)
    expected = uniform_measure(base + shifts.mean(axis=0), BOX_2D)
    assert empirical_objective(bary, measures) == pytest.approx(empirical_objective(expected, measures), abs=1e-12)
    assert np.all(np.diff(trace) <= 1e-9)


@given(st.lists(discrete_measures(dim=2, max_atoms=4), min_size=2, max_size=3))
def test_fixed_support_trace_never_increases(measures):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterWarning)
        _, trace = empirical_barycenter_fixed_support(measures, max_iter=10)
    assert np.all(np.diff(trace) <= 1e-9)


def test_fixed_support_in_1d_matches_exact_barycenter():
    measures = [uniform_measure(np.array([-0.5, 0.0, 0.5]) * s + c, [[-2.0, 2.0]])
                for s, c in ((1.0, 0.0), (0.5, 0.3), (1.5, -0.2))]
    bary, _ = empirical_barycenter_fixed_support(measures)
    exact = barycenter_1d(measures)
    assert empirical_objective(bary, measures) == pytest.approx(empirical_objective(exact, measures), abs=1e-12)


def test_fixed_support_max_iter_warns():
    measures = [dirac([x, 0.0], BOX_2D) for x in (-0.5, 0.5)]
    seed = uniform_measure([[0.0, 0.9]], BOX_2D)
    with pytest.warns(MaxIterWarning):
        _, trace = empirical_barycenter_fixed_support(measures, seed, max_iter=0)
    assert len(trace) == 1


def test_seed_support_needs_equal_weights():
    mu = uniform_measure([[0.0, 0.0], [0.5, 0.5]], BOX_2D)
    seed = DiscreteMeasure([[0.0, 0.0], [0.5, 0.5]], [0.3, 0.7], BOX_2D)
    with pytest.raises(InvariantError):
        empirical_barycenter_fixed_support([mu], seed)


def test_fixed_support_runs_are_deterministic():
    measures = [uniform_measure(np.random.default_rng(k).uniform(-1, 1, (5, 2)), BOX_2D) for k in range(3)]
    a, trace_a = empirical_barycenter_fixed_support(measures, threads=1)
    b, trace_b = empirical_barycenter_fixed_support(measures, threads=3)
    np.testing.assert_array_equal(a.points, b.points)
    assert trace_a == trace_b


# ==========================================
# Euclidean mean
# ==========================================
def test_euclidean_mean_averages_values():
    a = GridDensity.on_box([[0.0, 1.0]], [2], [2.0, 0.0])
    b = GridDensity.on_box([[0.0, 1.0]], [2], [0.0, 2.0])
    np.testing.assert_allclose(euclidean_mean([a, b]).values, [1.0, 1.0])


def test_euclidean_mean_needs_common_grid():
    a = GridDensity.on_box([[0.0, 1.0]], [2], [1.0, 1.0])
    b = GridDensity.on_box([[0.0, 1.0]], [4], np.ones(4))
    with pytest.raises(GridMismatchError):
        euclidean_mean([a, b])
