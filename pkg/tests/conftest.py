import logging
from typing import Optional

import numpy as np
import pytest
from hypothesis import HealthCheck
from hypothesis import settings as hypothesis_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core.measures import DiscreteMeasure
from src.core.models import (
    LinearAffinePhi,
    make_affine_family,
    make_location_scale_1d,
    make_shift_family,
    uniform_weight,
)
from src.core.templates import triangular_template, uniform_template

hypothesis_settings.register_profile(
    "wbary", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
hypothesis_settings.load_profile("wbary")

BOX_1D = [[-1.0, 1.0]]
BOX_2D = [[-1.0, 1.0], [-1.0, 1.0]]


# ==========================================
# Strategies
# ==========================================
@st.composite
def discrete_measures(draw, dim: int = 1, min_atoms: int = 1, max_atoms: int = 6, equal_weights: bool = False,
                      size: Optional[int] = None):
    """Measures on [-1, 1]^dim with coordinates on a 1/8 lattice (exact float arithmetic)."""
    m = size if size is not None else draw(st.integers(min_atoms, max_atoms))
    lattice = draw(arrays(np.int64, (m, dim), elements=st.integers(-8, 8)))
    points = lattice / 8.0
    if equal_weights:
        weights = np.full(m, 1.0 / m)
    else:
        raw = draw(arrays(np.float64, m, elements=st.floats(0.05, 1.0)))
        weights = raw / raw.sum()
    return DiscreteMeasure(points, weights, [[-1.0, 1.0]] * dim)


# ==========================================
# Helpers
# ==========================================
def northwest_corner_plan(a: np.ndarray, b: np.ndarray, row_order=None, col_order=None) -> np.ndarray:
    """A feasible coupling of a and b built greedily along the given atom orders."""
    row_order = np.arange(a.size) if row_order is None else np.asarray(row_order)
    col_order = np.arange(b.size) if col_order is None else np.asarray(col_order)
    gamma = np.zeros((a.size, b.size))
    left_a, left_b = a.astype(np.float64).copy(), b.astype(np.float64).copy()
    i = j = 0
    while i < a.size and j < b.size:
        r, c = row_order[i], col_order[j]
        mass = min(left_a[r], left_b[c])
        gamma[r, c] += mass
        left_a[r] -= mass
        left_b[c] -= mass
        if left_a[r] <= 1e-15:
            i += 1
        else:
            j += 1
    return gamma


# ==========================================
# Fixtures
# ==========================================
@pytest.fixture(autouse=True)
def restore_root_logging():
    """main() installs a stderr handler on the root logger; put the root logger back after each test."""
    root = logging.getLogger()
    level = root.level
    yield
    for handler in [h for h in root.handlers if getattr(h, "_wbary", False)]:
        root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def triangle_template():
    return triangular_template(0.0, 0.6, cells=64)


@pytest.fixture(scope="session")
def shift_family(triangle_template):
    """1D shift family: triangle on [-0.6, 0.6], θ ~ U[-0.2, 0.2]."""
    box = [[-0.2, 0.2]]
    return make_shift_family(triangle_template, uniform_weight(box), box)


@pytest.fixture(scope="session")
def location_scale_family():
    """a ~ U[1, 2], b ~ U[-1, 1] acting on a uniform template on [-0.5, 0.5]."""
    box = [[1.0, 2.0], [-1.0, 1.0]]
    return make_location_scale_1d(uniform_template(-0.5, 0.5, cells=64), uniform_weight(box), box)


@pytest.fixture(scope="session")
def affine_family_2d():
    """Independent axis scalings and shifts of a 2D tent; every A_θ is diagonal."""
    phi = LinearAffinePhi(
        np.eye(2),
        [np.diag([0.4, 0.0]), np.diag([0.0, 0.4])],
        np.zeros(2),
        [[0.3, 0.0], [0.0, 0.3]],
    )
    box = [[-0.5, 0.5], [-0.5, 0.5]]
    template = triangular_template(0.0, 0.5, cells=24, dim=2)
    return make_affine_family(phi, uniform_weight(box), box, template)


@pytest.fixture(scope="session")
def shear_family_2d():
    """A_θ = I + θ S with S off-diagonal: the A_θ do not commute with their mean."""
    phi = LinearAffinePhi(
        np.eye(2),
        [np.diag([0.3, 0.0]), [[0.0, 0.2], [0.2, 0.0]]],
        np.zeros(2),
        [[0.0, 0.0], [0.0, 0.0]],
    )
    box = [[0.0, 1.0], [-0.5, 0.5]]
    template = triangular_template(0.0, 0.5, cells=16, dim=2)
    return make_affine_family(phi, uniform_weight(box), box, template)
