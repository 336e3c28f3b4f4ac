"""
Built-in template densities q0.

Cell values are exact cell averages of the continuous profile (CDF
differences divided by the cell width), so every template integrates to one
on its grid without any quadrature error.
"""

from typing import Callable, Dict, Optional

import numpy as np

from src.core.config import settings
from src.core.errors import ParseError, RangeError
from src.core.measures import GridDensity


# ---------------------------------------------------------------------------
# Analytic 1D profiles
# ---------------------------------------------------------------------------

def triangle_cdf(x, center: float = 0.0, half_width: float = 1.0) -> np.ndarray:
    t = np.clip((np.asarray(x, dtype=np.float64) - center) / half_width, -1.0, 1.0)
    return np.where(t <= 0.0, 0.5 * (1.0 + t) ** 2, 1.0 - 0.5 * (1.0 - t) ** 2)


def triangle_quantile(y, center: float = 0.0, half_width: float = 1.0) -> np.ndarray:
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)
    t = np.where(y <= 0.5, -1.0 + np.sqrt(2.0 * y), 1.0 - np.sqrt(2.0 * (1.0 - y)))
    return center + half_width * t


def bump_cdf(x, center: float = 0.0, half_width: float = 1.0) -> np.ndarray:
    """CDF of the density proportional to (1 - ((x - c)/h)²)² on [c - h, c + h]."""
    t = np.clip((np.asarray(x, dtype=np.float64) - center) / half_width, -1.0, 1.0)
    antiderivative = t - 2.0 * t ** 3 / 3.0 + t ** 5 / 5.0
    return (antiderivative + 8.0 / 15.0) / (16.0 / 15.0)


def uniform_cdf(x, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return np.clip((np.asarray(x, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Grid templates
# ---------------------------------------------------------------------------

def _cell_masses(cdf: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, cells: int) -> np.ndarray:
    edges = np.linspace(lo, hi, cells + 1)
    return np.diff(cdf(edges))


def _product_template(masses_per_axis, box) -> GridDensity:
    masses = masses_per_axis[0]
    for axis_masses in masses_per_axis[1:]:
        masses = np.multiply.outer(masses, axis_masses)
    shape = masses.shape
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    cell_size = (box[:, 1] - box[:, 0]) / np.asarray(shape)
    return GridDensity.from_values(box[:, 0], cell_size, masses / np.prod(cell_size))


def _check(cells: int, half_width: float, dim: int) -> None:
    if cells < 1:
        raise RangeError("templates need at least one cell per axis")
    if half_width <= 0:
        raise RangeError("template half width must be positive")
    if dim not in (1, 2):
        raise RangeError(f"templates are available for d = 1 or 2, got {dim}")


def uniform_template(lo: float = 0.0, hi: float = 1.0, cells: Optional[int] = None, dim: int = 1) -> GridDensity:
    cells = settings.GRID_CELLS if cells is None else cells
    _check(cells, (hi - lo) / 2.0, dim)
    axis = _cell_masses(lambda x: uniform_cdf(x, lo, hi), lo, hi, cells)
    return _product_template([axis] * dim, [[lo, hi]] * dim)


def triangular_template(center: float = 0.0, half_width: float = 1.0, cells: Optional[int] = None,
                        dim: int = 1) -> GridDensity:
    """Tent density (1/A)(1 - |x - c|/A) per axis on [c - A, c + A]; products of tents in 2D."""
    cells = settings.GRID_CELLS if cells is None else cells
    _check(cells, half_width, dim)
    lo, hi = center - half_width, center + half_width
    axis = _cell_masses(lambda x: triangle_cdf(x, center, half_width), lo, hi, cells)
    return _product_template([axis] * dim, [[lo, hi]] * dim)


def bump_template(center: float = 0.0, half_width: float = 1.0, cells: Optional[int] = None,
                  dim: int = 1) -> GridDensity:
    """Smooth compactly supported bump ∝ (1 - ((x - c)/h)²)² per axis."""
    cells = settings.GRID_CELLS if cells is None else cells
    _check(cells, half_width, dim)
    lo, hi = center - half_width, center + half_width
    axis = _cell_masses(lambda x: bump_cdf(x, center, half_width), lo, hi, cells)
    return _product_template([axis] * dim, [[lo, hi]] * dim)


TEMPLATES: Dict[str, Callable[..., GridDensity]] = {
    "uniform": uniform_template,
    "triangular": triangular_template,
    "bump": bump_template,
}


def build_template(kind: str, **params) -> GridDensity:
    """Look up a built-in template by name; params are passed through."""
    try:
        builder = TEMPLATES[kind]
    except KeyError:
        raise ParseError(f"unknown template kind '{kind}' (expected one of {sorted(TEMPLATES)})") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ParseError(f"bad parameters for template '{kind}': {exc}") from None
