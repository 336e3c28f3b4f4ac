"""
Core data model: discrete measures, grid densities, affine maps and transport plans.

Every type here is an immutable value once constructed: arrays are copied and
marked read-only, and all invariants are checked in __post_init__.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple
import logging

import numpy as np

from src.core.config import settings
from src.core.errors import DimensionError, DomainError, InvariantError, RangeError

logger = logging.getLogger("wbary.measures")

WEIGHT_SUM_TOL = 1e-12
DENSITY_MASS_TOL = 1e-9
SYMMETRY_TOL = 1e-12
EIGEN_TOL = 1e-10
PLAN_MARGINAL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def as_box(domain, dim: Optional[int] = None) -> np.ndarray:
    """Normalize a domain spec into a (d, 2) array of [lo, hi] rows."""
    box = np.asarray(domain, dtype=np.float64)
    if box.ndim == 1 and box.shape[0] == 2:
        box = box.reshape(1, 2)
    if box.ndim != 2 or box.shape[1] != 2:
        raise InvariantError(f"domain must be a list of [lo, hi] pairs, got shape {box.shape}")
    if dim is not None and box.shape[0] != dim:
        raise DimensionError(f"domain has {box.shape[0]} axes, expected {dim}")
    if np.any(box[:, 1] < box[:, 0]):
        raise InvariantError("domain box has hi < lo on some axis")
    return box


def box_diameter(box: np.ndarray) -> float:
    box = as_box(box)
    return float(np.linalg.norm(box[:, 1] - box[:, 0]))


def same_box(box1: np.ndarray, box2: np.ndarray, tol: float = 1e-12) -> bool:
    box1, box2 = as_box(box1), as_box(box2)
    if box1.shape != box2.shape:
        return False
    scale = max(1.0, float(np.abs(box1).max()), float(np.abs(box2).max()))
    return bool(np.all(np.abs(box1 - box2) <= tol * scale))


def require_same_box(mu, nu) -> None:
    if mu.dim != nu.dim:
        raise DimensionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if not same_box(mu.domain, nu.domain):
        raise DomainError(
            f"measures declare different domain boxes: {mu.domain.tolist()} vs {nu.domain.tolist()}"
        )


def _inside(points: np.ndarray, box: np.ndarray) -> np.ndarray:
    width = np.maximum(box[:, 1] - box[:, 0], 1.0)
    slack = 1e-9 * width
    return np.all((points >= box[:, 0] - slack) & (points <= box[:, 1] + slack), axis=1)


# ---------------------------------------------------------------------------
# DiscreteMeasure
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud in R^d on a declared compact box Ω."""

    points: np.ndarray
    weights: np.ndarray
    domain: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)

        if points.ndim != 2 or points.shape[0] == 0:
            raise InvariantError("a measure needs at least one atom")
        if points.shape[0] != weights.shape[0]:
            raise InvariantError(
                f"points/weights length mismatch: {points.shape[0]} vs {weights.shape[0]}"
            )
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise InvariantError("points and weights must be finite")
        if np.any(weights < 0):
            raise InvariantError(f"negative weight {weights.min():.3e}")
        total = float(weights.sum())
        if abs(total - 1.0) > settings.WEIGHT_RENORM_TOL:
            raise InvariantError(f"weights sum to {total:.9f}, not 1")

        # prune negligible atoms, then renormalize once
        keep = weights >= settings.WEIGHT_PRUNE
        pruned = not np.all(keep)
        if pruned:
            points, weights = points[keep], weights[keep]
            if points.shape[0] == 0:
                raise InvariantError("all weights are negligible")
        if pruned or abs(float(weights.sum()) - 1.0) > WEIGHT_SUM_TOL:
            weights = weights / weights.sum()

        if self.domain is None:
            box = np.stack([points.min(axis=0), points.max(axis=0)], axis=1)
        else:
            box = as_box(self.domain, points.shape[1])
        if not np.all(_inside(points, box)):
            raise DomainError("some atoms lie outside the declared domain box")

        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "domain", _frozen(box))

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def second_moment(self) -> float:
        """∫|x|² dμ"""
        return float(self.weights @ np.sum(self.points ** 2, axis=1))

    def with_domain(self, domain) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights, domain)

    def merged(self) -> Tuple["DiscreteMeasure", np.ndarray]:
        """
        Merge duplicate support points by summing their weights.
        Returns the merged measure and, for each original atom, the index of its merged atom.
        """
        unique, inverse = np.unique(self.points, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        if unique.shape[0] == self.size:
            return self, np.arange(self.size)
        weights = np.bincount(inverse, weights=self.weights, minlength=unique.shape[0])
        return DiscreteMeasure(unique, weights, self.domain), inverse

    def __repr__(self) -> str:
        return f"DiscreteMeasure(d={self.dim}, atoms={self.size}, domain={self.domain.tolist()})"


def dirac(point, domain=None) -> DiscreteMeasure:
    point = np.atleast_1d(np.asarray(point, dtype=np.float64))
    return DiscreteMeasure(point.reshape(1, -1), [1.0], domain)


def uniform_measure(points, domain=None) -> DiscreteMeasure:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    return DiscreteMeasure(points, np.full(points.shape[0], 1.0 / points.shape[0]), domain)


# ---------------------------------------------------------------------------
# GridSpec / GridDensity
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSpec:
    """A regular axis-aligned grid: shape[k] cells of width cell_size[k] starting at origin[k]."""

    origin: np.ndarray
    cell_size: np.ndarray
    shape: Tuple[int, ...]

    @classmethod
    def on_box(cls, box, cells) -> "GridSpec":
        box = as_box(box)
        shape = tuple(int(c) for c in np.broadcast_to(np.asarray(cells), (box.shape[0],)))
        if min(shape) < 1:
            raise RangeError("a grid needs at least one cell per axis")
        return cls(_frozen(box[:, 0]), _frozen((box[:, 1] - box[:, 0]) / np.asarray(shape)), shape)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def box(self) -> np.ndarray:
        return np.stack([self.origin, self.origin + self.cell_size * np.asarray(self.shape)], axis=1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_size))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.cell_size[axis]

    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.axis_centers(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """
    Piecewise-constant probability density on an axis-aligned grid (d = 1 or 2).
    values[i, j] is the density on the cell [origin + i*h, origin + (i+1)*h) x ...
    """

    origin: np.ndarray
    cell_size: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        dim = values.ndim
        if dim not in (1, 2):
            raise DimensionError(f"grid densities support d = 1 or 2, got {dim}")
        origin = np.atleast_1d(np.asarray(self.origin, dtype=np.float64)).reshape(-1)
        cell_size = np.atleast_1d(np.asarray(self.cell_size, dtype=np.float64)).reshape(-1)
        if cell_size.shape[0] == 1 and dim > 1:
            cell_size = np.repeat(cell_size, dim)
        if origin.shape[0] != dim or cell_size.shape[0] != dim:
            raise DimensionError("origin and cell_size must have one entry per grid axis")
        if np.any(cell_size <= 0):
            raise InvariantError("cell sizes must be positive")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvariantError("density values must be finite and nonnegative")
        mass = float(values.sum() * np.prod(cell_size))
        if abs(mass - 1.0) > DENSITY_MASS_TOL:
            raise InvariantError(f"density integrates to {mass:.12f}, not 1")

        object.__setattr__(self, "origin", _frozen(origin))
        object.__setattr__(self, "cell_size", _frozen(cell_size))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_values(cls, origin, cell_size, values) -> "GridDensity":
        """Build a grid density from unnormalized nonnegative cell values."""
        values = np.asarray(values, dtype=np.float64)
        cell_size = np.atleast_1d(np.asarray(cell_size, dtype=np.float64))
        if cell_size.shape[0] == 1 and values.ndim > 1:
            cell_size = np.repeat(cell_size, values.ndim)
        mass = float(values.sum() * np.prod(cell_size))
        if mass <= 0:
            raise InvariantError("grid values carry no mass")
        return cls(origin, cell_size, values / mass)

    @classmethod
    def on_box(cls, box, shape: Sequence[int], values) -> "GridDensity":
        box = as_box(box)
        shape = np.asarray(shape, dtype=np.int64)
        cell_size = (box[:, 1] - box[:, 0]) / shape
        return cls.from_values(box[:, 0], cell_size, values)

    @property
    def dim(self) -> int:
        return int(self.values.ndim)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_size))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.origin, self.cell_size, self.shape)

    @property
    def domain(self) -> np.ndarray:
        hi = self.origin + self.cell_size * np.asarray(self.shape)
        return np.stack([self.origin, hi], axis=1)

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.cell_size[axis]

    def axis_edges(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.shape[axis] + 1) * self.cell_size[axis]

    def centers(self) -> np.ndarray:
        """Cell centers as an (N, d) array in C order (matching values.ravel())."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_masses(self) -> np.ndarray:
        return self.values.ravel() * self.cell_volume

    def evaluate(self, points) -> np.ndarray:
        """Piecewise-constant density at arbitrary points (0 outside the grid)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, self.dim)
        idx = np.floor((points - self.origin) / self.cell_size).astype(np.int64)
        shape = np.asarray(self.shape)
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(points.shape[0])
        if np.any(ok):
            out[ok] = self.values[tuple(idx[ok].T)]
        return out

    def same_grid(self, other: "GridDensity", tol: float = 1e-12) -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.origin, other.origin, rtol=0, atol=tol)
            and np.allclose(self.cell_size, other.cell_size, rtol=tol, atol=0)
        )

    def mean(self) -> np.ndarray:
        return self.cell_masses() @ self.centers()

    def second_moment(self) -> float:
        """Exact ∫|x|² q(x) dx for the piecewise-constant density."""
        centers = self.centers()
        # per-cell ∫ x_k² over a cell of width h around c equals h (c² + h²/12)
        within = np.sum(self.cell_size ** 2) / 12.0
        return float(self.cell_masses() @ (np.sum(centers ** 2, axis=1) + within))

    def __repr__(self) -> str:
        return f"GridDensity(d={self.dim}, shape={self.shape}, domain={self.domain.tolist()})"


# ---------------------------------------------------------------------------
# AffineMap
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> A x + b with A symmetric positive definite."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64)).reshape(-1)
        if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise DimensionError(f"incompatible affine map shapes A{A.shape}, b{b.shape}")
        if np.max(np.abs(A - A.T)) > SYMMETRY_TOL * max(1.0, float(np.abs(A).max())):
            raise InvariantError("affine map matrix A must be symmetric")
        smallest = float(np.linalg.eigvalsh((A + A.T) / 2.0).min())
        if smallest <= EIGEN_TOL:
            raise InvariantError(f"affine map matrix A must be positive definite (min eigenvalue {smallest:.3e})")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def shift(cls, vector) -> "AffineMap":
        vector = np.atleast_1d(np.asarray(vector, dtype=np.float64))
        return cls(np.eye(vector.shape[0]), vector)

    @property
    def dim(self) -> int:
        return int(self.b.shape[0])

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.A.T + self.b

    def inverse(self) -> "AffineMap":
        A_inv = np.linalg.inv(self.A)
        A_inv = (A_inv + A_inv.T) / 2.0
        return AffineMap(A_inv, -A_inv @ self.b)

    def then(self, other: "AffineMap") -> "AffineMap":
        """The composition other ∘ self (apply self first). Requires a symmetric product."""
        A = other.A @ self.A
        if np.allclose(A, A.T, rtol=0, atol=1e-12):
            A = (A + A.T) / 2.0
        return AffineMap(A, other.A @ self.b + other.b)

    def image_box(self, box) -> np.ndarray:
        """Bounding box of the image of an axis-aligned box."""
        box = as_box(box, self.dim)
        corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(self.dim, -1).T
        image = self(corners)
        return np.stack([image.min(axis=0), image.max(axis=0)], axis=1)


# ---------------------------------------------------------------------------
# TransportPlan
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling matrix between two discrete measures."""

    gamma: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure
    # LP dual potentials (u per source atom, v per target atom) when the plan comes from the exact solver
    duals: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=np.float64)
        if gamma.shape != (self.source.size, self.target.size):
            raise InvariantError(
                f"plan shape {gamma.shape} does not match marginals ({self.source.size}, {self.target.size})"
            )
        if np.any(gamma < -PLAN_MARGINAL_TOL):
            raise InvariantError("transport plan has negative entries")
        gamma = np.clip(gamma, 0.0, None)
        if np.max(np.abs(gamma.sum(axis=1) - self.source.weights)) > PLAN_MARGINAL_TOL:
            raise InvariantError("plan row sums do not match the source weights")
        if np.max(np.abs(gamma.sum(axis=0) - self.target.weights)) > PLAN_MARGINAL_TOL:
            raise InvariantError("plan column sums do not match the target weights")
        object.__setattr__(self, "gamma", _frozen(gamma))

    def cost_matrix(self) -> np.ndarray:
        return squared_distances(self.source.points, self.target.points)

    def cost(self) -> float:
        return float(np.sum(self.gamma * self.cost_matrix()))


def squared_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Dense |x_i - y_j|² matrix."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


# ---------------------------------------------------------------------------
# discretize
# ---------------------------------------------------------------------------

def discretize(
    density: GridDensity,
    m: Optional[int] = None,
    mode: Literal["centers", "sample"] = "centers",
    seed: Optional[int] = None,
    domain=None,
) -> DiscreteMeasure:
    """
    Turn a grid density into a discrete measure.

    centers: one atom per cell center, weighted by the exact cell mass. With m cells
    per axis of its own box instead, each source cell moves whole into the new bin
    holding its center and the atom is the bin's mass-weighted centroid.
    sample: m i.i.d. draws (cell by mass, then uniform inside the cell), equal weights.
    """
    if m is not None and m < 1:
        raise RangeError("discretize needs m >= 1")
    box = density.domain
    if mode == "sample":
        count = m if m is not None else int(np.prod(density.shape))
        rng = np.random.default_rng(seed)
        masses = density.cell_masses()
        cells = rng.choice(masses.shape[0], size=count, p=masses / masses.sum())
        lower = density.centers()[cells] - density.cell_size / 2.0
        points = lower + rng.random((count, density.dim)) * density.cell_size
        return DiscreteMeasure(points, np.full(count, 1.0 / count), domain if domain is not None else box)

    if m is None or all(m == s for s in density.shape):
        points = density.centers()
        masses = density.cell_masses()
    else:
        # each source cell goes whole to the bin holding its center; the atom sits at the bin's centroid
        cell_masses = density.cell_masses()
        occupied = cell_masses > 0
        centers, cell_masses = density.centers()[occupied], cell_masses[occupied]
        width = (box[:, 1] - box[:, 0]) / m
        index = np.clip(np.floor((centers - box[:, 0]) / width).astype(np.int64), 0, m - 1)
        bins = np.ravel_multi_index(tuple(index.T), (m,) * density.dim)
        n_bins = m ** density.dim
        masses = np.bincount(bins, weights=cell_masses, minlength=n_bins)
        moments = np.stack([np.bincount(bins, weights=cell_masses * centers[:, k], minlength=n_bins)
                            for k in range(density.dim)], axis=1)
        points = np.divide(moments, masses[:, None], out=np.zeros_like(moments), where=masses[:, None] > 0)

    keep = masses > 0
    weights = masses[keep]
    return DiscreteMeasure(points[keep], weights / weights.sum(), domain if domain is not None else box)
