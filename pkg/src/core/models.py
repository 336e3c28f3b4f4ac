"""
Random-measure families μ_θ = (φ_θ)#μ0 with φ_θ(x) = A_θ x + b_θ.

A family bundles the parameter box Θ, the weight density g on Θ, the map
θ -> φ_θ and the template density q0, plus the common compact box Ω that all
members live in. Expectations over θ go through a midpoint Quadrature; the
population barycenter of an affine family is the push-forward of q0 by the
mean map x -> E(A_θ) x + E(b_θ).
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy import integrate, special, stats

from src.core.config import settings
from src.core.errors import (
    DimensionError,
    DomainError,
    EfficiencyError,
    FamilyError,
    InvariantError,
    RangeError,
)
from src.core.measures import (
    AffineMap,
    DiscreteMeasure,
    GridDensity,
    GridSpec,
    _frozen,
    as_box,
    discretize,
)
from src.core.transport1d import QuantileFn, quantile_function, quantile_mean

logger = logging.getLogger("wbary.models")

NORMALIZATION_TOL = 1e-6
MIN_ACCEPTANCE = 1e-4
REJECTION_BATCH = 4096
REJECTION_PROBE = 100_000
OMEGA_PROBES_PER_AXIS = 9
CONTINUITY_PAIRS = 64
# sub-points per axis when averaging a pushed density over an output cell
PUSHFORWARD_SUBSAMPLES = 5


# ==========================================
# Weight densities g on Θ
# ==========================================
@dataclass(frozen=True, eq=False)
class WeightDensity:
    """
    Product density g(θ) = Π_k g_k(θ_k) on the box Θ.
    Degenerate axes (lo == hi) carry a point mass and contribute a factor 1.
    """

    kind: str
    box: np.ndarray
    factors: Tuple[Optional[Callable[[np.ndarray], np.ndarray]], ...]
    params: Dict[str, Any] = field(default_factory=dict)
    mode: Optional[np.ndarray] = None
    exact_mean: Optional[np.ndarray] = None

    def __post_init__(self):
        box = as_box(self.box)
        if len(self.factors) != box.shape[0]:
            raise DimensionError(f"g has {len(self.factors)} factors for a {box.shape[0]}-dimensional Θ")
        object.__setattr__(self, "box", _frozen(box))

    @property
    def dim(self) -> int:
        return int(self.box.shape[0])

    @property
    def degenerate(self) -> np.ndarray:
        return self.box[:, 1] == self.box[:, 0]

    def __call__(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=np.float64).reshape(-1, self.dim)
        out = np.ones(thetas.shape[0])
        for k, factor in enumerate(self.factors):
            if factor is not None:
                out *= factor(thetas[:, k])
        inside = np.all((thetas >= self.box[:, 0]) & (thetas <= self.box[:, 1]), axis=1)
        return np.where(inside, out, 0.0)

    def peak(self) -> Optional[float]:
        return None if self.mode is None else float(self(self.mode)[0])

    def mean(self) -> Optional[np.ndarray]:
        return self.exact_mean

    def estimate_bound(self, per_axis: int = 65) -> float:
        """Grid maximum inflated by 1%, for rejection sampling when no exact peak is known."""
        per_axis = max(3, int(round(20000 ** (1.0 / self.dim)))) if self.dim > 2 else per_axis
        axes = [np.linspace(lo, hi, 1 if lo == hi else per_axis) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        values = self(np.stack([m.ravel() for m in mesh], axis=1))
        return 1.01 * float(values.max())

    def check_normalized(self) -> None:
        """Every non-degenerate factor must be nonnegative and integrate to 1 over its interval."""
        for k, factor in enumerate(self.factors):
            lo, hi = self.box[k]
            if factor is None:
                continue
            probe = factor(np.linspace(lo, hi, 257))
            if np.any(probe < 0) or not np.all(np.isfinite(probe)):
                raise InvariantError(f"g is negative or not finite on axis {k}")
            total, _ = integrate.quad(lambda t: float(factor(np.array([t]))[0]), lo, hi, limit=200)
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise InvariantError(f"g integrates to {total:.9f} on axis {k}, not 1")


def _unit_box(box) -> np.ndarray:
    box = as_box(box)
    if np.any(box[:, 1] < box[:, 0]):
        raise RangeError("Θ box has hi < lo")
    return box


def uniform_weight(box) -> WeightDensity:
    box = _unit_box(box)
    factors = tuple(
        None if lo == hi else (lambda t, w=hi - lo: np.full(np.shape(t), 1.0 / w)) for lo, hi in box
    )
    center = box.mean(axis=1)
    return WeightDensity("uniform", box, factors, {}, mode=center.reshape(1, -1), exact_mean=center)


def trunc_gauss_weight(box, mean=None, sd=None) -> WeightDensity:
    """Independent Gaussians truncated to the box (scipy.stats.truncnorm per axis)."""
    box = _unit_box(box)
    center = box.mean(axis=1)
    mu = center if mean is None else np.broadcast_to(np.asarray(mean, dtype=np.float64), center.shape).copy()
    sigma = (box[:, 1] - box[:, 0]) / 4.0 if sd is None else np.broadcast_to(
        np.asarray(sd, dtype=np.float64), center.shape).copy()
    factors, means = [], center.copy()
    for k, (lo, hi) in enumerate(box):
        if lo == hi:
            factors.append(None)
            continue
        if sigma[k] <= 0:
            raise RangeError("trunc_gauss needs positive standard deviations")
        frozen = stats.truncnorm((lo - mu[k]) / sigma[k], (hi - mu[k]) / sigma[k], loc=mu[k], scale=sigma[k])
        factors.append(frozen.pdf)
        means[k] = float(frozen.mean())
    mode = np.clip(mu, box[:, 0], box[:, 1]).reshape(1, -1)
    params = {"mean": mu.tolist(), "sd": sigma.tolist()}
    return WeightDensity("trunc_gauss", box, tuple(factors), params, mode=mode, exact_mean=means)


def poly_weight(box, power: int = 2) -> WeightDensity:
    """Π_k (1 - ((θ_k - c_k)/h_k)²)^power, normalized in closed form with the Beta function."""
    box = _unit_box(box)
    if power < 0:
        raise RangeError("poly weight needs a nonnegative power")
    center, half = box.mean(axis=1), (box[:, 1] - box[:, 0]) / 2.0
    factors = []
    for k in range(box.shape[0]):
        if half[k] == 0:
            factors.append(None)
            continue
        norm = half[k] * special.beta(0.5, power + 1.0)
        factors.append(lambda t, c=center[k], h=half[k], z=norm: np.clip(1.0 - ((t - c) / h) ** 2, 0.0, None) ** power / z)
    return WeightDensity("poly", box, tuple(factors), {"power": power}, mode=center.reshape(1, -1), exact_mean=center)


def custom_weight(box, factors: Sequence[Optional[Callable]], mode=None) -> WeightDensity:
    """A caller-supplied product density; smoothness and positivity are the caller's obligation."""
    box = _unit_box(box)
    mode = None if mode is None else np.asarray(mode, dtype=np.float64).reshape(1, -1)
    return WeightDensity("custom", box, tuple(factors), {}, mode=mode)


WEIGHTS: Dict[str, Callable[..., WeightDensity]] = {
    "uniform": uniform_weight,
    "trunc_gauss": trunc_gauss_weight,
    "poly": poly_weight,
}


# ==========================================
# Quadrature over Θ
# ==========================================
@dataclass(frozen=True, eq=False)
class Quadrature:
    """
    Midpoint rule on a uniform grid of Θ.
    g_values are rescaled so that Σ volumes·g_values = 1; probabilities = volumes·g_values.
    """

    nodes: np.ndarray
    volumes: np.ndarray
    g_values: np.ndarray

    @classmethod
    def midpoint(cls, box, g: Callable[[np.ndarray], np.ndarray], nodes_per_axis=None) -> "Quadrature":
        box = _unit_box(box)
        per_axis = settings.QUAD_NODES if nodes_per_axis is None else nodes_per_axis
        per_axis = np.broadcast_to(np.asarray(per_axis, dtype=np.int64), (box.shape[0],))
        if np.any(per_axis < 1):
            raise RangeError("quadrature needs at least one node per axis")
        axes, widths = [], []
        for (lo, hi), count in zip(box, per_axis):
            if lo == hi:
                axes.append(np.array([lo]))
                widths.append(1.0)
            else:
                h = (hi - lo) / count
                axes.append(lo + (np.arange(count) + 0.5) * h)
                widths.append(h)
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        volumes = np.full(nodes.shape[0], float(np.prod(widths)))
        raw = np.asarray(g(nodes), dtype=np.float64)
        total = float(volumes @ raw)
        if total <= 0 or np.any(raw < 0):
            raise InvariantError("g must be nonnegative with positive mass on the quadrature nodes")
        if abs(total - 1.0) > 1e-2:
            logger.warning(f"[Quadrature] midpoint mass of g is {total:.6f}; rescaling to 1")
        return cls(_frozen(nodes), _frozen(volumes), _frozen(raw / total))

    @property
    def size(self) -> int:
        return int(self.volumes.shape[0])

    @property
    def probabilities(self) -> np.ndarray:
        p = self.volumes * self.g_values
        return p / p.sum()

    def expect(self, values: np.ndarray) -> np.ndarray:
        """
        Σ_k p_k values[k] along the first axis, summed in node order.
        Taken relative to values[0], so values that agree at every node come back exactly.
        """
        values = np.asarray(values, dtype=np.float64)
        p = self.probabilities
        ref = values[0]
        return ref + np.tensordot(p, values - ref, axes=(0, 0)) / p.sum()


# ==========================================
# Maps θ -> φ_θ
# ==========================================
@dataclass(frozen=True, eq=False)
class LinearAffinePhi:
    """φ_θ with A_θ = A0 + Σ_k θ_k A_k and b_θ = b0 + Σ_k θ_k B_k."""

    A0: np.ndarray
    A_coeffs: np.ndarray
    b0: np.ndarray
    b_coeffs: np.ndarray

    def __post_init__(self):
        A0 = np.atleast_2d(np.asarray(self.A0, dtype=np.float64))
        d = A0.shape[0]
        A_coeffs = np.asarray(self.A_coeffs, dtype=np.float64).reshape(-1, d, d)
        b0 = np.asarray(self.b0, dtype=np.float64).reshape(d)
        b_coeffs = np.asarray(self.b_coeffs, dtype=np.float64).reshape(-1, d)
        if A_coeffs.shape[0] != b_coeffs.shape[0]:
            raise DimensionError("A and B coefficient tables need one entry per θ coordinate")
        for name, value in (("A0", A0), ("A_coeffs", A_coeffs), ("b0", b0), ("b_coeffs", b_coeffs)):
            object.__setattr__(self, name, _frozen(value))

    @property
    def param_dim(self) -> int:
        return int(self.A_coeffs.shape[0])

    def __call__(self, theta) -> AffineMap:
        theta = np.asarray(theta, dtype=np.float64).reshape(self.param_dim)
        A = self.A0 + np.tensordot(theta, self.A_coeffs, axes=(0, 0))
        return AffineMap(A, self.b0 + theta @ self.b_coeffs)


def _as_affine(value) -> AffineMap:
    if isinstance(value, AffineMap):
        return value
    A, b = value
    return AffineMap(A, b)


# ==========================================
# DeformableFamily
# ==========================================
@dataclass(frozen=True, eq=False)
class DeformableFamily:
    """
    Random measure μ_θ = (φ_θ)#μ0, θ ~ g on Θ, all members supported in Ω.
    Build with make_shift_family / make_location_scale_1d / make_affine_family.
    """

    kind: str
    theta_box: np.ndarray
    g: WeightDensity
    phi: Callable[[np.ndarray], AffineMap]
    template: GridDensity
    domain: np.ndarray
    lipschitz: float = 0.0
    # template atoms per axis for the matched discretization (None: the template's own cells)
    atoms_per_axis: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "theta_box", _frozen(as_box(self.theta_box)))
        object.__setattr__(self, "domain", _frozen(as_box(self.domain, self.template.dim)))

    @property
    def dim(self) -> int:
        return self.template.dim

    @property
    def param_dim(self) -> int:
        return int(self.theta_box.shape[0])

    def map(self, theta) -> AffineMap:
        return _as_affine(self.phi(np.asarray(theta, dtype=np.float64).reshape(self.param_dim)))

    def quadrature(self, nodes_per_axis=None) -> Quadrature:
        return Quadrature.midpoint(self.theta_box, self.g, nodes_per_axis)

    def omega_grid(self, cells: Optional[int] = None) -> GridSpec:
        return GridSpec.on_box(self.domain, settings.GRID_CELLS if cells is None else cells)

    @cached_property
    def template_atoms(self) -> DiscreteMeasure:
        return discretize(self.template, self.atoms_per_axis)

    def member_measure(self, theta) -> DiscreteMeasure:
        """μ_θ as template atoms pushed by φ_θ (weights kept), declared on Ω."""
        return pushforward_affine(self.template_atoms, self.map(theta), domain=self.domain)

    def member_density(self, theta, grid: Optional[GridSpec] = None) -> GridDensity:
        """q_θ evaluated on a grid over Ω."""
        return pushforward_affine(self.template, self.map(theta), grid=grid or self.omega_grid())

    def __repr__(self) -> str:
        return (f"DeformableFamily(kind={self.kind}, d={self.dim}, p={self.param_dim}, "
                f"g={self.g.kind}, domain={self.domain.tolist()})")


def support_box(density: GridDensity) -> np.ndarray:
    """Bounding box of the cells carrying positive mass."""
    box = np.empty((density.dim, 2))
    positive = density.values > 0
    for axis in range(density.dim):
        other = tuple(k for k in range(density.dim) if k != axis)
        used = np.nonzero(positive.any(axis=other) if other else positive)[0]
        edges = density.axis_edges(axis)
        box[axis] = edges[used[0]], edges[used[-1] + 1]
    return box


def _theta_probes(theta_box: np.ndarray, per_axis: int) -> np.ndarray:
    axes = [np.array([lo]) if lo == hi else np.linspace(lo, hi, per_axis) for lo, hi in theta_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _map_distance(m1: AffineMap, m2: AffineMap) -> float:
    return float(np.linalg.norm(m1.A - m2.A) + np.linalg.norm(m1.b - m2.b))


def _continuity_check(phi: Callable, theta_box: np.ndarray) -> float:
    """
    Estimate a Lipschitz constant of θ -> φ_θ from random nearby pairs, then check
    that pairs ten times closer do not exceed it. Returns the estimate.
    """
    rng = np.random.default_rng(0)
    width = theta_box[:, 1] - theta_box[:, 0]
    if np.all(width == 0):
        return 0.0
    base = theta_box[:, 0] + rng.random((CONTINUITY_PAIRS, theta_box.shape[0])) * width
    directions = rng.standard_normal(base.shape) * (width > 0)
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-300)
    step = 1e-3 * float(width.max())

    def ratios(delta):
        out = []
        for theta, direction in zip(base, directions):
            other = np.clip(theta + delta * direction, theta_box[:, 0], theta_box[:, 1])
            gap = float(np.linalg.norm(other - theta))
            if gap > 0:
                out.append(_map_distance(_as_affine(phi(theta)), _as_affine(phi(other))) / gap)
        return np.asarray(out) if out else np.zeros(1)

    coarse, fine = ratios(step), ratios(step / 10.0)
    lipschitz = float(coarse.max())
    if not np.isfinite(lipschitz) or fine.max() > 4.0 * lipschitz + 1e-9:
        raise FamilyError("φ does not look continuous on Θ (difference quotients blow up)")
    return lipschitz


def _build_family(kind: str, template: GridDensity, g: WeightDensity, theta_box, phi,
                  atoms_per_axis: Optional[int] = None) -> DeformableFamily:
    theta_box = _unit_box(theta_box)
    if g.dim != theta_box.shape[0] or not np.allclose(g.box, theta_box):
        raise DimensionError("g must be defined on the family's Θ box")
    g.check_normalized()

    probes = _theta_probes(theta_box, OMEGA_PROBES_PER_AXIS)
    source = support_box(template)
    images = []
    for theta in probes:
        image = _as_affine(phi(theta))
        if image.dim != template.dim:
            raise DimensionError(f"φ_θ acts on R^{image.dim}, template lives in R^{template.dim}")
        images.append(image.image_box(source))
    images = np.stack(images)
    lo, hi = images[:, :, 0].min(axis=0), images[:, :, 1].max(axis=0)
    center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    omega = np.stack([center - half * (1.0 + settings.DOMAIN_INFLATION),
                      center + half * (1.0 + settings.DOMAIN_INFLATION)], axis=1)

    lipschitz = _continuity_check(phi, theta_box)
    family = DeformableFamily(kind, theta_box, g, phi, template, omega, lipschitz, atoms_per_axis)
    logger.info(f"[Family] built {family!r}, Lipschitz estimate {lipschitz:.3g}")
    return family


def make_shift_family(template: GridDensity, g: WeightDensity, theta_box,
                      atoms_per_axis: Optional[int] = None) -> DeformableFamily:
    """μ_θ = q0(· - θ), θ ∈ Θ ⊂ R^d."""
    d = template.dim
    theta_box = _unit_box(theta_box)
    if theta_box.shape[0] != d:
        raise DimensionError(f"shift family needs a {d}-dimensional Θ, got {theta_box.shape[0]}")
    phi = LinearAffinePhi(np.eye(d), np.zeros((d, d, d)), np.zeros(d), np.eye(d))
    return _build_family("shift", template, g, theta_box, phi, atoms_per_axis)


def make_location_scale_1d(fbar: GridDensity, g: WeightDensity, theta_box,
                           atoms_per_axis: Optional[int] = None) -> DeformableFamily:
    """θ = (a, b): μ_θ has density (1/a) f̄((x - b)/a), a > 0."""
    if fbar.dim != 1:
        raise DimensionError("location-scale family is one-dimensional")
    theta_box = _unit_box(theta_box)
    if theta_box.shape[0] != 2:
        raise DimensionError("location-scale Θ has two coordinates (a, b)")
    if theta_box[0, 0] <= 0:
        raise FamilyError("location-scale family needs a > 0 on all of Θ")
    phi = LinearAffinePhi([[0.0]], [[[1.0]], [[0.0]]], [0.0], [[0.0], [1.0]])
    return _build_family("location_scale", fbar, g, theta_box, phi, atoms_per_axis)


def make_affine_family(phi: Callable, g: WeightDensity, theta_box, template: GridDensity,
                       atoms_per_axis: Optional[int] = None) -> DeformableFamily:
    """General affine family; phi returns an AffineMap (or an (A, b) pair) per θ."""
    return _build_family("affine", template, g, theta_box, phi, atoms_per_axis)


# ==========================================
# Operations
# ==========================================
def rejection_sample(g: WeightDensity, n: int, rng: np.random.Generator,
                     bound: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """n i.i.d. draws from g on its box; returns (draws, acceptance rate)."""
    if n < 0:
        raise RangeError("sample size must be nonnegative")
    if n == 0:
        return np.empty((0, g.dim)), 1.0
    if bound is None:
        bound = g.peak() or g.estimate_bound()
    if bound <= 0:
        raise RangeError("rejection bound must be positive")
    lo, width = g.box[:, 0], g.box[:, 1] - g.box[:, 0]
    accepted: List[np.ndarray] = []
    count, proposed = 0, 0
    while count < n:
        batch = max(REJECTION_BATCH, 2 * (n - count))
        proposals = lo + rng.random((batch, g.dim)) * width
        keep = rng.random(batch) * bound < g(proposals)
        accepted.append(proposals[keep])
        count += int(keep.sum())
        proposed += batch
        if proposed >= REJECTION_PROBE and count / proposed < MIN_ACCEPTANCE:
            raise EfficiencyError(
                f"rejection sampling accepts {count}/{proposed} proposals; the bound {bound:.3g} is far too loose"
            )
    draws = np.concatenate(accepted)[:n]
    return draws, count / proposed


def _seed_sequence(rng_seed) -> np.random.SeedSequence:
    if isinstance(rng_seed, np.random.SeedSequence):
        return rng_seed
    return np.random.SeedSequence(rng_seed)


def sample_theta(family: DeformableFamily, rng_seed, n: int, bound: Optional[float] = None) -> np.ndarray:
    """n draws of θ from g; deterministic in rng_seed (an int, a list of ints or a SeedSequence)."""
    rng = np.random.default_rng(_seed_sequence(rng_seed))
    draws, rate = rejection_sample(family.g, n, rng, bound)
    logger.debug(f"[Sampler] {n} draws of θ, acceptance rate {rate:.3f}")
    return draws


def _cell_masses_diagonal(template: GridDensity, affine: AffineMap, grid: GridSpec) -> np.ndarray:
    """Template mass inside the preimage box of every output cell, one overlap matrix per axis."""
    out = template.values
    for axis in range(grid.dim):
        scale, shift = float(affine.A[axis, axis]), float(affine.b[axis])
        edges = (grid.origin[axis] + np.arange(grid.shape[axis] + 1) * grid.cell_size[axis] - shift) / scale
        lo, hi = np.minimum(edges[:-1], edges[1:]), np.maximum(edges[:-1], edges[1:])
        cells = template.axis_edges(axis)
        overlap = np.clip(np.minimum(hi[:, None], cells[None, 1:]) - np.maximum(lo[:, None], cells[None, :-1]),
                          0.0, None)
        out = np.moveaxis(np.tensordot(overlap, out, axes=([1], [axis])), 0, axis)
    return out


def _subsampled_values(template: GridDensity, affine: AffineMap, grid: GridSpec) -> np.ndarray:
    inverse = affine.inverse()
    offsets = (np.arange(PUSHFORWARD_SUBSAMPLES) + 0.5) / PUSHFORWARD_SUBSAMPLES - 0.5
    mesh = np.meshgrid(*[offsets] * grid.dim, indexing="ij")
    sub = np.stack([m.ravel() for m in mesh], axis=1) * grid.cell_size
    points = (grid.centers()[:, None, :] + sub[None, :, :]).reshape(-1, grid.dim)
    values = template.evaluate(inverse(points)).reshape(-1, sub.shape[0]).mean(axis=1)
    return values * abs(np.linalg.det(inverse.A))


def pushforward_affine(template: Union[GridDensity, DiscreteMeasure], affine: AffineMap,
                       grid: Optional[GridSpec] = None, domain=None):
    """
    Image of a measure under x -> A x + b.
    Discrete: points mapped, weights kept, declared on `domain` (default: image of the source box).
    Grid: q(x) = det(A^-1) q0(A^-1 (x - b)) on `grid` (default: image box of the template at the
    same resolution), then renormalized. Diagonal A integrates the template exactly over every
    cell preimage; other maps average q over a sub-grid of each cell.
    """
    if affine.dim != template.dim:
        raise DimensionError(f"map acts on R^{affine.dim}, measure lives in R^{template.dim}")
    if isinstance(template, DiscreteMeasure):
        box = affine.image_box(template.domain) if domain is None else domain
        return DiscreteMeasure(affine(template.points), template.weights, box)

    if grid is None:
        grid = GridSpec.on_box(affine.image_box(template.domain), template.shape)
    if grid.dim != template.dim:
        raise DimensionError("output grid dimension does not match the template")

    target = grid.box
    image = affine.image_box(support_box(template))
    slack = 1e-9 * np.maximum(target[:, 1] - target[:, 0], 1.0)
    if np.any(image[:, 0] < target[:, 0] - slack) or np.any(image[:, 1] > target[:, 1] + slack):
        raise DomainError(f"push-forward support {image.tolist()} leaves the box {target.tolist()}")

    if np.count_nonzero(affine.A - np.diag(np.diag(affine.A))) == 0:
        values = _cell_masses_diagonal(template, affine, grid) / grid.cell_volume
    else:
        values = _subsampled_values(template, affine, grid)
    mass = float(values.sum() * grid.cell_volume)
    if mass <= 0 or abs(mass - 1.0) > settings.RENORM_TOL:
        raise DomainError(f"push-forward renormalization factor {1.0 / max(mass, 1e-300):.6f} is not within "
                          f"{settings.RENORM_TOL} of 1 (grid too coarse for the image)")
    logger.debug(f"[Pushforward] renormalization factor {1.0 / mass:.9f}")
    return GridDensity(grid.origin, grid.cell_size, values.reshape(grid.shape) / mass)


def node_maps(family: DeformableFamily, quad: Quadrature) -> List[AffineMap]:
    return [family.map(theta) for theta in quad.nodes]


def family_mean_map(family: DeformableFamily, quad: Optional[Quadrature] = None) -> AffineMap:
    """φ̄(x) = E(A_θ) x + E(b_θ) by quadrature."""
    quad = quad or family.quadrature()
    maps = node_maps(family, quad)
    A_bar = quad.expect(np.stack([m.A for m in maps]))
    b_bar = quad.expect(np.stack([m.b for m in maps]))
    return AffineMap((A_bar + A_bar.T) / 2.0, b_bar)


def population_barycenter(family: DeformableFamily, quad: Optional[Quadrature] = None,
                          grid: Optional[GridSpec] = None) -> GridDensity:
    """q* = det(Ā^-1) q0(Ā^-1(x - b̄)) on the Ω grid."""
    return pushforward_affine(family.template, family_mean_map(family, quad), grid=grid or family.omega_grid())


def population_measure(family: DeformableFamily, quad: Optional[Quadrature] = None) -> DiscreteMeasure:
    """μ* in the matched discretization: template atoms pushed by the mean map."""
    return pushforward_affine(family.template_atoms, family_mean_map(family, quad), domain=family.domain)


def population_quantile(family: DeformableFamily, quad: Optional[Quadrature] = None) -> QuantileFn:
    """d = 1: quadrature average of the member quantile functions a_θ Q0 + b_θ."""
    if family.dim != 1:
        raise DimensionError("population_quantile is one-dimensional")
    quad = quad or family.quadrature()
    q0 = quantile_function(family.template)
    members = [q0.affine(float(m.A[0, 0]), float(m.b[0])) for m in node_maps(family, quad)]
    return quantile_mean(members, quad.probabilities)


def centered_params(family: DeformableFamily, theta, quad: Optional[Quadrature] = None,
                    mean_map: Optional[AffineMap] = None) -> Tuple[np.ndarray, np.ndarray]:
    """(Ā_θ, b̄_θ) = (A_θ Ā^-1, b_θ - A_θ Ā^-1 b̄)."""
    mean_map = mean_map or family_mean_map(family, quad)
    member = family.map(theta)
    A_theta = member.A @ np.linalg.inv(mean_map.A)
    return A_theta, member.b - A_theta @ mean_map.b


def build_weight(kind: str, box, **params) -> WeightDensity:
    try:
        builder = WEIGHTS[kind]
    except KeyError:
        raise FamilyError(f"unknown g kind '{kind}' (expected one of {sorted(WEIGHTS)})") from None
    return builder(box, **params)
