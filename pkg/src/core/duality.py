"""
Primal and dual barycenter problems over a random-measure family.

Primal:  J(ν) = Σ_k p_k · ½ W2²(ν, μ_θk)
Dual:    Σ_k vol_k ∫ S_{g_k} f_k dμ_θk   subject to   Σ_k vol_k f_k(x) = 0 on the Ω grid,
with the c-transform S_c f(x) = min over grid points y of (c/2)|x - y|² - f(y).

Dual candidates are grid functions on Ω; closed-form maximizers exist for the
shift and affine families, and a Brenier potential recovered from any
candidate pushes μ_θ onto the barycenter when the candidate is optimal.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple
import logging
import warnings

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from src.core.config import settings
from src.core.errors import ConstraintError, ConvexityWarning, DimensionError, DomainError, FamilyError, ScaleError
from src.core.measures import DiscreteMeasure, GridSpec, _frozen, same_box
from src.core.models import DeformableFamily, Quadrature, centered_params, family_mean_map
from src.core.transport1d import w2sq_1d
from src.core.transport_exact import w2sq_lp
from src.tasks import run_ordered

logger = logging.getLogger("wbary.duality")

ZERO_SUM_TOL = 1e-8
SYMMETRY_TOL = 1e-9
# bound on query x grid entries held in memory per c-transform chunk
CHUNK_ENTRIES = 4_000_000


# ==========================================
# DualFamily
# ==========================================
@dataclass(frozen=True, eq=False)
class DualFamily:
    """One grid function f_θ on Ω per quadrature node (f_values[k] is the flattened grid in C order)."""

    quad: Quadrature
    grid: GridSpec
    f_values: np.ndarray

    def __post_init__(self):
        f_values = np.asarray(self.f_values, dtype=np.float64)
        n_cells = int(np.prod(self.grid.shape))
        f_values = f_values.reshape(self.quad.size, n_cells)
        if not np.all(np.isfinite(f_values)):
            raise ConstraintError("dual candidate values must be finite")
        object.__setattr__(self, "f_values", _frozen(f_values))

    def zero_sum_residual(self) -> float:
        """max over grid points of |Σ_k vol_k f_k(x)|."""
        total = np.tensordot(self.quad.volumes, self.f_values, axes=(0, 0))
        return float(np.abs(total).max())

    def scaled(self, factor: float) -> "DualFamily":
        return DualFamily(self.quad, self.grid, factor * self.f_values)


def zero_dual_family(quad: Quadrature, grid: GridSpec) -> DualFamily:
    return DualFamily(quad, grid, np.zeros((quad.size, int(np.prod(grid.shape)))))


# ==========================================
# c-transform
# ==========================================
def c_transform(f: np.ndarray, scale: float, grid: GridSpec, query: Optional[np.ndarray] = None) -> np.ndarray:
    """
    S_c f at the query points (default: the grid's own cell centers).
    The infimum runs over the grid cell centers only.
    """
    if not scale > 0:
        raise ScaleError(f"c-transform needs a positive scale, got {scale}")
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    centers = grid.centers()
    if f.shape[0] != centers.shape[0]:
        raise DimensionError(f"grid function has {f.shape[0]} values for {centers.shape[0]} cells")
    if not np.all(np.isfinite(f)):
        raise ScaleError("c-transform needs a finite grid function")
    query = centers if query is None else np.asarray(query, dtype=np.float64).reshape(-1, grid.dim)

    half = 0.5 * scale
    center_sq = np.sum(centers ** 2, axis=1)
    offset = half * center_sq - f
    out = np.empty(query.shape[0])
    chunk = max(1, CHUNK_ENTRIES // centers.shape[0])
    for start in range(0, query.shape[0], chunk):
        block = query[start:start + chunk]
        # (c/2)|x - y|² - f(y) = (c/2)|x|² - c<x, y> + [(c/2)|y|² - f(y)]
        inner = offset[None, :] - scale * (block @ centers.T)
        out[start:start + chunk] = half * np.sum(block ** 2, axis=1) + inner.min(axis=1)
    return out


# ==========================================
# Objectives
# ==========================================
def _on_omega(nu: DiscreteMeasure, family: DeformableFamily) -> DiscreteMeasure:
    if nu.dim != family.dim:
        raise DimensionError(f"candidate lives in R^{nu.dim}, family in R^{family.dim}")
    return nu if same_box(nu.domain, family.domain) else nu.with_domain(family.domain)


def primal_objective(nu: DiscreteMeasure, family: DeformableFamily, quad: Optional[Quadrature] = None,
                     threads: Optional[int] = None) -> float:
    """J(ν) = Σ_k p_k · ½ W2²(ν, μ_θk) with μ_θk in the matched discretization."""
    quad = quad or family.quadrature()
    nu = _on_omega(nu, family)
    solve = w2sq_1d if family.dim == 1 else (lambda a, b: w2sq_lp(a, b)[0])

    def node_cost(theta):
        return solve(nu, family.member_measure(theta))

    costs = np.asarray(run_ordered(node_cost, quad.nodes, threads, label="primal node"))
    value = float(quad.probabilities @ (0.5 * costs))
    logger.debug(f"[Duality] primal objective {value:.6e} over {quad.size} nodes")
    return value


def affine_primal_value(family: DeformableFamily, quad: Optional[Quadrature] = None) -> float:
    """
    J_P = ½ Σ_k p_k ∫|φ_θk(x) - φ̄(x)|² dμ0, the minimal primal value of an affine family
    whose A_θ commute with Ā (then φ_θ ∘ φ̄^-1 is the optimal map from μ* to μ_θ).
    """
    quad = quad or family.quadrature()
    mean_map = family_mean_map(family, quad)
    atoms = family.template_atoms
    values = []
    for theta in quad.nodes:
        A_theta, _ = centered_params(family, theta, mean_map=mean_map)
        if np.max(np.abs(A_theta - A_theta.T)) > SYMMETRY_TOL * max(1.0, float(np.abs(A_theta).max())):
            raise FamilyError("A_θ does not commute with the mean matrix; J_P has no closed form")
        member = family.map(theta)
        gap = atoms.points @ (member.A - mean_map.A).T + (member.b - mean_map.b)
        values.append(float(atoms.weights @ np.sum(gap ** 2, axis=1)))
    return 0.5 * float(quad.probabilities @ np.asarray(values))


def _node_term(f: np.ndarray, g_value: float, grid: GridSpec, member: DiscreteMeasure) -> float:
    if g_value <= 0:
        # S_0 f ≡ -max f
        return -float(f.max())
    return float(member.weights @ c_transform(f, g_value, grid, member.points))


def dual_objective(df: DualFamily, family: DeformableFamily, threads: Optional[int] = None) -> float:
    """Σ_k vol_k ∫ S_{g_k} f_k dμ_θk, summed in node order."""
    residual = df.zero_sum_residual()
    if residual > ZERO_SUM_TOL:
        raise ConstraintError(f"dual candidate violates the zero-sum constraint (residual {residual:.3e})")
    if not same_box(df.grid.box, family.domain):
        raise DomainError("dual candidate grid does not cover the family's Ω")

    def node_value(k):
        return _node_term(df.f_values[k], float(df.quad.g_values[k]), df.grid,
                          family.member_measure(df.quad.nodes[k]))

    terms = np.asarray(run_ordered(node_value, range(df.quad.size), threads, label="dual node"))
    value = float(df.quad.volumes @ terms)
    logger.debug(f"[Duality] dual objective {value:.6e} over {df.quad.size} nodes")
    return value


def duality_gap(nu: DiscreteMeasure, df: DualFamily, family: DeformableFamily,
                threads: Optional[int] = None) -> float:
    """J(ν) minus the dual value; nonnegative up to discretization error."""
    return primal_objective(nu, family, df.quad, threads) - dual_objective(df, family, threads)


# ==========================================
# Closed-form maximizers
# ==========================================
def shift_dual_family(family: DeformableFamily, quad: Optional[Quadrature] = None,
                      grid: Optional[GridSpec] = None) -> DualFamily:
    """f_θ(x) = -g(θ) <θ - Eθ, x> for the shift family."""
    if family.kind != "shift":
        raise FamilyError(f"shift maximizer needs a shift family, got '{family.kind}'")
    quad = quad or family.quadrature()
    grid = grid or family.omega_grid()
    mean_theta = quad.expect(quad.nodes)
    x = grid.centers()
    f_values = -quad.g_values[:, None] * ((quad.nodes - mean_theta) @ x.T)
    return DualFamily(quad, grid, f_values)


def affine_dual_maximizer(family: DeformableFamily, theta, grid: Optional[GridSpec] = None,
                          quad: Optional[Quadrature] = None, g_value: Optional[float] = None,
                          mean_map=None, strict: bool = True) -> np.ndarray:
    """
    f_θ(x) = -(g(θ)/2) <(Ā_θ - I) x, x> - g(θ) <b̄_θ, x> on the grid centers.
    Needs Ā_θ = A_θ Ā^-1 symmetric, which holds when A_θ commutes with Ā;
    strict=False uses the symmetric part instead (a candidate, not a maximizer).
    """
    grid = grid or family.omega_grid()
    mean_map = mean_map or family_mean_map(family, quad)
    A_theta, b_theta = centered_params(family, theta, mean_map=mean_map)
    if strict and np.max(np.abs(A_theta - A_theta.T)) > SYMMETRY_TOL * max(1.0, float(np.abs(A_theta).max())):
        raise FamilyError("A_θ does not commute with the mean matrix; no closed-form dual maximizer")
    if g_value is None:
        g_value = float(family.g(np.asarray(theta, dtype=np.float64).reshape(1, -1))[0])
    x = grid.centers()
    M = (A_theta + A_theta.T) / 2.0 - np.eye(family.dim)
    quadratic = np.einsum("ij,jk,ik->i", x, M, x)
    return -0.5 * g_value * quadratic - g_value * (x @ b_theta)


def affine_dual_family(family: DeformableFamily, quad: Optional[Quadrature] = None,
                       grid: Optional[GridSpec] = None, strict: bool = True) -> DualFamily:
    """The affine maximizer at every node, with the quadrature-normalized g values."""
    quad = quad or family.quadrature()
    grid = grid or family.omega_grid()
    mean_map = family_mean_map(family, quad)
    f_values = np.stack([
        affine_dual_maximizer(family, theta, grid, g_value=float(g), mean_map=mean_map, strict=strict)
        for theta, g in zip(quad.nodes, quad.g_values)
    ])
    return DualFamily(quad, grid, f_values)


def grid_search_dual(family: DeformableFamily, quad: Optional[Quadrature] = None,
                     grid: Optional[GridSpec] = None, scales: Optional[Sequence[float]] = None,
                     threads: Optional[int] = None) -> Tuple[float, float, DualFamily]:
    """
    Coarse fallback: evaluate s·f over a grid of scales s for the affine candidate f
    and keep the best. Scaling preserves the zero-sum constraint. Returns (scale, value, family).
    """
    base = affine_dual_family(family, quad, grid, strict=False)
    scales = np.linspace(0.0, 1.5, 16) if scales is None else np.asarray(scales, dtype=np.float64)
    best = (0.0, -np.inf, base)
    for s in scales:
        candidate = base.scaled(float(s))
        value = dual_objective(candidate, family, threads)
        logger.debug(f"[Duality] grid search scale {s:.3f} -> {value:.6e}")
        if value > best[1]:
            best = (float(s), value, candidate)
    return best


# ==========================================
# Brenier recovery
# ==========================================
def brenier_recover(df: DualFamily, family: DeformableFamily, theta) -> Tuple[np.ndarray, DiscreteMeasure]:
    """
    φ_θ = ½|x|² - S_{g(θ)} f_θ / g(θ) on the Ω grid, and the image of μ_θ under ∇φ_θ.
    theta must be one of the dual family's quadrature nodes.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    matches = np.nonzero(np.all(np.isclose(df.quad.nodes, theta, rtol=0, atol=1e-12), axis=1))[0]
    if matches.size == 0:
        raise DimensionError(f"θ = {theta.tolist()} is not a node of the dual family's quadrature")
    k = int(matches[0])
    g_value = float(df.quad.g_values[k])
    if g_value <= 0:
        raise ScaleError("Brenier recovery needs g(θ) > 0")

    grid = df.grid
    centers = grid.centers()
    transformed = c_transform(df.f_values[k], g_value, grid)
    potential = (0.5 * np.sum(centers ** 2, axis=1) - transformed / g_value).reshape(grid.shape)

    worst = min(float(np.diff(potential, n=2, axis=axis).min()) if grid.shape[axis] > 2 else 0.0
                for axis in range(grid.dim))
    if worst < -settings.CONVEXITY_TOL:
        warnings.warn(f"Brenier potential is not convex (second difference {worst:.3e}); "
                      "the dual candidate is not optimal", ConvexityWarning, stacklevel=2)

    axes = [grid.axis_centers(axis) for axis in range(grid.dim)]
    gradient = np.gradient(potential, *axes, edge_order=1)
    if grid.dim == 1:
        gradient = [gradient]

    member = family.member_measure(theta)
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])
    query = np.clip(member.points, lo, hi)
    pushed = np.column_stack([
        RegularGridInterpolator(axes, component, method="linear")(query) for component in gradient
    ])
    logger.debug(f"[Duality] Brenier push-forward at θ={theta.tolist()}, min second difference {worst:.3e}")
    return potential, DiscreteMeasure(pushed, member.weights, family.domain)
