"""
Empirical barycenters of n measures: exact on the line, closed form for affine
families, and a free-support fixed-point solver for general discrete inputs.
The Euclidean (pointwise density) mean is here for contrast.
"""

from typing import List, Optional, Sequence, Tuple
import logging
import warnings

import numpy as np

from src.core.config import settings
from src.core.errors import (
    GridMismatchError,
    InvariantError,
    MaxIterWarning,
    NoDecreaseError,
    RangeError,
)
from src.core.measures import (
    AffineMap,
    DiscreteMeasure,
    GridDensity,
    GridSpec,
    box_diameter,
    require_same_box,
)
from src.core.models import DeformableFamily, pushforward_affine
from src.core.transport1d import barycenter_1d
from src.core.transport_exact import barycentric_projection, w2sq_lp
from src.tasks import run_ordered

logger = logging.getLogger("wbary.barycenter")

DECREASE_TOL = 1e-9


def empirical_barycenter_1d(measures: Sequence) -> DiscreteMeasure:
    """Exact barycenter on the line with weights 1/n."""
    measures = list(measures)
    if not measures:
        raise RangeError("empirical barycenter needs at least one measure")
    return barycenter_1d(measures)


# ==========================================
# Affine families
# ==========================================
def sample_mean_map(thetas, family: DeformableFamily) -> AffineMap:
    """x -> ((1/n) Σ A_θi) x + (1/n) Σ b_θi"""
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1, family.param_dim)
    if thetas.shape[0] == 0:
        raise RangeError("empirical barycenter needs at least one θ")
    maps = [family.map(theta) for theta in thetas]
    A = np.mean([m.A for m in maps], axis=0)
    return AffineMap((A + A.T) / 2.0, np.mean([m.b for m in maps], axis=0))


def empirical_barycenter_affine(thetas, family: DeformableFamily, grid: Optional[GridSpec] = None) -> GridDensity:
    """Push-forward of the template density by the sample-mean map, on the Ω grid."""
    return pushforward_affine(family.template, sample_mean_map(thetas, family), grid=grid or family.omega_grid())


def empirical_barycenter_affine_measure(thetas, family: DeformableFamily) -> DiscreteMeasure:
    """Same barycenter in the matched discretization (template atoms pushed by the sample-mean map)."""
    return pushforward_affine(family.template_atoms, sample_mean_map(thetas, family), domain=family.domain)


# ==========================================
# Free-support fixed point
# ==========================================
def empirical_objective(candidate: DiscreteMeasure, measures: Sequence[DiscreteMeasure],
                        threads: Optional[int] = None) -> float:
    """J_n(ν) = (1/n) Σ_j ½ W2²(ν, μ_j)"""
    costs = run_ordered(lambda mu: w2sq_lp(candidate, mu)[0], measures, threads, label="transport solve")
    return 0.5 * float(np.mean(costs))


def _seed_support(measures: List[DiscreteMeasure], support: Optional[DiscreteMeasure]) -> DiscreteMeasure:
    if support is None:
        first = measures[0]
        support = DiscreteMeasure(first.points, np.full(first.size, 1.0 / first.size), first.domain)
    elif np.max(np.abs(support.weights - 1.0 / support.size)) > 1e-12:
        raise InvariantError("the seed support must carry equal weights 1/m")
    require_same_box(support, measures[0])
    return support


def empirical_barycenter_fixed_support(
    measures: Sequence[DiscreteMeasure],
    support: Optional[DiscreteMeasure] = None,
    max_iter: Optional[int] = None,
    tol: Optional[float] = None,
    threads: Optional[int] = None,
) -> Tuple[DiscreteMeasure, List[float]]:
    """
    Move each equal-weight support atom to the average of its barycentric projections
    onto the n inputs, re-solving the n transport problems every iteration.
    Returns the last iterate and the objective J_n of every evaluated iterate.
    """
    measures = list(measures)
    if not measures:
        raise RangeError("empirical barycenter needs at least one measure")
    for mu in measures[1:]:
        require_same_box(measures[0], mu)
    support = _seed_support(measures, support)
    max_iter = settings.FIXED_SUPPORT_MAX_ITER if max_iter is None else max_iter
    tol = settings.FIXED_SUPPORT_TOL_FACTOR * box_diameter(support.domain) if tol is None else tol

    trace: List[float] = []
    for iteration in range(max_iter + 1):
        solved = run_ordered(lambda mu: w2sq_lp(support, mu), measures, threads, label="transport solve")
        objective = 0.5 * float(np.mean([cost for cost, _ in solved]))
        if trace and objective > trace[-1] + DECREASE_TOL:
            raise NoDecreaseError(
                f"fixed-support objective rose from {trace[-1]:.12e} to {objective:.12e} at iteration {iteration}"
            )
        trace.append(objective)
        logger.debug(f"[Barycenter] iteration {iteration}: J_n = {objective:.10e}")

        # fixed-order sum over inputs
        moved = np.zeros_like(support.points)
        for _, plan in solved:
            moved += barycentric_projection(plan)
        moved /= len(measures)
        displacement = float(np.max(np.linalg.norm(moved - support.points, axis=1)))
        if displacement < tol:
            logger.info(f"[Barycenter] converged after {iteration} iteration(s), J_n = {objective:.6e}")
            return support, trace
        if iteration == max_iter:
            break
        support = DiscreteMeasure(moved, support.weights, support.domain)

    warnings.warn(f"fixed-support solver stopped after {max_iter} iterations "
                  f"(last displacement {displacement:.3e} > tol {tol:.1e})", MaxIterWarning, stacklevel=2)
    return support, trace


# ==========================================
# Euclidean mean
# ==========================================
def euclidean_mean(densities: Sequence[GridDensity]) -> GridDensity:
    """Pointwise average of densities that share one grid."""
    densities = list(densities)
    if not densities:
        raise RangeError("euclidean mean needs at least one density")
    first = densities[0]
    for other in densities[1:]:
        if not first.same_grid(other):
            raise GridMismatchError("euclidean mean needs every density on the same grid")
    values = np.mean([q.values for q in densities], axis=0)
    return GridDensity.from_values(first.origin, first.cell_size, values)
