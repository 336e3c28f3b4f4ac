"""
Exact discrete Monge-Kantorovich solver in any dimension.

The LP is solved with POT's network simplex (ot.emd), which also returns the
dual potentials; every solution is certified by dual feasibility and
complementary slackness before it is handed back. A permutation brute force
serves as an independent oracle on small equal-weight instances.
"""

from itertools import permutations
from typing import List, Optional, Tuple
import logging

import numpy as np
import ot

from src.core.config import settings
from src.core.errors import CertificationError, InfeasibleError, OracleScopeError, SizeError
from src.core.measures import DiscreteMeasure, TransportPlan, require_same_box, squared_distances

logger = logging.getLogger("wbary.solver")

CERTIFICATE_TOL = 1e-9
ORACLE_MAX_ATOMS = 8


def _split_rows(gamma: np.ndarray, inverse: np.ndarray, original: DiscreteMeasure,
                merged: DiscreteMeasure, axis: int) -> np.ndarray:
    """Undo duplicate merging: share a merged atom's mass among its copies pro rata."""
    share = original.weights / merged.weights[inverse]
    if axis == 0:
        return gamma[inverse, :] * share[:, None]
    return gamma[:, inverse] * share[None, :]


def certify(cost_matrix: np.ndarray, gamma: np.ndarray, u: np.ndarray, v: np.ndarray,
            tol: Optional[float] = None) -> Tuple[float, float]:
    """
    Check u_i + v_j <= C_ij everywhere and equality on the support of gamma.
    Returns (worst dual infeasibility, worst slackness violation).
    """
    scale = max(1.0, float(cost_matrix.max()))
    tol = CERTIFICATE_TOL * scale if tol is None else tol
    reduced = cost_matrix - u[:, None] - v[None, :]
    infeasibility = float(max(0.0, -reduced.min()))
    support = gamma > 0
    slackness = float(np.abs(reduced[support]).max()) if np.any(support) else 0.0
    if infeasibility > tol or slackness > tol:
        raise CertificationError(
            f"LP certificate failed: dual infeasibility {infeasibility:.3e}, slackness {slackness:.3e} (tol {tol:.1e})"
        )
    return infeasibility, slackness


def w2sq_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, max_atoms: Optional[int] = None) -> Tuple[float, TransportPlan]:
    """
    Exact squared 2-Wasserstein distance and an optimal plan.
    The returned plan carries the certified dual potentials in plan.duals.
    """
    require_same_box(mu, nu)
    cap = settings.LP_MAX_ATOMS if max_atoms is None else max_atoms
    if mu.size > cap or nu.size > cap:
        raise SizeError(f"LP limited to {cap} atoms per side, got {mu.size} x {nu.size}")

    # duplicate support points make the LP degenerate; merge them first
    mu_m, mu_inv = mu.merged()
    nu_m, nu_inv = nu.merged()

    cost_matrix = np.ascontiguousarray(squared_distances(mu_m.points, nu_m.points))
    a = np.ascontiguousarray(mu_m.weights)
    b = np.ascontiguousarray(nu_m.weights)
    b = b * (a.sum() / b.sum())

    iterations = max(100000, 50 * a.shape[0] * b.shape[0])
    gamma, log = ot.emd(a, b, cost_matrix, numItermax=iterations, log=True)
    if log.get("warning"):
        raise InfeasibleError(f"network simplex did not finish: {log['warning']}")
    u, v = np.asarray(log["u"], dtype=np.float64), np.asarray(log["v"], dtype=np.float64)
    infeasibility, slackness = certify(cost_matrix, gamma, u, v)
    logger.debug(f"[Solver] LP {a.shape[0]}x{b.shape[0]} solved, dual infeasibility "
                 f"{infeasibility:.2e}, slackness {slackness:.2e}")

    if mu_m is not mu:
        gamma = _split_rows(gamma, mu_inv, mu, mu_m, axis=0)
        u = u[mu_inv]
    if nu_m is not nu:
        gamma = _split_rows(gamma, nu_inv, nu, nu_m, axis=1)
        v = v[nu_inv]

    plan = TransportPlan(gamma, mu, nu, duals=(u, v))
    return plan.cost(), plan


def w2sq(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    cost, _ = w2sq_lp(mu, nu)
    return cost


def w2sq_permutation_oracle(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """min over permutations σ of (1/m) Σ |x_i - y_σ(i)|², for equal-weight m <= 8 instances."""
    m = mu.size
    if nu.size != m or m > ORACLE_MAX_ATOMS:
        raise OracleScopeError(f"permutation oracle needs equal sizes <= {ORACLE_MAX_ATOMS}, got {mu.size}, {nu.size}")
    for weights in (mu.weights, nu.weights):
        if np.max(np.abs(weights - 1.0 / m)) > 1e-15:
            raise OracleScopeError("permutation oracle needs all weights equal to 1/m")
    cost_matrix = squared_distances(mu.points, nu.points)
    perms = np.array(list(permutations(range(m))), dtype=np.int64)
    totals = cost_matrix[np.arange(m)[None, :], perms].sum(axis=1)
    return float(totals.min() / m)


def barycentric_projection(plan: TransportPlan) -> np.ndarray:
    """T̂(x_i) = Σ_j γ_ij y_j / w_i; atoms without mass stay where they are."""
    mass = plan.gamma.sum(axis=1)
    projected = plan.source.points.copy()
    moving = mass > 0
    projected[moving] = (plan.gamma[moving] @ plan.target.points) / mass[moving, None]
    return projected


__all__: List[str] = ["w2sq_lp", "w2sq", "w2sq_permutation_oracle", "barycentric_projection", "certify"]
