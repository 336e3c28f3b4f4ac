"""
Monte Carlo harness for the asymptotics of empirical barycenters of affine
families: consistency runs, the n^-1 rate fit, the Bernstein tail envelope and
the Euclidean-versus-Wasserstein contrast for shift families.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import hashlib
import logging
import time

import numpy as np
from scipy import stats

from src.core.barycenter import empirical_barycenter_affine_measure, euclidean_mean
from src.core.config import settings
from src.core.errors import FamilyError, InsufficientDataError, RangeError
from src.core.measures import AffineMap, DiscreteMeasure, GridDensity, GridSpec
from src.core.models import (
    DeformableFamily,
    Quadrature,
    family_mean_map,
    node_maps,
    population_measure,
    pushforward_affine,
    sample_theta,
)
from src.core.transport1d import w2sq_1d
from src.core.transport_exact import w2sq_lp
from src.tasks import run_ordered

logger = logging.getLogger("wbary.experiments")

AFFINE_KINDS = ("shift", "location_scale", "affine")
MIN_RATE_POINTS = 4
MIN_RATE_REPLICATES = 50
QUANTILES = (0.1, 0.5, 0.9)


# ==========================================
# Report types
# ==========================================
@dataclass(frozen=True)
class ReplicateResult:
    n: int
    replicate: int
    seed: int
    d2: float
    wall_time: float = 0.0


@dataclass(frozen=True)
class AggregateRow:
    n: int
    count: int
    mean: float
    q10: float
    median: float
    q90: float


@dataclass(frozen=True)
class BernsteinConstants:
    """Centered moments and sup-norm bounds of A_θ - Ā and b_θ - b̄."""

    dim: int
    eps0_sq: float
    var_A: float
    B1: float
    var_b: float
    B2: float


@dataclass
class ExperimentReport:
    config: Dict[str, Any]
    records: List[ReplicateResult]
    aggregates: List[AggregateRow] = field(default_factory=list)
    checksum: str = ""
    bernstein: Optional[BernsteinConstants] = None

    @property
    def n_values(self) -> List[int]:
        return sorted({r.n for r in self.records})

    def distances(self, n: int) -> np.ndarray:
        return np.array([r.d2 for r in self.records if r.n == n])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class EnvelopeRow:
    n: int
    t: float
    frequency: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class ComparisonRecord:
    n: int
    seed: int
    mean_shift: float
    l1_to_convolution: float
    l1_to_template: float
    l1_convolution_template: float
    w2_to_template: float


# ==========================================
# Aggregates
# ==========================================
def records_checksum(records: Sequence[ReplicateResult]) -> str:
    """sha256 over the reproducible part of the records (wall time excluded)."""
    digest = hashlib.sha256()
    for r in records:
        digest.update(f"{r.n},{r.replicate},{r.seed},{r.d2!r}\n".encode())
    return digest.hexdigest()


def aggregate(records: Sequence[ReplicateResult]) -> List[AggregateRow]:
    rows = []
    for n in sorted({r.n for r in records}):
        values = np.array([r.d2 for r in records if r.n == n])
        q10, median, q90 = np.quantile(values, QUANTILES)
        rows.append(AggregateRow(n, int(values.size), float(values.mean()), float(q10), float(median), float(q90)))
    return rows


def verify_aggregates(report: ExperimentReport) -> bool:
    return aggregate(report.records) == report.aggregates and records_checksum(report.records) == report.checksum


# ==========================================
# Consistency
# ==========================================
def replicate_seed(seed: int, n: int, replicate: int) -> int:
    return int(np.random.SeedSequence([seed, n, replicate]).generate_state(1)[0])


def w2sq_matched(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return w2sq_1d(mu, nu) if mu.dim == 1 else w2sq_lp(mu, nu)[0]


def _require_affine(family: DeformableFamily) -> None:
    if family.kind not in AFFINE_KINDS:
        raise FamilyError(f"closed forms need an affine family, got '{family.kind}'")


def consistency_run(family: DeformableFamily, n_grid: Sequence[int], replicates: int, seed: int,
                    quad: Optional[Quadrature] = None, threads: Optional[int] = None) -> ExperimentReport:
    """d²_W2(μ̄_n, μ*) for every (n, replicate), μ̄_n from n sampled θ's, on matched discretizations."""
    _require_affine(family)
    n_grid = [int(n) for n in n_grid]
    if not n_grid or min(n_grid) < 1 or replicates < 1:
        raise RangeError("consistency run needs n >= 1 and at least one replicate")
    quad = quad or family.quadrature()
    target = population_measure(family, quad)

    def run_one(job):
        n, rep = job
        started = time.perf_counter()
        rep_seed = replicate_seed(seed, n, rep)
        thetas = sample_theta(family, rep_seed, n)
        d2 = w2sq_matched(empirical_barycenter_affine_measure(thetas, family), target)
        return ReplicateResult(n, rep, rep_seed, float(d2), time.perf_counter() - started)

    records = []
    for n in n_grid:
        batch = [(n, rep) for rep in range(replicates)]
        records.extend(run_ordered(run_one, batch, threads, label="replicate"))
        logger.info(f"[Experiment] n={n}: {replicates} replicate(s), mean d² = "
                    f"{np.mean([r.d2 for r in records if r.n == n]):.4e}")

    config = {"family": family.kind, "n_grid": n_grid, "replicates": replicates, "seed": seed,
              "quad_nodes": quad.size}
    return ExperimentReport(config, records, aggregate(records), records_checksum(records),
                            bernstein_constants(family, quad))


# ==========================================
# Rate fit
# ==========================================
def _ols_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares slopes of each row of y against x."""
    xc = x - x.mean()
    return (y - y.mean(axis=-1, keepdims=True)) @ xc / float(xc @ xc)


def rate_fit(report: ExperimentReport, resamples: Optional[int] = None, seed: int = 0) -> RateFit:
    """OLS slope of log(mean d²) against log n, with a replicate-bootstrap 95% interval."""
    n_values = report.n_values
    if len(n_values) < MIN_RATE_POINTS:
        raise InsufficientDataError(f"rate fit needs >= {MIN_RATE_POINTS} distinct n, got {len(n_values)}")
    samples = [report.distances(n) for n in n_values]
    short = [n for n, s in zip(n_values, samples) if s.size < MIN_RATE_REPLICATES]
    if short:
        raise InsufficientDataError(f"rate fit needs >= {MIN_RATE_REPLICATES} replicates per n; short at n={short}")
    means = np.array([s.mean() for s in samples])
    if np.any(means <= 0):
        raise InsufficientDataError("mean distance is zero for some n; there is no rate to fit")

    log_n = np.log(np.asarray(n_values, dtype=np.float64))
    fit = stats.linregress(log_n, np.log(means))

    resamples = settings.BOOTSTRAP_RESAMPLES if resamples is None else resamples
    rng = np.random.default_rng(seed)
    boot_means = np.column_stack([
        s[rng.integers(0, s.size, size=(resamples, s.size))].mean(axis=1) for s in samples
    ])
    boot_means = np.maximum(boot_means, np.finfo(float).tiny)
    slopes = _ols_slopes(log_n, np.log(boot_means))
    low, high = np.quantile(slopes, [0.025, 0.975])
    logger.info(f"[Experiment] fitted slope {fit.slope:.4f}, 95% CI [{low:.4f}, {high:.4f}]")
    return RateFit(float(fit.slope), float(fit.intercept), float(low), float(high))


# ==========================================
# Bernstein envelope
# ==========================================
def _theta_corners(theta_box: np.ndarray) -> np.ndarray:
    mesh = np.meshgrid(*[np.unique(row) for row in theta_box], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def bernstein_constants(family: DeformableFamily, quad: Optional[Quadrature] = None) -> BernsteinConstants:
    _require_affine(family)
    quad = quad or family.quadrature()
    mean_map = family_mean_map(family, quad)
    maps = node_maps(family, quad)
    dev_A = np.array([np.linalg.norm(m.A - mean_map.A, 2) for m in maps])
    dev_b = np.array([np.linalg.norm(m.b - mean_map.b) for m in maps])
    corners = [family.map(theta) for theta in _theta_corners(family.theta_box)]
    B1 = max(float(dev_A.max()), max(float(np.linalg.norm(m.A - mean_map.A, 2)) for m in corners))
    B2 = max(float(dev_b.max()), max(float(np.linalg.norm(m.b - mean_map.b)) for m in corners))
    return BernsteinConstants(
        dim=family.dim,
        eps0_sq=family.template.second_moment(),
        var_A=float(quad.probabilities @ dev_A ** 2),
        B1=B1,
        var_b=float(quad.probabilities @ dev_b ** 2),
        B2=B2,
    )


def _tail_term(prefactor: float, n: int, t: float, variance: float, bound: float) -> float:
    if variance == 0.0 and bound == 0.0:
        return 0.0
    return prefactor * float(np.exp(-n * t / (8.0 * variance + (4.0 / 3.0) * bound * np.sqrt(t))))


def bernstein_envelope(family: Optional[DeformableFamily], t: float, n: int,
                       quad: Optional[Quadrature] = None,
                       constants: Optional[BernsteinConstants] = None) -> float:
    """
    P(d²_W2(μ̄_n, μ*) >= t) <= 2d exp(-n t / (8 ε0² σ_A² + (4/3) B1 ε0 √t))
                              + 2 exp(-n t / (8 σ_b² + (4/3) B2 √t)),
    with centered moments σ_A² = E‖A_θ - Ā‖², σ_b² = E|b_θ - b̄|², clipped to [0, 1].
    """
    if n < 1:
        raise RangeError("the envelope needs n >= 1")
    if t <= 0:
        return 1.0
    c = constants or bernstein_constants(family, quad)
    eps0 = np.sqrt(c.eps0_sq)
    bound = _tail_term(2.0 * c.dim, n, t, c.eps0_sq * c.var_A, c.B1 * eps0) \
        + _tail_term(2.0, n, t, c.var_b, c.B2)
    return float(np.clip(bound, 0.0, 1.0))


def envelope_check(report: ExperimentReport, t_grid: Sequence[float]) -> List[EnvelopeRow]:
    """Empirical tail frequency against the envelope, allowing 3 binomial standard errors."""
    if report.bernstein is None:
        raise FamilyError("the report carries no Bernstein constants")
    rows = []
    for n in report.n_values:
        distances = report.distances(n)
        for t in t_grid:
            frequency = float(np.mean(distances >= t))
            stderr = float(np.sqrt(frequency * (1.0 - frequency) / distances.size))
            bound = bernstein_envelope(None, float(t), n, constants=report.bernstein)
            ok = frequency <= bound + 3.0 * stderr
            if not ok:
                logger.warning(f"[Experiment] envelope violated at n={n}, t={t:.3e}: "
                               f"frequency {frequency:.4f} > bound {bound:.4f}")
            rows.append(EnvelopeRow(n, float(t), frequency, bound, bool(ok)))
    return rows


# ==========================================
# Euclidean vs Wasserstein
# ==========================================
def _l1(a, b, grid: GridSpec) -> float:
    return float(np.abs(a.values - b.values).sum() * grid.cell_volume)


def convolution_density(family: DeformableFamily, quad: Optional[Quadrature] = None,
                        grid: Optional[GridSpec] = None):
    """q0 * g by quadrature over Θ: Σ_k p_k q0(x - θ_k) on the Ω grid."""
    quad = quad or family.quadrature()
    grid = grid or family.omega_grid()
    members = [family.member_density(theta, grid) for theta in quad.nodes]
    values = quad.expect(np.stack([q.values for q in members]))
    return GridDensity.from_values(grid.origin, grid.cell_size, values)


def euclid_vs_wasserstein(family: DeformableFamily, n: int, seed: int, quad: Optional[Quadrature] = None,
                          grid: Optional[GridSpec] = None) -> ComparisonRecord:
    """Distances of the Euclidean and Wasserstein sample means of a shift family to q0 and q0 * g."""
    if family.kind != "shift":
        raise FamilyError(f"the Euclidean/Wasserstein contrast needs a shift family, got '{family.kind}'")
    if n < 1:
        raise RangeError("comparison needs n >= 1")
    grid = grid or family.omega_grid()
    thetas = sample_theta(family, seed, n)

    euclid = euclidean_mean([family.member_density(theta, grid) for theta in thetas])
    template = pushforward_affine(family.template, AffineMap.identity(family.dim), grid=grid)
    convolution = convolution_density(family, quad, grid)

    wasserstein = empirical_barycenter_affine_measure(thetas, family)
    reference = family.template_atoms.with_domain(family.domain)
    w2 = float(np.sqrt(max(w2sq_matched(wasserstein, reference), 0.0)))

    record = ComparisonRecord(
        n=n,
        seed=seed,
        mean_shift=float(np.linalg.norm(thetas.mean(axis=0))),
        l1_to_convolution=_l1(euclid, convolution, grid),
        l1_to_template=_l1(euclid, template, grid),
        l1_convolution_template=_l1(convolution, template, grid),
        w2_to_template=w2,
    )
    logger.info(f"[Experiment] compare-means n={n}: {asdict(record)}")
    return record
