"""
Exact one-dimensional optimal transport.

On the line W2² is the L² distance between quantile functions, and the
barycenter's quantile function is the weighted average of the inputs'
quantile functions. Both are computed exactly on merged breakpoint partitions:
discrete measures give step quantiles, grid densities give piecewise-linear
ones (their CDF is piecewise linear), and averages of the two mix freely.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union
import logging

import numpy as np

from src.core.errors import AbsContinuityError, DimensionError, InvariantError, RangeError
from src.core.measures import DiscreteMeasure, GridDensity, require_same_box

logger = logging.getLogger("wbary.transport1d")

Measure1D = Union[DiscreteMeasure, GridDensity]

BREAKPOINT_MERGE_TOL = 1e-14
MONOTONE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuantileFn:
    """
    Piecewise-linear quantile function on the partition 0 = b_0 < b_1 < ... < b_K = 1.
    On the piece (b_{k-1}, b_k] it runs linearly from left_values[k] (limit at b_{k-1}+)
    to values[k] (value at b_k). A step quantile has left_values == values.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    left_values: Optional[np.ndarray] = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        left = vals.copy() if self.left_values is None else np.asarray(self.left_values, dtype=np.float64).reshape(-1)
        if bp.shape[0] == 0 or bp.shape != vals.shape or left.shape != vals.shape:
            raise InvariantError("quantile function needs matching, non-empty breakpoints and values")
        if abs(bp[-1] - 1.0) > 1e-9:
            raise InvariantError(f"last breakpoint must be 1, got {bp[-1]!r}")
        bp = bp.copy()
        bp[-1] = 1.0
        if bp[0] <= 0 or np.any(np.diff(bp) <= 0):
            raise InvariantError("breakpoints must be strictly increasing in (0, 1]")
        scale = max(1.0, float(np.abs(vals).max()), float(np.abs(left).max()))
        if np.any(left > vals + MONOTONE_TOL * scale) or np.any(vals[:-1] > left[1:] + MONOTONE_TOL * scale):
            raise InvariantError("quantile values must be nondecreasing")
        for name, arr in (("breakpoints", bp), ("values", vals), ("left_values", left)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def is_step(self) -> bool:
        return bool(np.array_equal(self.left_values, self.values))

    @property
    def lower_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.breakpoints[:-1]])

    def _evaluate(self, y: np.ndarray) -> np.ndarray:
        # y in [0, 1]; y = 0 gives the left limit of the first piece
        k = np.clip(np.searchsorted(self.breakpoints, y, side="left"), 0, self.breakpoints.shape[0] - 1)
        lo = self.lower_edges[k]
        width = self.breakpoints[k] - lo
        t = np.clip((y - lo) / width, 0.0, 1.0)
        return self.left_values[k] + t * (self.values[k] - self.left_values[k])

    def __call__(self, y):
        arr = np.asarray(y, dtype=np.float64)
        if np.any(arr <= 0) or np.any(arr > 1):
            raise RangeError("quantile level must lie in (0, 1]")
        out = self._evaluate(arr)
        return float(out) if np.ndim(y) == 0 else out

    def on_partition(self, edges: np.ndarray):
        """Values at the start (right limit) and end of each piece (edges[j-1], edges[j]]."""
        ends = edges[1:]
        k = np.clip(np.searchsorted(self.breakpoints, ends - BREAKPOINT_MERGE_TOL, side="left"),
                    0, self.breakpoints.shape[0] - 1)
        lo = self.lower_edges[k]
        width = self.breakpoints[k] - lo
        slope = (self.values[k] - self.left_values[k]) / width
        start = self.left_values[k] + slope * np.clip(edges[:-1] - lo, 0.0, None)
        end = self.left_values[k] + slope * np.clip(ends - lo, 0.0, width)
        return start, end

    def affine(self, scale: float, shift: float) -> "QuantileFn":
        """Quantile of the image measure under x -> scale*x + shift (scale > 0)."""
        if scale <= 0:
            raise RangeError("affine quantile transform needs a positive scale")
        return QuantileFn(self.breakpoints, scale * self.values + shift, scale * self.left_values + shift)

    def to_measure(self, domain=None) -> DiscreteMeasure:
        """
        The discrete measure this quantile induces: atoms at step values with weights = step widths.
        Linear pieces are collapsed to an atom at their midpoint value.
        """
        widths = np.diff(np.concatenate([[0.0], self.breakpoints]))
        atoms = (self.left_values + self.values) / 2.0
        # merge consecutive equal atoms
        keep = np.concatenate([[True], np.diff(atoms) != 0])
        group = np.cumsum(keep) - 1
        merged_w = np.bincount(group, weights=widths)
        merged_x = atoms[keep]
        return DiscreteMeasure(merged_x.reshape(-1, 1), merged_w / merged_w.sum(), domain)


# ---------------------------------------------------------------------------
# Building quantile functions
# ---------------------------------------------------------------------------

def _require_1d(measure) -> None:
    if measure.dim != 1:
        raise DimensionError(f"one-dimensional transport needs d = 1, got d = {measure.dim}")


def _sorted_atoms(measure: DiscreteMeasure):
    """Sorted support with equal coordinates merged (weights summed)."""
    x = measure.points[:, 0]
    order = np.argsort(x, kind="stable")
    x, w = x[order], measure.weights[order]
    first = np.concatenate([[True], np.diff(x) != 0])
    group = np.cumsum(first) - 1
    return x[first], np.bincount(group, weights=w)


def quantile_function(measure: Measure1D) -> QuantileFn:
    if isinstance(measure, QuantileFn):
        return measure
    _require_1d(measure)
    if isinstance(measure, GridDensity):
        masses = measure.cell_masses()
        edges = measure.axis_edges(0)
        positive = masses > 0
        cum = np.cumsum(masses)[positive]
        return QuantileFn(cum / cum[-1], edges[1:][positive], edges[:-1][positive])
    x, w = _sorted_atoms(measure)
    cum = np.cumsum(w)
    return QuantileFn(cum / cum[-1], x)


def cdf(measure: Measure1D, x):
    """Right-continuous CDF F(x) = μ((-∞, x])."""
    _require_1d(measure)
    arr = np.asarray(x, dtype=np.float64)
    if isinstance(measure, GridDensity):
        edges = measure.axis_edges(0)
        cum = np.concatenate([[0.0], np.cumsum(measure.cell_masses())])
        out = np.clip(np.interp(arr, edges, cum, left=0.0, right=1.0), 0.0, 1.0)
    else:
        atoms, w = _sorted_atoms(measure)
        cum = np.concatenate([[0.0], np.cumsum(w)])
        out = np.clip(cum[np.searchsorted(atoms, arr, side="right")], 0.0, 1.0)
    return float(out) if np.ndim(x) == 0 else out


def quantile(measure: Measure1D, y):
    """Generalized inverse F⁻¹(y) = inf{x : F(x) >= y}, y in (0, 1]."""
    return quantile_function(measure)(y)


# ---------------------------------------------------------------------------
# Distances, maps, averages
# ---------------------------------------------------------------------------

def merged_edges(quantiles: Sequence[QuantileFn]) -> np.ndarray:
    """0 followed by the union of all breakpoints, with float-noise duplicates collapsed."""
    allbp = np.unique(np.concatenate([q.breakpoints for q in quantiles]))
    allbp = allbp[allbp > BREAKPOINT_MERGE_TOL]
    keep = np.concatenate([np.diff(allbp) > BREAKPOINT_MERGE_TOL, [False]])
    edges = np.concatenate([[0.0], allbp[keep], [1.0]])
    return edges


def w2sq_quantiles(q1: QuantileFn, q2: QuantileFn) -> float:
    """∫_0^1 |Q1(y) - Q2(y)|² dy, exact for piecewise-linear quantiles."""
    edges = merged_edges([q1, q2])
    s1, e1 = q1.on_partition(edges)
    s2, e2 = q2.on_partition(edges)
    d0, d1 = s1 - s2, e1 - e2
    widths = np.diff(edges)
    return float(np.sum(widths * (d0 * d0 + d0 * d1 + d1 * d1)) / 3.0)


def w2sq_1d(mu: Measure1D, nu: Measure1D) -> float:
    _require_1d(mu)
    _require_1d(nu)
    require_same_box(mu, nu)
    return w2sq_quantiles(quantile_function(mu), quantile_function(nu))


def optimal_map_1d(mu0: GridDensity, nu: Measure1D) -> Callable[[np.ndarray], np.ndarray]:
    """T = F_ν⁻¹ ∘ F_μ0, the monotone optimal map from an absolutely continuous μ0 onto ν."""
    if not isinstance(mu0, GridDensity):
        raise AbsContinuityError("the source of a 1D optimal map must have a density (GridDensity)")
    _require_1d(mu0)
    _require_1d(nu)
    q_nu = quantile_function(nu)

    def transport(x):
        levels = cdf(mu0, np.asarray(x, dtype=np.float64))
        out = q_nu._evaluate(np.asarray(levels))
        return float(out) if np.ndim(x) == 0 else out

    return transport


def pushforward_error(transport: Callable, mu0: GridDensity, nu: Measure1D, thresholds,
                      subdivisions: int = 64) -> float:
    """
    max over thresholds t of |(T#μ0)((-∞, t]) - ν((-∞, t])|.
    T#μ0 is integrated by splitting every cell of μ0 into equal sub-cells.
    """
    edges = mu0.axis_edges(0)
    offsets = (np.arange(subdivisions) + 0.5) / subdivisions
    sub_x = (edges[:-1, None] + offsets[None, :] * mu0.cell_size[0]).ravel()
    sub_w = np.repeat(mu0.cell_masses() / subdivisions, subdivisions)
    images = np.asarray(transport(sub_x))
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    pushed = np.array([sub_w[images <= t].sum() for t in thresholds])
    return float(np.max(np.abs(pushed - np.atleast_1d(cdf(nu, thresholds)))))


def _check_weights(weights: Optional[Sequence[float]], n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n or np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvariantError("barycenter weights must be a probability vector matching the inputs")
    return w


def quantile_mean(quantiles: Sequence[QuantileFn], weights: Optional[Sequence[float]] = None) -> QuantileFn:
    """Pointwise weighted average of quantile functions on the merged breakpoint set."""
    quantiles = list(quantiles)
    if not quantiles:
        raise InvariantError("quantile_mean needs at least one quantile function")
    w = _check_weights(weights, len(quantiles))
    edges = merged_edges(quantiles)
    start = np.zeros(edges.shape[0] - 1)
    end = np.zeros(edges.shape[0] - 1)
    for wk, q in zip(w, quantiles):
        s, e = q.on_partition(edges)
        start += wk * s
        end += wk * e
    # averages of monotone functions are monotone; accumulate to clear float noise at junctions
    if all(q.is_step for q in quantiles):
        return QuantileFn(edges[1:], np.maximum.accumulate(end))
    sequence = np.maximum.accumulate(np.column_stack([start, end]).ravel())
    return QuantileFn(edges[1:], sequence[1::2], sequence[0::2])


def barycenter_1d(measures: Sequence[Measure1D], weights: Optional[Sequence[float]] = None) -> DiscreteMeasure:
    """Wasserstein barycenter on the line: the measure whose quantile is the weighted quantile mean."""
    measures = list(measures)
    if not measures:
        raise InvariantError("barycenter_1d needs at least one measure")
    for mu in measures:
        _require_1d(mu)
        require_same_box(measures[0], mu)
    mean_q = quantile_mean([quantile_function(mu) for mu in measures], weights)
    return mean_q.to_measure(measures[0].domain)


def translate_1d(measure: DiscreteMeasure, shift: float, domain=None) -> DiscreteMeasure:
    return DiscreteMeasure(measure.points + shift, measure.weights, measure.domain if domain is None else domain)


def j_objective(candidate: Measure1D, measures: Sequence[Measure1D],
                weights: Optional[Sequence[float]] = None) -> float:
    """(1/2) Σ w_i W2²(candidate, μ_i) in closed form."""
    measures = list(measures)
    w = _check_weights(weights, len(measures))
    qc = quantile_function(candidate)
    return 0.5 * float(sum(wk * w2sq_quantiles(qc, quantile_function(mu)) for wk, mu in zip(w, measures)))


__all__: List[str] = [
    "QuantileFn", "quantile_function", "cdf", "quantile", "w2sq_quantiles", "w2sq_1d",
    "optimal_map_1d", "pushforward_error", "quantile_mean", "barycenter_1d", "translate_1d",
    "merged_edges", "j_objective",
]
