import argparse
import csv
import io
import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from src.cli.common import add_common_flags, emit, require
from src.core.config import Settings
from src.core.duality import (
    DualFamily,
    affine_dual_family,
    brenier_recover,
    dual_objective,
    grid_search_dual,
    primal_objective,
    shift_dual_family,
)
from src.core.errors import FamilyError
from src.core.experiments import w2sq_matched
from src.core.models import DeformableFamily, Quadrature, population_measure
from src.crud.family_io import load_family

logger = logging.getLogger("wbary.cli")

RECOVERY_NODES = 5


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "duality-check", help="primal and dual values of a family, and Brenier recovery errors",
        description="Evaluate J_P at the population barycenter and J_P* at the closed-form dual "
                    "candidate, print the gap, and push a few members onto the barycenter.",
    )
    parser.add_argument("--family", type=Path, default=None, help="family spec json")
    parser.add_argument("--nodes", type=int, default=None, help="Θ quadrature nodes per axis")
    parser.add_argument("--grid", type=int, default=None, help="Ω grid cells per axis")
    parser.add_argument("--threshold", type=float, default=0.05,
                        help="largest accepted relative gap |J_P - J_P*| / J_P")
    parser.add_argument("--out", type=Path, default=None, help="also write the csv here")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def dual_candidate(family: DeformableFamily, quad: Quadrature, grid, threads=None) -> Tuple[str, DualFamily]:
    """Closed form when the family has one, otherwise the scaled affine candidate."""
    if family.kind == "shift":
        return "shift", shift_dual_family(family, quad, grid)
    try:
        return "affine", affine_dual_family(family, quad, grid)
    except FamilyError as exc:
        logger.warning(f"[CLI] {exc}; falling back to a grid search over scaled candidates")
        scale, _, df = grid_search_dual(family, quad, grid, threads=threads)
        return f"grid-search:{scale:g}", df


def recovery_nodes(quad: Quadrature, count: int = RECOVERY_NODES) -> List[int]:
    """Up to `count` evenly spread node indices with g > 0."""
    positive = np.nonzero(quad.g_values > 0)[0]
    if positive.size == 0:
        return []
    picks = np.linspace(0, positive.size - 1, min(count, positive.size)).round().astype(int)
    return [int(positive[i]) for i in np.unique(picks)]


def run(args: argparse.Namespace, cfg: Settings) -> int:
    require(args, "family")
    family = load_family(args.family)
    quad = family.quadrature(cfg.QUAD_NODES if args.nodes is None else args.nodes)
    grid = family.omega_grid(cfg.GRID_CELLS if args.grid is None else args.grid)

    target = population_measure(family, quad)
    primal = primal_objective(target, family, quad, cfg.THREADS)
    source, df = dual_candidate(family, quad, grid, cfg.THREADS)
    dual = dual_objective(df, family, cfg.THREADS)
    gap = primal - dual
    relative = abs(gap) / max(abs(primal), np.finfo(float).tiny)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["J_P", "J_P*", "gap"])
    writer.writerow([repr(primal), repr(dual), repr(gap)])
    writer.writerow(["theta", "w2_pushforward"])
    for k in recovery_nodes(quad):
        theta = quad.nodes[k]
        _, pushed = brenier_recover(df, family, theta)
        error = float(np.sqrt(max(w2sq_matched(pushed, target), 0.0)))
        writer.writerow([" ".join(repr(float(v)) for v in theta), repr(error)])

    text = buffer.getvalue()
    emit(text.rstrip("\n"))
    if args.out is not None:
        args.out.write_text(text)
    logger.info(f"[CLI] dual candidate '{source}', relative gap {relative:.3e} (threshold {args.threshold:g})")
    return 0 if relative <= args.threshold else 1
