import argparse
import logging
from pathlib import Path

from src.cli.common import add_common_flags, emit, format_vector, require
from src.core.barycenter import (
    empirical_barycenter_1d,
    empirical_barycenter_affine,
    empirical_barycenter_fixed_support,
    sample_mean_map,
)
from src.core.config import Settings
from src.core.errors import UsageError
from src.core.measures import DiscreteMeasure, GridDensity, discretize
from src.core.transport1d import j_objective
from src.crud.family_io import load_family, load_thetas
from src.crud.measure_io import load_measure, load_measures_dir, save_measure
from src.crud.report_io import write_trace

logger = logging.getLogger("wbary.cli")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "barycenter", help="empirical Wasserstein barycenter of a set of measures",
        description="Compute the equal-weight barycenter of the measures in a directory, "
                    "or the closed-form barycenter of sampled members of an affine family.",
    )
    parser.add_argument("--inputs", type=Path, default=None, help="directory of measure files (1d, fixed-support)")
    parser.add_argument("--method", choices=["1d", "affine", "fixed-support"], default="1d")
    parser.add_argument("--out", type=Path, default=None, help="output measure file (json)")
    parser.add_argument("--trace", type=Path, default=None, help="objective per iteration (csv, fixed-support)")
    parser.add_argument("--family", type=Path, default=None, help="family spec json (affine)")
    parser.add_argument("--thetas", type=Path, default=None, help="sampled θ rows (csv, affine)")
    parser.add_argument("--seed-support", type=Path, default=None,
                        help="initial equal-weight support (fixed-support; default: first input)")
    parser.add_argument("--max-iter", type=int, default=None, help="fixed-support iteration cap")
    parser.add_argument("--tol", type=float, default=None, help="fixed-support displacement tolerance")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def _run_1d(args: argparse.Namespace) -> DiscreteMeasure:
    measures = load_measures_dir(args.inputs)
    result = empirical_barycenter_1d(measures)
    emit(f"method=1d inputs={len(measures)} atoms={result.size} J_n={j_objective(result, measures)!r}")
    return result


def _run_affine(args: argparse.Namespace) -> GridDensity:
    require(args, "family", "thetas")
    family = load_family(args.family)
    thetas = load_thetas(args.thetas, family.param_dim)
    mean_map = sample_mean_map(thetas, family)
    result = empirical_barycenter_affine(thetas, family)
    emit(f"method=affine n={thetas.shape[0]} A={format_vector(mean_map.A)} b={format_vector(mean_map.b)}")
    return result


def _run_fixed_support(args: argparse.Namespace, cfg: Settings) -> DiscreteMeasure:
    measures = [discretize(mu) if isinstance(mu, GridDensity) else mu for mu in load_measures_dir(args.inputs)]
    support = None
    if args.seed_support is not None:
        support = load_measure(args.seed_support, domain=measures[0].domain)
        if isinstance(support, GridDensity):
            raise UsageError("--seed-support must be a discrete measure file")
    max_iter = cfg.FIXED_SUPPORT_MAX_ITER if args.max_iter is None else args.max_iter
    result, trace = empirical_barycenter_fixed_support(measures, support, max_iter, args.tol, cfg.THREADS)
    if args.trace is not None:
        write_trace(trace, args.trace)
    emit(f"method=fixed-support inputs={len(measures)} atoms={result.size} "
         f"iterations={len(trace) - 1} J_n={trace[-1]!r}")
    return result


def run(args: argparse.Namespace, cfg: Settings) -> int:
    if args.method in ("1d", "fixed-support"):
        require(args, "inputs")
    if args.method == "1d":
        result = _run_1d(args)
    elif args.method == "affine":
        result = _run_affine(args)
    else:
        result = _run_fixed_support(args, cfg)
    if args.out is not None:
        save_measure(result, args.out, format="json")
        logger.info(f"[CLI] barycenter written to {args.out}")
    return 0
