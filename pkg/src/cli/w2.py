import argparse
from pathlib import Path

from src.cli.common import add_common_flags, emit, require
from src.core.config import Settings
from src.core.errors import UsageError
from src.core.measures import DiscreteMeasure, GridDensity, discretize
from src.core.transport1d import w2sq_1d
from src.core.transport_exact import w2sq_lp
from src.crud.measure_io import load_measures
from src.crud.report_io import write_plan


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "w2", help="squared 2-Wasserstein distance between two measures",
        description="Print W2² between two measure files (csv / json / grid json).",
    )
    parser.add_argument("--mu", type=Path, help="first measure file")
    parser.add_argument("--nu", type=Path, help="second measure file")
    parser.add_argument("--method", choices=["auto", "1d", "lp"], default="auto",
                        help="auto: exact quantile formula in 1D, network simplex otherwise")
    parser.add_argument("--header", action="store_true", default=None, help="CSV inputs have a header row")
    parser.add_argument("--plan-out", type=Path, default=None, help="write the optimal plan here (csv)")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def _as_discrete(measure) -> DiscreteMeasure:
    return discretize(measure) if isinstance(measure, GridDensity) else measure


def run(args: argparse.Namespace, cfg: Settings) -> int:
    require(args, "mu", "nu")
    mu, nu = load_measures([args.mu, args.nu], header=args.header)

    method = args.method
    if method == "auto":
        method = "1d" if mu.dim == 1 and args.plan_out is None else "lp"
    if method == "1d":
        if mu.dim != 1:
            raise UsageError("--method 1d needs one-dimensional measures")
        value = w2sq_1d(mu, nu)
    else:
        value, plan = w2sq_lp(_as_discrete(mu), _as_discrete(nu), max_atoms=cfg.LP_MAX_ATOMS)
        if args.plan_out is not None:
            write_plan(plan, args.plan_out)
    emit(repr(float(value)))
    return 0
