import argparse
from dataclasses import asdict
from pathlib import Path

from src.cli.common import add_common_flags, emit, require
from src.core.config import Settings
from src.core.experiments import euclid_vs_wasserstein
from src.crud.family_io import load_family
from src.crud.report_io import write_comparison


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "compare-means", help="Euclidean against Wasserstein sample mean for a shift family",
        description="Average n sampled members of a shift family both ways and report L1 distances "
                    "of the Euclidean mean and the W2 distance of the Wasserstein mean.",
    )
    parser.add_argument("--family", type=Path, default=None, help="shift family spec json")
    parser.add_argument("--n", type=int, default=10_000, help="number of sampled members")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--nodes", type=int, default=None, help="Θ quadrature nodes per axis")
    parser.add_argument("--grid", type=int, default=None, help="Ω grid cells per axis")
    parser.add_argument("--out", type=Path, default=None, help="write the record here (csv)")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: Settings) -> int:
    require(args, "family")
    family = load_family(args.family)
    quad = family.quadrature(cfg.QUAD_NODES if args.nodes is None else args.nodes)
    grid = family.omega_grid(cfg.GRID_CELLS if args.grid is None else args.grid)
    record = euclid_vs_wasserstein(family, args.n, args.seed, quad, grid)
    for key, value in asdict(record).items():
        emit(f"{key}={value!r}")
    if args.out is not None:
        write_comparison(record, args.out)
    return 0
