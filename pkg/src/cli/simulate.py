import argparse
import logging
from pathlib import Path

import numpy as np

from src.cli.common import add_common_flags, emit, parse_float_list, parse_int_list, require
from src.core.config import Settings
from src.core.database import get_session
from src.core.errors import InsufficientDataError, UsageError
from src.core.experiments import consistency_run, envelope_check, rate_fit
from src.crud.experiment import save_report
from src.crud.family_io import load_family
from src.crud.report_io import slope_summary, write_report

logger = logging.getLogger("wbary.cli")

DEFAULT_N_GRID = "8,16,32,64,128,256,512,1024"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "simulate", help="Monte Carlo consistency and concentration experiment",
        description="Sample θ's, form empirical barycenters, record d²(μ̄_n, μ*), fit the rate "
                    "and compare tail frequencies with the Bernstein envelope.",
    )
    parser.add_argument("--family", type=Path, default=None, help="family spec json (affine kinds)")
    parser.add_argument("--n", default=DEFAULT_N_GRID, help="comma-separated sample sizes")
    parser.add_argument("--reps", type=int, default=200, help="replicates per sample size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None, help="report directory")
    parser.add_argument("--t-quantiles", default="0.5,0.9,0.99",
                        help="envelope thresholds, as quantiles of the pooled d² values")
    parser.add_argument("--nodes", type=int, default=None, help="Θ quadrature nodes per axis")
    parser.add_argument("--db", default=None, help="database URL to store the run in")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def _store(url: str, report, fit, status: str) -> None:
    with get_session(url) as session:
        stored = save_report(session, report, fit, status)
        logger.info(f"[CLI] stored run {stored.id} in {url}")


def run(args: argparse.Namespace, cfg: Settings) -> int:
    require(args, "family", "out")
    n_grid = parse_int_list(args.n)
    quantiles = parse_float_list(args.t_quantiles)
    if any(not 0.0 < q < 1.0 for q in quantiles):
        raise UsageError("--t-quantiles must lie strictly between 0 and 1")
    family = load_family(args.family)
    quad = family.quadrature(cfg.QUAD_NODES if args.nodes is None else args.nodes)

    report = consistency_run(family, n_grid, args.reps, args.seed, quad, cfg.THREADS)
    db_url = args.db or None
    try:
        fit = rate_fit(report, cfg.BOOTSTRAP_RESAMPLES, seed=args.seed)
    except InsufficientDataError:
        write_report(report, args.out)
        if db_url:
            _store(db_url, report, None, "insufficient")
        raise

    pooled = np.asarray([r.d2 for r in report.records])
    t_grid = np.quantile(pooled, quantiles)
    envelope = envelope_check(report, t_grid)
    write_report(report, args.out, fit, envelope)

    summary = slope_summary(report, fit)
    violations = sum(not row.ok for row in envelope)
    ok = summary.ok and violations == 0
    if db_url:
        _store(db_url, report, fit, "ok" if ok else "failed")

    emit(f"slope={fit.slope:.4f} ci=[{fit.ci_low:.4f}, {fit.ci_high:.4f}] "
         f"expected=[{summary.expected_low}, {summary.expected_high}] envelope_violations={violations}")
    emit(f"checksum={report.checksum}")
    return 0 if ok else 1
