import argparse

from src.cli.common import add_common_flags, emit
from src.core.config import Settings
from src.core.database import get_session
from src.core.errors import UsageError
from src.crud.experiment import get_run, get_run_records, list_runs
from src.schemas import ExperimentRunRead


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "runs", help="list experiment runs stored by `simulate --db`",
        description="List stored runs, most recent first, or show the records of one run.",
    )
    parser.add_argument("--db", default=None, help="database URL (default: DATABASE_URL setting)")
    parser.add_argument("--limit", type=int, default=20)
    parser.add_argument("--show", type=int, default=None, metavar="ID", help="print the records of one run")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: Settings) -> int:
    url = args.db or cfg.DATABASE_URL
    with get_session(url) as session:
        if args.show is not None:
            stored = get_run(session, args.show)
            if stored is None:
                raise UsageError(f"no run with id {args.show}")
            emit(ExperimentRunRead.model_validate(stored).model_dump_json())
            emit("n,replicate,seed,d2")
            for record in get_run_records(session, args.show):
                emit(f"{record.n},{record.replicate},{record.seed},{record.d2!r}")
            return 0
        for stored in list_runs(session, args.limit):
            row = ExperimentRunRead.model_validate(stored)
            slope = "-" if row.slope is None else f"{row.slope:.4f}"
            emit(f"{row.id}\t{row.created_at:%Y-%m-%d %H:%M:%S}\t{row.family_kind}\tseed={row.seed}"
                 f"\tslope={slope}\t{row.status}\t{row.checksum[:12]}")
    return 0
