# main.py
import argparse
import logging
import sys
from typing import List, Optional

from src.cli import COMMANDS
from src.cli.common import SETTINGS_FLAGS, configure_logging, load_config_file
from src.core.config import settings
from src.core.errors import ValidationError, WbaryError

logger = logging.getLogger("wbary.cli")


# ==========================================
# Parser
# ==========================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wbary",
        description="Wasserstein barycenters of random measures: exact transport, "
                    "closed-form families, duality checks and Monte Carlo experiments.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _parse(parser: argparse.ArgumentParser, argv: List[str]):
    """Parse argv; a --config file supplies defaults that explicit flags override."""
    args = parser.parse_args(argv)
    if args.command is None or getattr(args, "config", None) is None:
        return args, {}
    file_values = load_config_file(args.config)
    sub = _subparser(parser, args.command)
    known = {action.dest for action in sub._actions}
    sub.set_defaults(**{k: v for k, v in file_values.items() if k in known and k != "config"})
    return parser.parse_args(argv), file_values


# ==========================================
# Entry point
# ==========================================
def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args, file_values = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except WbaryError as exc:
        print(f"wbary: error: {exc}", file=sys.stderr)
        return 2
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2

    overrides = {k: v for k, v in file_values.items() if k in SETTINGS_FLAGS}
    overrides.update({"threads": args.threads, "log_level": args.log_level})
    cfg = settings.merged(overrides)
    configure_logging(cfg.LOG_LEVEL)
    logger.debug(f"[CLI] {args.command} with {vars(args)}")

    try:
        return int(args.handler(args, cfg))
    except ValidationError as exc:
        print(f"wbary {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except WbaryError as exc:
        print(f"wbary {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.exception(f"[CLI] unexpected failure in {args.command}")
        print(f"wbary {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
