"""Helpers shared by the subcommands: flag groups, config files, output formatting."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.core.errors import ParseError, UsageError

logger = logging.getLogger("wbary.cli")

# flags that configure the run rather than the command; mirrored by Settings fields
SETTINGS_FLAGS = ("threads", "log_level", "quad_nodes", "grid_cells", "lp_max_atoms",
                  "fixed_support_max_iter", "bootstrap_resamples", "database_url")


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run options")
    group.add_argument("--config", type=Path, default=None,
                       help="JSON file whose keys mirror these flags (explicit flags win)")
    group.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: one per logical core)")
    group.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                       help="logging level for stderr")


def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    """Config keys are flag names with underscores (n_grid, log_level, ...)."""
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config file '{path}': {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"config file '{path}' must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in payload.items()}


def configure_logging(level: str) -> None:
    root = logging.getLogger()
    # the previous stderr may already be closed, so old handlers are dropped unflushed
    for old in [h for h in root.handlers if getattr(h, "_wbary", False)]:
        root.removeHandler(old)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    handler._wbary = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))


def parse_int_list(text) -> List[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got '{text}'") from None


def parse_float_list(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got '{text}'") from None


def require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required flag(s): {', '.join(missing)}")


def format_vector(values: Sequence[float]) -> str:
    return "[" + ", ".join(f"{float(v):.6g}" for v in np.ravel(values)) + "]"


def emit(line: str = "") -> None:
    print(line, file=sys.stdout)
