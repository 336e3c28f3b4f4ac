"""wbary subcommands; each module exposes register(subparsers) and run(args, cfg)."""

from src.cli import barycenter, compare_means, duality_check, family_info, runs, simulate, w2

COMMANDS = (w2, barycenter, duality_check, simulate, compare_means, family_info, runs)
