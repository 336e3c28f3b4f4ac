import argparse
import logging
from pathlib import Path

from src.cli.common import add_common_flags, emit, format_vector, require
from src.core.config import Settings
from src.core.duality import affine_primal_value
from src.core.errors import FamilyError
from src.core.experiments import bernstein_constants
from src.core.models import family_mean_map
from src.crud.family_io import load_family

logger = logging.getLogger("wbary.cli")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "family-info", help="summary of a family: Ω, mean map, J_P and Bernstein constants",
        description="Print the derived quantities of a family spec without running any experiment.",
    )
    parser.add_argument("--family", type=Path, default=None, help="family spec json")
    parser.add_argument("--nodes", type=int, default=None, help="Θ quadrature nodes per axis")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, cfg: Settings) -> int:
    require(args, "family")
    family = load_family(args.family)
    quad = family.quadrature(cfg.QUAD_NODES if args.nodes is None else args.nodes)
    mean_map = family_mean_map(family, quad)

    emit(f"kind={family.kind} dim={family.dim} param_dim={family.param_dim}")
    emit(f"theta_box={format_vector(family.theta_box)}")
    emit(f"omega={format_vector(family.domain)}")
    emit(f"A_bar={format_vector(mean_map.A)}")
    emit(f"b_bar={format_vector(mean_map.b)}")
    emit(f"quadrature_nodes={quad.size}")
    try:
        emit(f"J_P={affine_primal_value(family, quad)!r}")
    except FamilyError as exc:
        logger.info(f"[CLI] {exc}")
        emit("J_P=unavailable")

    c = bernstein_constants(family, quad)
    emit(f"eps0_sq={c.eps0_sq!r} var_A={c.var_A!r} B1={c.B1!r} var_b={c.var_b!r} B2={c.B2!r}")
    return 0
