import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from pydantic import ValidationError as SchemaError

from src.core.errors import ParseError
from src.core.measures import GridDensity
from src.core.models import (
    DeformableFamily,
    LinearAffinePhi,
    build_weight,
    make_affine_family,
    make_location_scale_1d,
    make_shift_family,
)
from src.core.templates import build_template
from src.crud.measure_io import load_measure
from src.schemas import FamilySpec

logger = logging.getLogger("wbary.io")


def _template(spec: FamilySpec, base_dir: Path) -> GridDensity:
    if isinstance(spec.template, str):
        template = load_measure(base_dir / spec.template)
        if not isinstance(template, GridDensity):
            raise ParseError(f"template '{spec.template}' must be a grid density JSON file")
        return template
    return build_template(spec.template.kind, **spec.template.params)


def family_from_spec(spec: FamilySpec, base_dir: Optional[Path] = None) -> DeformableFamily:
    base_dir = base_dir or Path(".")
    template = _template(spec, base_dir)
    try:
        g = build_weight(spec.g.kind, spec.theta_box, **spec.g.params)
    except TypeError as exc:
        raise ParseError(f"bad parameters for g '{spec.g.kind}': {exc}") from None

    if spec.kind == "shift":
        return make_shift_family(template, g, spec.theta_box, spec.atoms_per_axis)
    if spec.kind == "location_scale":
        return make_location_scale_1d(template, g, spec.theta_box, spec.atoms_per_axis)
    phi = LinearAffinePhi(spec.phi.A0, spec.phi.A, spec.phi.b0, spec.phi.B)
    return make_affine_family(phi, g, spec.theta_box, template, spec.atoms_per_axis)


def load_family_spec(path) -> FamilySpec:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
        return FamilySpec.model_validate(payload)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read family spec '{path}': {exc}") from None
    except SchemaError as exc:
        raise ParseError(f"family spec '{path}' is invalid: {exc.errors()[0]['msg']}") from None


def load_family(path) -> DeformableFamily:
    """Family spec JSON -> DeformableFamily; template paths resolve relative to the spec file."""
    path = Path(path)
    spec = load_family_spec(path)
    family = family_from_spec(spec, path.parent)
    logger.debug(f"[IO] loaded {family!r} from {path}")
    return family


def load_thetas(path, param_dim: int) -> np.ndarray:
    """CSV of θ rows, one coordinate per column; a non-numeric first row is a header."""
    path = Path(path)
    try:
        lines = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    except OSError as exc:
        raise ParseError(f"cannot read θ file '{path}': {exc}") from None
    try:
        rows = [[float(cell) for cell in line.split(",")] for line in lines]
    except ValueError:
        try:
            rows = [[float(cell) for cell in line.split(",")] for line in lines[1:]]
        except ValueError as exc:
            raise ParseError(f"θ file '{path}' has a non-numeric cell: {exc}") from None
    if not rows or any(len(row) != param_dim for row in rows):
        raise ParseError(f"θ file '{path}' needs rows of {param_dim} coordinate(s)")
    return np.asarray(rows, dtype=np.float64)
