import json
import logging
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import ValidationError as SchemaError

from src.core.errors import ParseError, InvariantError, UsageError
from src.core.measures import DENSITY_MASS_TOL, DiscreteMeasure, GridDensity
from src.core.config import settings
from src.schemas import GridFile, MeasureFile

logger = logging.getLogger("wbary.io")

Format = Literal["csv", "json"]
Measure = Union[DiscreteMeasure, GridDensity]


def _format_of(path: Path, fmt: Optional[str]) -> str:
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in ("csv", "json"):
        raise ParseError(f"cannot tell the format of '{path}' (expected .csv or .json)")
    return fmt


# ==========================================
# CSV: one row per atom, d coordinates then the weight
# ==========================================
def _read_csv(path: Path, header: Optional[bool], domain) -> DiscreteMeasure:
    try:
        lines = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    except OSError as exc:
        raise ParseError(f"cannot read '{path}': {exc}") from None
    if not lines:
        raise ParseError(f"'{path}' is empty")

    if header is None:
        # a first row that does not parse as numbers is a header
        try:
            [float(cell) for cell in lines[0].split(",")]
            header = False
        except ValueError:
            header = True
    rows = lines[1:] if header else lines
    try:
        table = np.array([[float(cell) for cell in row.split(",")] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"'{path}' has a non-numeric cell: {exc}") from None
    if table.ndim != 2 or table.shape[0] == 0 or table.shape[1] < 2:
        raise ParseError(f"'{path}' needs rows of d coordinates followed by a weight, with equal lengths")
    return DiscreteMeasure(table[:, :-1], table[:, -1], domain)


def _write_csv(measure: DiscreteMeasure, path: Path, header: bool) -> None:
    table = np.column_stack([measure.points, measure.weights])
    head = ",".join([f"x{k}" for k in range(measure.dim)] + ["weight"]) if header else ""
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=head, comments="")


# ==========================================
# JSON: measures and grid densities
# ==========================================
def _grid_from_file(spec: GridFile) -> GridDensity:
    values = np.asarray(spec.values, dtype=np.float64).reshape(spec.shape)
    cell_size = np.broadcast_to(np.asarray(spec.cell_size, dtype=np.float64), (spec.dim,))
    mass = float(values.sum() * np.prod(cell_size))
    if abs(mass - 1.0) > DENSITY_MASS_TOL:
        if abs(mass - 1.0) > settings.WEIGHT_RENORM_TOL:
            raise InvariantError(f"grid density integrates to {mass:.9f}, not 1")
        return GridDensity.from_values(spec.origin, cell_size, values)
    return GridDensity(spec.origin, cell_size, values)


def _read_json(path: Path, domain) -> Measure:
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse '{path}': {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"'{path}' must hold a JSON object")
    try:
        if "values" in payload:
            return _grid_from_file(GridFile.model_validate(payload))
        spec = MeasureFile.model_validate(payload)
    except SchemaError as exc:
        raise ParseError(f"'{path}' does not match the measure schema: {exc.errors()[0]['msg']}") from None
    box = domain if domain is not None else spec.domain
    return DiscreteMeasure(np.asarray(spec.points, dtype=np.float64).reshape(len(spec.points), spec.dim),
                           spec.weights, box)


def measure_payload(measure: Measure) -> dict:
    if isinstance(measure, GridDensity):
        return GridFile(
            dim=measure.dim,
            origin=measure.origin.tolist(),
            cell_size=measure.cell_size.tolist(),
            shape=list(measure.shape),
            values=measure.values.ravel().tolist(),
        ).model_dump()
    return MeasureFile(
        dim=measure.dim,
        domain=measure.domain.tolist(),
        points=measure.points.tolist(),
        weights=measure.weights.tolist(),
    ).model_dump()


# ==========================================
# Public API
# ==========================================
def load_measure(path, format: Optional[Format] = None, header: Optional[bool] = None,
                 domain=None, dim: Optional[int] = None) -> Measure:
    """
    Read a DiscreteMeasure (csv or json) or a GridDensity (json with "values").
    Weights are renormalized only when they already sum to 1 within 1e-6.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: '{path}'")
    measure = _read_csv(path, header, domain) if _format_of(path, format) == "csv" else _read_json(path, domain)
    if dim is not None and measure.dim != dim:
        raise ParseError(f"'{path}' holds a {measure.dim}-dimensional measure, expected d = {dim}")
    logger.debug(f"[IO] loaded {measure!r} from {path}")
    return measure


def save_measure(measure: Measure, path, format: Optional[Format] = None, header: bool = False) -> Path:
    """JSON round-trips bit-exactly; CSV writes 17 significant digits."""
    path = Path(path)
    fmt = _format_of(path, format)
    if fmt == "csv":
        if isinstance(measure, GridDensity):
            raise UsageError("grid densities are only written as JSON")
        _write_csv(measure, path, header)
    else:
        path.write_text(json.dumps(measure_payload(measure)))
    return path


def load_measures(paths, header: Optional[bool] = None, domain=None) -> List[Measure]:
    """
    Several measures meant to share one Ω. CSV files declare no box, so without an explicit
    domain they are placed on the union of every loaded box.
    """
    paths = [Path(p) for p in paths]
    measures = [load_measure(p, header=header, domain=domain) for p in paths]
    if len({m.dim for m in measures}) > 1:
        raise ParseError("the measures do not share one dimension")
    undeclared = [domain is None and _format_of(p, None) == "csv" for p in paths]
    if any(undeclared):
        boxes = np.stack([m.domain for m in measures])
        box = np.stack([boxes[:, :, 0].min(axis=0), boxes[:, :, 1].max(axis=0)], axis=1)
        measures = [m.with_domain(box) if flag else m for m, flag in zip(measures, undeclared)]
    return measures


def load_measures_dir(directory, domain=None) -> List[Measure]:
    """Every .json / .csv file of a directory, in file-name order, on one Ω."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"'{directory}' is not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".json", ".csv"))
    if not files:
        raise ParseError(f"'{directory}' holds no .json or .csv measures")
    return load_measures(files, domain=domain)
