import csv
import json
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Type

import numpy as np
from pydantic import BaseModel

from src.core.experiments import ComparisonRecord, EnvelopeRow, ExperimentReport, RateFit
from src.core.measures import TransportPlan
from src.schemas import (
    AggregateRowSchema,
    ComparisonRow,
    EnvelopeRowSchema,
    RecordRow,
    SlopeSummary,
    TimingRow,
)


def write_rows(path: Path, rows: Iterable, schema: Type[BaseModel]) -> Path:
    """CSV with one column per schema field; floats keep full precision."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(schema.model_fields))
        writer.writeheader()
        for row in rows:
            payload = schema.model_validate(row).model_dump()
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in payload.items()})
    return path


def _write_dat(path: Path, header: str, rows: Sequence[Sequence[float]]) -> None:
    lines = [f"# {header}"] + [" ".join(repr(float(v)) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def slope_summary(report: ExperimentReport, fit: RateFit, expected=(-1.2, -0.8)) -> SlopeSummary:
    low, high = expected
    return SlopeSummary(
        slope=fit.slope,
        intercept=fit.intercept,
        ci_low=fit.ci_low,
        ci_high=fit.ci_high,
        expected_low=low,
        expected_high=high,
        ok=low <= fit.slope <= high,
        checksum=report.checksum,
    )


def write_report(report: ExperimentReport, out_dir, fit: Optional[RateFit] = None,
                 envelope: Optional[List[EnvelopeRow]] = None) -> List[Path]:
    """
    records.csv, timings.csv, aggregates.csv, slope.json, envelope.csv and gnuplot .dat files.
    Everything except timings.csv is a pure function of (config, seed).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        write_rows(out / "records.csv", report.records, RecordRow),
        write_rows(out / "timings.csv", report.records, TimingRow),
        write_rows(out / "aggregates.csv", report.aggregates, AggregateRowSchema),
    ]
    _write_dat(out / "mean_d2.dat", "n mean q10 median q90",
               [(a.n, a.mean, a.q10, a.median, a.q90) for a in report.aggregates])
    written.append(out / "mean_d2.dat")

    if fit is not None:
        summary = slope_summary(report, fit)
        (out / "slope.json").write_text(json.dumps(summary.model_dump(), indent=2))
        written.append(out / "slope.json")
    if envelope is not None:
        written.append(write_rows(out / "envelope.csv", envelope, EnvelopeRowSchema))
        _write_dat(out / "envelope.dat", "n t frequency bound",
                   [(r.n, r.t, r.frequency, r.bound) for r in envelope])
        written.append(out / "envelope.dat")
    (out / "config.json").write_text(json.dumps(report.config, indent=2, sort_keys=True))
    written.append(out / "config.json")
    return written


def write_comparison(record: ComparisonRecord, path) -> Path:
    return write_rows(Path(path), [asdict(record)], ComparisonRow)


def write_trace(trace: Sequence[float], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "objective"])
        for iteration, value in enumerate(trace):
            writer.writerow([iteration, repr(float(value))])
    return path


def write_plan(plan: TransportPlan, path) -> Path:
    """Nonzero plan entries as (i, j, x_i..., y_j..., mass) rows."""
    path = Path(path)
    dim = plan.source.dim
    rows, cols = np.nonzero(plan.gamma > 0)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j"] + [f"x{a}" for a in range(dim)] + [f"y{a}" for a in range(dim)] + ["mass"])
        for i, j in zip(rows, cols):
            writer.writerow([int(i), int(j)]
                            + [repr(float(v)) for v in plan.source.points[i]]
                            + [repr(float(v)) for v in plan.target.points[j]]
                            + [repr(float(plan.gamma[i, j]))])
    return path
