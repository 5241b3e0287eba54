"""CSV, JSON and SVG writers for sweep results."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .hilbert import ModelParams
from .svgplot import PALETTE, Series, heat_map, line_plot
from .sweep import SweepResult

CSV_SCHEMA_VERSION = 1
PARAM_FIELDS = tuple(ModelParams.__dataclass_fields__)
CSV_COLUMNS = (*(f"param.{p}" for p in PARAM_FIELDS), "param.drive",
               "g2_numeric", "g2_analytic", "p1", "p2", "n_phonon_used", "status")
FORMATS = ("csv", "json", "svg")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(results: list[SweepResult]) -> str:
    """One row per record across all results, columns in `CSV_COLUMNS` order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for res in results:
        drive = str(res.spec.drive)
        for r in res.records:
            row = [r.params.get(p) for p in PARAM_FIELDS]
            row += [drive, r.g2_numeric, r.g2_analytic, r.p1, r.p2, r.n_phonon_used, r.status]
            writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _clean(obj):
    # JSON has no NaN/inf; store them as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def results_document(results: list[SweepResult], name: str) -> dict:
    return {"schema_version": CSV_SCHEMA_VERSION, "name": name,
            "sweeps": [r.to_dict() for r in results]}


def load_results(path) -> tuple[str, list[SweepResult]]:
    with open(path) as fh:
        doc = json.load(fh)
    return doc["name"], [SweepResult.from_dict(s) for s in doc["sweeps"]]


def figure_svg(results: list[SweepResult], name: str) -> str:
    """Line plot for one-axis sweeps, heat map for a single two-axis sweep."""
    if len(results) == 1 and results[0].spec.axis2 is not None:
        res = results[0]
        g2 = res.values("g2_numeric")
        if np.all(np.isnan(g2)):
            g2 = res.values("g2_analytic")
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.log10(np.where(g2 > 0, g2, np.nan))
        return heat_map(np.array(res.spec.axis1.values), np.array(res.spec.axis2.values), z,
                        res.spec.axis1.name, res.spec.axis2.name,
                        title=f"{name} ({res.spec.drive})", zlabel="log10 g2(0)")
    series = []
    k = 0
    for res in results:
        if res.spec.axis2 is not None:
            raise ValueError("cannot overlay two-axis sweeps in one line plot")
        x = np.array(res.spec.axis1.values)
        tag = res.spec.name
        color = PALETTE[k % len(PALETTE)]
        k += 1
        if "numeric" in res.spec.solvers:
            series.append(Series(x, res.values("g2_numeric"), f"{tag} numeric", color=color))
        if "analytic" in res.spec.solvers:
            series.append(Series(x, res.values("g2_analytic"), f"{tag} analytic",
                                 dashed=True, color=color))
    xlabel = results[0].spec.axis1.name if results else ""
    return line_plot(series, xlabel, "g2(0)", title=name, logy=True)


def write_outputs(results: list[SweepResult], out_dir, name: str,
                  formats=FORMATS) -> list[Path]:
    """Write ``<name>.csv``, ``<name>.json`` and/or ``<name>.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"unknown output format {fmt!r}; choose from {FORMATS}")
        path = out_dir / f"{name}.{fmt}"
        if fmt == "csv":
            text = csv_text(results)
        elif fmt == "json":
            text = dumps(results_document(results, name))
        else:
            text = figure_svg(results, name)
        path.write_text(text)
        written.append(path)
    return written
