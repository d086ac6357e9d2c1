"""Flat-file formats: cross-section datasets, curves and fit reports.

CSV files always carry a header row, use ``,`` as separator and ``.`` as
decimal mark, and write floats with 17 significant digits so that identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import tomli_w

from .errors import DataFormatError, ValidationError
from .lineshape import CrossSectionDataset, FitResult, ModelKind

DATASET_COLUMNS = ("x", "sigma", "sigma_err")
CURVE_COLUMNS = ("t", "survival", "exponential", "ratio")


def fmt(value) -> str:
    return format(float(value), ".17g")


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def load_dataset(path) -> CrossSectionDataset:
    """Read an ``x,sigma,sigma_err`` CSV file.

    Blank lines and lines starting with ``#`` are skipped.  Malformed rows
    raise :class:`DataFormatError` with the line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    header = None
    points = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if header is None:
            header = tuple(c.lower() for c in cells)
            if header != DATASET_COLUMNS:
                raise DataFormatError(
                    f"expected header {','.join(DATASET_COLUMNS)}, got {','.join(cells)}",
                    path, lineno,
                )
            continue
        if len(cells) != 3:
            raise DataFormatError(f"expected 3 columns, got {len(cells)}", path, lineno)
        try:
            vals = tuple(float(c) for c in cells)
        except ValueError:
            raise DataFormatError(f"non-numeric value in row {row!r}", path, lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError("non-finite value", path, lineno)
        if vals[2] <= 0.0:
            raise DataFormatError(f"sigma_err must be positive, got {cells[2]}", path, lineno)
        if vals[1] < 0.0:
            raise DataFormatError(f"sigma must be non-negative, got {cells[1]}", path, lineno)
        if points and vals[0] <= points[-1][0]:
            raise DataFormatError("x must be strictly increasing", path, lineno)
        points.append(vals)
    if header is None:
        raise DataFormatError("missing header row", path)
    try:
        return CrossSectionDataset.from_points(points)
    except ValidationError as exc:
        raise DataFormatError(str(exc), path) from None


def save_dataset(data: CrossSectionDataset, path) -> None:
    _write_text(path, _rows_to_csv(DATASET_COLUMNS, data.points))


def save_curve(rows, path, columns=CURVE_COLUMNS) -> None:
    rows = list(rows)
    for i, row in enumerate(rows):
        if len(row) != len(columns):
            raise ValidationError(f"row {i} has {len(row)} values, expected {len(columns)}")
    _write_text(path, _rows_to_csv(columns, rows))


def fit_report(result: FitResult) -> dict:
    """Plain-data summary of a fit, suitable for TOML serialization."""
    m = result.model
    if m.kind is ModelKind.NONREL_BW:
        convention = "nonrel"
    else:
        convention = m.resonance.convention.value
    report = {
        "kind": m.kind.value,
        "convention": convention,
        "M": m.mass,
        "Gamma": m.width,
        "residue_re": m.residue.real,
        "residue_im": m.residue.imag,
        "background": list(m.background),
        "chi2": result.chi2,
        "dof": result.dof,
        "chi2_per_dof": result.chi2_per_dof if result.dof > 0 else -1.0,
        "converged": result.converged,
        "iterations": result.iterations,
        "message": result.message,
        "parameters": list(result.parameter_names),
        "errors": [float(e) for e in result.errors],
        "covariance": [[float(v) for v in row] for row in result.covariance],
    }
    if m.channel_label:
        report["channel_label"] = m.channel_label
    return report


def save_fit_report(result: FitResult, path) -> None:
    _write_text(path, tomli_w.dumps({"fit": fit_report(result)}))
