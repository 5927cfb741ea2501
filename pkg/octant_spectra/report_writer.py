"""Module for writing results as JSON documents, plain-text tables and CSV"""
import csv
import dataclasses
import json
import logging
import math
import sys
from enum import Enum
from os import PathLike
from typing import Any, Optional, Sequence, TextIO

import numpy as np

from octant_spectra import CSV_DELIMITER
from octant_spectra.jacobi_core import PeriodicCoefficients

logger = logging.getLogger(__name__)

Path = str | bytes | PathLike[str] | PathLike[bytes] | int


def to_jsonable(value: Any) -> Any:
    """
    Convert results into plain JSON values.

    Dataclasses become objects, enums their values, numpy scalars and arrays
    floats and lists, complex numbers {"real", "imag"} and non-finite floats
    null.

    :param value: any result object
    :return: JSON-compatible value
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: to_jsonable(getattr(value, f.name))
            for f in dataclasses.fields(value)
            if f.repr
        }
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"real": to_jsonable(value.real), "imag": to_jsonable(value.imag)}
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def coefficients_document(coeffs: PeriodicCoefficients) -> dict:
    return {"p": coeffs.p, "a": list(coeffs.a), "b": list(coeffs.b), "shift": coeffs.shift}


def save_coefficients(path: Path, coeffs: PeriodicCoefficients | Sequence[PeriodicCoefficients]):
    """
    Save coefficients to `path` in the format read by coefficients_reader.

    :param path: JSON file path
    :param coeffs: one coefficient set or a list of them
    :return: None
    """
    document = (
        coefficients_document(coeffs)
        if isinstance(coeffs, PeriodicCoefficients)
        else [coefficients_document(c) for c in coeffs]
    )
    with open(path, "w", encoding="utf-8") as file:
        json.dump(document, file, indent=2)
        file.write("\n")


def write_report(document: Any, path: Optional[Path] = None):
    """
    Write one JSON document to `path`, or to stdout when no path is given.

    :param document: result object or mapping
    :param path: output file path
    :return: None
    """
    text = json.dumps(to_jsonable(document), indent=2, allow_nan=False)
    if path is None:
        sys.stdout.write(text + "\n")
        return
    with open(path, "w", encoding="utf-8") as file:
        file.write(text + "\n")
    logger.debug(f"Report written to {path!r}")


def _cell(value: Any) -> str:
    value = to_jsonable(value)
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return str(value)


def render_table(rows: Sequence[dict]) -> str:
    """
    Render rows sharing the same keys as an aligned plain-text table.

    :param rows: table rows
    :return: table text, header first
    """
    if not rows:
        return ""
    columns = list(rows[0])
    cells = [columns] + [[_cell(row.get(column)) for column in columns] for row in rows]
    widths = [max(len(line[i]) for line in cells) for i in range(len(columns))]
    lines = ["  ".join(text.rjust(width) for text, width in zip(line, widths)) for line in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def write_csv(rows: Sequence[dict], file: Optional[TextIO] = None):
    """
    Write rows as CSV with a header line.

    :param rows: rows sharing the same keys
    :param file: text stream, stdout by default
    :return: None
    """
    if not rows:
        return
    writer = csv.DictWriter(file or sys.stdout, fieldnames=list(rows[0]), delimiter=CSV_DELIMITER)
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(value) for key, value in row.items()})
