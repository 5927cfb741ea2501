"""Module for reading periodic coefficients from JSON files"""
import json
import logging
import numbers
from os import PathLike
from typing import Any, NoReturn

from octant_spectra.jacobi_core import CoefficientValidationError, PeriodicCoefficients

logger = logging.getLogger(__name__)


def load_coefficients(
    path: str | bytes | PathLike[str] | PathLike[bytes] | int,
) -> PeriodicCoefficients:
    """
    Load one coefficient set from `path`.

    The file holds {"p", "a", "b", "shift"}, or a report with such an object
    under "coefficients". Without "shift" the raw values are normalized.

    :param path: JSON file path
    :return: coefficients
    """
    coefficients = load_coefficient_list(path)
    if len(coefficients) != 1:
        message = f"Expected one coefficient set in {path!r}, found {len(coefficients)}"
        logger.info(message)
        raise CoefficientValidationError(message)
    return coefficients[0]


def load_coefficient_list(
    path: str | bytes | PathLike[str] | PathLike[bytes] | int,
) -> list[PeriodicCoefficients]:
    """
    Load one or more coefficient sets from `path`.

    :param path: JSON file holding an object or a list of objects
    :return: coefficients in file order
    """
    with open(path, "r", encoding="utf-8") as file:
        try:
            document = json.load(file)
        except json.JSONDecodeError as error:
            message = f"{path!r} is not valid JSON: {error}"
            logger.info(message)
            raise CoefficientValidationError(message) from error

    if isinstance(document, dict) and "coefficients" in document:
        document = document["coefficients"]
    entries = document if isinstance(document, list) else [document]
    return [_parse_coefficients(entry, f"entry {i}") for i, entry in enumerate(entries)]


def _parse_coefficients(entry: Any, label: str) -> PeriodicCoefficients:
    """
    Validate one JSON object field by field.

    :param entry: decoded JSON value
    :param label: position of the entry, for messages
    :return: coefficients
    """
    logger.debug(f"_parse_coefficients {label}: {entry!r}")
    if not isinstance(entry, dict):
        _fail(f"{label}: expected an object, got {type(entry).__name__}")

    p = entry.get("p")
    if not isinstance(p, int) or isinstance(p, bool) or p < 1:
        _fail(f'{label}: field "p" must be a positive integer, got {p!r}')
    a = _number_list(entry, "a", p, label)
    b = _number_list(entry, "b", p, label)

    if "shift" not in entry:
        return PeriodicCoefficients.from_sequences(a, b)
    shift = entry["shift"]
    if not isinstance(shift, numbers.Real) or isinstance(shift, bool):
        _fail(f'{label}: field "shift" must be a number, got {shift!r}')
    return PeriodicCoefficients(p=p, a=tuple(a), b=tuple(b), shift=float(shift))


def _number_list(entry: dict, name: str, p: int, label: str) -> list[float]:
    values = entry.get(name)
    if not isinstance(values, list) or len(values) != p:
        _fail(f'{label}: field "{name}" must be a list of {p} numbers, got {values!r}')
    if not all(isinstance(v, numbers.Real) and not isinstance(v, bool) for v in values):
        _fail(f'{label}: field "{name}" holds a non-numeric value: {values!r}')
    return [float(v) for v in values]


def _fail(message: str) -> NoReturn:
    logger.info(message)
    raise CoefficientValidationError(message)
