"""JSON codec for lattice operators.

Document shape::

    {
      "fiber_dim": 2,
      "domain": "full",
      "left_diagonals": {"-1": [[re, im], ...]},   # row-major d*d pairs
      "right_diagonals": {"0": [[re, im], ...]},
      "window": [lo, hi],
      "perturbation": [[re, im], ...]              # row-major, (n*d)^2 pairs
    }
"""

__all__ = [
    "operator_to_dict",
    "operator_from_dict",
    "dumps_operator",
    "loads_operator",
    "dumps_operators",
    "loads_operators",
]

import json
import logging
from collections.abc import Mapping
from typing import Any

import numpy as np
from pydantic import ValidationError

from specflow.exceptions import SerializationError
from specflow.operator_core import LatticeOperator, LaurentSymbol

logger = logging.getLogger(__name__)


def _pairs(arr: np.ndarray) -> list[list[float]]:
    flat = np.asarray(arr, dtype=np.complex128).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def _from_pairs(pairs: Any, shape: tuple[int, int]) -> np.ndarray:
    arr = np.array(pairs, dtype=float)
    expected = shape[0] * shape[1]
    if expected == 0:
        return np.zeros(shape, dtype=np.complex128)
    if arr.shape != (expected, 2):
        raise SerializationError(
            f"expected {expected} complex pairs for shape {shape}, got array of shape {arr.shape}"
        )
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def _symbol_to_dict(sym: LaurentSymbol) -> dict[str, list[list[float]]]:
    return {str(k): _pairs(c) for k, c in sym.diagonals.items()}


def _symbol_from_dict(raw: Any, d: int) -> LaurentSymbol:
    if not isinstance(raw, dict):
        raise SerializationError("diagonals must be an object keyed by offset")
    try:
        diagonals = {int(k): _from_pairs(v, (d, d)) for k, v in raw.items()}
    except ValueError as exc:
        raise SerializationError(f"invalid diagonal offset: {exc}") from exc
    return LaurentSymbol(fiber_dim=d, diagonals=diagonals)


def operator_to_dict(op: LatticeOperator) -> dict[str, Any]:
    return {
        "fiber_dim": op.fiber_dim,
        "domain": op.domain,
        "left_diagonals": _symbol_to_dict(op.left),
        "right_diagonals": _symbol_to_dict(op.right),
        "window": list(op.window),
        "perturbation": _pairs(op.perturbation),
    }


def operator_from_dict(doc: Any) -> LatticeOperator:
    """Decode an operator document.

    Raises:
        SerializationError: If a field is missing or inconsistent.
    """
    if not isinstance(doc, dict):
        raise SerializationError("operator document must be a JSON object", raw=str(doc))
    try:
        d = int(doc["fiber_dim"])
        lo, hi = (int(v) for v in doc["window"])
        n = max(hi - lo + 1, 0)
        return LatticeOperator(
            fiber_dim=d,
            domain=doc.get("domain", "full"),
            left=_symbol_from_dict(doc.get("left_diagonals", {}), d),
            right=_symbol_from_dict(doc.get("right_diagonals", {}), d),
            window=(lo, hi),
            perturbation=_from_pairs(doc.get("perturbation", []), (n * d, n * d)),
        )
    except KeyError as exc:
        raise SerializationError(f"missing field {exc}", raw=json.dumps(doc)) from exc
    except (TypeError, ValueError, ValidationError) as exc:
        raise SerializationError(f"invalid operator document: {exc}", raw=json.dumps(doc)) from exc


def dumps_operator(op: LatticeOperator) -> str:
    return json.dumps(operator_to_dict(op))


def loads_operator(text: str) -> LatticeOperator:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationError(f"malformed JSON: {exc.msg}", raw=text) from exc
    return operator_from_dict(doc)


def dumps_operators(ops: Mapping[str, LatticeOperator]) -> str:
    """Encode named operators as one JSON object, e.g. a contraction and its dilation."""
    return json.dumps({name: operator_to_dict(op) for name, op in ops.items()}, indent=2) + "\n"


def loads_operators(text: str) -> dict[str, LatticeOperator]:
    """Decode a document written by ``dumps_operators``.

    Raises:
        SerializationError: If the text is not an object of operator documents.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationError(f"malformed JSON: {exc.msg}", raw=text) from exc
    if not isinstance(doc, dict):
        raise SerializationError("operator bundle must be a JSON object", raw=text)
    ops = {str(name): operator_from_dict(entry) for name, entry in doc.items()}
    logger.debug("decoded %d operators: %s", len(ops), sorted(ops))
    return ops
