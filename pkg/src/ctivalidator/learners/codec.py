"""Bit-exact JSON encoding for numpy arrays used in model payloads."""

from __future__ import annotations

import base64

import numpy as np

from ..errors import SpecMismatchError


def array_to_doc(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr)
    return {
        "dtype": str(arr.dtype),
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def doc_to_array(doc: dict) -> np.ndarray:
    try:
        raw = base64.b64decode(doc["data"])
        arr = np.frombuffer(raw, dtype=np.dtype(doc["dtype"]))
        return arr.reshape(doc["shape"]).copy()
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecMismatchError(f"malformed array payload: {exc}") from exc
