"""Hot split-search kernels with a numba backend and a numpy fallback.

Tree building spends almost all of its time scanning sorted feature columns
for the best cut point.  Two interchangeable backends implement that scan:

* ``numba`` — sequential loops compiled with ``@njit`` (default when numba
  imports successfully);
* ``numpy`` — vectorized prefix-sum formulation.

Set ``CTIVALIDATOR_NUMBA=0`` (or ``false``/``off``/``no``) to force the
numpy path.  The two backends are written to agree bit-for-bit: class
counts accumulate in int64 (exact, order-independent), every per-split
score is produced by the same short float64 expression, and both sides
resolve score ties to the earliest split position.

Kernels take columns already sorted ascending.  They return
``(best_score, best_pos)`` where the cut separates ``[0..pos]`` from
``[pos+1..]``; ``pos == -1`` means no valid split exists.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "CTIVALIDATOR_NUMBA"
_DISABLED_VALUES = ("0", "false", "off", "no")


def _numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "1").strip().lower() not in _DISABLED_VALUES


# --- sequential formulation (compiled by numba when available) -------------


def _split_class_seq(values, codes, n_classes, min_leaf):
    n = values.shape[0]
    left = np.zeros(n_classes, dtype=np.int64)
    right = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        right[codes[i]] += 1
    best_score = -1.0
    best_pos = -1
    for i in range(n - 1):
        c = codes[i]
        left[c] += 1
        right[c] -= 1
        if values[i] == values[i + 1]:
            continue
        nl = i + 1
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        sl = np.int64(0)
        sr = np.int64(0)
        for k in range(n_classes):
            sl += left[k] * left[k]
            sr += right[k] * right[k]
        score = sl / nl + sr / nr
        if score > best_score:
            best_score = score
            best_pos = i
    return best_score, best_pos


def _split_reg_seq(values, grad, hess, lam, min_leaf):
    n = values.shape[0]
    g_total = 0.0
    h_total = 0.0
    for i in range(n):
        g_total += grad[i]
        h_total += hess[i]
    best_score = -np.inf
    best_pos = -1
    gl = 0.0
    hl = 0.0
    for i in range(n - 1):
        gl += grad[i]
        hl += hess[i]
        if values[i] == values[i + 1]:
            continue
        nl = i + 1
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        gr = g_total - gl
        hr = h_total - hl
        score = gl * gl / (hl + lam) + gr * gr / (hr + lam)
        if score > best_score:
            best_score = score
            best_pos = i
    return best_score, best_pos


# --- vectorized numpy formulation ------------------------------------------


def _split_class_vec(values, codes, n_classes, min_leaf):
    n = values.shape[0]
    if n < 2:
        return -1.0, -1
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), codes] = 1
    prefix = np.cumsum(onehot, axis=0)
    total = prefix[-1]
    left = prefix[:-1]
    right = total[None, :] - left
    nl = np.arange(1, n, dtype=np.int64)
    nr = np.int64(n) - nl
    sl = np.einsum("ij,ij->i", left, left)  # int64: exact regardless of order
    sr = np.einsum("ij,ij->i", right, right)
    score = sl / nl + sr / nr
    valid = (values[1:] != values[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return -1.0, -1
    score = np.where(valid, score, -np.inf)
    pos = int(np.argmax(score))  # first maximum, matching the strict > loop
    return float(score[pos]), pos


def _split_reg_vec(values, grad, hess, lam, min_leaf):
    n = values.shape[0]
    if n < 2:
        return -np.inf, -1
    # np.cumsum accumulates left-to-right, the same op order as the loop.
    cg = np.cumsum(grad)
    ch = np.cumsum(hess)
    g_total = cg[-1]
    h_total = ch[-1]
    gl = cg[:-1]
    hl = ch[:-1]
    gr = g_total - gl
    hr = h_total - hl
    nl = np.arange(1, n, dtype=np.int64)
    nr = np.int64(n) - nl
    score = gl * gl / (hl + lam) + gr * gr / (hr + lam)
    valid = (values[1:] != values[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return -np.inf, -1
    score = np.where(valid, score, -np.inf)
    pos = int(np.argmax(score))
    return float(score[pos]), pos


# --- backend selection ------------------------------------------------------

HAS_NUMBA = False
_numba_class = None
_numba_reg = None
try:  # pragma: no cover - exercised only where numba is installed
    if _numba_requested():
        from numba import njit

        _numba_class = njit(cache=True, nogil=True)(_split_class_seq)
        _numba_reg = njit(cache=True, nogil=True)(_split_reg_seq)
        HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

if HAS_NUMBA:
    BACKEND = "numba"
    best_split_classification = _numba_class
    best_split_regression = _numba_reg
else:
    BACKEND = "numpy"
    best_split_classification = _split_class_vec
    best_split_regression = _split_reg_vec


def implementations() -> dict[str, dict]:
    """All importable backend implementations, for tests and benchmarks."""
    out = {
        "numpy": {
            "classification": _split_class_vec,
            "regression": _split_reg_vec,
        },
        "python": {
            "classification": _split_class_seq,
            "regression": _split_reg_seq,
        },
    }
    if HAS_NUMBA:
        out["numba"] = {
            "classification": _numba_class,
            "regression": _numba_reg,
        }
    return out
