"""Tanh contrast recalibration of document-topic proportions.

Each row is transformed as tanh(w_t - w_min) / sum_t' tanh(w_t' - w_min):
the minimum topic is sent exactly to zero, relative order (and hence the
argmax) is preserved, and the row stays on the simplex. Rows where the
transform is undefined (all weights equal, or K = 1) fall back to uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotASimplex

_DENOM_FLOOR = 1e-12
_SIMPLEX_TOL = 1e-6


@dataclass
class CalibratedTheta:
    matrix: np.ndarray
    fallback_rows: set[int] = field(default_factory=set)


def _check_simplex(w: np.ndarray, row: int | None = None) -> None:
    where = "" if row is None else f" (row {row})"
    if np.any(w < 0):
        raise NotASimplex(f"negative entry{where}")
    if abs(float(w.sum()) - 1.0) > _SIMPLEX_TOL:
        raise NotASimplex(f"row sum {w.sum():.8f} deviates from 1{where}")


def calibrate_row(w: np.ndarray) -> tuple[np.ndarray, bool]:
    """Recalibrate one simplex row; returns (row, fallback_fired)."""
    w = np.asarray(w, dtype=np.float64)
    _check_simplex(w)
    shifted = np.tanh(w - w.min())
    denom = shifted.sum()
    if denom < _DENOM_FLOOR:
        return np.full_like(w, 1.0 / len(w)), True
    return shifted / denom, False


def calibrate(theta: np.ndarray) -> CalibratedTheta:
    """Row-wise recalibration, topic order preserved."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty_like(theta)
    fallback: set[int] = set()
    for i in range(theta.shape[0]):
        try:
            out[i], fired = calibrate_row(theta[i])
        except NotASimplex as exc:
            raise NotASimplex(f"row {i}: {exc}") from exc
        if fired:
            fallback.add(i)
    return CalibratedTheta(matrix=out, fallback_rows=fallback)
