"""Boundary-correction strategies for optimizers on the unit box.

Every strategy maps an arbitrary real vector onto [0, 1]^n. Feasible
coordinates are never touched (bit-exact passthrough), so a correction can
only change coordinates that actually violate a bound. All functions return
a new array and never mutate their input.
"""

from __future__ import annotations

from enum import Enum
from typing import Union

import numpy as np

from .errors import ValidationError

__all__ = [
    "BoundaryCorrection",
    "apply_correction",
    "mirror",
    "resample",
    "saturate",
    "toroidal",
]


class BoundaryCorrection(str, Enum):
    """How infeasible coordinates are mapped back into [0, 1]."""

    SATURATE = "Saturate"
    TOROIDAL = "Toroidal"
    MIRROR = "Mirror"
    RESAMPLE = "Resample"


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


def _result(arr: np.ndarray, scalar: bool) -> Union[float, np.ndarray]:
    return float(arr[0]) if scalar else arr


def _infeasible(arr: np.ndarray) -> np.ndarray:
    return (arr < 0.0) | (arr > 1.0)


def saturate(x) -> Union[float, np.ndarray]:
    """Clamp every coordinate to [0, 1] (infeasible points land on a bound)."""
    arr, scalar = _as_array(x)
    return _result(np.clip(arr, 0.0, 1.0), scalar)


def toroidal(x) -> Union[float, np.ndarray]:
    """Wrap infeasible coordinates modulo 1 (periodic domain)."""
    arr, scalar = _as_array(x)
    out = arr.copy()
    mask = _infeasible(arr)
    out[mask] = np.mod(arr[mask], 1.0)
    return _result(out, scalar)


def mirror(x) -> Union[float, np.ndarray]:
    """Reflect infeasible coordinates about the violated bound until feasible.

    Repeated reflection about 0 and 1 is the triangle wave with period 2:
    fold into [0, 2) and flip the upper half.
    """
    arr, scalar = _as_array(x)
    out = arr.copy()
    mask = _infeasible(arr)
    folded = np.mod(arr[mask], 2.0)
    out[mask] = np.where(folded > 1.0, 2.0 - folded, folded)
    return _result(out, scalar)


def resample(x, stream: np.random.Generator) -> Union[float, np.ndarray]:
    """Redraw infeasible coordinates uniformly from [0, 1).

    Draws are consumed from ``stream`` in coordinate order (row-major for
    multi-dimensional input), one per infeasible coordinate.
    """
    arr, scalar = _as_array(x)
    out = arr.copy()
    mask = _infeasible(arr)
    count = int(mask.sum())
    if count:
        out[mask] = stream.random(count)
    return _result(out, scalar)


def apply_correction(
    x,
    method: BoundaryCorrection,
    stream: np.random.Generator | None = None,
):
    """Apply the selected boundary correction to ``x``.

    ``stream`` is required for :data:`BoundaryCorrection.RESAMPLE` and ignored
    otherwise.
    """
    method = BoundaryCorrection(method)
    if method is BoundaryCorrection.SATURATE:
        return saturate(x)
    if method is BoundaryCorrection.TOROIDAL:
        return toroidal(x)
    if method is BoundaryCorrection.MIRROR:
        return mirror(x)
    if stream is None:
        raise ValidationError("resample correction requires a random stream")
    return resample(x, stream)
