"""The f0 test objective: every evaluation is an independent U(0, 1) value.

Because the objective carries no information about the search point, any
structure in the final positions an optimizer returns must come from the
algorithm itself — which is exactly what the detectors look for.

Two interpretations of "f0(x) ~ U(0, 1)" are provided:

* ``f0_eval`` (default everywhere): a *fresh* draw per evaluation, taken from
  the caller's random stream. Re-evaluating the same point gives a new value.
* :class:`HashDeterministicF0`: a value *fixed per point* (hash of the
  coordinates), so re-evaluation is consistent. This variant exists for
  experimentation and is only used when explicitly requested.

Both reject points outside the unit box — corrections must be applied first.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ValidationError

__all__ = ["HashDeterministicF0", "f0_eval"]


def _check_domain(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ValidationError(f"expected a single point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("point contains non-finite coordinates")
    if np.any((arr < 0.0) | (arr > 1.0)):
        bad = arr[(arr < 0.0) | (arr > 1.0)][0]
        raise ValidationError(
            f"point outside [0,1]^n (coordinate {bad!r}); apply a boundary "
            "correction before evaluating"
        )
    return arr


def f0_eval(x, stream: np.random.Generator) -> float:
    """One objective evaluation: a fresh U(0, 1) draw from ``stream``.

    The value is independent of ``x``; each call consumes exactly one draw.
    Raises :class:`ValidationError` if ``x`` leaves the unit box, which
    signals a missing boundary correction in the caller.
    """
    _check_domain(x)
    return float(stream.random())


class HashDeterministicF0:
    """f0 variant where the value is a pure function of the point.

    The objective value is derived by hashing the coordinate bytes together
    with an instance key, mapped to [0, 1). Evaluating the same point twice
    returns the same value; distinct points get independent-looking values.
    Instances are callable with the same ``(x, stream)`` signature as
    :func:`f0_eval`; the stream is accepted (for interchangeability) but not
    consumed.
    """

    def __init__(self, key: int = 0):
        self._key = str(int(key)).encode("ascii")

    def __call__(self, x, stream: np.random.Generator | None = None) -> float:
        arr = _check_domain(x)
        digest = hashlib.blake2b(
            arr.tobytes(), key=self._key, digest_size=8
        ).digest()
        return int.from_bytes(digest, "little") / 2.0**64
