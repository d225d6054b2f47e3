"""Neural-network subpackage: kernels, network, training, model I/O, metrics.

Kernel backend selection happens here at import time. The compiled Cython
extension is preferred when present; the pure-numpy fallback is always
available. Override with the environment variable
``STRUCTBIAS_KERNEL_BACKEND`` ∈ {``auto``, ``compiled``, ``numpy``}.
"""

from __future__ import annotations

import os

from ..errors import ValidationError
from . import _kernels_numpy

_VALID_BACKENDS = ("auto", "compiled", "numpy")


def _load_compiled():
    try:
        from . import _kernels as compiled
    except ImportError:
        return None
    return compiled


def _select_backend():
    requested = os.environ.get("STRUCTBIAS_KERNEL_BACKEND", "auto")
    if requested not in _VALID_BACKENDS:
        raise ValidationError(
            f"STRUCTBIAS_KERNEL_BACKEND must be one of {_VALID_BACKENDS}, got {requested!r}"
        )
    if requested == "numpy":
        return _kernels_numpy
    compiled = _load_compiled()
    if compiled is not None:
        return compiled
    if requested == "compiled":
        raise ValidationError(
            "STRUCTBIAS_KERNEL_BACKEND=compiled but the extension is not built; "
            "run `pip install -e . --no-build-isolation` to compile it"
        )
    return _kernels_numpy


kernels = _select_backend()
KERNEL_BACKEND: str = kernels.BACKEND_NAME


def available_backends() -> dict:
    """Name → kernel module for every backend importable right now."""
    backends = {"numpy": _kernels_numpy}
    compiled = _load_compiled()
    if compiled is not None:
        backends["compiled"] = compiled
    return backends


from .network import (  # noqa: E402  (needs `kernels` defined above)
    DeepBiasReport,
    Network,
    NetworkConfig,
    Prediction,
    conv1d,
    forward,
    maxpool,
    predict_matrix,
    preprocess,
)
from .training import TrainConfig, gradient_check, train  # noqa: E402
from .model_io import load_model, save_model  # noqa: E402
from .metrics import (  # noqa: E402
    confusion_matrix,
    evaluate,
    macro_f1_from_matrix,
    macro_f1_score,
    per_class_f1,
)

__all__ = [
    "kernels",
    "KERNEL_BACKEND",
    "available_backends",
    "NetworkConfig",
    "Network",
    "Prediction",
    "DeepBiasReport",
    "preprocess",
    "conv1d",
    "maxpool",
    "forward",
    "predict_matrix",
    "TrainConfig",
    "train",
    "gradient_check",
    "save_model",
    "load_model",
    "evaluate",
    "confusion_matrix",
    "macro_f1_from_matrix",
    "macro_f1_score",
    "per_class_f1",
]
