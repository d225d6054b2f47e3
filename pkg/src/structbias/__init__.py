"""structbias — structural-bias detection for continuous heuristic optimizers.

Two detection pipelines over final-best-position matrices collected on the
random test function f0: a statistical uniformity-testing battery
(KS/AD/CvM + Benjamini-Hochberg + the 10%-of-dimensions rule) and a trained
1D-CNN classifier with Shapley-value explanations, plus scenario generators,
reference optimizers with pluggable boundary corrections, and a CLI.
"""

from .classes import CLASS_ORDER, N_CLASSES, BiasClass, class_index
from .errors import (
    DataFormatError,
    DivergenceError,
    MissingResourceError,
    ModelFormatError,
    ShapeMismatchError,
    StructBiasError,
    ValidationError,
    VersionMismatchError,
)
from .seeding import derive_seed, rng_for

__version__ = "1.0.0"

__all__ = [
    "BiasClass",
    "CLASS_ORDER",
    "N_CLASSES",
    "class_index",
    "derive_seed",
    "rng_for",
    "StructBiasError",
    "ValidationError",
    "DataFormatError",
    "ModelFormatError",
    "VersionMismatchError",
    "ShapeMismatchError",
    "MissingResourceError",
    "DivergenceError",
    "__version__",
]
