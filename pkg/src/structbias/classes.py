"""The five bias classes and their canonical order.

The order is load-bearing: it fixes class indices for the classifier's output
head, argmax tie-breaking (lowest index wins), dataset labels, and report
fields.
"""

from __future__ import annotations

from enum import Enum

__all__ = ["BiasClass", "CLASS_ORDER", "N_CLASSES", "class_index"]


class BiasClass(str, Enum):
    """Structural-bias class labels."""

    UNIFORM = "Uniform"
    CENTER = "Center"
    BOUNDS = "Bounds"
    GAPS_CLUSTERS = "GapsClusters"
    DISCRETISATION = "Discretisation"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


CLASS_ORDER: tuple[BiasClass, ...] = (
    BiasClass.UNIFORM,
    BiasClass.CENTER,
    BiasClass.BOUNDS,
    BiasClass.GAPS_CLUSTERS,
    BiasClass.DISCRETISATION,
)

N_CLASSES = len(CLASS_ORDER)

_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


def class_index(label: "BiasClass | str") -> int:
    """Index of a class in the canonical order (accepts enum or name string)."""
    if isinstance(label, str) and not isinstance(label, BiasClass):
        label = BiasClass(label)
    return _INDEX[label]
