"""Confusion matrix and macro F1 evaluation for the five-class classifier."""

from __future__ import annotations

import numpy as np

from ..classes import N_CLASSES, class_index
from ..errors import ValidationError
from .network import Network, forward_batch

__all__ = ["confusion_matrix", "per_class_f1", "macro_f1_from_matrix", "macro_f1_score", "evaluate"]


def _as_indices(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind in "iu":
        idx = labels.astype(np.int64)
    else:
        idx = np.array([class_index(v) for v in labels], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= N_CLASSES):
        raise ValidationError("labels must be class indices in [0, 5)")
    return idx


def confusion_matrix(true_labels, predicted_labels) -> np.ndarray:
    """5×5 counts; rows are true classes, columns are predicted classes."""
    true_idx = _as_indices(true_labels)
    pred_idx = _as_indices(predicted_labels)
    if true_idx.shape != pred_idx.shape:
        raise ValidationError("true and predicted label arrays must have equal length")
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(matrix, (true_idx, pred_idx), 1)
    return matrix


def per_class_f1(matrix: np.ndarray) -> np.ndarray:
    """Per-class F1 = 2PR/(P+R), defined as 0 when precision+recall is 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    true_positive = np.diag(matrix)
    predicted = matrix.sum(axis=0)
    actual = matrix.sum(axis=1)
    precision = np.divide(true_positive, predicted, out=np.zeros(N_CLASSES), where=predicted > 0)
    recall = np.divide(true_positive, actual, out=np.zeros(N_CLASSES), where=actual > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros(N_CLASSES), where=denom > 0)


def macro_f1_from_matrix(matrix: np.ndarray) -> float:
    """Unweighted mean of per-class F1 over classes present in the data.

    A class counts as present when it appears among the true labels or the
    predictions; classes absent from both are excluded rather than dragging
    the mean down with vacuous zeros.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    present = (matrix.sum(axis=0) + matrix.sum(axis=1)) > 0
    if not present.any():
        raise ValidationError("macro F1 of an empty confusion matrix is undefined")
    return float(per_class_f1(matrix)[present].mean())


def macro_f1_score(true_labels, predicted_labels) -> float:
    """Macro F1 (unweighted mean of per-class F1 over present classes)."""
    return macro_f1_from_matrix(confusion_matrix(true_labels, predicted_labels))


def evaluate(network: Network, labeled_set, batch_size: int = 512) -> tuple[np.ndarray, float]:
    """Confusion matrix and macro F1 of a network on a labeled sample set.

    ``labeled_set`` is a datasets.Dataset or a (values, labels) pair; inputs
    are sorted (preprocessed) before the forward pass.
    """
    if hasattr(labeled_set, "values") and hasattr(labeled_set, "labels"):
        values, labels = labeled_set.values, labeled_set.labels
    else:
        values, labels = labeled_set
    values = np.asarray(values, dtype=np.float64)
    true_idx = _as_indices(labels)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValidationError("evaluate: expected a non-empty 2-D array of samples")
    sorted_values = np.sort(values, axis=1)
    predictions = np.empty(values.shape[0], dtype=np.int64)
    for start in range(0, values.shape[0], batch_size):
        probs = forward_batch(network, sorted_values[start : start + batch_size])
        predictions[start : start + batch_size] = probs.argmax(axis=1)
    matrix = confusion_matrix(true_idx, predictions)
    return matrix, macro_f1_from_matrix(matrix)
