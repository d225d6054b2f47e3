"""The Deep-BIAS 1D-CNN: configuration, forward pass, and matrix prediction.

Architecture (fixed topology, configurable widths): two blocks of
[conv → relu → conv → relu → maxpool], then flatten → dense+relu → affine
head → softmax over the five bias classes. Inputs are sorted ascending;
per-dimension class probabilities are averaged into an aggregated vector and
a subject is biased when at least 10% of dimensions get a non-Uniform argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..classes import CLASS_ORDER, N_CLASSES, BiasClass
from ..errors import ShapeMismatchError, ValidationError
from . import kernels

__all__ = [
    "NetworkConfig",
    "Network",
    "Prediction",
    "DeepBiasReport",
    "PARAM_ORDER",
    "preprocess",
    "conv1d",
    "maxpool",
    "forward",
    "forward_batch",
    "predict_matrix",
]

#: serialization and iteration order of the parameter tensors
PARAM_ORDER = (
    "conv1_w", "conv1_b",
    "conv2_w", "conv2_b",
    "conv3_w", "conv3_b",
    "conv4_w", "conv4_b",
    "dense_w", "dense_b",
    "head_w", "head_b",
)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyper-parameters.

    ``sample_size`` is normally one of the model-bound sizes {30, 50, 100,
    600}; smaller values are allowed (used e.g. by gradient checking) as long
    as the feature length after both pooling layers stays ≥ 1.
    """

    sample_size: int
    block1_filters: int = 32
    block2_filters: Optional[int] = None
    kernel_size: int = 5
    pool_window: int = 2
    dense_units: int = 64

    def __post_init__(self):
        if self.block2_filters is None:
            object.__setattr__(self, "block2_filters", _ceil_div(self.block1_filters, 2))
        for name in ("sample_size", "block1_filters", "block2_filters",
                     "kernel_size", "pool_window", "dense_units"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValidationError(f"NetworkConfig.{name} must be a positive integer, got {value!r}")
        if self.kernel_size > self.sample_size:
            raise ValidationError(
                f"kernel_size {self.kernel_size} exceeds sample_size {self.sample_size}"
            )
        if self.feature_length() < 1:
            raise ValidationError("feature length after both pool layers must be >= 1")

    @property
    def n_classes(self) -> int:
        return N_CLASSES

    def pooled_lengths(self) -> tuple[int, int]:
        l1 = _ceil_div(self.sample_size, self.pool_window)
        l2 = _ceil_div(l1, self.pool_window)
        return l1, l2

    def feature_length(self) -> int:
        _, l2 = self.pooled_lengths()
        return self.block2_filters * l2

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.kernel_size
        b1, b2 = self.block1_filters, self.block2_filters
        return {
            "conv1_w": (b1, 1, k), "conv1_b": (b1,),
            "conv2_w": (b1, b1, k), "conv2_b": (b1,),
            "conv3_w": (b2, b1, k), "conv3_b": (b2,),
            "conv4_w": (b2, b2, k), "conv4_b": (b2,),
            "dense_w": (self.dense_units, self.feature_length()), "dense_b": (self.dense_units,),
            "head_w": (N_CLASSES, self.dense_units), "head_b": (N_CLASSES,),
        }

    def to_dict(self) -> dict:
        return {
            "sample_size": self.sample_size,
            "block1_filters": self.block1_filters,
            "block2_filters": self.block2_filters,
            "kernel_size": self.kernel_size,
            "pool_window": self.pool_window,
            "dense_units": self.dense_units,
            "n_classes": N_CLASSES,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "NetworkConfig":
        fields = {k: record[k] for k in (
            "sample_size", "block1_filters", "block2_filters",
            "kernel_size", "pool_window", "dense_units",
        )}
        return cls(**fields)


@dataclass(frozen=True)
class Network:
    """An immutable, fully-parameterized network."""

    config: NetworkConfig
    params: dict[str, np.ndarray]
    training_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.config.parameter_shapes()
        if set(self.params) != set(PARAM_ORDER):
            raise ValidationError(
                f"Network parameters must be exactly {PARAM_ORDER}, got {sorted(self.params)}"
            )
        frozen = {}
        for name in PARAM_ORDER:
            # always copy so freezing never mutates a caller-owned array
            arr = np.array(self.params[name], dtype=np.float64, order="C", copy=True)
            if arr.shape != shapes[name]:
                raise ValidationError(
                    f"parameter {name} has shape {arr.shape}, expected {shapes[name]}"
                )
            arr.flags.writeable = False
            frozen[name] = arr
        object.__setattr__(self, "params", frozen)

    @property
    def sample_size(self) -> int:
        return self.config.sample_size


def initialize_network(config: NetworkConfig, rng: np.random.Generator,
                       training_metadata: Optional[dict] = None) -> Network:
    """Fan-in scaled uniform (He-style) initialization; biases start at zero."""
    params = {}
    for name, shape in config.parameter_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = int(np.prod(shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape)
    return Network(config=config, params=params, training_metadata=training_metadata or {})


@dataclass(frozen=True)
class Prediction:
    """Per-dimension classifier output."""

    probabilities: np.ndarray  # length 5, canonical class order
    label: BiasClass

    @classmethod
    def from_probabilities(cls, probs: np.ndarray) -> "Prediction":
        probs = np.asarray(probs, dtype=np.float64)
        probs.flags.writeable = False
        # np.argmax returns the first maximum: lowest class index wins ties
        return cls(probabilities=probs, label=CLASS_ORDER[int(np.argmax(probs))])

    def to_record(self) -> dict:
        return {
            "probabilities": {c.value: float(p) for c, p in zip(CLASS_ORDER, self.probabilities)},
            "label": self.label.value,
        }


@dataclass(frozen=True)
class DeepBiasReport:
    """Deep pipeline verdict for a full position matrix."""

    per_dimension: tuple[Prediction, ...]
    aggregated: np.ndarray
    fraction_non_uniform: float
    biased: bool

    def to_record(self) -> dict:
        return {
            "fraction_non_uniform": self.fraction_non_uniform,
            "biased": self.biased,
            "aggregated": {c.value: float(p) for c, p in zip(CLASS_ORDER, self.aggregated)},
            "per_dimension": [p.to_record() for p in self.per_dimension],
        }


# ---------------------------------------------------------------------------
# operations


def preprocess(values, sample_size: Optional[int] = None) -> np.ndarray:
    """Sort a distribution ascending; validate range and (optionally) length."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"preprocess: expected a 1-D sample, got shape {arr.shape}")
    if sample_size is not None and arr.size != sample_size:
        raise ShapeMismatchError(
            f"sample length {arr.size} does not match the model's sample_size {sample_size}"
        )
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("preprocess: values must lie in [0, 1]")
    return np.sort(arr)


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "linear":
        return z
    raise ValidationError(f"unknown activation {activation!r} (use 'relu' or 'linear')")


def conv1d(input_array, kernel_weights, biases, activation: str = "relu") -> np.ndarray:
    """Same-padded cross-correlation + bias + activation.

    Accepts (C, L) or (B, C, L) input; output length equals input length.
    """
    x = np.ascontiguousarray(input_array, dtype=np.float64)
    w = np.ascontiguousarray(kernel_weights, dtype=np.float64)
    b = np.ascontiguousarray(biases, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or w.ndim != 3 or b.ndim != 1:
        raise ValidationError("conv1d: expected input (B,C,L), kernels (O,C,K), biases (O,)")
    if w.shape[1] != x.shape[1] or w.shape[0] != b.shape[0]:
        raise ValidationError(
            f"conv1d: shape mismatch between input {x.shape}, kernels {w.shape}, biases {b.shape}"
        )
    if w.shape[2] > x.shape[2]:
        raise ValidationError(f"conv1d: kernel length {w.shape[2]} exceeds input length {x.shape[2]}")
    y = _apply_activation(kernels.conv1d_forward(x, w, b), activation)
    return y[0] if squeeze else y


def maxpool(input_array, window: int) -> np.ndarray:
    """Non-overlapping max pooling with the trailing partial window kept.

    Accepts (L,), (C, L) or (B, C, L); pools along the last axis.
    """
    if window < 1:
        raise ValidationError("maxpool: window must be >= 1")
    x = np.ascontiguousarray(input_array, dtype=np.float64)
    original_ndim = x.ndim
    if original_ndim == 1:
        x = x[None, None]
    elif original_ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValidationError(f"maxpool: expected at most 3 dimensions, got {original_ndim}")
    pooled, _ = kernels.maxpool_forward(x, window)
    if original_ndim == 1:
        return pooled[0, 0]
    if original_ndim == 2:
        return pooled[0]
    return pooled


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _forward_params(cfg: NetworkConfig, p: dict, batch: np.ndarray, return_cache: bool = False):
    """Forward pass on raw (config, params); used by training with mutable params."""
    x = np.ascontiguousarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.sample_size:
        raise ShapeMismatchError(
            f"forward: expected batch of shape (B, {cfg.sample_size}), got {x.shape}"
        )
    x0 = np.ascontiguousarray(x[:, None, :])  # (B, 1, L)

    z1 = kernels.conv1d_forward(x0, p["conv1_w"], p["conv1_b"]); a1 = np.maximum(z1, 0.0)
    z2 = kernels.conv1d_forward(a1, p["conv2_w"], p["conv2_b"]); a2 = np.maximum(z2, 0.0)
    p1, arg1 = kernels.maxpool_forward(a2, cfg.pool_window)
    z3 = kernels.conv1d_forward(p1, p["conv3_w"], p["conv3_b"]); a3 = np.maximum(z3, 0.0)
    z4 = kernels.conv1d_forward(a3, p["conv4_w"], p["conv4_b"]); a4 = np.maximum(z4, 0.0)
    p2, arg2 = kernels.maxpool_forward(a4, cfg.pool_window)
    flat = p2.reshape(x.shape[0], -1)
    zd = flat @ p["dense_w"].T + p["dense_b"]; ad = np.maximum(zd, 0.0)
    logits = ad @ p["head_w"].T + p["head_b"]
    probs = _softmax(logits)
    if not return_cache:
        return probs
    cache = {
        "x0": x0, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "p1": p1, "arg1": arg1,
        "z3": z3, "a3": a3, "z4": z4, "a4": a4, "p2": p2, "arg2": arg2,
        "flat": flat, "zd": zd, "ad": ad, "logits": logits, "probs": probs,
    }
    return probs, cache


def forward_batch(network: Network, batch: np.ndarray, return_cache: bool = False):
    """Probabilities (B, 5) for a batch (B, L) of preprocessed inputs.

    With ``return_cache=True`` also returns the intermediate activations the
    backward pass needs.
    """
    return _forward_params(network.config, network.params, batch, return_cache)


def forward(network: Network, preprocessed: np.ndarray) -> Prediction:
    """Prediction for a single preprocessed (sorted) input vector."""
    arr = np.asarray(preprocessed, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError("forward: expected a 1-D preprocessed input")
    if arr.size != network.config.sample_size:
        raise ShapeMismatchError(
            f"input length {arr.size} does not match the model's sample_size "
            f"{network.config.sample_size}"
        )
    probs = forward_batch(network, arr[None])[0]
    return Prediction.from_probabilities(probs)


def predict_matrix(network: Network, matrix) -> DeepBiasReport:
    """Per-dimension predictions + aggregation + 10% rule for an N×d matrix."""
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] < 1:
        raise ValidationError(f"predict_matrix: expected an N×d matrix, got shape {data.shape}")
    n_runs, n_dims = data.shape
    if n_runs != network.config.sample_size:
        raise ShapeMismatchError(
            f"matrix has N={n_runs} runs but the model expects sample_size="
            f"{network.config.sample_size}"
        )
    if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
        raise ValidationError("predict_matrix: values must lie in [0, 1]")

    batch = np.sort(data.T, axis=1)  # one sorted row per dimension
    probs = forward_batch(network, batch)
    predictions = tuple(Prediction.from_probabilities(row) for row in probs)
    aggregated = probs.mean(axis=0)
    aggregated.flags.writeable = False
    n_non_uniform = sum(1 for pred in predictions if pred.label is not BiasClass.UNIFORM)
    # integer arithmetic keeps the "at least 10%" rule exact at the boundary
    biased = 10 * n_non_uniform >= n_dims
    return DeepBiasReport(
        per_dimension=predictions,
        aggregated=aggregated,
        fraction_non_uniform=n_non_uniform / n_dims,
        biased=bool(biased),
    )
