"""Shapley-value attributions over the points of a sorted distribution.

Each point of a model input is a feature. A coalition keeps some points from
the explained sample and replaces the others ("masked") with the background
sample's value at the same sorted index; the combined vector is re-sorted
before the forward pass so inputs stay in-distribution. The coalition value
v(S) is the predicted probability of the target class averaged over the
background set.

Two estimators:

* :func:`shapley_attribute` — kernel-weighted linear regression over randomly
  sampled coalitions (sizes drawn proportional to the Shapley kernel,
  complements paired), with the efficiency constraint eliminated exactly.
* :func:`exact_shapley` — full enumeration of all 2^M coalitions (M <= 12),
  the oracle the sampled estimator is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classes import BiasClass, class_index
from .errors import ShapeMismatchError, ValidationError
from .nn.network import Network, forward_batch, preprocess

__all__ = [
    "Attribution",
    "BackgroundSet",
    "COALITIONS_PER_FEATURE",
    "DEFAULT_BACKGROUND_SIZE",
    "EXACT_MAX_FEATURES",
    "attribution_table",
    "exact_shapley",
    "save_attribution_table",
    "shapley_attribute",
]

EXACT_MAX_FEATURES = 12
DEFAULT_BACKGROUND_SIZE = 100
COALITIONS_PER_FEATURE = 128
MIN_BACKGROUND = 10

_FORWARD_ROWS_PER_CHUNK = 16_384


@dataclass(frozen=True)
class BackgroundSet:
    """B sorted reference vectors the masked points are drawn from."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ValidationError(
                f"background must be a B x sample_size matrix, got shape {samples.shape}"
            )
        if samples.shape[0] < MIN_BACKGROUND:
            raise ValidationError(
                f"background needs at least {MIN_BACKGROUND} samples, got {samples.shape[0]}"
            )
        if np.any(np.diff(samples, axis=1) < 0):
            raise ValidationError("background samples must be sorted ascending")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    @property
    def sample_size(self) -> int:
        return int(self.samples.shape[1])

    @classmethod
    def from_dataset(cls, dataset, count: int = DEFAULT_BACKGROUND_SIZE,
                     master_seed: int = 0) -> "BackgroundSet":
        """Draw ``count`` uniform-class rows (sorted) from a dataset."""
        from .seeding import rng_for

        uniform_rows = np.asarray(dataset.values)[
            np.array([label is BiasClass.UNIFORM or label == BiasClass.UNIFORM
                      for label in dataset.labels], dtype=bool)
        ]
        if uniform_rows.shape[0] < MIN_BACKGROUND:
            raise ValidationError(
                f"dataset has only {uniform_rows.shape[0]} uniform-class rows; "
                f"need at least {MIN_BACKGROUND} for a background set"
            )
        count = min(count, uniform_rows.shape[0])
        chosen = rng_for(master_seed, "background").permutation(uniform_rows.shape[0])[:count]
        return cls(samples=np.sort(uniform_rows[np.sort(chosen)], axis=1))


@dataclass(frozen=True)
class Attribution:
    """Per-point Shapley values for one prediction."""

    target_class: BiasClass
    phi: np.ndarray
    base_value: float
    prediction_value: float
    method: str

    def __post_init__(self):
        object.__setattr__(self, "target_class", BiasClass(self.target_class))
        phi = np.asarray(self.phi, dtype=np.float64).copy()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def efficiency_gap(self) -> float:
        return float(abs(self.phi.sum() - (self.prediction_value - self.base_value)))


def _prepare(network: Network, sample, background: BackgroundSet,
             target_class) -> tuple[np.ndarray, int, int]:
    sample = preprocess(sample, network.config.sample_size)
    if background.sample_size != sample.shape[0]:
        raise ShapeMismatchError(
            f"background sample_size {background.sample_size} does not match "
            f"the explained sample length {sample.shape[0]}"
        )
    return sample, sample.shape[0], class_index(BiasClass(target_class))


def _coalition_values(network: Network, sample: np.ndarray,
                      background: BackgroundSet, coalitions: np.ndarray,
                      target_column: int) -> np.ndarray:
    """v(S) for each coalition row: mean target probability over backgrounds.

    Masked (False) positions take the background value at the same sorted
    index; each combined vector is re-sorted before the forward pass.
    """
    n_background = background.size
    chunk_size = max(1, _FORWARD_ROWS_PER_CHUNK // n_background)
    values = np.empty(coalitions.shape[0])
    for start in range(0, coalitions.shape[0], chunk_size):
        block = coalitions[start:start + chunk_size]
        masked = np.where(block[:, None, :], sample[None, None, :],
                          background.samples[None, :, :])
        masked = np.sort(masked, axis=-1)
        flat = masked.reshape(-1, sample.shape[0])
        probabilities = forward_batch(network, flat)[:, target_column]
        values[start:start + chunk_size] = (
            probabilities.reshape(block.shape[0], n_background).mean(axis=1)
        )
    return values


def _sample_coalitions(rng: np.random.Generator, n_features: int,
                       n_coalitions: int) -> np.ndarray:
    """Coalitions with sizes ~ the Shapley kernel, complements paired.

    Draw order: one block of pair sizes, then per pair one subset draw; an
    odd trailing coalition gets its own size + subset draw.
    """
    sizes = np.arange(1, n_features)
    size_weights = (n_features - 1) / (sizes * (n_features - sizes))
    size_p = size_weights / size_weights.sum()

    n_pairs, extra = divmod(n_coalitions, 2)
    coalitions = np.zeros((n_coalitions, n_features), dtype=bool)
    pair_sizes = rng.choice(sizes, size=n_pairs, p=size_p)
    for pair, size in enumerate(pair_sizes):
        members = rng.choice(n_features, size=int(size), replace=False)
        coalitions[2 * pair, members] = True
        coalitions[2 * pair + 1] = ~coalitions[2 * pair]
    if extra:
        size = int(rng.choice(sizes, p=size_p))
        members = rng.choice(n_features, size=size, replace=False)
        coalitions[-1, members] = True
    return coalitions


def shapley_attribute(network: Network, sample, background: BackgroundSet,
                      target_class, n_coalitions: int | None = None,
                      seed: int = 0) -> Attribution:
    """Kernel-regression Shapley estimate; deterministic given ``seed``.

    The efficiency constraint (sum of phi equals prediction minus base) is
    substituted into the regression, so it holds exactly by construction.
    """
    sample, n_features, target_column = _prepare(network, sample, background, target_class)
    if n_features < 2:
        raise ValidationError("attribution needs at least 2 points")
    if n_coalitions is None:
        n_coalitions = COALITIONS_PER_FEATURE * n_features
    if n_coalitions < 2 * n_features:
        raise ValidationError(
            f"n_coalitions must be at least 2 x sample_size = {2 * n_features}"
        )

    base_value = float(
        forward_batch(network, background.samples)[:, target_column].mean()
    )
    prediction_value = float(forward_batch(network, sample[None])[0, target_column])

    rng = np.random.default_rng(int(seed))
    coalitions = _sample_coalitions(rng, n_features, int(n_coalitions))
    values = _coalition_values(network, sample, background, coalitions, target_column)

    gap = prediction_value - base_value
    last = coalitions[:, -1].astype(np.float64)
    design = coalitions[:, :-1].astype(np.float64) - last[:, None]
    response = values - base_value - last * gap
    head, *_ = np.linalg.lstsq(design, response, rcond=None)
    phi = np.append(head, gap - head.sum())
    return Attribution(target_class=BiasClass(target_class), phi=phi,
                       base_value=base_value, prediction_value=prediction_value,
                       method="kernel")


def exact_shapley(network: Network, sample, background: BackgroundSet,
                  target_class) -> Attribution:
    """Exact Shapley values by enumerating all 2^M coalitions (M <= 12)."""
    sample, n_features, target_column = _prepare(network, sample, background, target_class)
    if n_features > EXACT_MAX_FEATURES:
        raise ValidationError(
            f"exact enumeration is limited to {EXACT_MAX_FEATURES} points, "
            f"got {n_features}"
        )
    masks = np.arange(1 << n_features, dtype=np.uint32)
    coalitions = ((masks[:, None] >> np.arange(n_features, dtype=np.uint32)) & 1).astype(bool)
    values = _coalition_values(network, sample, background, coalitions, target_column)

    # w(s) = s! (M-1-s)! / M! — the Shapley average over join orders
    factorial = [math.factorial(k) for k in range(n_features + 1)]
    weights = np.array(
        [factorial[s] * factorial[n_features - 1 - s] / factorial[n_features]
         for s in range(n_features)]
    )
    counts = np.bitwise_count(masks)

    phi = np.empty(n_features)
    for i in range(n_features):
        without = masks[(masks >> np.uint32(i)) & 1 == 0]
        gains = values[without | np.uint32(1 << i)] - values[without]
        phi[i] = float(np.sum(weights[counts[without]] * gains))
    return Attribution(target_class=BiasClass(target_class), phi=phi,
                       base_value=float(values[0]),
                       prediction_value=float(values[-1]),
                       method="exact")


def attribution_table(sample, attribution: Attribution) -> str:
    """Delimited text table: index, value, phi (full-precision reals)."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != attribution.phi.shape:
        raise ShapeMismatchError(
            f"sample length {sample.shape} does not match phi {attribution.phi.shape}"
        )
    lines = ["index,value,phi"]
    for i, (value, phi) in enumerate(zip(sample, attribution.phi)):
        lines.append(f"{i},{float(value)!r},{float(phi)!r}")
    return "\n".join(lines) + "\n"


def save_attribution_table(sample, attribution: Attribution, path) -> None:
    Path(path).write_text(attribution_table(sample, attribution))
