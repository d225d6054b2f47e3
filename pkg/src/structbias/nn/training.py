"""Hand-rolled training: categorical cross-entropy, backprop, Adam, and the
finite-difference gradient check that validates the backprop implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..classes import N_CLASSES
from ..errors import DivergenceError, ValidationError
from ..seeding import rng_for
from . import kernels
from .network import PARAM_ORDER, Network, NetworkConfig, _forward_params, initialize_network

__all__ = ["TrainConfig", "train", "gradient_check", "history_to_table"]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyper-parameters."""

    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("TrainConfig.epochs must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("TrainConfig.batch_size must be >= 1")
        if not (self.learning_rate > 0):
            raise ValidationError("TrainConfig.learning_rate must be > 0")
        if not (0.0 < self.validation_fraction < 1.0):
            raise ValidationError("TrainConfig.validation_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "validation_fraction": self.validation_fraction,
        }


def _as_xy(dataset) -> tuple[np.ndarray, np.ndarray]:
    """Accept a datasets.Dataset or a plain (values, labels) pair."""
    if hasattr(dataset, "values") and hasattr(dataset, "labels"):
        x, y = dataset.values, dataset.labels
    else:
        x, y = dataset
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if y.dtype.kind not in "iu":
        from ..classes import class_index

        y = np.array([class_index(v) for v in y], dtype=np.int64)
    else:
        y = y.astype(np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError(f"dataset arrays have inconsistent shapes {x.shape} / {y.shape}")
    if x.shape[0] == 0:
        raise ValidationError("dataset is empty")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValidationError("labels must be class indices in [0, 5)")
    return x, y


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_and_grads(cfg: NetworkConfig, params: dict, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy loss, accuracy, and gradients for one batch."""
    batch_size = x.shape[0]
    probs, cache = _forward_params(cfg, params, x, return_cache=True)
    log_probs = _log_softmax(cache["logits"])
    loss = -log_probs[np.arange(batch_size), y].mean()
    accuracy = float((probs.argmax(axis=1) == y).mean())

    one_hot = np.zeros_like(probs)
    one_hot[np.arange(batch_size), y] = 1.0
    dlogits = (probs - one_hot) / batch_size

    grads = {}
    grads["head_w"] = dlogits.T @ cache["ad"]
    grads["head_b"] = dlogits.sum(axis=0)
    dad = dlogits @ params["head_w"]
    dzd = dad * (cache["zd"] > 0.0)
    grads["dense_w"] = dzd.T @ cache["flat"]
    grads["dense_b"] = dzd.sum(axis=0)
    dflat = dzd @ params["dense_w"]

    dp2 = np.ascontiguousarray(dflat.reshape(cache["p2"].shape))
    da4 = kernels.maxpool_backward(dp2, cache["arg2"], cache["a4"].shape[2])
    dz4 = np.ascontiguousarray(da4 * (cache["z4"] > 0.0))
    da3, grads["conv4_w"], grads["conv4_b"] = kernels.conv1d_backward(
        cache["a3"], params["conv4_w"], dz4
    )
    dz3 = np.ascontiguousarray(da3 * (cache["z3"] > 0.0))
    dp1, grads["conv3_w"], grads["conv3_b"] = kernels.conv1d_backward(
        cache["p1"], params["conv3_w"], dz3
    )
    da2 = kernels.maxpool_backward(np.ascontiguousarray(dp1), cache["arg1"], cache["a2"].shape[2])
    dz2 = np.ascontiguousarray(da2 * (cache["z2"] > 0.0))
    da1, grads["conv2_w"], grads["conv2_b"] = kernels.conv1d_backward(
        cache["a1"], params["conv2_w"], dz2
    )
    dz1 = np.ascontiguousarray(da1 * (cache["z1"] > 0.0))
    _, grads["conv1_w"], grads["conv1_b"] = kernels.conv1d_backward(
        cache["x0"], params["conv1_w"], dz1
    )
    return loss, accuracy, grads


def _evaluate_loss(cfg: NetworkConfig, params: dict, x: np.ndarray, y: np.ndarray,
                   batch_size: int = 256) -> tuple[float, float]:
    """Mean loss and accuracy over a dataset, in inference batches."""
    total_loss = 0.0
    total_correct = 0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        probs, cache = _forward_params(cfg, params, xb, return_cache=True)
        log_probs = _log_softmax(cache["logits"])
        total_loss += float(-log_probs[np.arange(xb.shape[0]), yb].sum())
        total_correct += int((probs.argmax(axis=1) == yb).sum())
    return total_loss / x.shape[0], total_correct / x.shape[0]


def train(train_set, validation_set, network_config: NetworkConfig,
          train_config: TrainConfig) -> tuple[Network, list[dict]]:
    """Mini-batch Adam training; deterministic given the seed.

    Returns the trained (immutable) Network and the per-epoch history
    (epoch, train_loss, train_acc, val_loss, val_acc).
    """
    x_train, y_train = _as_xy(train_set)
    if x_train.shape[1] != network_config.sample_size:
        raise ValidationError(
            f"training samples have length {x_train.shape[1]} but the network expects "
            f"{network_config.sample_size}"
        )
    x_train = np.sort(x_train, axis=1)  # model inputs are sorted ascending

    if validation_set is not None:
        x_val, y_val = _as_xy(validation_set)
        x_val = np.sort(x_val, axis=1)
    else:
        # carve a small randomly selected validation set out of the train set
        rng_split = rng_for(train_config.seed, "valsplit")
        perm = rng_split.permutation(x_train.shape[0])
        n_val = max(1, int(round(train_config.validation_fraction * x_train.shape[0])))
        if n_val >= x_train.shape[0]:
            raise ValidationError("validation split would consume the whole training set")
        val_idx, train_idx = perm[:n_val], perm[n_val:]
        x_val, y_val = x_train[val_idx], y_train[val_idx]
        x_train, y_train = x_train[train_idx], y_train[train_idx]

    init = initialize_network(network_config, rng_for(train_config.seed, "init"))
    params = {name: init.params[name].copy() for name in PARAM_ORDER}

    adam_m = {name: np.zeros_like(params[name]) for name in PARAM_ORDER}
    adam_v = {name: np.zeros_like(params[name]) for name in PARAM_ORDER}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    history: list[dict] = []
    n_samples = x_train.shape[0]
    for epoch in range(1, train_config.epochs + 1):
        order = rng_for(train_config.seed, "shuffle", epoch).permutation(n_samples)
        epoch_loss = 0.0
        epoch_correct = 0.0
        for start in range(0, n_samples, train_config.batch_size):
            idx = order[start : start + train_config.batch_size]
            loss, accuracy, grads = _loss_and_grads(
                network_config, params, x_train[idx], y_train[idx]
            )
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"training diverged: non-finite loss {loss!r} at epoch {epoch}, "
                    f"batch starting at {start}"
                )
            epoch_loss += loss * idx.size
            epoch_correct += accuracy * idx.size
            step += 1
            for name in PARAM_ORDER:
                g = grads[name]
                adam_m[name] = beta1 * adam_m[name] + (1.0 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1.0 - beta2) * (g * g)
                m_hat = adam_m[name] / (1.0 - beta1**step)
                v_hat = adam_v[name] / (1.0 - beta2**step)
                params[name] -= train_config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        val_loss, val_acc = _evaluate_loss(network_config, params, x_val, y_val)
        history.append({
            "epoch": epoch,
            "train_loss": float(epoch_loss / n_samples),
            "train_acc": float(epoch_correct / n_samples),
            "val_loss": float(val_loss),
            "val_acc": float(val_acc),
        })

    metadata = {
        "epochs": train_config.epochs,
        "final_train_loss": history[-1]["train_loss"],
        "final_val_loss": history[-1]["val_loss"],
        "master_seed": train_config.seed,
        "train_config": train_config.to_dict(),
    }
    network = Network(config=network_config, params=params, training_metadata=metadata)
    return network, history


def history_to_table(history: list[dict]) -> str:
    """The training history as a delimited text table."""
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    for row in history:
        lines.append(
            f"{row['epoch']},{row['train_loss']!r},{row['train_acc']!r},"
            f"{row['val_loss']!r},{row['val_acc']!r}"
        )
    return "\n".join(lines) + "\n"


def _single_sample_loss(cfg: NetworkConfig, params: dict, x: np.ndarray,
                        label: int) -> tuple[float, bytes]:
    """Loss plus an activation signature (relu masks + pool argmaxes).

    The signature identifies the piecewise-linear region the forward pass ran
    in; a finite-difference step that lands in a different region crossed a
    kink, where the difference quotient is not a valid derivative estimate.
    """
    _, cache = _forward_params(cfg, params, x[None], return_cache=True)
    log_probs = _log_softmax(cache["logits"])
    signature = b"".join(
        [
            (cache["z1"] > 0.0).tobytes(), (cache["z2"] > 0.0).tobytes(),
            (cache["z3"] > 0.0).tobytes(), (cache["z4"] > 0.0).tobytes(),
            (cache["zd"] > 0.0).tobytes(),
            cache["arg1"].tobytes(), cache["arg2"].tobytes(),
        ]
    )
    return float(-log_probs[0, label]), signature


def gradient_check(network: Network, sample, label: int, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every parameter element is checked. Conventions making the comparison a
    valid oracle:

    * relative error is measured against the element magnitude or the
      parameter tensor's gradient scale (whichever is larger), with the 1e-8
      absolute floor, so finite-difference roundoff on near-zero elements is
      not amplified into spurious relative error;
    * elements whose ±h evaluations cross a relu/maxpool kink are skipped —
      the loss is not differentiable across the kink, so the difference
      quotient estimates nothing there;
    * dead parameters (analytic and numeric both below the 1e-8 floor)
      contribute zero error.
    """
    x = np.asarray(sample, dtype=np.float64)
    if x.ndim != 1 or x.size != network.config.sample_size:
        raise ValidationError("gradient_check: sample must be 1-D of the network's sample_size")
    label = int(label)
    params = {name: network.params[name].copy() for name in PARAM_ORDER}
    _, _, grads = _loss_and_grads(network.config, params, x[None], np.array([label]))
    _, base_signature = _single_sample_loss(network.config, params, x, label)

    worst = 0.0
    for name in PARAM_ORDER:
        flat = params[name].reshape(-1)
        analytic = grads[name].reshape(-1)
        tensor_scale = float(np.max(np.abs(analytic))) if analytic.size else 0.0
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            loss_plus, sig_plus = _single_sample_loss(network.config, params, x, label)
            flat[i] = original - h
            loss_minus, sig_minus = _single_sample_loss(network.config, params, x, label)
            flat[i] = original
            if sig_plus != base_signature or sig_minus != base_signature:
                continue  # crossed an activation kink: no valid FD estimate
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            magnitude = max(abs(analytic[i]), abs(numeric))
            if magnitude <= 1e-8:
                continue  # dead parameter: both gradients at the floor
            denom = max(magnitude, 1e-3 * tensor_scale, 1e-8)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
