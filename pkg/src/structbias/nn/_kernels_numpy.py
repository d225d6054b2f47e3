"""Pure-numpy kernels for the 1D CNN (fallback backend).

Same contracts as the compiled extension ``structbias.nn._kernels``:

* ``conv1d_forward``: cross-correlation with zero same-padding
  (``pad_left = (K-1)//2``) plus per-channel bias; output length equals input
  length.
* ``conv1d_backward``: gradients w.r.t. input, weights and bias.
* ``maxpool_forward``: non-overlapping windows with the trailing partial
  window kept; returns values and flat argmax indices (first maximum wins).
* ``maxpool_backward``: scatters gradients back to the argmax positions.

Hot contractions are expressed as BLAS matmuls over stride-tricks im2col
views, so this backend is fast enough for real training, just slower than the
compiled one.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _im2col(padded: np.ndarray, kernel_size: int, out_len: int) -> np.ndarray:
    """(B, C, Lp) zero-padded input → strided view (B, C, K, out_len)."""
    batch, channels, _ = padded.shape
    stride_b, stride_c, stride_l = padded.strides
    return np.lib.stride_tricks.as_strided(
        padded,
        shape=(batch, channels, kernel_size, out_len),
        strides=(stride_b, stride_c, stride_l, stride_l),
        writeable=False,
    )


def conv1d_forward(x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y[n,o,l] = bias[o] + sum_{c,k} x[n,c,l+k-pad] * w[o,c,k] (zero padded)."""
    batch, channels, length = x.shape
    out_channels, _, kernel_size = w.shape
    pad_left = (kernel_size - 1) // 2
    pad_right = kernel_size - 1 - pad_left
    padded = np.zeros((batch, channels, length + kernel_size - 1), dtype=np.float64)
    padded[:, :, pad_left : pad_left + length] = x
    cols = _im2col(padded, kernel_size, length)
    # contract over (channels, kernel) with BLAS
    y = np.tensordot(w, cols, axes=([1, 2], [1, 2]))  # (O, B, L)
    y = np.ascontiguousarray(y.transpose(1, 0, 2))
    y += bias[None, :, None]
    return y


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_forward: returns (dx, dw, db)."""
    batch, channels, length = x.shape
    out_channels, _, kernel_size = w.shape
    pad_left = (kernel_size - 1) // 2
    pad_right = kernel_size - 1 - pad_left

    padded = np.zeros((batch, channels, length + kernel_size - 1), dtype=np.float64)
    padded[:, :, pad_left : pad_left + length] = x
    cols = _im2col(padded, kernel_size, length)

    # dw[o,c,k] = sum_{n,l} dy[n,o,l] * x_padded[n,c,l+k]
    dw = np.tensordot(dy, cols, axes=([0, 2], [0, 3]))  # (O, C, K)
    db = dy.sum(axis=(0, 2))

    # dx[n,c,i] = sum_{o,k} dy[n,o,i-k+pad_left] * w[o,c,k]
    #           = cross-correlation of dy with the flipped kernel, pad' = K-1-pad_left
    dy_padded = np.zeros((batch, out_channels, length + kernel_size - 1), dtype=np.float64)
    dy_padded[:, :, pad_right : pad_right + length] = dy
    dy_cols = _im2col(dy_padded, kernel_size, length)
    w_flipped = w[:, :, ::-1]
    dx = np.tensordot(w_flipped, dy_cols, axes=([0, 2], [1, 2]))  # (C, B, L)
    dx = np.ascontiguousarray(dx.transpose(1, 0, 2))
    return dx, dw, db


def maxpool_forward(x: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping max pooling; trailing partial window kept.

    Returns (values (B,C,P), argmax (B,C,P) int64 flat indices into L).
    """
    batch, channels, length = x.shape
    out_len = -(-length // window)  # ceil
    padded_len = out_len * window
    padded = np.full((batch, channels, padded_len), -np.inf, dtype=np.float64)
    padded[:, :, :length] = x
    windows = padded.reshape(batch, channels, out_len, window)
    local_arg = windows.argmax(axis=3)
    arg = local_arg + np.arange(out_len)[None, None, :] * window
    values = np.take_along_axis(windows, local_arg[..., None], axis=3)[..., 0]
    return np.ascontiguousarray(values), arg.astype(np.int64)


def maxpool_backward(dy: np.ndarray, argmax: np.ndarray, length: int) -> np.ndarray:
    """Scatter pooled gradients back to their argmax positions."""
    batch, channels, out_len = dy.shape
    dx = np.zeros((batch, channels, length), dtype=np.float64)
    b_idx = np.arange(batch)[:, None, None]
    c_idx = np.arange(channels)[None, :, None]
    # windows are disjoint, so indices never collide and assignment is safe
    dx[b_idx, c_idx, argmax] = dy
    return dx
