# cython: language_level=3
"""Compiled kernels for the 1D CNN hot loops.

Same contracts as ``structbias.nn._kernels_numpy`` (the import-time selected
fallback): conv1d forward/backward via C im2col/col2im plus BLAS dgemm, and
max-pooling forward/backward as tight C loops.

All array inputs may be read-only (trained networks freeze their parameters);
the only writable buffers are the small local copies BLAS needs pointers to.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "compiled"


cdef void _dgemm_rm(bint trans_a, bint trans_b,
                    int a_rows, int a_cols, int b_rows, int b_cols,
                    double alpha, double* a, double* b,
                    double beta, double* c) noexcept nogil:
    """C = alpha*op(A)@op(B) + beta*C for row-major A, B, C.

    Implemented through Fortran dgemm on the transposed views: swapping the
    operand order computes C^T = op(B)^T @ op(A)^T in column-major, which is
    exactly row-major C.
    """
    cdef int m = a_cols if trans_a else a_rows   # rows of op(A)
    cdef int k = a_rows if trans_a else a_cols   # shared dimension
    cdef int n = b_rows if trans_b else b_cols   # cols of op(B)
    cdef char ta = b'T' if trans_a else b'N'
    cdef char tb = b'T' if trans_b else b'N'
    cdef int lda = a_cols
    cdef int ldb = b_cols
    cdef int ldc = n
    dgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef object _writable_c_f64(object a):
    """Contiguous float64 array safe to hand BLAS a mutable pointer into."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if not arr.flags.writeable:
        arr = arr.copy()
    return arr


def conv1d_forward(const double[:, :, ::1] x, w, const double[::1] bias):
    """y[n,o,l] = bias[o] + sum_{c,k} x[n,c,l+k-pad] * w[o,c,k] (zero padded)."""
    cdef Py_ssize_t batch = x.shape[0], channels = x.shape[1], length = x.shape[2]
    w_arr = _writable_c_f64(w)
    cdef Py_ssize_t out_channels = w_arr.shape[0], kernel_size = w_arr.shape[2]
    cdef Py_ssize_t pad_left = (kernel_size - 1) // 2
    cdef Py_ssize_t n, c, k, l, o, lo, hi, off, row

    cols_arr = np.zeros((batch, channels * kernel_size, length), dtype=np.float64)
    y_arr = np.empty((batch, out_channels, length), dtype=np.float64)
    cdef double[:, :, ::1] cols = cols_arr
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, ::1] w2 = w_arr.reshape(out_channels, channels * kernel_size)

    with nogil:
        for n in range(batch):
            for c in range(channels):
                for k in range(kernel_size):
                    off = k - pad_left
                    lo = 0 if off >= 0 else -off
                    hi = length if off <= 0 else length - off
                    row = c * kernel_size + k
                    for l in range(lo, hi):
                        cols[n, row, l] = x[n, c, l + off]
        for n in range(batch):
            _dgemm_rm(False, False,
                      <int>out_channels, <int>(channels * kernel_size),
                      <int>(channels * kernel_size), <int>length,
                      1.0, &w2[0, 0], &cols[n, 0, 0], 0.0, &y[n, 0, 0])
        for n in range(batch):
            for o in range(out_channels):
                for l in range(length):
                    y[n, o, l] += bias[o]
    return y_arr


def conv1d_backward(const double[:, :, ::1] x, w, dy):
    """Gradients of conv1d_forward: returns (dx, dw, db)."""
    cdef Py_ssize_t batch = x.shape[0], channels = x.shape[1], length = x.shape[2]
    w_arr = _writable_c_f64(w)
    dy_arr = _writable_c_f64(dy)
    cdef Py_ssize_t out_channels = w_arr.shape[0], kernel_size = w_arr.shape[2]
    cdef Py_ssize_t pad_left = (kernel_size - 1) // 2
    cdef Py_ssize_t n, c, k, l, o, lo, hi, off, row

    cols_arr = np.zeros((batch, channels * kernel_size, length), dtype=np.float64)
    dcols_arr = np.empty((batch, channels * kernel_size, length), dtype=np.float64)
    dx_arr = np.zeros((batch, channels, length), dtype=np.float64)
    dw2_arr = np.zeros((out_channels, channels * kernel_size), dtype=np.float64)
    db_arr = np.zeros(out_channels, dtype=np.float64)
    cdef double[:, :, ::1] cols = cols_arr
    cdef double[:, :, ::1] dcols = dcols_arr
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dw2 = dw2_arr
    cdef double[::1] db = db_arr
    cdef double[:, :, ::1] dyv = dy_arr
    cdef double[:, ::1] w2 = w_arr.reshape(out_channels, channels * kernel_size)
    cdef double acc

    with nogil:
        for n in range(batch):
            for c in range(channels):
                for k in range(kernel_size):
                    off = k - pad_left
                    lo = 0 if off >= 0 else -off
                    hi = length if off <= 0 else length - off
                    row = c * kernel_size + k
                    for l in range(lo, hi):
                        cols[n, row, l] = x[n, c, l + off]
        for n in range(batch):
            # dw2 += dy[n] @ cols[n]^T
            _dgemm_rm(False, True,
                      <int>out_channels, <int>length,
                      <int>(channels * kernel_size), <int>length,
                      1.0, &dyv[n, 0, 0], &cols[n, 0, 0], 1.0, &dw2[0, 0])
            # dcols[n] = w2^T @ dy[n]
            _dgemm_rm(True, False,
                      <int>out_channels, <int>(channels * kernel_size),
                      <int>out_channels, <int>length,
                      1.0, &w2[0, 0], &dyv[n, 0, 0], 0.0, &dcols[n, 0, 0])
        for o in range(out_channels):
            acc = 0.0
            for n in range(batch):
                for l in range(length):
                    acc += dyv[n, o, l]
            db[o] = acc
        # col2im scatter-add
        for n in range(batch):
            for c in range(channels):
                for k in range(kernel_size):
                    off = k - pad_left
                    lo = 0 if off >= 0 else -off
                    hi = length if off <= 0 else length - off
                    row = c * kernel_size + k
                    for l in range(lo, hi):
                        dx[n, c, l + off] += dcols[n, row, l]
    return dx_arr, dw2_arr.reshape(out_channels, channels, kernel_size), db_arr


def maxpool_forward(const double[:, :, ::1] x, Py_ssize_t window):
    """Non-overlapping max pooling, trailing partial window kept.

    Returns (values (B,C,P), argmax (B,C,P) int64 flat indices into L).
    """
    cdef Py_ssize_t batch = x.shape[0], channels = x.shape[1], length = x.shape[2]
    cdef Py_ssize_t out_len = (length + window - 1) // window
    cdef Py_ssize_t n, c, j, l, start, stop, best_idx
    cdef double best

    values_arr = np.empty((batch, channels, out_len), dtype=np.float64)
    argmax_arr = np.empty((batch, channels, out_len), dtype=np.int64)
    cdef double[:, :, ::1] values = values_arr
    cdef long long[:, :, ::1] argmax = argmax_arr

    with nogil:
        for n in range(batch):
            for c in range(channels):
                for j in range(out_len):
                    start = j * window
                    stop = start + window
                    if stop > length:
                        stop = length
                    best = x[n, c, start]
                    best_idx = start
                    for l in range(start + 1, stop):
                        if x[n, c, l] > best:
                            best = x[n, c, l]
                            best_idx = l
                    values[n, c, j] = best
                    argmax[n, c, j] = best_idx
    return values_arr, argmax_arr


def maxpool_backward(const double[:, :, ::1] dy, const long long[:, :, ::1] argmax,
                     Py_ssize_t length):
    """Scatter pooled gradients back to their argmax positions."""
    cdef Py_ssize_t batch = dy.shape[0], channels = dy.shape[1], out_len = dy.shape[2]
    cdef Py_ssize_t n, c, j

    dx_arr = np.zeros((batch, channels, length), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr

    with nogil:
        for n in range(batch):
            for c in range(channels):
                for j in range(out_len):
                    dx[n, c, argmax[n, c, j]] += dy[n, c, j]
    return dx_arr
