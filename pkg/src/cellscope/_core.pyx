# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled training kernels: leaky rectifier, span softmax, mixed loss +
gradient, Adam update. Semantics mirror cellscope._kernels_py exactly
(max-subtracted softmax, log-space NLL), so either backend can serve the
same checkpoints."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, pow, sqrt

cnp.import_array()

NAME = "cython"


def leaky_relu(z, double slope):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty_like(zz)
    cdef Py_ssize_t i, j, n = zz.shape[0], m = zz.shape[1]
    cdef double v
    for i in range(n):
        for j in range(m):
            v = zz[i, j]
            out[i, j] = v if v >= 0.0 else slope * v
    return out


def leaky_relu_grad(z, double slope, upstream):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] up = np.ascontiguousarray(upstream, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty_like(zz)
    cdef Py_ssize_t i, j, n = zz.shape[0], m = zz.shape[1]
    for i in range(n):
        for j in range(m):
            out[i, j] = up[i, j] if zz[i, j] >= 0.0 else slope * up[i, j]
    return out


def span_softmax(x, cat_starts, cat_widths):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = xx.copy()
    cdef cnp.ndarray[cnp.int64_t, ndim=1] starts = np.ascontiguousarray(cat_starts, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] widths = np.ascontiguousarray(cat_widths, dtype=np.int64)
    cdef Py_ssize_t i, j, s, w, c, n = xx.shape[0], n_cat = starts.shape[0]
    cdef double m, total
    for i in range(n):
        for j in range(n_cat):
            s = starts[j]
            w = widths[j]
            m = xx[i, s]
            for c in range(1, w):
                if xx[i, s + c] > m:
                    m = xx[i, s + c]
            total = 0.0
            for c in range(w):
                out[i, s + c] = exp(xx[i, s + c] - m)
                total += out[i, s + c]
            for c in range(w):
                out[i, s + c] /= total
    return out


def mixed_loss_grad(
    output,
    target,
    cat_starts,
    cat_widths,
    cat_attr_idx,
    num_cols,
    num_attr_idx,
    weights,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] o = np.ascontiguousarray(output, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c_starts = np.ascontiguousarray(cat_starts, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c_widths = np.ascontiguousarray(cat_widths, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c_idx = np.ascontiguousarray(cat_attr_idx, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] n_cols = np.ascontiguousarray(num_cols, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] n_idx = np.ascontiguousarray(num_attr_idx, dtype=np.int64)

    cdef Py_ssize_t b = o.shape[0]
    cdef Py_ssize_t d = c_idx.shape[0] + n_idx.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] loss = np.zeros((b, d))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros_like(o)

    cdef bint has_w = weights is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wmat
    if has_w:
        wmat = np.ascontiguousarray(weights, dtype=np.float64)
    else:
        wmat = np.empty((0, 0))

    cdef Py_ssize_t i, j, c, s, w, col, attr
    cdef double diff, wv, m, total, log_norm, dot_zt, sum_t, nll, t_eff, inv_b = 1.0 / b

    for j in range(n_cols.shape[0]):
        col = n_cols[j]
        attr = n_idx[j]
        for i in range(b):
            diff = o[i, col] - t[i, col]
            loss[i, attr] = diff * diff
            wv = wmat[i, attr] if has_w else 1.0
            grad[i, col] = 2.0 * diff * wv * inv_b

    for j in range(c_starts.shape[0]):
        s = c_starts[j]
        w = c_widths[j]
        attr = c_idx[j]
        for i in range(b):
            m = o[i, s]
            for c in range(1, w):
                if o[i, s + c] > m:
                    m = o[i, s + c]
            total = 0.0
            dot_zt = 0.0
            sum_t = 0.0
            for c in range(w):
                total += exp(o[i, s + c] - m)
                dot_zt += o[i, s + c] * t[i, s + c]
                sum_t += t[i, s + c]
            log_norm = log(total) + m
            if sum_t == 0.0:
                # out-of-vocabulary target: cross-entropy against uniform
                nll = 0.0
                for c in range(w):
                    nll += log_norm - o[i, s + c]
                nll /= w
                t_eff = 1.0 / w
            else:
                nll = log_norm - dot_zt
                t_eff = -1.0  # marker: use the one-hot target
            loss[i, attr] = nll
            wv = wmat[i, attr] if has_w else 1.0
            for c in range(w):
                if sum_t == 0.0:
                    grad[i, s + c] = (exp(o[i, s + c] - m) / total - t_eff) * wv * inv_b
                else:
                    grad[i, s + c] = (exp(o[i, s + c] - m) / total - t[i, s + c]) * wv * inv_b
    return loss, grad


def adam_update(
    param,
    grad,
    m,
    v,
    Py_ssize_t step,
    double lr,
    double beta1,
    double beta2,
    double eps,
):
    cdef double[::1] p_ = param
    cdef double[::1] g_ = np.ascontiguousarray(grad, dtype=np.float64)
    cdef double[::1] m_ = m
    cdef double[::1] v_ = v
    cdef Py_ssize_t i, n = p_.shape[0]
    cdef double c1 = 1.0 - pow(beta1, step)
    cdef double c2 = 1.0 - pow(beta2, step)
    cdef double m_hat, v_hat
    for i in range(n):
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g_[i]
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g_[i] * g_[i]
        m_hat = m_[i] / c1
        v_hat = v_[i] / c2
        p_[i] -= lr * m_hat / (sqrt(v_hat) + eps)
