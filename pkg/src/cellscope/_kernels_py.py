"""Pure-numpy implementations of the hot training kernels.

Mirrors the compiled ``cellscope._core`` extension function-for-function;
the backend module picks whichever is available. Shapes: batches are
(B, E) float64 C-contiguous, span index arrays come from Layout.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def leaky_relu(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z >= 0.0, z, slope * z)


def leaky_relu_grad(z: np.ndarray, slope: float, upstream: np.ndarray) -> np.ndarray:
    return upstream * np.where(z >= 0.0, 1.0, slope)


def span_softmax(x: np.ndarray, cat_starts: np.ndarray, cat_widths: np.ndarray) -> np.ndarray:
    """Copy of x with every categorical span replaced by its softmax."""
    out = x.copy()
    for start, width in zip(cat_starts.tolist(), cat_widths.tolist()):
        block = x[:, start : start + width]
        shifted = block - block.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        out[:, start : start + width] = e / e.sum(axis=1, keepdims=True)
    return out


def mixed_loss_grad(
    output: np.ndarray,
    target: np.ndarray,
    cat_starts: np.ndarray,
    cat_widths: np.ndarray,
    cat_attr_idx: np.ndarray,
    num_cols: np.ndarray,
    num_attr_idx: np.ndarray,
    weights: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-attribute loss terms and the gradient of their weighted batch mean.

    Loss terms (B, D): negative log-likelihood of the target category per
    categorical attribute (cross-entropy against uniform when the target
    span is all zeros), squared error per numeric attribute. The returned
    gradient is d/d(output) of (1/B) * sum_{n,d} w[n,d] * loss[n,d]; a None
    weight means all ones.
    """
    b = output.shape[0]
    d = len(cat_attr_idx) + len(num_attr_idx)
    loss = np.zeros((b, d))
    grad = np.zeros_like(output)

    if len(num_cols):
        w = 1.0 if weights is None else weights[:, num_attr_idx]
        diff = output[:, num_cols] - target[:, num_cols]
        loss[:, num_attr_idx] = diff * diff
        grad[:, num_cols] = 2.0 * diff * w / b

    for start, width, d_idx in zip(
        cat_starts.tolist(), cat_widths.tolist(), cat_attr_idx.tolist()
    ):
        z = output[:, start : start + width]
        t = target[:, start : start + width]
        m = z.max(axis=1, keepdims=True)
        shifted = z - m
        e = np.exp(shifted)
        sum_e = e.sum(axis=1, keepdims=True)
        log_norm = np.log(sum_e) + m  # log sum exp, stable for huge logits
        p = e / sum_e

        novel = t.sum(axis=1) == 0.0
        # one-hot target: -log p_t computed in log space; all-zeros target:
        # cross-entropy against the uniform distribution over the span
        nll = log_norm[:, 0] - (z * t).sum(axis=1)
        uniform_ce = (log_norm - z).mean(axis=1)
        loss[:, d_idx] = np.where(novel, uniform_ce, nll)

        t_eff = np.where(novel[:, None], 1.0 / width, t)
        w = 1.0 if weights is None else weights[:, d_idx, None]
        grad[:, start : start + width] = (p - t_eff) * w / b

    return loss, grad


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One bias-corrected Adam update, in place on flat float64 arrays."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
