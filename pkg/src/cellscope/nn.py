"""Feed-forward network stack: init, forward/backward, losses, Adam, LR schedule.

The architecture is a symmetric encoder/decoder MLP (widths like
160-128-64-128-160) with leaky-rectifier hidden activations and a linear
output layer: numeric spans are read as raw values, categorical spans as
logits. The heavy per-batch arithmetic lives in the kernel backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import InvalidArchitectureError, ShapeMismatchError, ValidationError
from .schema import Layout

LEAKY_SLOPE = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    max_epochs: int = 5000
    batch_size: int = 128
    base_lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.base_lr <= 0:
            raise ValidationError("base_lr must be > 0")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be >= 0")


@dataclass
class LayerStack:
    """Dense layer parameters; weights[i] has shape (widths[i], widths[i+1])."""

    widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def bottleneck_index(self) -> int:
        return len(self.widths) // 2

    @property
    def bottleneck_width(self) -> int:
        return self.widths[self.bottleneck_index]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "LayerStack":
        return LayerStack(
            self.widths, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter shapes."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_stack(cls, stack: LayerStack) -> "AdamState":
        params = stack.parameters()
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


@dataclass
class LossBreakdown:
    """Batch-mean loss per attribute plus their sum."""

    total: float
    per_attribute: np.ndarray


def validate_widths(widths: tuple[int, ...], encoded_width: int | None = None) -> None:
    if len(widths) < 3 or len(widths) % 2 == 0:
        raise InvalidArchitectureError(
            f"widths must have odd length >= 3, got {list(widths)}"
        )
    if any(w < 1 for w in widths):
        raise InvalidArchitectureError("layer widths must be positive")
    if list(widths) != list(reversed(widths)):
        raise InvalidArchitectureError(f"widths must be symmetric, got {list(widths)}")
    if encoded_width is not None and widths[0] != encoded_width:
        raise InvalidArchitectureError(
            f"input width {widths[0]} does not match encoded width {encoded_width}"
        )


def init(
    widths: tuple[int, ...], seed: int, encoded_width: int | None = None
) -> LayerStack:
    """Glorot-uniform weights, zero biases."""
    validate_widths(tuple(widths), encoded_width)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return LayerStack(tuple(widths), weights, biases)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)


def forward(stack: LayerStack, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Run the network; returns (bottleneck activations, output logits, cache).

    The output is the pre-activation of the final layer (linear output);
    hidden layers apply the leaky rectifier.
    """
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != stack.widths[0]:
        raise ShapeMismatchError(
            f"batch shape {batch.shape} incompatible with input width {stack.widths[0]}"
        )
    cache = ForwardCache(inputs=batch)
    a = batch
    for i, (w, b) in enumerate(zip(stack.weights, stack.biases)):
        z = a @ w + b
        cache.pre_activations.append(z)
        if i < stack.n_layers - 1:
            a = backend.leaky_relu(z, LEAKY_SLOPE)
        else:
            a = z
        cache.activations.append(a)
    latent = cache.activations[stack.bottleneck_index - 1]
    return latent, a, cache


def mixed_loss(
    output: np.ndarray, target: np.ndarray, layout: Layout
) -> tuple[LossBreakdown, np.ndarray]:
    """Mixed reconstruction loss: NLL on categorical spans, squared error on numerics.

    Returns the batch-mean breakdown and the gradient of the total w.r.t.
    the output.
    """
    terms, grad = _loss_terms_grad(output, target, layout, None)
    per_attr = terms.mean(axis=0)
    return LossBreakdown(total=float(per_attr.sum()), per_attribute=per_attr), grad


def enhanced_loss(
    output: np.ndarray,
    target: np.ndarray,
    layout: Layout,
    mask: np.ndarray,
    alpha: float,
) -> tuple[float, np.ndarray]:
    """Mask-weighted loss: alpha on corrupted attributes, (1 - alpha) on clean ones.

    ``mask`` is the per-row binary corruption mask over attributes; alpha
    is sampled once per mini-batch by the trainer.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must be in [0, 1]")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim == 1:
        mask = np.broadcast_to(mask, (output.shape[0], mask.shape[0]))
    weights = np.ascontiguousarray(alpha * mask + (1.0 - alpha) * (1.0 - mask))
    terms, grad = _loss_terms_grad(output, target, layout, weights)
    total = float((terms * weights).sum() / output.shape[0])
    return total, grad


def loss_terms(output: np.ndarray, target: np.ndarray, layout: Layout) -> np.ndarray:
    """Per-row, per-attribute loss terms, shape (B, D); no batch averaging."""
    terms, _ = _loss_terms_grad(output, target, layout, None)
    return terms


def _loss_terms_grad(
    output: np.ndarray,
    target: np.ndarray,
    layout: Layout,
    weights: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray]:
    output = np.ascontiguousarray(output, dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    if output.shape != target.shape or output.shape[1] != layout.width:
        raise ShapeMismatchError(
            f"output {output.shape} / target {target.shape} do not match layout width {layout.width}"
        )
    return backend.mixed_loss_grad(
        output,
        target,
        layout.cat_starts,
        layout.cat_widths,
        layout.cat_attr_idx,
        layout.num_cols,
        layout.num_attr_idx,
        weights,
    )


def backward(
    stack: LayerStack, cache: ForwardCache, output_grad: np.ndarray
) -> list[np.ndarray]:
    """Exact gradients of the loss w.r.t. every weight and bias.

    ``output_grad`` is d(loss)/d(output) from the loss functions; the
    returned list interleaves (dW, db) per layer, matching
    ``stack.parameters()`` order.
    """
    grads: list[np.ndarray] = [None] * (2 * stack.n_layers)  # type: ignore[list-item]
    dz = np.ascontiguousarray(output_grad, dtype=np.float64)
    for i in range(stack.n_layers - 1, -1, -1):
        a_prev = cache.inputs if i == 0 else cache.activations[i - 1]
        grads[2 * i] = a_prev.T @ dz
        grads[2 * i + 1] = dz.sum(axis=0)
        if i > 0:
            da = dz @ stack.weights[i].T
            dz = backend.leaky_relu_grad(cache.pre_activations[i - 1], LEAKY_SLOPE, da)
    return grads


def adam_step(
    stack: LayerStack, grads: list[np.ndarray], state: AdamState, lr: float
) -> None:
    """Bias-corrected Adam update, in place."""
    params = stack.parameters()
    if len(grads) != len(params):
        raise ShapeMismatchError("gradient list does not match parameter list")
    state.step += 1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        backend.adam_update(
            p.ravel(),
            np.ascontiguousarray(g, dtype=np.float64).ravel(),
            m.ravel(),
            v.ravel(),
            state.step,
            lr,
            ADAM_BETA1,
            ADAM_BETA2,
            ADAM_EPS,
        )


def cosine_lr(epoch: int, max_epochs: int, base_lr: float) -> float:
    """Cosine decay from base_lr at epoch 0 to 0 at max_epochs, no restarts."""
    if not 0 <= epoch <= max_epochs:
        raise ValidationError(f"epoch {epoch} outside [0, {max_epochs}]")
    if max_epochs == 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max_epochs))
