"""The detector zoo: denoising/plain autoencoders, PCA, per-attribute marginals.

Every kind trains into a :class:`TrainedModel` that can reconstruct
encoded rows; the scoring and metric layers treat all kinds uniformly
through that surface. Checkpoints are a versioned JSON container with
base64 little-endian float64 parameter blocks, so a reload reproduces
inference bit-exactly.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import nn
from .corrupt import CorruptionConfig, corrupt_encoded
from .errors import (
    DivergenceError,
    EMDegenerateError,
    RankDeficientError,
    ShapeMismatchError,
    UnsupportedModelKindError,
    ValidationError,
)
from .schema import Kind, Layout, RawTable, Schema

GMM_MAX_COMPONENTS = 5
GMM_RESTARTS = 10
GMM_MAX_ITER = 200
GMM_VAR_FLOOR_FACTOR = 1e-6


class ModelKind(str, Enum):
    DAE = "dae"
    DAE_ENHANCED = "dae_enhanced"
    AE = "ae"
    PCA = "pca"
    MARGINALS = "marginals"


NETWORK_KINDS = (ModelKind.DAE, ModelKind.DAE_ENHANCED, ModelKind.AE)


@dataclass
class PcaModel:
    """Mean vector plus an orthonormal basis of top principal directions."""

    mean: np.ndarray
    basis: np.ndarray  # (E, q), columns orthonormal
    eigenvalues: np.ndarray  # all E eigenvalues, descending

    @property
    def q(self) -> int:
        return self.basis.shape[1]


@dataclass
class GaussianMixture1D:
    """1-D Gaussian mixture with weights on the simplex."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    def log_density(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        log_comp = (
            np.log(self.weights)
            - 0.5 * np.log(2.0 * np.pi * self.variances)
            - 0.5 * (x[:, None] - self.means) ** 2 / self.variances
        )
        m = log_comp.max(axis=1, keepdims=True)
        return (m + np.log(np.exp(log_comp - m).sum(axis=1, keepdims=True)))[:, 0]

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))


@dataclass
class CategoricalFrequency:
    """Laplace-smoothed category frequencies; unseen mass floor 1/(N + C)."""

    probs: np.ndarray
    n_train: int

    @property
    def unseen_prob(self) -> float:
        return 1.0 / (self.n_train + len(self.probs))


@dataclass
class MarginalsModel:
    """Per-attribute density models in schema order (GMM or frequency table)."""

    cells: list  # GaussianMixture1D | CategoricalFrequency


@dataclass
class TrainedModel:
    kind: ModelKind
    schema: Schema
    stack: nn.LayerStack | None = None
    pca: PcaModel | None = None
    marginals: MarginalsModel | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def is_network(self) -> bool:
        return self.kind in NETWORK_KINDS

    def require_network(self) -> nn.LayerStack:
        if not self.is_network or self.stack is None:
            raise UnsupportedModelKindError(
                f"operation requires a network model, got {self.kind.value}"
            )
        return self.stack


# -- network training -----------------------------------------------------


def train_ae(
    train: np.ndarray,
    schema: Schema,
    cfg: nn.TrainConfig,
    widths: tuple[int, ...] | None = None,
    progress=None,
) -> TrainedModel:
    """Plain autoencoder: minimize the mixed loss on the inputs as given.

    The caller picks the training table (clean or corrupted) to select the
    regime.
    """
    return _train_network(
        train, schema, cfg, widths, corr_cfg=None, loss_mode="plain", kind=ModelKind.AE,
        progress=progress,
    )


def train_dae(
    train: np.ndarray,
    schema: Schema,
    corr_cfg: CorruptionConfig,
    loss_mode: str,
    cfg: nn.TrainConfig,
    widths: tuple[int, ...] | None = None,
    progress=None,
) -> TrainedModel:
    """Denoising autoencoder: fresh corruption per mini-batch, clean targets.

    ``loss_mode`` is "plain" (mixed loss) or "enhanced" (mask-weighted loss
    with a Beta(0.5, 0.5) mixing weight drawn once per batch).
    """
    if loss_mode not in ("plain", "enhanced"):
        raise ValidationError(f"unknown loss_mode {loss_mode!r}")
    kind = ModelKind.DAE_ENHANCED if loss_mode == "enhanced" else ModelKind.DAE
    return _train_network(
        train, schema, cfg, widths, corr_cfg=corr_cfg, loss_mode=loss_mode, kind=kind,
        progress=progress,
    )


def default_widths(encoded_width: int) -> tuple[int, ...]:
    return (encoded_width, 128, 64, 128, encoded_width)


def _train_network(
    train: np.ndarray,
    schema: Schema,
    cfg: nn.TrainConfig,
    widths: tuple[int, ...] | None,
    corr_cfg: CorruptionConfig | None,
    loss_mode: str,
    kind: ModelKind,
    progress=None,
) -> TrainedModel:
    train = np.ascontiguousarray(train, dtype=np.float64)
    layout = schema.layout()
    if train.ndim != 2 or train.shape[1] != layout.width:
        raise ShapeMismatchError(
            f"training matrix {train.shape} does not match encoded width {layout.width}"
        )
    widths = tuple(widths) if widths is not None else default_widths(layout.width)
    stack = nn.init(widths, seed=cfg.seed, encoded_width=layout.width)
    state = nn.AdamState.for_stack(stack)

    # Separate substreams so disabling corruption cannot shift the
    # shuffle/init randomness (the zero-noise DAE must equal the AE).
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    noise_rng = np.random.default_rng([cfg.seed, 2])
    alpha_rng = np.random.default_rng([cfg.seed, 3])

    corrupting = corr_cfg is not None and corr_cfg.row_fraction > 0.0
    n = train.shape[0]
    history: list[float] = []
    for epoch in range(cfg.max_epochs):
        lr = nn.cosine_lr(epoch, cfg.max_epochs, cfg.base_lr)
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            target = train[idx]
            if corrupting:
                x_in, mask = corrupt_encoded(target, schema, layout, corr_cfg, noise_rng)
            else:
                x_in, mask = target, None
            _, output, cache = nn.forward(stack, x_in)
            if loss_mode == "enhanced":
                if mask is None:
                    mask = np.zeros((target.shape[0], schema.d_total), dtype=np.int8)
                alpha = float(alpha_rng.beta(0.5, 0.5))
                total, grad = nn.enhanced_loss(output, target, layout, mask, alpha)
            else:
                breakdown, grad = nn.mixed_loss(output, target, layout)
                total = breakdown.total
            if not math.isfinite(total):
                raise DivergenceError(
                    f"non-finite loss {total} at epoch {epoch}", epoch=epoch, batch=n_batches
                )
            grads = nn.backward(stack, cache, grad)
            nn.adam_step(stack, grads, state, lr)
            epoch_loss += total
            n_batches += 1
        history.append(epoch_loss / max(n_batches, 1))
        if progress is not None:
            progress(epoch, history[-1])

    provenance = {
        "config": {
            "max_epochs": cfg.max_epochs,
            "batch_size": cfg.batch_size,
            "base_lr": cfg.base_lr,
            "seed": cfg.seed,
        },
        "widths": list(widths),
        "loss_mode": loss_mode,
        "corruption": _corruption_dict(corr_cfg),
        "epochs_run": cfg.max_epochs,
        "final_loss": history[-1] if history else None,
    }
    model = TrainedModel(kind=kind, schema=schema, stack=stack, provenance=provenance)
    model.provenance["loss_history"] = history
    return model


def _corruption_dict(cfg: CorruptionConfig | None) -> dict | None:
    if cfg is None:
        return None
    return {
        "row_fraction": cfg.row_fraction,
        "noise_scale_range": list(cfg.noise_scale_range),
        "noise_families": [f.value for f in cfg.noise_families],
        "categorical_modes": [m.value for m in cfg.categorical_modes],
        "seed": cfg.seed,
    }


# -- PCA --------------------------------------------------------------------


def fit_pca(
    train: np.ndarray,
    schema: Schema | None = None,
    q: int | None = None,
    variance_target: float = 0.90,
) -> TrainedModel:
    """Mean-centered eigendecomposition of the covariance.

    With ``q`` unset, picks the smallest component count whose cumulative
    explained variance reaches ``variance_target``.
    """
    x = np.asarray(train, dtype=np.float64)
    n, e = x.shape
    mean = x.mean(axis=0)
    cov = (x - mean).T @ (x - mean) / n
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]

    rank = int((eigvals > max(eigvals[0], 1.0) * 1e-12).sum()) if eigvals[0] > 0 else 0
    if q is None:
        total = eigvals.sum()
        if total == 0:
            raise RankDeficientError("covariance has no variance")
        cum = np.cumsum(eigvals) / total
        q = int(np.searchsorted(cum, variance_target) + 1)
    if not 1 <= q <= e:
        raise ValidationError(f"q must be in [1, {e}]")
    if n <= q:
        raise ValidationError(f"need more rows ({n}) than components ({q})")
    if q > rank:
        raise RankDeficientError(f"requested {q} components but rank is {rank}")

    pca = PcaModel(mean=mean, basis=eigvecs[:, :q].copy(), eigenvalues=eigvals)
    prov = {"q": q, "variance_target": variance_target, "n_train": n}
    if schema is None:
        return TrainedModel(kind=ModelKind.PCA, schema=None, pca=pca, provenance=prov)  # type: ignore[arg-type]
    return TrainedModel(kind=ModelKind.PCA, schema=schema, pca=pca, provenance=prov)


# -- marginal distributions ---------------------------------------------------


def _mixture_stats(
    x: np.ndarray, w: np.ndarray, mu: np.ndarray, var: np.ndarray
) -> tuple[float, np.ndarray]:
    """Log-likelihood and responsibilities for the current parameters."""
    log_comp = (
        np.log(w) - 0.5 * np.log(2.0 * np.pi * var) - 0.5 * (x[:, None] - mu) ** 2 / var
    )
    m = log_comp.max(axis=1, keepdims=True)
    log_norm = m + np.log(np.exp(log_comp - m).sum(axis=1, keepdims=True))
    return float(log_norm.sum()), np.exp(log_comp - log_norm)


def fit_gmm_em(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    var_floor: float,
    max_iter: int = GMM_MAX_ITER,
    tol: float = 1e-5,
    clamp: bool = False,
) -> tuple[GaussianMixture1D, list[float]]:
    """EM for a 1-D Gaussian mixture; returns the fit and its log-likelihood trace.

    Converged when the per-sample log-likelihood gain drops below ``tol``.
    Raises EMDegenerateError when a component variance collapses below the
    floor (unless ``clamp``, which pins collapsed variances at the floor).
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < k:
        raise ValidationError(f"need at least {k} points to fit {k} components")
    quantiles = np.quantile(x, np.linspace(0.0, 1.0, k + 2)[1:-1])
    spread = max(float(x.std()), math.sqrt(var_floor))
    mu = quantiles + rng.normal(0.0, 0.1 * spread, size=k)
    var = np.full(k, max(float(x.var()), var_floor))
    w = np.full(k, 1.0 / k)

    ll, r = _mixture_stats(x, w, mu, var)
    trace = [ll]
    for _ in range(max_iter):
        counts = r.sum(axis=0)
        if np.any(counts <= 0):
            raise EMDegenerateError("a mixture component lost all responsibility")
        w = counts / n
        mu = (r * x[:, None]).sum(axis=0) / counts
        var = (r * (x[:, None] - mu) ** 2).sum(axis=0) / counts
        if np.any(var < var_floor):
            if clamp:
                var = np.maximum(var, var_floor)
            else:
                raise EMDegenerateError("component variance collapsed below the floor")
        ll, r = _mixture_stats(x, w, mu, var)
        trace.append(ll)
        if abs(trace[-1] - trace[-2]) < tol * n:
            break
    return GaussianMixture1D(weights=w, means=mu, variances=var), trace


def _bic(ll: float, k: int, n: int) -> float:
    n_params = 3 * k - 1
    return -2.0 * ll + n_params * math.log(n)


def fit_numeric_marginal(
    values: np.ndarray, seed: int, k_max: int = GMM_MAX_COMPONENTS
) -> tuple[GaussianMixture1D, dict]:
    """Best 1-D mixture over 1..k_max components, selected by BIC.

    Each component count gets several restarts; degenerate runs restart
    with the variance floor clamped.
    """
    values = np.asarray(values, dtype=np.float64)
    var_floor = GMM_VAR_FLOOR_FACTOR * max(float(values.var()), 1e-12)
    best: tuple[float, int, GaussianMixture1D, list[float]] | None = None
    for k in range(1, k_max + 1):
        k_best: tuple[float, GaussianMixture1D, list[float]] | None = None
        for restart in range(GMM_RESTARTS):
            rng = np.random.default_rng([seed, k, restart])
            try:
                gmm, trace = fit_gmm_em(values, k, rng, var_floor)
            except EMDegenerateError:
                rng = np.random.default_rng([seed, k, restart, 1])
                try:
                    gmm, trace = fit_gmm_em(values, k, rng, var_floor, clamp=True)
                except (EMDegenerateError, ValidationError):
                    continue
            except ValidationError:
                continue
            if k_best is None or trace[-1] > k_best[0]:
                k_best = (trace[-1], gmm, trace)
        if k_best is None:
            continue
        bic = _bic(k_best[0], k, len(values))
        if best is None or bic < best[0]:
            best = (bic, k, k_best[1], k_best[2])
    if best is None:
        raise EMDegenerateError("no mixture fit succeeded")
    bic, k, gmm, trace = best
    return gmm, {"k": k, "bic": bic, "log_likelihood_trace": trace}


def fit_marginals(
    table: RawTable,
    schema: Schema,
    encoded: np.ndarray | None = None,
    seed: int = 0,
    k_max: int = GMM_MAX_COMPONENTS,
) -> TrainedModel:
    """Per-attribute marginal models: BIC-selected 1-D GMMs on standardized
    numerics, Laplace-smoothed frequency tables on categoricals."""
    from .schema import encode  # local import to avoid cycle at module load

    if encoded is None:
        encoded = encode(table, schema)
    layout = schema.layout()
    cells: list = []
    selection = {}
    for d_idx, (spec, (start, width)) in enumerate(zip(schema.attributes, layout.spans)):
        if spec.kind is Kind.NUMERIC:
            gmm, info = fit_numeric_marginal(encoded[:, start], seed=seed * 1000 + d_idx, k_max=k_max)
            cells.append(gmm)
            selection[spec.name] = info["k"]
        else:
            counts = np.zeros(width)
            index = {c: j for j, c in enumerate(spec.categories)}
            for v in table.columns[spec.name]:
                j = index.get(str(v))
                if j is not None:
                    counts[j] += 1
            n = int(counts.sum())
            cells.append(CategoricalFrequency(probs=(counts + 1.0) / (n + width), n_train=n))
            selection[spec.name] = None
    return TrainedModel(
        kind=ModelKind.MARGINALS,
        schema=schema,
        marginals=MarginalsModel(cells=cells),
        provenance={"components": selection, "k_max": k_max, "seed": seed},
    )


def marginal_cell_score(model: TrainedModel, encoded_rows: np.ndarray) -> np.ndarray:
    """Per-attribute negative log-likelihood scores, shape (B, D).

    Numeric attributes score the standardized value under the fitted
    mixture; categoricals score the smoothed frequency of the observed
    category, with all-zero (out-of-vocabulary) spans at the unseen floor.
    """
    if model.kind is not ModelKind.MARGINALS or model.marginals is None:
        raise UnsupportedModelKindError("marginal_cell_score requires a marginals model")
    rows = np.atleast_2d(np.asarray(encoded_rows, dtype=np.float64))
    layout = model.schema.layout()
    out = np.zeros((rows.shape[0], model.schema.d_total))
    for d_idx, (cell, (start, width)) in enumerate(zip(model.marginals.cells, layout.spans)):
        if isinstance(cell, GaussianMixture1D):
            out[:, d_idx] = -cell.log_density(rows[:, start])
        else:
            span = rows[:, start : start + width]
            prob = np.where(span.sum(axis=1) == 0, cell.unseen_prob, span @ cell.probs)
            out[:, d_idx] = -np.log(prob)
    return out


# -- reconstruction ------------------------------------------------------------


def reconstruct(model: TrainedModel, batch: np.ndarray) -> np.ndarray:
    """Model reconstruction of encoded rows, shape-preserving (B, E).

    Network kinds return decoder output (categorical spans are logits);
    PCA projects and lifts; marginals return per-attribute expected values
    (mixture mean / frequency distribution).
    """
    x = np.atleast_2d(np.ascontiguousarray(batch, dtype=np.float64))
    e = model.schema.layout().width if model.schema is not None else x.shape[1]
    if x.shape[1] != e:
        raise ShapeMismatchError(f"batch width {x.shape[1]} != encoded width {e}")
    if model.is_network:
        _, output, _ = nn.forward(model.require_network(), x)
        return output
    if model.kind is ModelKind.PCA:
        centered = x - model.pca.mean
        return model.pca.mean + (centered @ model.pca.basis) @ model.pca.basis.T
    if model.kind is ModelKind.MARGINALS:
        layout = model.schema.layout()
        out = np.empty_like(x)
        for cell, (start, width) in zip(model.marginals.cells, layout.spans):
            if isinstance(cell, GaussianMixture1D):
                out[:, start] = cell.mean
            else:
                out[:, start : start + width] = cell.probs
        return out
    raise UnsupportedModelKindError(f"cannot reconstruct with kind {model.kind}")


def latent(model: TrainedModel, batch: np.ndarray) -> np.ndarray:
    """Bottleneck activations for network models."""
    stack = model.require_network()
    z, _, _ = nn.forward(stack, np.atleast_2d(np.asarray(batch, dtype=np.float64)))
    return z


# -- checkpoint container -----------------------------------------------------

_CHECKPOINT_FORMAT = "cellscope-checkpoint"
_CHECKPOINT_VERSION = 1


def _pack(a: np.ndarray) -> dict:
    arr = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _unpack(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(doc["shape"]).astype(np.float64)


def save_checkpoint(model: TrainedModel, path) -> None:
    doc: dict = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "kind": model.kind.value,
        "schema": model.schema.to_dict(),
        "provenance": model.provenance,
    }
    if model.is_network:
        stack = model.require_network()
        doc["network"] = {
            "widths": list(stack.widths),
            "weights": [_pack(w) for w in stack.weights],
            "biases": [_pack(b) for b in stack.biases],
        }
    elif model.kind is ModelKind.PCA:
        doc["pca"] = {
            "mean": _pack(model.pca.mean),
            "basis": _pack(model.pca.basis),
            "eigenvalues": _pack(model.pca.eigenvalues),
        }
    elif model.kind is ModelKind.MARGINALS:
        packed = []
        for cell in model.marginals.cells:
            if isinstance(cell, GaussianMixture1D):
                packed.append(
                    {
                        "type": "gmm",
                        "weights": _pack(cell.weights),
                        "means": _pack(cell.means),
                        "variances": _pack(cell.variances),
                    }
                )
            else:
                packed.append(
                    {"type": "frequency", "probs": _pack(cell.probs), "n_train": cell.n_train}
                )
        doc["marginals"] = {"cells": packed}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise ValidationError(f"{path}: not a checkpoint file")
    if doc.get("version") != _CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    kind = ModelKind(doc["kind"])
    schema = Schema.from_dict(doc["schema"])
    model = TrainedModel(kind=kind, schema=schema, provenance=doc.get("provenance", {}))
    if kind in NETWORK_KINDS:
        net = doc["network"]
        model.stack = nn.LayerStack(
            widths=tuple(net["widths"]),
            weights=[_unpack(w) for w in net["weights"]],
            biases=[_unpack(b) for b in net["biases"]],
        )
    elif kind is ModelKind.PCA:
        pca = doc["pca"]
        model.pca = PcaModel(
            mean=_unpack(pca["mean"]),
            basis=_unpack(pca["basis"]),
            eigenvalues=_unpack(pca["eigenvalues"]),
        )
    elif kind is ModelKind.MARGINALS:
        cells = []
        for cell in doc["marginals"]["cells"]:
            if cell["type"] == "gmm":
                cells.append(
                    GaussianMixture1D(
                        weights=_unpack(cell["weights"]),
                        means=_unpack(cell["means"]),
                        variances=_unpack(cell["variances"]),
                    )
                )
            else:
                cells.append(
                    CategoricalFrequency(probs=_unpack(cell["probs"]), n_train=cell["n_train"])
                )
        model.marginals = MarginalsModel(cells=cells)
    return model
