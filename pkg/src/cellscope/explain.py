"""Anomaly explanations: row scores, per-cell error confidences, expected values.

Categorical confidence is one minus the softmax probability the
reconstruction assigns to the observed category; numeric confidence is
one minus exp(-residual^2) on the standardized scale. A row's anomaly
score is the plain sum of its cell confidences, so it lives in [0, D].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models, nn
from .backend import span_softmax
from .errors import ShapeMismatchError, UnsupportedModelKindError, ValidationError
from .schema import Kind, Layout, Schema, decode, encode_row

N_NEIGHBORS = 5


@dataclass
class Explanation:
    """Everything the screening view needs for one row."""

    row: int | None
    cell_confidences: np.ndarray  # (D,), each in [0, 1]
    row_score: float
    observed_row: list
    expected_row: list
    neighbor_indices: list[int]
    latent: np.ndarray

    def to_dict(self, schema: Schema) -> dict:
        cells = []
        for spec, observed, expected, conf in zip(
            schema.attributes, self.observed_row, self.expected_row, self.cell_confidences
        ):
            cells.append(
                {
                    "attribute": spec.name,
                    "kind": spec.kind.value,
                    "observed": observed,
                    "expected": expected,
                    "confidence": float(conf),
                }
            )
        return {
            "row": self.row,
            "cells": cells,
            "row_score": float(self.row_score),
            "neighbors": [int(i) for i in self.neighbor_indices],
            "latent_xy": None,
        }


@dataclass
class LatentMap:
    """2-D linear projection of the latent cloud onto its top principal plane."""

    coordinates: np.ndarray  # (N, 2)
    basis: np.ndarray  # (L, 2)
    mean: np.ndarray  # (L,)

    def project(self, latents: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(latents) - self.mean) @ self.basis


def cell_confidence_categorical(reconstruction_span, observed_span) -> float:
    """Confidence that a categorical cell is wrong.

    One minus the softmax probability of the observed category; an
    all-zeros observed span (out-of-vocabulary value) gets confidence 1
    exactly, since no in-vocabulary mass can explain it.
    """
    logits = np.asarray(reconstruction_span, dtype=float).ravel()
    observed = np.asarray(observed_span, dtype=float).ravel()
    if logits.shape != observed.shape or logits.size < 2:
        raise ShapeMismatchError("span width mismatch or width < 2")
    if observed.sum() == 0:
        return 1.0
    shifted = logits - logits.max()
    p = np.exp(shifted)
    p /= p.sum()
    return float(1.0 - p[int(np.argmax(observed))])


def cell_confidence_numeric(observed: float, reconstructed: float) -> float:
    """1 - exp(-(x - x_hat)^2), on the standardized scale."""
    if not (math.isfinite(observed) and math.isfinite(reconstructed)):
        raise ValidationError("confidence needs finite values")
    diff = observed - reconstructed
    return 1.0 - math.exp(-diff * diff)


def row_score(cell_confidences) -> float:
    return float(np.asarray(cell_confidences, dtype=float).sum())


def confidence_matrix(
    reconstruction: np.ndarray, observed: np.ndarray, layout: Layout
) -> np.ndarray:
    """Vectorized cell confidences for whole matrices, shape (B, D)."""
    recon = np.atleast_2d(np.asarray(reconstruction, dtype=np.float64))
    obs = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    if recon.shape != obs.shape or recon.shape[1] != layout.width:
        raise ShapeMismatchError("reconstruction/observed shapes do not match the layout")
    d = len(layout.cat_attr_idx) + len(layout.num_attr_idx)
    out = np.zeros((recon.shape[0], d))

    if len(layout.num_cols):
        diff = obs[:, layout.num_cols] - recon[:, layout.num_cols]
        out[:, layout.num_attr_idx] = 1.0 - np.exp(-diff * diff)

    probs = span_softmax(recon, layout.cat_starts, layout.cat_widths)
    for start, width, d_idx in zip(
        layout.cat_starts.tolist(), layout.cat_widths.tolist(), layout.cat_attr_idx.tolist()
    ):
        p = probs[:, start : start + width]
        o = obs[:, start : start + width]
        observed_prob = (p * o).sum(axis=1)  # 0 when the span is all zeros
        out[:, d_idx] = 1.0 - observed_prob
    return out


def top_k(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, descending; ties broken by lower index."""
    scores = np.asarray(scores, dtype=float)
    if not 0 <= k <= len(scores):
        raise ValidationError(f"k must be in [0, {len(scores)}]")
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k]


@dataclass
class LatentIndex:
    """Latent vectors of the reference rows, for nearest-neighbor screening."""

    latents: np.ndarray  # (N, L)

    def neighbors(self, query: np.ndarray, k: int = N_NEIGHBORS, exclude: int | None = None) -> list[int]:
        diff = self.latents - np.asarray(query, dtype=float).ravel()
        dist = np.einsum("ij,ij->i", diff, diff)
        if exclude is not None and 0 <= exclude < len(dist):
            dist = dist.copy()
            dist[exclude] = np.inf
        order = np.lexsort((np.arange(len(dist)), dist))
        return [int(i) for i in order[: min(k, len(dist))]]


def build_latent_index(model: models.TrainedModel, encoded: np.ndarray) -> LatentIndex:
    return LatentIndex(latents=models.latent(model, encoded))


def explain(
    model: models.TrainedModel,
    row_values: list,
    index: LatentIndex,
    row_id: int | None = None,
) -> Explanation:
    """Full explanation of one raw row against a network model.

    ``row_id`` marks the row's position in the indexed dataset so the
    nearest-neighbor list excludes the row itself.
    """
    stack = model.require_network()
    schema = model.schema
    layout = schema.layout()
    x = encode_row(row_values, schema)[None, :]
    z, output, _ = nn.forward(stack, x)
    conf = confidence_matrix(output, x, layout)[0]
    return Explanation(
        row=row_id,
        cell_confidences=conf,
        row_score=row_score(conf),
        observed_row=list(row_values),
        expected_row=decode(output[0], schema),
        neighbor_indices=index.neighbors(z[0], exclude=row_id),
        latent=z[0],
    )


def latent_map(model: models.TrainedModel, encoded: np.ndarray) -> LatentMap:
    """Project all rows' bottleneck activations onto their top-2 principal plane."""
    if not model.is_network:
        raise UnsupportedModelKindError("latent_map requires a network model")
    z = models.latent(model, encoded)
    mean = z.mean(axis=0)
    centered = z - mean
    cov = centered.T @ centered / z.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    basis = eigvecs[:, order]
    return LatentMap(coordinates=centered @ basis, basis=basis, mean=mean)
