"""Synthetic mixed-type tables with a shared low-dimensional latent structure.

Rows are driven by a latent Gaussian factor: numeric columns are noisy
linear readouts, categorical columns are argmax readouts of per-attribute
logit maps. Attributes are therefore mutually predictable, which is what
a reconstruction-based detector needs to localize injected errors.
"""

from __future__ import annotations

import numpy as np

from .schema import RawTable


def make_synthetic_table(
    n_rows: int = 5000,
    n_categorical: int = 5,
    n_categories: int = 4,
    n_numeric: int = 5,
    latent_dim: int = 3,
    numeric_noise: float = 0.1,
    logit_noise: float = 0.5,
    seed: int = 0,
) -> RawTable:
    """Draw a table of ``n_categorical`` + ``n_numeric`` latent-linked columns.

    ``numeric_noise`` is the observation noise std on numeric readouts;
    ``logit_noise`` jitters the categorical logits before the argmax (0
    makes categories a deterministic function of the latent factor).
    """
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n_rows, latent_dim))

    columns: dict[str, list] = {}
    for j in range(n_categorical):
        proj = rng.normal(size=(latent_dim, n_categories)) * 2.0
        logits = z @ proj + rng.normal(scale=logit_noise, size=(n_rows, n_categories))
        labels = np.argmax(logits, axis=1)
        columns[f"cat_{j}"] = [f"v{int(c)}" for c in labels]
    for j in range(n_numeric):
        w = rng.normal(size=latent_dim)
        w /= np.linalg.norm(w)
        values = z @ w + rng.normal(scale=numeric_noise, size=n_rows)
        columns[f"num_{j}"] = [float(v) for v in values]
    return RawTable(columns)
