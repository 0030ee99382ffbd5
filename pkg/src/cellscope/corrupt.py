"""Synthetic error injection with ground-truth cell masks.

A configurable fraction of rows is turned into labeled outliers by
corrupting 1..floor(D/2) of their attributes: numeric cells get additive
noise scaled to the attribute's std, categorical cells are either swapped
to a different category or replaced by a synthesized out-of-vocabulary
typo. Every corruption is recorded in a binary (row, attribute) mask with
the clean originals kept alongside.
"""

from __future__ import annotations

import csv
import math
import string
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import TypoExhaustedError, ValidationError
from .schema import Kind, Layout, RawTable, Schema, parse_number

TYPO_RETRY_CAP = 100
_TYPO_CHARS = string.ascii_letters + string.digits


class NoiseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    LOG_NORMAL = "log_normal"


class CategoricalMode(str, Enum):
    SWAP_CATEGORY = "swap_category"
    TYPO_SYNTHESIS = "typo_synthesis"


@dataclass(frozen=True)
class CorruptionConfig:
    """Knobs of the corruption protocol.

    ``row_fraction`` is the share of rows turned into outliers (0 disables
    corruption entirely). ``noise_scale_range`` is the interval the
    per-cell multiplier is drawn from; the additive noise scale is
    std_dev * multiplier.
    """

    row_fraction: float = 0.03
    noise_scale_range: tuple[float, float] = (3.0, 5.0)
    noise_families: tuple[NoiseFamily, ...] = (
        NoiseFamily.GAUSSIAN,
        NoiseFamily.LAPLACE,
        NoiseFamily.LOG_NORMAL,
    )
    categorical_modes: tuple[CategoricalMode, ...] = (
        CategoricalMode.SWAP_CATEGORY,
        CategoricalMode.TYPO_SYNTHESIS,
    )
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.row_fraction < 1.0:
            raise ValidationError("row_fraction must be in [0, 1)")
        lo, hi = self.noise_scale_range
        if lo < 1.0 or hi < lo:
            raise ValidationError("noise_scale_range must satisfy 1 <= low <= high")
        if not self.noise_families:
            raise ValidationError("need at least one noise family")
        if not self.categorical_modes:
            raise ValidationError("need at least one categorical mode")


@dataclass
class CorruptedTable:
    """Corruption output: the dirty table, the cell mask and the originals.

    ``mask`` is (N, D) over attributes (not encoded columns); ``originals``
    maps (row, attribute name) to the clean value for exactly the set
    cells of the mask.
    """

    table: RawTable
    mask: np.ndarray
    originals: dict[tuple[int, str], object]

    @property
    def row_flags(self) -> np.ndarray:
        return self.mask.any(axis=1)

    def save_mask(self, path) -> None:
        names = self.table.names
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for row in self.mask:
                writer.writerow([int(v) for v in row])

    def save_originals(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["row", "attribute", "value"])
            for (i, name), value in sorted(self.originals.items(), key=lambda kv: (kv[0][0], kv[0][1])):
                writer.writerow([i, name, value])


def load_mask(path, names: list[str]) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != names:
            raise ValidationError(f"mask header {header} does not match columns {names}")
        rows = [[int(v) for v in row] for row in reader]
    return np.asarray(rows, dtype=np.int8)


def load_originals(path) -> dict[tuple[int, str], str]:
    out: dict[tuple[int, str], str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row_s, name, value in reader:
            out[(int(row_s), name)] = value
    return out


def select_rows(n_rows: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Sample round(fraction * n_rows) distinct row indices, sorted."""
    if n_rows < 1:
        raise ValidationError("n_rows must be >= 1")
    k = int(round(fraction * n_rows))
    if k == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(n_rows, size=k, replace=False)).astype(np.int64)


def select_cells(d_total: int, rng: np.random.Generator) -> np.ndarray:
    """Pick c ~ Unif{1..floor(D/2)} attributes uniformly without replacement."""
    if d_total < 2:
        raise ValidationError("need at least 2 attributes to select corruption cells")
    c_max = d_total // 2
    c = int(rng.integers(1, c_max + 1))
    return np.sort(rng.choice(d_total, size=c, replace=False)).astype(np.int64)


# A standard log-normal exp(N(0, 1)) has this mean and std; the noise draw
# shifts and rescales it so every family yields zero-mean noise whose
# standard deviation is sigma_d * gain. Using the gain as the log-scale
# shape instead would put almost all mass at -exp(gain^2/2) standard
# deviations, which overflows float64 for wide attributes and swamps
# training with 1e5-sigma cells.
_LOG_NORMAL_MEAN = math.exp(0.5)
_LOG_NORMAL_STD = math.sqrt((math.e - 1.0) * math.e)


def draw_numeric_noise(sigma_d: float, cfg: CorruptionConfig, rng: np.random.Generator) -> float:
    """One additive zero-mean noise draw for an attribute with std ``sigma_d``.

    The family is chosen uniformly; the magnitude multiplier is uniform on
    ``noise_scale_range``, so the injected error is a few attribute
    standard deviations wide.
    """
    if sigma_d <= 0:
        raise ValidationError("sigma_d must be > 0")
    family = cfg.noise_families[int(rng.integers(len(cfg.noise_families)))]
    lo, hi = cfg.noise_scale_range
    gain = float(rng.uniform(lo, hi))
    if family is NoiseFamily.GAUSSIAN:
        return float(rng.normal(0.0, sigma_d * gain))
    if family is NoiseFamily.LAPLACE:
        return float(rng.laplace(0.0, sigma_d * gain))
    draw = math.exp(rng.normal(0.0, 1.0))
    return sigma_d * gain * (draw - _LOG_NORMAL_MEAN) / _LOG_NORMAL_STD


def corrupt_numeric(
    x: float, sigma_d: float, cfg: CorruptionConfig, rng: np.random.Generator
) -> float:
    """Return x plus one noise draw, redrawing in the measure-zero x' == x case."""
    for _ in range(TYPO_RETRY_CAP):
        corrupted = x + draw_numeric_noise(sigma_d, cfg, rng)
        if corrupted != x:
            return corrupted
    raise ValidationError("numeric corruption failed to change the value")


def corrupt_categorical(
    value: str,
    categories: tuple[str, ...],
    mode: CategoricalMode,
    rng: np.random.Generator,
) -> str:
    """Swap to a different category, or synthesize an out-of-vocabulary typo."""
    value = str(value)
    if mode is CategoricalMode.SWAP_CATEGORY:
        alternatives = [c for c in categories if c != value]
        if not alternatives:
            raise ValidationError("swap_category needs at least 2 categories")
        return alternatives[int(rng.integers(len(alternatives)))]

    if len(value) < 1:
        raise ValidationError("typo_synthesis needs a non-empty value")
    vocabulary = set(categories)
    for _ in range(TYPO_RETRY_CAP):
        candidate = _one_edit(value, rng)
        if candidate not in vocabulary:
            return candidate
    raise TypoExhaustedError(
        f"no out-of-vocabulary edit of {value!r} found in {TYPO_RETRY_CAP} tries"
    )


def _one_edit(value: str, rng: np.random.Generator) -> str:
    op = int(rng.integers(3))
    if op == 0:  # insertion
        pos = int(rng.integers(len(value) + 1))
        ch = _TYPO_CHARS[int(rng.integers(len(_TYPO_CHARS)))]
        return value[:pos] + ch + value[pos:]
    pos = int(rng.integers(len(value)))
    if op == 1:  # flip
        others = _TYPO_CHARS.replace(value[pos], "")
        ch = others[int(rng.integers(len(others)))]
        return value[:pos] + ch + value[pos + 1 :]
    return value[:pos] + value[pos + 1 :]  # deletion


def _pick_mode(
    value: str,
    categories: tuple[str, ...],
    cfg: CorruptionConfig,
    rng: np.random.Generator,
) -> CategoricalMode:
    applicable = []
    for mode in cfg.categorical_modes:
        if mode is CategoricalMode.SWAP_CATEGORY and len(categories) < 2:
            continue
        if mode is CategoricalMode.TYPO_SYNTHESIS and len(str(value)) < 1:
            continue
        applicable.append(mode)
    if not applicable:
        raise ValidationError(
            f"no applicable categorical corruption for value {value!r} "
            f"with {len(categories)} categories"
        )
    return applicable[int(rng.integers(len(applicable)))]


def corrupt_table(
    table: RawTable, schema: Schema, cfg: CorruptionConfig, rng_seed: int | None = None
) -> CorruptedTable:
    """Corrupt a fraction of rows and record exactly what changed.

    Each corrupted row derives its random substream from (seed, row index),
    so results are independent of iteration schedule.
    """
    if not schema.is_fitted:
        raise ValidationError("corruption requires a fitted schema")
    seed = cfg.seed if rng_seed is None else rng_seed
    n, d = table.n_rows, schema.d_total
    mask = np.zeros((n, d), dtype=np.int8)
    originals: dict[tuple[int, str], object] = {}
    dirty = table.copy()

    rows = select_rows(n, cfg.row_fraction, np.random.default_rng([seed, 0]))
    for i in rows.tolist():
        row_rng = np.random.default_rng([seed, 1, i])
        for d_idx in select_cells(d, row_rng).tolist():
            spec = schema.attributes[d_idx]
            original = dirty.columns[spec.name][i]
            if spec.kind is Kind.NUMERIC:
                x = parse_number(original)
                if x is None:
                    raise ValidationError(f"cell ({i}, {spec.name!r}) is not numeric")
                corrupted: object = corrupt_numeric(x, spec.std_dev, cfg, row_rng)
            else:
                mode = _pick_mode(original, spec.categories, cfg, row_rng)
                corrupted = corrupt_categorical(original, spec.categories, mode, row_rng)
            dirty.columns[spec.name][i] = corrupted
            originals[(i, spec.name)] = original
            mask[i, d_idx] = 1
    return CorruptedTable(table=dirty, mask=mask, originals=originals)


def corrupt_encoded(
    batch: np.ndarray,
    schema: Schema,
    layout: Layout,
    cfg: CorruptionConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Corrupt an already-encoded mini-batch in place of the raw protocol.

    Used inside the denoising training loop where fresh noise is drawn per
    batch: numeric spans get the raw-scale noise divided by the attribute
    std, category swaps move the one-hot, typos zero the span (the encoding
    of any out-of-vocabulary value). Returns (corrupted copy, (B, D) mask).
    """
    b, d = batch.shape[0], schema.d_total
    mask = np.zeros((b, d), dtype=np.int8)
    out = batch.copy()
    if cfg.row_fraction <= 0.0:
        return out, mask
    rows = select_rows(b, cfg.row_fraction, rng)
    for i in rows.tolist():
        for d_idx in select_cells(d, rng).tolist():
            spec = schema.attributes[d_idx]
            start, width = layout.spans[d_idx]
            if spec.kind is Kind.NUMERIC:
                out[i, start] += draw_numeric_noise(spec.std_dev, cfg, rng) / spec.std_dev
            else:
                span = out[i, start : start + width]
                current = int(np.argmax(span)) if span.any() else None
                mode = _pick_encoded_mode(width, cfg, rng)
                span[:] = 0.0
                if mode is CategoricalMode.SWAP_CATEGORY and current is not None:
                    shift = int(rng.integers(1, width))
                    span[(current + shift) % width] = 1.0
                # typo synthesis: all-zeros span, nothing more to do
            mask[i, d_idx] = 1
    return out, mask


def _pick_encoded_mode(
    width: int, cfg: CorruptionConfig, rng: np.random.Generator
) -> CategoricalMode:
    applicable = [
        m
        for m in cfg.categorical_modes
        if not (m is CategoricalMode.SWAP_CATEGORY and width < 2)
    ]
    if not applicable:
        return CategoricalMode.TYPO_SYNTHESIS
    return applicable[int(rng.integers(len(applicable)))]
