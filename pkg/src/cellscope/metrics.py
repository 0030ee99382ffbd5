"""Evaluation suite: precision at K, per-attribute average precision, and
expected-value error (variance-normalized squared error for numerics,
Brier score for categoricals), plus the multi-seed experiment runner.

Ranking metrics are computed with exact integer/rational arithmetic and
converted to float once at the end, so results are reproducible to the
last bit and proof-checkable against brute-force oracles.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping
from fractions import Fraction

import numpy as np

from . import models, nn
from .backend import span_softmax
from .explain import confidence_matrix, top_k
from .corrupt import CorruptedTable, CorruptionConfig, corrupt_table
from .errors import (
    DatasetMissingError,
    NoPositivesError,
    ShapeMismatchError,
    ValidationError,
)
from .schema import Kind, RawTable, Schema, encode, fit_encoder, infer_schema, parse_number


@dataclass
class GroundTruth:
    """Row labels + cell mask + clean originals, as produced by the corruptor."""

    row_labels: np.ndarray  # (N,) bool
    mask: np.ndarray  # (N, D) {0,1}
    originals: dict[tuple[int, str], object]

    @classmethod
    def from_corrupted(cls, corrupted: CorruptedTable) -> "GroundTruth":
        return cls(
            row_labels=corrupted.row_flags, mask=corrupted.mask, originals=corrupted.originals
        )

    @property
    def n_anomalies(self) -> int:
        return int(self.row_labels.sum())


@dataclass
class EvalReport:
    model_kind: str
    k: int
    p_at_k: float | None
    map_categorical: float | None
    map_numeric: float | None
    mev_categorical: float | None
    mev_numeric: float | None
    mev_numeric_log: float | None
    per_attribute_ap: dict[str, float | None]
    per_attribute_ev: dict[str, float | None]
    ranking: str = "confidence"
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    METRIC_NAMES = (
        "p_at_k",
        "map_categorical",
        "map_numeric",
        "mev_categorical",
        "mev_numeric_log",
    )

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "seed": self.seed,
            "k": self.k,
            "ranking": self.ranking,
            "p_at_k": self.p_at_k,
            "map_categorical": self.map_categorical,
            "map_numeric": self.map_numeric,
            "mev_categorical": self.mev_categorical,
            "mev_numeric": self.mev_numeric,
            "mev_numeric_log": self.mev_numeric_log,
            "per_attribute_ap": self.per_attribute_ap,
            "per_attribute_ev": self.per_attribute_ev,
            **self.extra,
        }


def precision_at_k(truth, scores, k: int | None = None) -> float:
    """Fraction of true anomalies among the k top-scored rows.

    ``k`` defaults to the number of true anomalies. Ties are broken by
    ascending row index, matching top-k selection everywhere else.
    """
    truth = np.asarray(truth).astype(bool)
    scores = np.asarray(scores, dtype=float)
    if truth.shape != scores.shape:
        raise ShapeMismatchError("labels and scores must align")
    if not np.isfinite(scores).all():
        raise ValidationError("scores must be finite")
    if k is None:
        k = int(truth.sum())
    if k < 1:
        raise ValidationError("k must be >= 1")
    top = top_k(scores, min(k, len(scores)))
    return float(Fraction(int(truth[top].sum()), k))


def average_precision(confidences, labels) -> float:
    """Step-integrated area under the precision-recall curve.

    Thresholds descend over distinct confidence values with ties grouped;
    the sum of (recall increment) * precision is accumulated as an exact
    rational and converted to float once.
    """
    confidences = np.asarray(confidences, dtype=float)
    labels = np.asarray(labels).astype(np.int64)
    if confidences.shape != labels.shape or confidences.ndim != 1:
        raise ShapeMismatchError("confidences and labels must be aligned 1-D arrays")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositivesError("no positive labels: average precision undefined")

    order = np.argsort(-confidences, kind="stable")
    sorted_conf = confidences[order]
    sorted_labels = labels[order]
    # group boundaries: last position of every distinct confidence value
    boundary = np.nonzero(np.diff(sorted_conf))[0]
    group_ends = np.append(boundary, len(sorted_conf) - 1)
    tp_cum = np.cumsum(sorted_labels)[group_ends]
    pred_cum = group_ends + 1

    total = Fraction(0)
    prev_tp = 0
    for tp, pred in zip(tp_cum.tolist(), pred_cum.tolist()):
        if tp > prev_tp:
            total += Fraction((tp - prev_tp) * tp, pred)
        prev_tp = tp
    return float(total / n_pos)


def expected_value_error_numeric(originals, reconstructions, sigma_d: float) -> float:
    """Mean squared repair error over corrupted cells, normalized by variance."""
    x_o = np.asarray(originals, dtype=float)
    x_hat = np.asarray(reconstructions, dtype=float)
    if x_o.shape != x_hat.shape or x_o.size == 0:
        raise ValidationError("need aligned, non-empty original/reconstruction arrays")
    if sigma_d <= 0:
        raise ValidationError("sigma_d must be > 0")
    return float(((x_o - x_hat) ** 2).mean() / (sigma_d * sigma_d))


def expected_value_error_categorical(original_onehots, predicted_spans) -> float:
    """Brier score between clean one-hots and predicted probability spans, in [0, 1]."""
    t = np.atleast_2d(np.asarray(original_onehots, dtype=float))
    p = np.atleast_2d(np.asarray(predicted_spans, dtype=float))
    if t.shape != p.shape or t.size == 0:
        raise ValidationError("need aligned, non-empty one-hot/probability arrays")
    return float(((t - p) ** 2).sum() / (2.0 * t.shape[0]))


def cell_scores(model: models.TrainedModel, encoded: np.ndarray) -> np.ndarray:
    """(B, D) per-cell anomaly scores for any model kind.

    Network and PCA models score by the reconstruction-based confidences;
    marginals score by per-attribute negative log-likelihood.
    """
    if model.kind is models.ModelKind.MARGINALS:
        return models.marginal_cell_score(model, encoded)
    recon = models.reconstruct(model, encoded)
    return confidence_matrix(recon, encoded, model.schema.layout())


def row_scores(
    model: models.TrainedModel, encoded: np.ndarray, ranking: str = "confidence"
) -> np.ndarray:
    """Row anomaly scores: summed cell scores, or raw per-row reconstruction loss."""
    if ranking == "confidence":
        return cell_scores(model, encoded).sum(axis=1)
    if ranking == "loss":
        if not model.is_network:
            raise ValidationError("loss ranking requires a network model")
        layout = model.schema.layout()
        recon = models.reconstruct(model, encoded)
        terms = nn.loss_terms(recon, np.asarray(encoded, dtype=np.float64), layout)
        return terms.sum(axis=1)
    raise ValidationError(f"unknown ranking {ranking!r}")


def evaluate(
    model: models.TrainedModel,
    corrupted: RawTable,
    truth: GroundTruth,
    k: int | None = None,
    ranking: str = "confidence",
    seed: int | None = None,
) -> EvalReport:
    """Score a trained model on a corrupted table against its ground truth."""
    schema = model.schema
    layout = schema.layout()
    if corrupted.n_rows != len(truth.row_labels) or truth.mask.shape != (
        corrupted.n_rows,
        schema.d_total,
    ):
        raise ShapeMismatchError("ground truth does not align with the table")
    x = encode(corrupted, schema)
    scores = cell_scores(model, x)
    row = scores.sum(axis=1) if ranking == "confidence" else row_scores(model, x, ranking)
    recon = models.reconstruct(model, x)

    n_anom = truth.n_anomalies
    k_eff = n_anom if k is None else k
    p_k = precision_at_k(truth.row_labels, row, k_eff) if k_eff >= 1 else None

    ap: dict[str, float | None] = {}
    ev: dict[str, float | None] = {}
    cat_probs = (
        recon
        if model.kind is models.ModelKind.MARGINALS
        else span_softmax(recon, layout.cat_starts, layout.cat_widths)
    )
    for d_idx, (spec, (start, width)) in enumerate(zip(schema.attributes, layout.spans)):
        labels = truth.mask[:, d_idx]
        rows_hit = np.nonzero(labels)[0]
        if len(rows_hit) == 0:
            ap[spec.name] = None
            ev[spec.name] = None
            continue
        ap[spec.name] = average_precision(scores[:, d_idx], labels)
        if spec.kind is Kind.NUMERIC:
            x_o = np.array(
                [_original_number(truth, int(i), spec.name) for i in rows_hit]
            )
            x_hat = recon[rows_hit, start] * spec.std_dev + spec.mean
            ev[spec.name] = expected_value_error_numeric(x_o, x_hat, spec.std_dev)
        else:
            onehots = np.zeros((len(rows_hit), width))
            for r, i in enumerate(rows_hit):
                j = spec.category_index(str(truth.originals[(int(i), spec.name)]))
                if j is not None:
                    onehots[r, j] = 1.0
            ev[spec.name] = expected_value_error_categorical(
                onehots, cat_probs[rows_hit, start : start + width]
            )

    def _mean(names: list[str], values: dict) -> float | None:
        picked = [values[n] for n in names if values[n] is not None]
        return float(np.mean(picked)) if picked else None

    cat_names = [a.name for a in schema.attributes if a.kind is Kind.CATEGORICAL]
    num_names = [a.name for a in schema.attributes if a.kind is Kind.NUMERIC]
    mev_num = _mean(num_names, ev)
    return EvalReport(
        model_kind=model.kind.value,
        k=k_eff,
        p_at_k=p_k,
        map_categorical=_mean(cat_names, ap),
        map_numeric=_mean(num_names, ap),
        mev_categorical=_mean(cat_names, ev),
        mev_numeric=mev_num,
        mev_numeric_log=math.log(mev_num) if mev_num else None,
        per_attribute_ap=ap,
        per_attribute_ev=ev,
        ranking=ranking,
        seed=seed,
        extra={"n_anomalies": n_anom, "n_rows": corrupted.n_rows},
    )


def _original_number(truth: GroundTruth, row: int, name: str) -> float:
    value = parse_number(truth.originals[(row, name)])
    if value is None:
        raise ValidationError(f"original value at ({row}, {name!r}) is not numeric")
    return value


# -- experiment runner ---------------------------------------------------------

REGIMES = ("pca", "marginals", "ae_dirty", "ae_clean", "dae", "dae_enhanced")


@dataclass
class ExperimentConfig:
    """Declarative description of one Table-style experiment."""

    data_csv: str
    regimes: tuple[str, ...] = REGIMES
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    corruption: CorruptionConfig = field(default_factory=CorruptionConfig)
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    split_seed: int = 0
    train_fraction: float = 0.7
    overrides: dict[str, str] | None = None
    widths: tuple[int, ...] | None = None
    subsample: int | None = None
    pca_variance_target: float = 0.90
    ranking: str = "confidence"

    def __post_init__(self):
        bad = set(self.regimes) - set(REGIMES)
        if bad:
            raise ValidationError(f"unknown regimes: {sorted(bad)}")


@dataclass
class ExperimentResult:
    config_summary: dict
    reports: list[EvalReport]
    aggregates: dict[str, dict[str, tuple[float | None, float | None]]]

    def to_dict(self) -> dict:
        return {
            "config": self.config_summary,
            "reports": [r.to_dict() for r in self.reports],
            "aggregates": {
                kind: {m: {"mean": mv, "std": sv} for m, (mv, sv) in metrics.items()}
                for kind, metrics in self.aggregates.items()
            },
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["model_kind", "seed", *EvalReport.METRIC_NAMES])
            for r in self.reports:
                writer.writerow(
                    [r.model_kind, r.seed] + [getattr(r, m) for m in EvalReport.METRIC_NAMES]
                )


def split_table(
    table: RawTable, train_fraction: float, split_seed: int, subsample: int | None = None
) -> tuple[RawTable, RawTable, dict]:
    rng = np.random.default_rng([split_seed, 0])
    n = table.n_rows
    perm = rng.permutation(n)
    if subsample is not None and subsample < n:
        perm = perm[:subsample]
        n = subsample
    n_train = int(round(train_fraction * n))
    info = {"split_seed": split_seed, "n_train": n_train, "n_test": n - n_train}
    return table.subset(perm[:n_train]), table.subset(perm[n_train:]), info


def _prepare_data(cfg: ExperimentConfig):
    if not os.path.exists(cfg.data_csv):
        raise DatasetMissingError(f"dataset not found: {cfg.data_csv}")
    table = RawTable.from_csv(cfg.data_csv)
    clean_train, clean_test, split_info = split_table(
        table, cfg.train_fraction, cfg.split_seed, cfg.subsample
    )
    # Generation-side schema: fitted on the clean data to draw noise with the
    # true attribute scales. Model-side schemas are fitted per regime below.
    ref_schema = fit_encoder(clean_train, infer_schema(clean_train, cfg.overrides))
    base = cfg.corruption.seed
    dirty_train = corrupt_table(clean_train, ref_schema, cfg.corruption, rng_seed=base * 2 + 1)
    dirty_test = corrupt_table(clean_test, ref_schema, cfg.corruption, rng_seed=base * 2 + 2)
    return clean_train, dirty_train, dirty_test, ref_schema, split_info


def train_regime(
    regime: str,
    clean_train: RawTable,
    dirty_train: CorruptedTable,
    cfg: ExperimentConfig,
    seed: int,
    kinds: Mapping[str, Kind] | None = None,
) -> models.TrainedModel:
    """Fit one Table-row model: the regime picks the training data and kind.

    ``kinds`` carries the dataset's declared column kinds into schema
    inference on dirty tables, where injected typos would otherwise make a
    categorical column look mixed.
    """
    kinds = dict(kinds or {})
    kinds.update(cfg.overrides or {})
    train_cfg = replace(cfg.train, seed=seed)

    def fit_widths(schema: Schema) -> tuple[int, ...] | None:
        # regimes fitted on dirty data grow extra vocabulary (typos), so the
        # input/output widths track the regime's encoded width and only the
        # hidden shape is shared
        if cfg.widths is None:
            return None
        e = schema.encoded_width
        return (e, *cfg.widths[1:-1], e)

    if regime in ("pca", "marginals", "ae_dirty"):
        schema = fit_encoder(dirty_train.table, infer_schema(dirty_train.table, kinds))
        x = encode(dirty_train.table, schema)
        if regime == "pca":
            return models.fit_pca(x, schema, variance_target=cfg.pca_variance_target)
        if regime == "marginals":
            return models.fit_marginals(dirty_train.table, schema, encoded=x, seed=seed)
        return models.train_ae(x, schema, train_cfg, widths=fit_widths(schema))
    schema = fit_encoder(clean_train, infer_schema(clean_train, kinds))
    x = encode(clean_train, schema)
    if regime == "ae_clean":
        return models.train_ae(x, schema, train_cfg, widths=fit_widths(schema))
    loss_mode = "enhanced" if regime == "dae_enhanced" else "plain"
    return models.train_dae(
        x, schema, cfg.corruption, loss_mode, train_cfg, widths=fit_widths(schema)
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Train and evaluate every (regime, seed) cell, then aggregate mean +- std."""
    clean_train, dirty_train, dirty_test, ref_schema, split_info = _prepare_data(cfg)
    kinds = {a.name: a.kind for a in ref_schema.attributes}
    truth = GroundTruth.from_corrupted(dirty_test)
    reports = []
    for regime in cfg.regimes:
        for seed in cfg.seeds:
            model = train_regime(regime, clean_train, dirty_train, cfg, seed, kinds=kinds)
            report = evaluate(
                model, dirty_test.table, truth, ranking=cfg.ranking, seed=seed
            )
            report.model_kind = regime
            reports.append(report)
    aggregates = aggregate_reports(reports)
    summary = {
        "data_csv": cfg.data_csv,
        "regimes": list(cfg.regimes),
        "seeds": list(cfg.seeds),
        "ranking": cfg.ranking,
        **split_info,
    }
    return ExperimentResult(config_summary=summary, reports=reports, aggregates=aggregates)


def aggregate_reports(
    reports: list[EvalReport],
) -> dict[str, dict[str, tuple[float | None, float | None]]]:
    by_kind: dict[str, list[EvalReport]] = {}
    for r in reports:
        by_kind.setdefault(r.model_kind, []).append(r)
    out: dict[str, dict[str, tuple[float | None, float | None]]] = {}
    for kind, group in by_kind.items():
        metrics: dict[str, tuple[float | None, float | None]] = {}
        for name in EvalReport.METRIC_NAMES:
            values = [getattr(r, name) for r in group if getattr(r, name) is not None]
            if values:
                metrics[name] = (float(np.mean(values)), float(np.std(values)))
            else:
                metrics[name] = (None, None)
        out[kind] = metrics
    return out
