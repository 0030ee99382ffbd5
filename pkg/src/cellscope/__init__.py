"""Cell-level anomaly detection, localization and repair suggestions for
mixed-type tabular data."""

from .backend import BACKEND_NAME, available_backends
from .corrupt import CategoricalMode, CorruptedTable, CorruptionConfig, NoiseFamily, corrupt_table
from .explain import Explanation, LatentMap, build_latent_index, explain, latent_map, top_k
from .metrics import (
    EvalReport,
    ExperimentConfig,
    GroundTruth,
    average_precision,
    evaluate,
    precision_at_k,
    run_experiment,
)
from .models import (
    ModelKind,
    TrainedModel,
    fit_marginals,
    fit_pca,
    load_checkpoint,
    save_checkpoint,
    train_ae,
    train_dae,
)
from .nn import TrainConfig
from .schema import (
    AttributeSpec,
    Kind,
    RawTable,
    Schema,
    decode,
    encode,
    fit_encoder,
    infer_schema,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSpec",
    "BACKEND_NAME",
    "CategoricalMode",
    "CorruptedTable",
    "CorruptionConfig",
    "EvalReport",
    "Explanation",
    "ExperimentConfig",
    "GroundTruth",
    "Kind",
    "LatentMap",
    "ModelKind",
    "NoiseFamily",
    "RawTable",
    "Schema",
    "TrainConfig",
    "TrainedModel",
    "available_backends",
    "average_precision",
    "build_latent_index",
    "corrupt_table",
    "decode",
    "encode",
    "evaluate",
    "explain",
    "fit_encoder",
    "fit_marginals",
    "fit_pca",
    "infer_schema",
    "latent_map",
    "load_checkpoint",
    "precision_at_k",
    "run_experiment",
    "save_checkpoint",
    "top_k",
    "train_ae",
    "train_dae",
]
