"""Command-line pipeline driver: corrupt, train, evaluate, explain, serve,
and a declarative multi-seed experiment runner.

Option values resolve in order: built-in default < config file (flat
KEY=VALUE lines via --config) < CELLSCOPE_* environment variable <
explicit command-line flag. Exit codes: 0 success, 2 validation error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import metrics, models, nn
from .corrupt import (
    CategoricalMode,
    CorruptionConfig,
    NoiseFamily,
    corrupt_table,
    load_mask,
    load_originals,
)
from .errors import DivergenceError, ValidationError
from .explain import build_latent_index, explain
from .metrics import EvalReport, ExperimentConfig, GroundTruth, run_experiment
from .schema import Kind, RawTable, Schema, encode, fit_encoder, infer_schema

ENV_PREFIX = "CELLSCOPE_"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def load_config_file(path: str) -> dict[str, str]:
    """Flat KEY=VALUE lines; # starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{line_no}: expected KEY=VALUE")
            key, value = line.split("=", 1)
            out[key.strip().lower()] = value.strip()
    return out


class Options:
    """Layered option lookup: CLI flag > env > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: dict[str, str] = {}
        config_path = getattr(args, "config", None) or os.environ.get(ENV_PREFIX + "CONFIG")
        if config_path:
            self.file = load_config_file(config_path)

    def get(self, name: str, default=None, cast=str):
        value = getattr(self.args, name, None)
        if value is None:
            value = os.environ.get(ENV_PREFIX + name.upper())
        if value is None:
            value = self.file.get(name)
        if value is None:
            return default
        if cast is bool and isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return cast(value)


def parse_overrides(text: str | None) -> dict[str, Kind] | None:
    if not text:
        return None
    out: dict[str, Kind] = {}
    for part in text.split(","):
        if ":" not in part:
            raise ValidationError(f"override {part!r} must look like column:kind")
        name, kind = part.split(":", 1)
        out[name.strip()] = Kind(kind.strip().lower())
    return out


def parse_widths(text: str | None) -> tuple[int, ...] | None:
    if not text:
        return None
    return tuple(int(w) for w in text.replace("x", "-").split("-"))


def parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _corruption_from(opts: Options, seed_default: int = 0) -> CorruptionConfig:
    families = opts.get("families", "gaussian,laplace,log_normal")
    modes = opts.get("modes", "swap_category,typo_synthesis")
    return CorruptionConfig(
        row_fraction=opts.get("fraction", 0.03, float),
        noise_scale_range=(
            opts.get("scale_low", 3.0, float),
            opts.get("scale_high", 5.0, float),
        ),
        noise_families=tuple(NoiseFamily(f.strip()) for f in families.split(",")),
        categorical_modes=tuple(CategoricalMode(m.strip()) for m in modes.split(",")),
        seed=opts.get("seed", seed_default, int),
    )


def _load_schema(opts: Options, table: RawTable) -> Schema:
    path = opts.get("schema")
    if path:
        return Schema.load(path)
    return fit_encoder(table, infer_schema(table, parse_overrides(opts.get("overrides"))))


# -- subcommands -------------------------------------------------------------


def cmd_corrupt(args: argparse.Namespace) -> int:
    opts = Options(args)
    table = RawTable.from_csv(args.data)
    schema = _load_schema(opts, table)
    cfg = _corruption_from(opts)
    corrupted = corrupt_table(table, schema, cfg)

    out_dir = opts.get("out_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, "corrupted.csv")
    mask_path = os.path.join(out_dir, "mask.csv")
    originals_path = os.path.join(out_dir, "originals.csv")
    corrupted.table.to_csv(data_path)
    corrupted.save_mask(mask_path)
    corrupted.save_originals(originals_path)
    if not opts.get("schema"):
        schema.save(os.path.join(out_dir, "schema.json"))
    n_rows = int(corrupted.row_flags.sum())
    print(f"corrupted {n_rows} rows ({n_rows / table.n_rows:.2%}) -> {data_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    opts = Options(args)
    table = RawTable.from_csv(args.data)
    schema = _load_schema(opts, table)
    encoded = encode(table, schema)
    kind = args.kind
    seed = opts.get("seed", 0, int)
    log_every = opts.get("log_every", 50, int)

    def progress(epoch: int, loss: float) -> None:
        if log_every and (epoch % log_every == 0 or epoch == train_cfg.max_epochs - 1):
            print(f"epoch {epoch:5d}  loss {loss:.6f}")

    train_cfg = nn.TrainConfig(
        max_epochs=opts.get("epochs", 5000, int),
        batch_size=opts.get("batch_size", 128, int),
        base_lr=opts.get("lr", 1e-3, float),
        seed=seed,
    )
    widths = parse_widths(opts.get("widths"))
    if kind == "ae":
        model = models.train_ae(encoded, schema, train_cfg, widths=widths, progress=progress)
    elif kind == "dae":
        corr = _corruption_from(opts, seed_default=seed)
        loss_mode = opts.get("loss", "plain")
        model = models.train_dae(
            encoded, schema, corr, loss_mode, train_cfg, widths=widths, progress=progress
        )
    elif kind == "pca":
        model = models.fit_pca(
            encoded, schema, variance_target=opts.get("variance_target", 0.90, float)
        )
    elif kind == "marginals":
        model = models.fit_marginals(table, schema, encoded=encoded, seed=seed)
    else:
        raise ValidationError(f"unknown model kind {kind!r}")

    models.save_checkpoint(model, args.out)
    print(f"saved {model.kind.value} checkpoint -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    opts = Options(args)
    table = RawTable.from_csv(args.data)
    mask = load_mask(args.mask, table.names)
    originals = load_originals(args.originals)
    truth = GroundTruth(row_labels=mask.any(axis=1), mask=mask, originals=originals)

    reports: list[EvalReport] = []
    for path in args.checkpoint:
        model = models.load_checkpoint(path)
        if model.schema.names != table.names:
            raise ValidationError(
                f"checkpoint {path}: schema columns {model.schema.names} "
                f"do not match data columns {table.names}"
            )
        report = metrics.evaluate(
            model,
            table,
            truth,
            k=opts.get("k", None, int),
            ranking=opts.get("ranking", "confidence"),
        )
        reports.append(report)

    if truth.n_anomalies == 0:
        print("mask has no corrupted rows: ranking metrics not applicable")
    for r in reports:
        print(_format_report(r))
    if len(reports) > 1:
        print("aggregate over checkpoints (mean +- std):")
        for kind, agg in metrics.aggregate_reports(reports).items():
            parts = []
            for name, (mean, std) in agg.items():
                if mean is not None:
                    parts.append(f"{name}={mean:.3f}+-{std:.3f}")
            print(f"  {kind}: " + "  ".join(parts))

    out_json = opts.get("out_json")
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2)
            fh.write("\n")
    out_csv = opts.get("out_csv")
    if out_csv:
        import csv as _csv

        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(["model_kind", "seed", *EvalReport.METRIC_NAMES])
            for r in reports:
                writer.writerow(
                    [r.model_kind, r.seed] + [getattr(r, m) for m in EvalReport.METRIC_NAMES]
                )
    return EXIT_OK


def _format_report(r: EvalReport) -> str:
    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    return (
        f"{r.model_kind}: P@{r.k}={fmt(r.p_at_k)}  mAP(cat)={fmt(r.map_categorical)}  "
        f"mAP(num)={fmt(r.map_numeric)}  mEV(cat)={fmt(r.mev_categorical)}  "
        f"mEV(num,log)={fmt(r.mev_numeric_log)}"
    )


def cmd_explain(args: argparse.Namespace) -> int:
    opts = Options(args)
    model = models.load_checkpoint(args.checkpoint)
    table = RawTable.from_csv(args.data)
    if not 0 <= args.row < table.n_rows:
        raise ValidationError(f"row {args.row} out of range [0, {table.n_rows})")
    encoded = encode(table, model.schema)
    index = build_latent_index(model, encoded)
    explanation = explain(model, table.row(args.row), index, row_id=args.row)
    doc = explanation.to_dict(model.schema)
    out = opts.get("out")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"wrote explanation -> {out}")
    else:
        json.dump(doc, sys.stdout, indent=2)
        print()
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    opts = Options(args)
    model = models.load_checkpoint(args.checkpoint)
    table = RawTable.from_csv(args.data)
    frontend = opts.get("frontend")
    if frontend and not os.path.isdir(frontend):
        raise ValidationError(f"frontend directory not found: {frontend}")
    serve(
        model,
        table,
        host=opts.get("host", "127.0.0.1"),
        port=opts.get("port", 8000, int),
        frontend_dir=frontend,
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    opts = Options(args)
    data_csv = opts.get("data")
    if not data_csv:
        raise ValidationError("experiment needs data=<csv> (flag, env or config file)")
    regimes = opts.get("regimes", ",".join(metrics.REGIMES))
    cfg = ExperimentConfig(
        data_csv=data_csv,
        regimes=tuple(r.strip() for r in regimes.split(",") if r.strip()),
        seeds=parse_int_list(opts.get("seeds", "0,1,2,3,4")),
        corruption=_corruption_from(opts),
        train=nn.TrainConfig(
            max_epochs=opts.get("epochs", 300, int),
            batch_size=opts.get("batch_size", 128, int),
            base_lr=opts.get("lr", 1e-3, float),
        ),
        split_seed=opts.get("split_seed", 0, int),
        train_fraction=opts.get("train_fraction", 0.7, float),
        overrides=parse_overrides(opts.get("overrides")),
        widths=parse_widths(opts.get("widths")),
        subsample=opts.get("subsample", None, int),
        ranking=opts.get("ranking", "confidence"),
    )
    result = run_experiment(cfg)
    for kind, agg in result.aggregates.items():
        parts = []
        for name, (mean, std) in agg.items():
            if mean is not None:
                parts.append(f"{name}={mean:.3f}+-{std:.3f}")
        print(f"{kind}: " + "  ".join(parts))
    out_json = opts.get("out_json")
    if out_json:
        result.save_json(out_json)
    out_csv = opts.get("out_csv")
    if out_csv:
        result.save_csv(out_csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellscope",
        description="Cell-level anomaly detection and explanation for mixed-type tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat KEY=VALUE config file")

    p = sub.add_parser("corrupt", help="inject labeled cell errors into a CSV")
    p.add_argument("data", help="clean input CSV")
    p.add_argument("--schema", help="fitted schema JSON (inferred from data when omitted)")
    p.add_argument("--overrides", help="column kind overrides, e.g. id:categorical,age:numeric")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--fraction", type=float, help="share of rows to corrupt (default 0.03)")
    p.add_argument("--scale-low", dest="scale_low", type=float)
    p.add_argument("--scale-high", dest="scale_high", type=float)
    p.add_argument("--families", help="comma list: gaussian,laplace,log_normal")
    p.add_argument("--modes", help="comma list: swap_category,typo_synthesis")
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="train a detector and write a checkpoint")
    p.add_argument("data", help="training CSV (clean for dae, as-is for the rest)")
    p.add_argument("--kind", required=True, choices=["ae", "dae", "pca", "marginals"])
    p.add_argument("--loss", choices=["plain", "enhanced"], help="dae loss (default plain)")
    p.add_argument("--schema")
    p.add_argument("--overrides")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--widths", help="layer widths, e.g. 160-128-64-128-160")
    p.add_argument("--fraction", type=float, help="dae: corruption row fraction")
    p.add_argument("--scale-low", dest="scale_low", type=float)
    p.add_argument("--scale-high", dest="scale_high", type=float)
    p.add_argument("--families")
    p.add_argument("--modes")
    p.add_argument("--variance-target", dest="variance_target", type=float, help="pca")
    p.add_argument("--log-every", dest="log_every", type=int)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score checkpoints against a corrupted CSV")
    p.add_argument("--checkpoint", action="append", required=True)
    p.add_argument("--data", required=True, help="corrupted CSV")
    p.add_argument("--mask", required=True, help="0/1 mask CSV")
    p.add_argument("--originals", required=True, help="(row, attribute, value) CSV")
    p.add_argument("--k", type=int)
    p.add_argument("--ranking", choices=["confidence", "loss"])
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="explain one row of a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--row", type=int, required=True)
    p.add_argument("--out", help="write the explanation JSON here instead of stdout")
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="serve the screening API over HTTP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--frontend", help="serve the built dashboard from this directory at /")
    common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("experiment", help="run a declarative multi-seed experiment")
    p.add_argument("--config", help="experiment config file (KEY=VALUE lines)")
    p.add_argument("--data")
    p.add_argument("--regimes")
    p.add_argument("--seeds")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--fraction", type=float)
    p.add_argument("--scale-low", dest="scale_low", type=float)
    p.add_argument("--scale-high", dest="scale_high", type=float)
    p.add_argument("--families")
    p.add_argument("--modes")
    p.add_argument("--seed", type=int, help="corruption seed")
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--overrides")
    p.add_argument("--widths")
    p.add_argument("--subsample", type=int)
    p.add_argument("--ranking", choices=["confidence", "loss"])
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
