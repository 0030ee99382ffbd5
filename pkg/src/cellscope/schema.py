"""Mixed-type data model and the reversible raw-table <-> numeric encoding.

A table column is either categorical (closed vocabulary, one-hot encoded)
or numeric (standardized to zero mean, unit std). The fitted
:class:`Schema` is the single source of truth for encoding widths, loss
routing and de-standardization; it is immutable once fitted and safe to
share across workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstantColumnError,
    EmptyTableError,
    MixedColumnError,
    SchemaMismatchError,
    ShapeMismatchError,
    ValidationError,
)


class Kind(str, Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


def parse_number(value) -> float | None:
    """Parse a cell as a finite float, or return None."""
    if isinstance(value, (int, float)):
        x = float(value)
        return x if math.isfinite(x) else None
    try:
        x = float(str(value).strip())
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class AttributeSpec:
    """Declared type of one column, plus its fitted encoding parameters.

    For categorical attributes ``categories`` is the closed vocabulary in
    first-occurrence order. For numeric attributes ``mean`` / ``std_dev``
    are fitted on the training split (population std, divisor N).
    """

    name: str
    kind: Kind
    categories: tuple[str, ...] = ()
    mean: float | None = None
    std_dev: float | None = None

    def __post_init__(self):
        if self.kind is Kind.CATEGORICAL:
            if not self.categories:
                raise ValidationError(f"categorical attribute {self.name!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise ValidationError(f"duplicate categories in attribute {self.name!r}")
        if self.std_dev is not None and self.std_dev <= 0:
            raise ConstantColumnError(f"attribute {self.name!r} has std_dev <= 0")

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind is Kind.CATEGORICAL else 1

    @property
    def is_fitted(self) -> bool:
        if self.kind is Kind.NUMERIC:
            return self.mean is not None and self.std_dev is not None
        return True

    def category_index(self, value: str) -> int | None:
        """Vocabulary position of ``value``, or None if out-of-vocabulary."""
        try:
            return self.categories.index(str(value))
        except ValueError:
            return None


@dataclass(frozen=True)
class Layout:
    """Per-attribute (start, width) spans into the encoded column space."""

    spans: tuple[tuple[int, int], ...]
    width: int
    # Index arrays consumed by the loss/score kernels.
    cat_starts: np.ndarray = field(repr=False, compare=False, default=None)
    cat_widths: np.ndarray = field(repr=False, compare=False, default=None)
    cat_attr_idx: np.ndarray = field(repr=False, compare=False, default=None)
    num_cols: np.ndarray = field(repr=False, compare=False, default=None)
    num_attr_idx: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class Schema:
    """Ordered attribute specs for one table."""

    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValidationError("attribute names must be unique")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def d_total(self) -> int:
        return len(self.attributes)

    @property
    def d_cat(self) -> int:
        return sum(1 for a in self.attributes if a.kind is Kind.CATEGORICAL)

    @property
    def d_num(self) -> int:
        return sum(1 for a in self.attributes if a.kind is Kind.NUMERIC)

    @property
    def encoded_width(self) -> int:
        return sum(a.width for a in self.attributes)

    @property
    def is_fitted(self) -> bool:
        return all(a.is_fitted for a in self.attributes)

    def __getitem__(self, i: int) -> AttributeSpec:
        return self.attributes[i]

    def layout(self) -> Layout:
        spans = []
        start = 0
        for a in self.attributes:
            spans.append((start, a.width))
            start += a.width
        cat_starts, cat_widths, cat_idx, num_cols, num_idx = [], [], [], [], []
        for d, (a, (st, w)) in enumerate(zip(self.attributes, spans)):
            if a.kind is Kind.CATEGORICAL:
                cat_starts.append(st)
                cat_widths.append(w)
                cat_idx.append(d)
            else:
                num_cols.append(st)
                num_idx.append(d)
        return Layout(
            spans=tuple(spans),
            width=start,
            cat_starts=np.asarray(cat_starts, dtype=np.int64),
            cat_widths=np.asarray(cat_widths, dtype=np.int64),
            cat_attr_idx=np.asarray(cat_idx, dtype=np.int64),
            num_cols=np.asarray(num_cols, dtype=np.int64),
            num_attr_idx=np.asarray(num_idx, dtype=np.int64),
        )

    # -- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        out = []
        for a in self.attributes:
            if a.kind is Kind.CATEGORICAL:
                out.append({"name": a.name, "kind": a.kind.value, "categories": list(a.categories)})
            else:
                out.append(
                    {"name": a.name, "kind": a.kind.value, "mean": a.mean, "std_dev": a.std_dev}
                )
        return {"version": 1, "attributes": out}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Schema":
        attrs = []
        for item in doc["attributes"]:
            kind = Kind(item["kind"])
            if kind is Kind.CATEGORICAL:
                attrs.append(
                    AttributeSpec(item["name"], kind, categories=tuple(item["categories"]))
                )
            else:
                attrs.append(
                    AttributeSpec(
                        item["name"], kind, mean=item.get("mean"), std_dev=item.get("std_dev")
                    )
                )
        return cls(tuple(attrs))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class RawTable:
    """Rectangular table of string/real cells keyed by column name.

    Cells read from CSV stay strings until an operation needs the numeric
    value, so untouched cells round-trip byte-identically.
    """

    def __init__(self, columns: Mapping[str, Sequence]):
        if not columns:
            raise EmptyTableError("table has no columns")
        self.columns: dict[str, list] = {k: list(v) for k, v in columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) != 1:
            raise ValidationError("table is not rectangular")
        self.n_rows = lengths.pop()
        if self.n_rows == 0:
            raise EmptyTableError("table has no rows")

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def row(self, i: int) -> list:
        return [self.columns[name][i] for name in self.columns]

    def subset(self, indices: Iterable[int]) -> "RawTable":
        idx = list(indices)
        return RawTable({name: [col[i] for i in idx] for name, col in self.columns.items()})

    def copy(self) -> "RawTable":
        return RawTable(self.columns)

    @classmethod
    def from_csv(cls, path) -> "RawTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyTableError(f"{path}: empty file") from None
            cols: dict[str, list] = {name: [] for name in header}
            if len(cols) != len(header):
                raise ValidationError(f"{path}: duplicate column names in header")
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise ValidationError(f"{path}:{line_no}: expected {len(header)} cells")
                for name, cell in zip(header, row):
                    cols[name].append(cell)
        return cls(cols)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.names)
            for i in range(self.n_rows):
                writer.writerow([_format_cell(v) for v in self.row(i)])


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def infer_schema(
    table: RawTable, overrides: Mapping[str, Kind | str] | None = None
) -> Schema:
    """Assign a kind to every column.

    Columns whose entries all parse as finite reals become numeric unless
    overridden; everything else becomes categorical with the vocabulary in
    first-occurrence order. A column that mixes parseable and unparseable
    entries needs an explicit override.
    """
    if table.n_rows < 2:
        raise EmptyTableError("need at least 2 rows to infer a schema")
    overrides = {k: Kind(v) for k, v in (overrides or {}).items()}
    unknown = set(overrides) - set(table.names)
    if unknown:
        raise ValidationError(f"override for unknown column(s): {sorted(unknown)}")

    attrs = []
    for name in table.names:
        col = table.columns[name]
        parsed = [parse_number(v) for v in col]
        n_numeric = sum(p is not None for p in parsed)
        forced = overrides.get(name)
        if forced is Kind.NUMERIC or (forced is None and n_numeric == len(col)):
            if n_numeric != len(col):
                raise MixedColumnError(
                    f"column {name!r} has {len(col) - n_numeric} non-numeric entries"
                )
            attrs.append(AttributeSpec(name, Kind.NUMERIC))
        elif forced is Kind.CATEGORICAL or n_numeric == 0:
            attrs.append(AttributeSpec(name, Kind.CATEGORICAL, categories=_collect(col)))
        else:
            raise MixedColumnError(
                f"column {name!r} mixes numeric and non-numeric entries; "
                f"pass an override to pick a kind"
            )
    return Schema(tuple(attrs))


def _collect(column: Sequence) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for v in column:
        seen.setdefault(str(v), None)
    return tuple(seen)


def fit_encoder(table: RawTable, schema: Schema) -> Schema:
    """Fit standardization statistics on ``table`` (population std, divisor N).

    Categorical specs pass through untouched; their vocabulary was frozen
    at inference time. Raises ConstantColumnError for zero-variance
    numeric columns.
    """
    _check_columns(table, schema)
    fitted = []
    for spec in schema.attributes:
        if spec.kind is Kind.CATEGORICAL:
            fitted.append(spec)
            continue
        values = np.array([_require_number(v, spec.name) for v in table.columns[spec.name]])
        mean = float(values.mean())
        std = float(values.std())
        if std == 0.0:
            raise ConstantColumnError(f"column {spec.name!r} is constant (std_dev = 0)")
        fitted.append(replace(spec, mean=mean, std_dev=std))
    return Schema(tuple(fitted))


def _require_number(value, name: str) -> float:
    x = parse_number(value)
    if x is None:
        raise MixedColumnError(f"column {name!r}: cannot parse {value!r} as a number")
    return x


def _check_columns(table: RawTable, schema: Schema) -> None:
    if table.names != schema.names:
        raise SchemaMismatchError(
            f"table columns {table.names} do not match schema columns {schema.names}"
        )


def encode(table: RawTable, schema: Schema) -> np.ndarray:
    """Encode a table into the (N, E) standardized + one-hot matrix.

    Numeric cells become (x - mean) / std_dev; categorical cells become a
    one-hot span. Out-of-vocabulary categories (e.g. synthesized typos)
    encode as the all-zeros span.
    """
    if not schema.is_fitted:
        raise ValidationError("schema must be fitted before encoding")
    _check_columns(table, schema)
    layout = schema.layout()
    out = np.zeros((table.n_rows, layout.width))
    for spec, (start, width) in zip(schema.attributes, layout.spans):
        col = table.columns[spec.name]
        if spec.kind is Kind.NUMERIC:
            values = np.array([_require_number(v, spec.name) for v in col])
            out[:, start] = (values - spec.mean) / spec.std_dev
        else:
            index = {c: j for j, c in enumerate(spec.categories)}
            for i, v in enumerate(col):
                j = index.get(str(v))
                if j is not None:
                    out[i, start + j] = 1.0
    return out


def encode_row(values: Sequence, schema: Schema) -> np.ndarray:
    """Encode a single raw row (values in attribute order) to a length-E vector."""
    if len(values) != schema.d_total:
        raise ShapeMismatchError(f"expected {schema.d_total} values, got {len(values)}")
    table = RawTable({a.name: [v] for a, v in zip(schema.attributes, values)})
    return encode(table, schema)[0]


def decode(reconstruction_row: np.ndarray, schema: Schema) -> list:
    """Decode one reconstructed length-E vector back to raw attribute values.

    Numeric spans are de-standardized; categorical spans decode to the
    highest-probability category under the softmax transform.
    """
    row = np.asarray(reconstruction_row, dtype=float).ravel()
    layout = schema.layout()
    if row.shape[0] != layout.width:
        raise ShapeMismatchError(f"expected width {layout.width}, got {row.shape[0]}")
    out = []
    for spec, (start, width) in zip(schema.attributes, layout.spans):
        if spec.kind is Kind.NUMERIC:
            out.append(float(row[start]) * spec.std_dev + spec.mean)
        else:
            out.append(spec.categories[int(np.argmax(row[start : start + width]))])
    return out


def decode_matrix(reconstruction: np.ndarray, schema: Schema) -> list[list]:
    return [decode(reconstruction[i], schema) for i in range(reconstruction.shape[0])]
