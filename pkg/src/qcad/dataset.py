"""Mixed-type tabular data: feature schema, CSV loading, encoding, scaling.

A :class:`Dataset` is an immutable column store. Contextual features may be
numeric or categorical (stored as integer codes with a code-to-label map);
behavioral features are always numeric. Behavioral columns are min-max scaled
before scoring and the scaling parameters are kept so raw values can be
recovered.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ROLE_CONTEXTUAL = "contextual"
ROLE_BEHAVIORAL = "behavioral"
KIND_NUMERIC = "numeric"
KIND_CATEGORICAL = "categorical"

#: Optional ground-truth column; excluded from both feature sets.
LABEL_COLUMN = "__anomaly__"


class LoadError(ValueError):
    """Raised when a CSV or schema file cannot be turned into a Dataset."""


class SchemaError(ValueError):
    """Raised when a feature schema violates its invariants."""


@dataclass(frozen=True)
class Feature:
    name: str
    role: str
    kind: str

    def __post_init__(self) -> None:
        if self.role not in (ROLE_CONTEXTUAL, ROLE_BEHAVIORAL):
            raise SchemaError(f"feature {self.name!r}: unknown role {self.role!r}")
        if self.kind not in (KIND_NUMERIC, KIND_CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declarations splitting columns into the two roles."""

    features: tuple[Feature, ...]

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dupes}")
        if LABEL_COLUMN in names:
            raise SchemaError(f"{LABEL_COLUMN} is reserved for ground-truth labels")
        if not self.contextual:
            raise SchemaError("schema needs at least one contextual feature")
        if not self.behavioral:
            raise SchemaError("schema needs at least one behavioral feature")
        for f in self.behavioral:
            if f.kind != KIND_NUMERIC:
                raise SchemaError(
                    f"behavioral feature {f.name!r} must be numeric, got {f.kind}"
                )

    @property
    def contextual(self) -> tuple[Feature, ...]:
        return tuple(f for f in self.features if f.role == ROLE_CONTEXTUAL)

    @property
    def behavioral(self) -> tuple[Feature, ...]:
        return tuple(f for f in self.features if f.role == ROLE_BEHAVIORAL)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)


def load_schema(path: str | Path) -> FeatureSchema:
    """Parse a schema file: one ``name,role,kind`` line per feature."""
    feats = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise LoadError(f"{path}:{lineno}: expected 'name,role,kind', got {raw!r}")
        try:
            feats.append(Feature(*parts))
        except SchemaError as exc:
            raise LoadError(f"{path}:{lineno}: {exc}") from exc
    try:
        return FeatureSchema(tuple(feats))
    except SchemaError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def save_schema(schema: FeatureSchema, path: str | Path) -> None:
    lines = [f"{f.name},{f.role},{f.kind}" for f in schema.features]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def label_encode(raw_column: Sequence[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Encode strings as integer codes in order of first appearance."""
    if len(raw_column) == 0:
        raise ValueError("cannot label-encode an empty column")
    mapping: dict[str, int] = {}
    codes = np.empty(len(raw_column), dtype=np.int64)
    for i, value in enumerate(raw_column):
        code = mapping.setdefault(value, len(mapping))
        codes[i] = code
    return codes, tuple(mapping)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-oriented table with normalization metadata.

    ``row_ids`` give each record a stable identity that survives row
    reordering; per-object random streams are keyed on them so scores do
    not depend on storage order.
    """

    schema: FeatureSchema
    columns: dict[str, np.ndarray]
    cat_labels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    norm_params: dict[str, tuple[float, float]] | None = None
    labels: np.ndarray | None = None
    row_ids: np.ndarray | None = None

    def __post_init__(self) -> None:
        if set(self.columns) != set(self.schema.names):
            missing = set(self.schema.names) - set(self.columns)
            extra = set(self.columns) - set(self.schema.names)
            raise ValueError(f"columns do not match schema (missing={missing}, extra={extra})")
        lengths = {name: len(col) for name, col in self.columns.items()}
        if len(set(lengths.values())) != 1:
            raise ValueError(f"column lengths differ: {lengths}")
        n = next(iter(lengths.values()))
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        for f in self.schema.features:
            col = self.columns[f.name]
            if f.kind == KIND_CATEGORICAL:
                if col.dtype != np.int64:
                    raise ValueError(f"categorical column {f.name!r} must hold int64 codes")
                labels = self.cat_labels.get(f.name)
                if labels is None:
                    raise ValueError(f"categorical column {f.name!r} lacks a code-to-label map")
                if col.size and (col.min() < 0 or col.max() >= len(labels)):
                    raise ValueError(f"categorical column {f.name!r} has codes outside the map")
            elif col.dtype != np.float64:
                raise ValueError(f"numeric column {f.name!r} must hold float64 values")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("label array length does not match columns")
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(n, dtype=np.int64))
        elif len(self.row_ids) != n:
            raise ValueError("row_ids length does not match columns")
        for arr in (*self.columns.values(), self.labels, self.row_ids):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.row_ids)

    @property
    def normalized(self) -> bool:
        return self.norm_params is not None

    def contextual_matrix(self) -> np.ndarray:
        """Contextual columns as a float64 matrix (codes cast as-is)."""
        cols = [self.columns[f.name].astype(np.float64) for f in self.schema.contextual]
        return np.column_stack(cols)

    def behavioral_matrix(self) -> np.ndarray:
        cols = [self.columns[f.name] for f in self.schema.behavioral]
        return np.column_stack(cols)

    def decode(self, name: str) -> list[str]:
        """Original string labels of a categorical column."""
        labels = self.cat_labels[name]
        return [labels[c] for c in self.columns[name]]

    def take(self, indices: Iterable[int]) -> "Dataset":
        """Row subset / reordering; keeps schema and normalization metadata."""
        idx = np.asarray(list(indices), dtype=np.int64)
        return Dataset(
            schema=self.schema,
            columns={name: col[idx].copy() for name, col in self.columns.items()},
            cat_labels=dict(self.cat_labels),
            norm_params=None if self.norm_params is None else dict(self.norm_params),
            labels=None if self.labels is None else self.labels[idx].copy(),
            row_ids=self.row_ids[idx].copy(),
        )

    def equals(self, other: "Dataset") -> bool:
        """Exact equality of schema, values, maps, metadata, and labels."""
        if self.schema != other.schema or self.cat_labels != other.cat_labels:
            return False
        if self.norm_params != other.norm_params:
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        if not np.array_equal(self.row_ids, other.row_ids):
            return False
        return all(
            np.array_equal(self.columns[name], other.columns[name])
            for name in self.schema.names
        )


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Load a raw (un-normalized) Dataset from an RFC-4180 style CSV.

    The header must contain exactly the schema's feature names, in any
    order, plus optionally ``__anomaly__``. Rows containing empty cells
    are dropped with a warning; malformed cells raise :class:`LoadError`
    naming the offending row and column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: file is empty") from None
        expected = set(schema.names)
        seen = set(header)
        missing = expected - seen
        if missing:
            raise LoadError(f"{path}: missing columns {sorted(missing)}")
        extra = seen - expected - {LABEL_COLUMN}
        if extra:
            raise LoadError(f"{path}: unknown columns {sorted(extra)}")
        if len(seen) != len(header):
            raise LoadError(f"{path}: duplicated header names")
        col_pos = {name: header.index(name) for name in header}
        has_labels = LABEL_COLUMN in col_pos

        raw: dict[str, list] = {name: [] for name in schema.names}
        label_rows: list[bool] = []
        dropped = 0
        for rowno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise LoadError(
                    f"{path}: row {rowno} has {len(row)} cells, expected {len(header)}"
                )
            if any(cell.strip() == "" for cell in row):
                dropped += 1
                continue
            for f in schema.features:
                cell = row[col_pos[f.name]]
                if f.kind == KIND_NUMERIC:
                    try:
                        raw[f.name].append(float(cell))
                    except ValueError:
                        raise LoadError(
                            f"{path}: row {rowno}, column {f.name!r}: "
                            f"cannot parse {cell!r} as a number"
                        ) from None
                else:
                    raw[f.name].append(cell)
            if has_labels:
                cell = row[col_pos[LABEL_COLUMN]].strip()
                if cell not in ("0", "1"):
                    raise LoadError(
                        f"{path}: row {rowno}, column {LABEL_COLUMN!r}: "
                        f"expected 0 or 1, got {cell!r}"
                    )
                label_rows.append(cell == "1")

    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) with missing values")
    n = len(next(iter(raw.values())))
    if n == 0:
        raise LoadError(f"{path}: no usable data rows")

    columns: dict[str, np.ndarray] = {}
    cat_labels: dict[str, tuple[str, ...]] = {}
    for f in schema.features:
        if f.kind == KIND_CATEGORICAL:
            codes, mapping = label_encode(raw[f.name])
            columns[f.name] = codes
            cat_labels[f.name] = mapping
        else:
            columns[f.name] = np.asarray(raw[f.name], dtype=np.float64)
    labels = np.asarray(label_rows, dtype=bool) if has_labels else None
    return Dataset(schema=schema, columns=columns, cat_labels=cat_labels, labels=labels)


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Write the canonical UTF-8 CSV form (floats via shortest round-trip repr)."""
    path = Path(path)
    header = list(ds.schema.names)
    if ds.labels is not None:
        header.append(LABEL_COLUMN)
    decoded = {
        f.name: ds.decode(f.name)
        for f in ds.schema.features
        if f.kind == KIND_CATEGORICAL
    }
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = []
            for f in ds.schema.features:
                if f.kind == KIND_CATEGORICAL:
                    row.append(decoded[f.name][i])
                else:
                    row.append(repr(float(ds.columns[f.name][i])))
            if ds.labels is not None:
                row.append("1" if ds.labels[i] else "0")
            writer.writerow(row)


def minmax_normalize(ds: Dataset) -> Dataset:
    """Scale every behavioral column to [0, 1], recording (min, max).

    A constant column cannot be scaled; it is mapped to zeros and a
    warning is emitted so the degenerate feature is visible to callers.
    """
    columns = dict(ds.columns)
    norm_params: dict[str, tuple[float, float]] = {}
    for f in ds.schema.behavioral:
        col = ds.columns[f.name]
        lo = float(col.min())
        hi = float(col.max())
        norm_params[f.name] = (lo, hi)
        if hi == lo:
            warnings.warn(f"behavioral column {f.name!r} is constant; scaled to zeros")
            columns[f.name] = np.zeros_like(col)
        else:
            columns[f.name] = (col - lo) / (hi - lo)
    return replace(ds, columns=columns, norm_params=norm_params)


def denormalize(ds: Dataset) -> Dataset:
    """Invert :func:`minmax_normalize` using the stored parameters."""
    if ds.norm_params is None:
        raise ValueError("dataset carries no normalization parameters")
    columns = dict(ds.columns)
    for f in ds.schema.behavioral:
        lo, hi = ds.norm_params[f.name]
        columns[f.name] = ds.columns[f.name] * (hi - lo) + lo
    return replace(ds, columns=columns, norm_params=None)
