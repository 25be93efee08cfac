"""Load the CKD table from ARFF or CSV and label-encode it."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ParseError, SchemaError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

MISSING_TOKEN = "?"
TARGET_CATEGORIES = ("ckd", "notckd")

Cell = Optional[Union[float, str]]


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC and self.categories:
            raise SchemaError(f"numeric column {self.name!r} cannot carry categories")
        if list(self.categories) != sorted(set(self.categories)):
            raise SchemaError(f"column {self.name!r}: categories must be sorted and unique")


@dataclass(frozen=True)
class Dataset:
    """Parsed table. Missing cells are ``None``."""

    schemas: tuple
    cells: tuple
    target_name: str

    def __post_init__(self):
        names = [s.name for s in self.schemas]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        if self.target_name not in names:
            raise SchemaError(f"target column {self.target_name!r} not found")
        width = len(self.schemas)
        for i, row in enumerate(self.cells):
            if len(row) != width:
                raise SchemaError(f"row {i} has {len(row)} cells, expected {width}")

    @property
    def names(self):
        return [s.name for s in self.schemas]

    @property
    def n_rows(self):
        return len(self.cells)

    def schema(self, name):
        return self.schemas[self.names.index(name)]

    def column(self, name):
        j = self.names.index(name)
        return [row[j] for row in self.cells]


@dataclass
class EncodedMatrix:
    """Dense feature matrix with an explicit missing mask.

    ``values`` holds NaN wherever ``missing`` is True; ``category_maps`` maps
    each categorical feature to its ordered category list so codes can be
    decoded again.
    """

    feature_names: list
    values: np.ndarray
    missing: np.ndarray
    labels: np.ndarray
    categorical: tuple = ()
    category_maps: dict = field(default_factory=dict)
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != self.missing.shape:
            raise SchemaError("values and missing mask differ in shape")
        if self.values.shape[1] != len(self.feature_names):
            raise SchemaError("feature_names do not match the matrix width")
        if self.labels.shape[0] != self.values.shape[0]:
            raise SchemaError("labels do not match the row count")

    @property
    def n_rows(self):
        return self.values.shape[0]

    def column_index(self, name):
        return self.feature_names.index(name)

    def replace(self, values=None, missing=None, feature_names=None, categorical=None):
        """Copy with some fields swapped; remaining metadata is carried over."""
        names = list(self.feature_names if feature_names is None else feature_names)
        cats = tuple(c for c in (self.categorical if categorical is None else categorical) if c in names)
        return EncodedMatrix(
            feature_names=names,
            values=self.values.copy() if values is None else values,
            missing=self.missing.copy() if missing is None else missing,
            labels=self.labels.copy(),
            categorical=cats,
            category_maps={k: v for k, v in self.category_maps.items() if k in names},
            label_mapping=dict(self.label_mapping),
        )

    def take_rows(self, rows):
        """Row subset with labels and metadata carried along."""
        rows = np.asarray(rows, dtype=np.int64)
        return EncodedMatrix(
            feature_names=list(self.feature_names),
            values=self.values[rows].copy(),
            missing=self.missing[rows].copy(),
            labels=self.labels[rows].copy(),
            categorical=self.categorical,
            category_maps=dict(self.category_maps),
            label_mapping=dict(self.label_mapping),
        )

    def select(self, names):
        idx = [self.column_index(n) for n in names]
        return self.replace(
            values=self.values[:, idx].copy(),
            missing=self.missing[:, idx].copy(),
            feature_names=list(names),
        )


def _clean(token: str) -> str:
    # The public CKD file carries stray tabs/spaces around tokens ("\tno", "ckd\t", "\t?").
    return token.strip().strip("'\"").strip()


def _parse_number(token: str):
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _split_nominal(spec: str, line_no: int):
    inner = spec.strip()
    if not (inner.startswith("{") and inner.endswith("}")):
        raise ParseError(f"malformed nominal declaration {spec!r}", line_no)
    values = [_clean(v) for v in inner[1:-1].split(",")]
    values = [v for v in values if v]
    if not values:
        raise ParseError("nominal attribute declares no values", line_no)
    return values


def _parse_attribute(line: str, line_no: int):
    body = line.strip()[len("@attribute"):].strip()
    if not body:
        raise ParseError("attribute declaration without a name", line_no)
    if body[0] in "'\"":
        quote = body[0]
        end = body.find(quote, 1)
        if end < 0:
            raise ParseError("unterminated quoted attribute name", line_no)
        name, rest = body[1:end], body[end + 1:].strip()
    else:
        parts = body.split(None, 1)
        if len(parts) != 2:
            raise ParseError(f"attribute {parts[0]!r} has no type", line_no)
        name, rest = parts
    name = name.strip()
    if not rest:
        raise ParseError(f"attribute {name!r} has no type", line_no)
    if rest.lower() in ("numeric", "real", "integer"):
        return name, NUMERIC, None
    if rest.startswith("{"):
        return name, CATEGORICAL, _split_nominal(rest, line_no)
    raise ParseError(f"unsupported attribute type {rest!r} for {name!r}", line_no)


def _finalize_schema(name, kind, declared):
    """Nominal attributes whose declared values are all numbers are read as numeric.

    The UCI file declares sg, al and su as nominal sets of numbers; they are
    ordinal measurements and are kept numeric.
    """
    if kind == CATEGORICAL and all(_parse_number(v) is not None for v in declared):
        return ColumnSchema(name, NUMERIC)
    if kind == CATEGORICAL:
        return ColumnSchema(name, CATEGORICAL, tuple(sorted(set(declared))))
    return ColumnSchema(name, NUMERIC)


def _convert_cell(token, schema, row_label):
    token = _clean(token)
    if token == MISSING_TOKEN or token == "":
        return None
    if schema.kind == NUMERIC:
        value = _parse_number(token)
        if value is None:
            raise ParseError(f"{row_label}: non-numeric token {token!r} in numeric column {schema.name!r}")
        return value
    if token not in schema.categories:
        raise ParseError(f"{row_label}: value {token!r} not declared for column {schema.name!r}")
    return token


def _load_arff(text: str, target_name):
    attrs = []
    data_start = None
    lines = text.splitlines()
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if low.startswith("@relation"):
            continue
        if low.startswith("@attribute"):
            attrs.append(_parse_attribute(line, i))
            continue
        if low.startswith("@data"):
            data_start = i
            break
        raise ParseError(f"unexpected header line {line!r}", i)
    if data_start is None:
        raise ParseError("missing @data section", len(lines))
    if not attrs:
        raise ParseError("no attributes declared before @data", data_start)

    schemas = tuple(_finalize_schema(n, k, d) for n, k, d in attrs)
    width = len(schemas)
    rows = []
    for i in range(data_start, len(lines)):
        line = lines[i].strip()
        if not line or line.startswith("%"):
            continue
        tokens = line.split(",")
        # Trailing empty fields (stray commas) are dropped; anything else must match.
        while len(tokens) > width and _clean(tokens[-1]) == "":
            tokens.pop()
        label = f"data row {len(rows)} (line {i + 1})"
        if len(tokens) != width:
            raise ParseError(f"{label} has {len(tokens)} fields, expected {width}", i + 1)
        rows.append(tuple(_convert_cell(t, s, label) for t, s in zip(tokens, schemas)))
    target = target_name or schemas[-1].name
    return Dataset(schemas, tuple(rows), target)


def _load_csv(text: str, target_name):
    reader = csv.reader(io.StringIO(text), quoting=csv.QUOTE_NONE)
    records = [r for r in reader if r and any(c.strip() for c in r)]
    if not records:
        raise ParseError("empty CSV file", 1)
    header = [_clean(h) for h in records[0]]
    if any(not h for h in header):
        raise ParseError("empty column name in header", 1)
    width = len(header)
    body = records[1:]
    for k, row in enumerate(body):
        if len(row) != width:
            raise ParseError(f"data row {k} has {len(row)} fields, expected {width}", k + 2)
    schemas = []
    for j, name in enumerate(header):
        tokens = [_clean(r[j]) for r in body]
        present = [t for t in tokens if t not in (MISSING_TOKEN, "")]
        if all(_parse_number(t) is not None for t in present):
            schemas.append(ColumnSchema(name, NUMERIC))
        else:
            schemas.append(ColumnSchema(name, CATEGORICAL, tuple(sorted(set(present)))))
    schemas = tuple(schemas)
    rows = tuple(
        tuple(_convert_cell(t, s, f"data row {k}") for t, s in zip(r, schemas)) for k, r in enumerate(body)
    )
    return Dataset(schemas, rows, target_name or header[-1])


def load_dataset(path, format: str = "arff", target_name: Optional[str] = None) -> Dataset:
    """Parse ``path`` as ``"arff"`` or ``"csv"``.

    ``"?"`` and empty tokens are marked missing.  The target defaults to the
    last declared column.
    """
    fmt = str(format).lower()
    if fmt not in ("arff", "csv"):
        raise ParseError(f"unknown format tag {format!r}")
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    if fmt == "arff":
        return _load_arff(text, target_name)
    return _load_csv(text, target_name)


def encode(dataset: Dataset, drop: Sequence[str] = ()) -> EncodedMatrix:
    """Label-encode categorical columns (lexicographic codes) and split off the target."""
    target = dataset.schema(dataset.target_name)
    if target.kind != CATEGORICAL or set(target.categories) != set(TARGET_CATEGORIES):
        raise SchemaError(
            f"target {dataset.target_name!r} must be categorical with categories {TARGET_CATEGORIES}, "
            f"got {target.categories}"
        )
    label_codes = {c: i for i, c in enumerate(sorted(TARGET_CATEGORIES))}
    labels = []
    for i, value in enumerate(dataset.column(dataset.target_name)):
        if value is None:
            raise SchemaError(f"row {i}: target value is missing")
        labels.append(label_codes[value])
    labels = np.asarray(labels, dtype=np.int64)
    for c in TARGET_CATEGORIES:
        if not np.any(labels == label_codes[c]):
            raise SchemaError(f"target category {c!r} never observed")

    features = [s for s in dataset.schemas if s.name != dataset.target_name and s.name not in set(drop)]
    n = dataset.n_rows
    values = np.full((n, len(features)), np.nan)
    missing = np.zeros((n, len(features)), dtype=bool)
    category_maps = {}
    for j, schema in enumerate(features):
        col = dataset.column(schema.name)
        if schema.kind == CATEGORICAL:
            codes = {c: k for k, c in enumerate(schema.categories)}
            category_maps[schema.name] = list(schema.categories)
        for i, cell in enumerate(col):
            if cell is None:
                missing[i, j] = True
            elif schema.kind == CATEGORICAL:
                if cell not in codes:
                    raise SchemaError(f"row {i}: unseen category {cell!r} in column {schema.name!r}")
                values[i, j] = codes[cell]
            else:
                values[i, j] = cell
    return EncodedMatrix(
        feature_names=[s.name for s in features],
        values=values,
        missing=missing,
        labels=labels,
        categorical=tuple(s.name for s in features if s.kind == CATEGORICAL),
        category_maps=category_maps,
        label_mapping=dict(label_codes),
    )


def decode_column(matrix: EncodedMatrix, name: str):
    """Map codes of a categorical column back to strings (``None`` where missing)."""
    cats = matrix.category_maps[name]
    j = matrix.column_index(name)
    return [None if matrix.missing[i, j] else cats[int(matrix.values[i, j])] for i in range(matrix.n_rows)]


def missing_counts(dataset: Dataset):
    """(feature, missing count) pairs in column order."""
    return [(s.name, sum(cell is None for cell in dataset.column(s.name))) for s in dataset.schemas]
