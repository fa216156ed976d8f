"""Feature metadata, dataset representation, and CSV ingestion.

The whole toolkit works on a normalized representation: every instance is a
float vector with one entry per schema feature. Categorical entries hold the
index of the category in the feature's vocabulary; continuous entries are
min-max scaled into [0, 1]. Ingestion produces this representation once and
records the scaling parameters so raw query values can be encoded later.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError, InvalidInputError

MISSING_CELL = "?"


@dataclass(frozen=True)
class Categorical:
    """Categorical feature kind with an ordered, duplicate-free vocabulary."""

    vocabulary: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "vocabulary", tuple(str(v) for v in self.vocabulary))
        if not self.vocabulary:
            raise InvalidInputError("categorical vocabulary must be non-empty")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise InvalidInputError("categorical vocabulary contains duplicates")

    @property
    def size(self) -> int:
        return len(self.vocabulary)


@dataclass(frozen=True)
class Continuous:
    """Continuous feature kind; values live in [0, 1] after normalization."""


FeatureKind = Categorical | Continuous


@dataclass(frozen=True)
class Feature:
    name: str
    kind: FeatureKind
    controllable: bool
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise InvalidInputError(f"feature {self.name!r}: weight must be >= 0")

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.kind, Categorical)


class FeatureSchema:
    """Ordered feature list plus cached index structure.

    The controllable / uncontrollable split is derived from the per-feature
    flags; the two index sets are disjoint and together cover every feature.
    """

    def __init__(self, features):
        features = tuple(features)
        if not features:
            raise InvalidInputError("schema needs at least one feature")
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise InvalidInputError("feature names must be unique")
        weights = np.array([f.weight for f in features], dtype=np.float64)
        if weights.sum() <= 0:
            raise InvalidInputError("sum of feature weights must be > 0")
        self.features = features
        self.names = tuple(names)
        self.weights = weights
        self.weights.setflags(write=False)
        self.is_categorical = np.array([f.is_categorical for f in features], dtype=bool)
        self.is_categorical.setflags(write=False)
        self.vocab_sizes = np.array(
            [f.kind.size if f.is_categorical else 0 for f in features], dtype=np.int64
        )
        self.vocab_sizes.setflags(write=False)
        self.controllable_idx = np.array(
            [i for i, f in enumerate(features) if f.controllable], dtype=np.int64
        )
        self.uncontrollable_idx = np.array(
            [i for i, f in enumerate(features) if not f.controllable], dtype=np.int64
        )
        assert len(self.controllable_idx) + len(self.uncontrollable_idx) == len(features)
        assert not set(self.controllable_idx) & set(self.uncontrollable_idx)

    @property
    def arity(self) -> int:
        return len(self.features)

    def __len__(self) -> int:
        return len(self.features)

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureSchema) and self.features == other.features

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown feature {name!r}") from None

    def to_dict(self) -> dict:
        out = []
        for f in self.features:
            entry = {
                "name": f.name,
                "kind": "cat" if f.is_categorical else "cont",
                "controllable": f.controllable,
                "weight": f.weight,
            }
            if f.is_categorical:
                entry["vocabulary"] = list(f.kind.vocabulary)
            out.append(entry)
        return {"features": out}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        feats = []
        for entry in doc["features"]:
            if entry["kind"] == "cat":
                kind = Categorical(tuple(entry["vocabulary"]))
            elif entry["kind"] == "cont":
                kind = Continuous()
            else:
                raise InvalidInputError(f"unknown feature kind {entry['kind']!r}")
            feats.append(
                Feature(
                    name=entry["name"],
                    kind=kind,
                    controllable=bool(entry["controllable"]),
                    weight=float(entry.get("weight", 1.0)),
                )
            )
        return cls(feats)


def validate_instance(schema: FeatureSchema, values) -> np.ndarray:
    """Check a value vector against the schema and return it as float64.

    Categorical entries must be integral codes inside the vocabulary;
    continuous entries must lie in [0, 1] (up to 1e-9 slack, then clipped).
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != schema.arity:
        raise InvalidInputError(
            f"instance has {x.shape} values, schema expects ({schema.arity},)"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("instance contains non-finite values")
    x = x.copy()
    for i, f in enumerate(schema.features):
        v = x[i]
        if f.is_categorical:
            if v != round(v) or not (0 <= v < f.kind.size):
                raise InvalidInputError(
                    f"feature {f.name!r}: {v} is not a valid category code"
                )
        else:
            if v < -1e-9 or v > 1 + 1e-9:
                raise InvalidInputError(
                    f"feature {f.name!r}: {v} outside [0, 1]"
                )
            x[i] = min(max(v, 0.0), 1.0)
    return x


@dataclass(frozen=True)
class Dataset:
    """Normalized rows (one instance per row) with integer class labels.

    ``norm_params`` holds one ``(min, max)`` pair per feature; categorical
    positions carry ``None``. Arrays are frozen after construction so a
    dataset can be shared freely.
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    norm_params: tuple
    label_values: tuple | None = None  # original label strings, id-ordered

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != self.schema.arity:
            raise InvalidInputError("dataset shape does not match schema arity")
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError("row and label counts differ")
        if y.size and y.min() < 0:
            raise InvalidInputError("class ids must be >= 0")
        if len(np.unique(y)) < 2:
            raise InvalidInputError("dataset needs at least 2 distinct labels")
        if len(self.norm_params) != self.schema.arity:
            raise InvalidInputError("norm_params length does not match schema arity")
        for f, p in zip(self.schema.features, self.norm_params):
            if f.is_categorical:
                if p is not None:
                    raise InvalidInputError(
                        f"feature {f.name!r}: categorical features take no norm params"
                    )
            else:
                lo, hi = p
                if not lo < hi:
                    raise InvalidInputError(
                        f"feature {f.name!r}: degenerate normalization range"
                    )
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "norm_params", tuple(self.norm_params))

    @classmethod
    def from_normalized(cls, schema, X, y) -> "Dataset":
        """Wrap rows that are already in normalized [0,1] / code space."""
        params = tuple(
            None if f.is_categorical else (0.0, 1.0) for f in schema.features
        )
        return cls(schema, np.asarray(X, dtype=np.float64), np.asarray(y), params)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n_rows:
            raise InvalidInputError(f"row index {i} out of range [0, {self.n_rows})")
        return self.X[i].copy()


def normalize(value: float, lo: float, hi: float) -> float:
    """Min-max scale ``value`` into [0, 1], clamping out-of-range inputs."""
    if not lo < hi:
        raise InvalidInputError(f"invalid normalization range: min {lo} >= max {hi}")
    scaled = (value - lo) / (hi - lo)
    return min(max(scaled, 0.0), 1.0)


def denormalize(value: float, lo: float, hi: float) -> float:
    """Inverse of :func:`normalize` for in-range values."""
    if not lo < hi:
        raise InvalidInputError(f"invalid normalization range: min {lo} >= max {hi}")
    return lo + value * (hi - lo)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str  # "cat" | "cont"
    controllable: bool
    weight: float = 1.0
    vocabulary: tuple[str, ...] | None = None  # closes the vocabulary when given

    def __post_init__(self):
        if self.kind not in ("cat", "cont"):
            raise InvalidInputError(f"column {self.name!r}: kind must be 'cat' or 'cont'")
        if self.vocabulary is not None:
            object.__setattr__(self, "vocabulary", tuple(str(v) for v in self.vocabulary))


@dataclass(frozen=True)
class IngestionSpec:
    """Names the label column and describes every feature column."""

    label: str
    columns: tuple[ColumnSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.columns:
            raise IngestionError("ingestion spec declares no feature columns")

    @classmethod
    def from_dict(cls, doc: dict) -> "IngestionSpec":
        try:
            label = doc["label"]
            feats = doc["features"]
        except (KeyError, TypeError) as exc:
            raise IngestionError(f"ingestion spec missing key: {exc}") from None
        cols = []
        for entry in feats:
            cols.append(
                ColumnSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    controllable=bool(entry.get("controllable", True)),
                    weight=float(entry.get("weight", 1.0)),
                    vocabulary=tuple(entry["vocabulary"]) if "vocabulary" in entry else None,
                )
            )
        return cls(label=label, columns=tuple(cols))

    @classmethod
    def from_json(cls, path) -> "IngestionSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise IngestionError(f"cannot read ingestion spec: {exc}") from None
        except json.JSONDecodeError as exc:
            raise IngestionError(f"ingestion spec is not valid JSON: {exc}") from None

    def to_dict(self) -> dict:
        feats = []
        for c in self.columns:
            entry = {
                "name": c.name,
                "kind": c.kind,
                "controllable": c.controllable,
                "weight": c.weight,
            }
            if c.vocabulary is not None:
                entry["vocabulary"] = list(c.vocabulary)
            feats.append(entry)
        return {"label": self.label, "features": feats}


def _sort_values(values):
    """Sort category labels numerically when they all parse, else lexically."""
    vals = list(values)
    try:
        return sorted(vals, key=float)
    except ValueError:
        return sorted(vals)


def _impute_mode(cells):
    counts = Counter(c for c in cells if c != MISSING_CELL)
    if not counts:
        return None
    top = max(counts.values())
    return _sort_values([c for c, n in counts.items() if n == top])[0]


def load_csv(path, spec: IngestionSpec) -> Dataset:
    """Ingest a headered CSV file into a normalized :class:`Dataset`.

    Continuous columns are min-max scaled to [0, 1]; categorical cells are
    mapped to vocabulary indices (vocabularies come from the spec when closed,
    otherwise from the sorted distinct values in the file). Missing cells
    (``?``) are imputed with the column mode (categorical) or median
    (continuous). Raises :class:`IngestionError` on malformed input,
    unknown closed-vocabulary categories, or constant continuous columns.
    """
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestionError(f"cannot read data file: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    col_index = {}
    for name in [spec.label] + [c.name for c in spec.columns]:
        if name not in header:
            raise IngestionError(f"{path}: column {name!r} not found in header")
        col_index[name] = header.index(name)

    if not rows:
        raise IngestionError(f"{path}: no data rows")

    n_cols = len(header)
    raw = {c.name: [] for c in spec.columns}
    raw_labels = []
    for r, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != n_cols:
            raise IngestionError(
                f"{path}: row {r}: expected {n_cols} cells, got {len(row)}"
            )
        raw_labels.append(row[col_index[spec.label]].strip())
        for c in spec.columns:
            raw[c.name].append(row[col_index[c.name]].strip())

    n = len(rows)
    m = len(spec.columns)
    X = np.empty((n, m), dtype=np.float64)
    features = []
    norm_params = []

    for j, c in enumerate(spec.columns):
        cells = raw[c.name]
        if c.kind == "cat":
            fill = _impute_mode(cells)
            if fill is None:
                raise IngestionError(f"{path}: column {c.name!r}: all values missing")
            cells = [fill if v == MISSING_CELL else v for v in cells]
            if c.vocabulary is not None:
                vocab = c.vocabulary
            else:
                vocab = tuple(_sort_values(set(cells)))
            code = {v: i for i, v in enumerate(vocab)}
            for r, v in enumerate(cells):
                if v not in code:
                    raise IngestionError(
                        f"{path}: row {r + 2}: unknown category {v!r} "
                        f"for column {c.name!r}"
                    )
                X[r, j] = code[v]
            features.append(Feature(c.name, Categorical(vocab), c.controllable, c.weight))
            norm_params.append(None)
        else:
            parsed = np.full(n, np.nan)
            for r, v in enumerate(cells):
                if v == MISSING_CELL:
                    continue
                try:
                    parsed[r] = float(v)
                except ValueError:
                    raise IngestionError(
                        f"{path}: row {r + 2}: cannot parse {v!r} "
                        f"as a number for column {c.name!r}"
                    ) from None
            present = parsed[~np.isnan(parsed)]
            if present.size == 0:
                raise IngestionError(f"{path}: column {c.name!r}: all values missing")
            parsed[np.isnan(parsed)] = float(np.median(present))
            lo, hi = float(parsed.min()), float(parsed.max())
            if not lo < hi:
                raise IngestionError(
                    f"{path}: column {c.name!r}: constant continuous column"
                )
            X[:, j] = (parsed - lo) / (hi - lo)
            features.append(Feature(c.name, Continuous(), c.controllable, c.weight))
            norm_params.append((lo, hi))

    label_values = tuple(_sort_values(set(raw_labels)))
    if len(label_values) < 2:
        raise IngestionError(f"{path}: need at least 2 distinct labels")
    label_code = {v: i for i, v in enumerate(label_values)}
    y = np.array([label_code[v] for v in raw_labels], dtype=np.int64)

    schema = FeatureSchema(features)
    return Dataset(schema, X, y, tuple(norm_params), label_values=label_values)


def encode_instance(schema: FeatureSchema, norm_params, raw: dict) -> np.ndarray:
    """Encode a raw {feature name: value} mapping into a normalized instance.

    Categorical values are looked up in the vocabulary; continuous values are
    min-max scaled with the dataset's recorded parameters and clamped, so
    query points outside the training range stay representable.
    """
    x = np.empty(schema.arity, dtype=np.float64)
    for i, f in enumerate(schema.features):
        if f.name not in raw:
            raise InvalidInputError(f"instance is missing feature {f.name!r}")
        v = raw[f.name]
        if f.is_categorical:
            key = str(v)
            if key not in f.kind.vocabulary:
                raise InvalidInputError(
                    f"feature {f.name!r}: unknown category {key!r}"
                )
            x[i] = f.kind.vocabulary.index(key)
        else:
            lo, hi = norm_params[i]
            x[i] = normalize(float(v), lo, hi)
    return x


def dataset_to_csv(data: Dataset, path) -> None:
    """Dump the normalized dataset (debugging aid; values as stored)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.schema.names) + ["class"])
        for i in range(data.n_rows):
            cells = []
            for j, f in enumerate(data.schema.features):
                v = data.X[i, j]
                cells.append(str(int(v)) if f.is_categorical else repr(float(v)))
            cells.append(str(int(data.y[i])))
            writer.writerow(cells)


def dataset_to_raw_csv(data: Dataset, path, label_name: str = "class") -> None:
    """Dump the dataset with original category labels and raw-scale values.

    The output re-ingests cleanly with the spec from
    :func:`ingestion_spec_for`.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.schema.names) + [label_name])
        for i in range(data.n_rows):
            cells = []
            for j, f in enumerate(data.schema.features):
                v = data.X[i, j]
                if f.is_categorical:
                    cells.append(f.kind.vocabulary[int(v)])
                else:
                    lo, hi = data.norm_params[j]
                    cells.append(repr(denormalize(float(v), lo, hi)))
            if data.label_values is not None:
                cells.append(str(data.label_values[int(data.y[i])]))
            else:
                cells.append(str(int(data.y[i])))
            writer.writerow(cells)


def ingestion_spec_for(data: Dataset, label_name: str = "class") -> "IngestionSpec":
    """Ingestion spec (closed vocabularies) matching a dataset's schema."""
    cols = []
    for f in data.schema.features:
        cols.append(
            ColumnSpec(
                name=f.name,
                kind="cat" if f.is_categorical else "cont",
                controllable=f.controllable,
                weight=f.weight,
                vocabulary=f.kind.vocabulary if f.is_categorical else None,
            )
        )
    return IngestionSpec(label=label_name, columns=tuple(cols))
