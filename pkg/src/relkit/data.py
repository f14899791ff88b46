"""Dataset ingestion, scaling, splitting and rebalancing."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, InputShapeError, ParameterError, ParseError, ReliabilityWarning, SchemaError

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})


@dataclass(frozen=True)
class FeatureMatrix:
    """Numeric feature block plus optional label / prediction / score columns.

    ``X`` is ``(n, d)`` float64. ``labels`` and ``predictions`` are 0/1 int
    vectors and ``scores`` a float vector in [0, 1], each of length n when
    present.
    """

    names: tuple
    X: np.ndarray
    labels: np.ndarray | None = None
    predictions: np.ndarray | None = None
    scores: np.ndarray | None = None
    dropped_count: int = 0
    source_rows: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1 and len(self.names) == 0:
            X = X.reshape(-1, 0)
        if X.ndim != 2:
            raise InputShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
        if X.shape[1] != len(self.names):
            raise InputShapeError(f"{len(self.names)} column names for {X.shape[1]} columns")
        if X.size and np.isnan(X).any():
            raise ParameterError("feature matrix contains NaN")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(self.names))
        for attr in ("labels", "predictions"):
            v = getattr(self, attr)
            if v is not None:
                v = np.asarray(v).astype(np.int64).reshape(-1)
                self._check_len(attr, v)
                if not np.isin(v, (0, 1)).all():
                    raise ParameterError(f"{attr} must be 0/1")
                v.setflags(write=False)
                object.__setattr__(self, attr, v)
        if self.scores is not None:
            s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
            self._check_len("scores", s)
            if not ((s >= 0) & (s <= 1)).all():
                raise ParameterError("scores must lie in [0, 1]")
            s.setflags(write=False)
            object.__setattr__(self, "scores", s)

    def _check_len(self, attr, v):
        if len(v) != self.X.shape[0]:
            raise InputShapeError(f"{attr} has {len(v)} entries for {self.X.shape[0]} rows")

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def take(self, idx):
        """Row subset (fancy index or boolean mask)."""
        idx = np.asarray(idx)
        pick = lambda v: None if v is None else v[idx]  # noqa: E731
        return FeatureMatrix(
            self.names, self.X[idx], pick(self.labels), pick(self.predictions), pick(self.scores)
        )

    def with_columns(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature (min, max) fitted on training data.

    Values outside the fitted range map linearly beyond [0, 1]. Features
    with ``min == max`` map to 0.5.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64).reshape(-1)
        maxs = np.array(self.maxs, dtype=np.float64).reshape(-1)
        if mins.shape != maxs.shape:
            raise InputShapeError("mins and maxs differ in length")
        if not (np.isfinite(mins).all() and np.isfinite(maxs).all()) or (mins > maxs).any():
            raise ParameterError("scaler needs finite mins <= maxs")
        mins.setflags(write=False)
        maxs.setflags(write=False)
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyInputError("cannot fit a scaler on zero rows")
        scaler = cls(X.min(axis=0), X.max(axis=0))
        const = np.flatnonzero(scaler.constant_mask)
        if len(const):
            warnings.warn(
                f"constant feature(s) at column(s) {const.tolist()} map to 0.5",
                ReliabilityWarning,
                stacklevel=2,
            )
        return scaler

    @property
    def n_features(self):
        return len(self.mins)

    @property
    def constant_mask(self):
        return self.maxs == self.mins

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_features:
            raise InputShapeError(f"expected {self.n_features} features, got {X.shape[-1]}")
        span = self.maxs - self.mins
        const = span == 0
        out = (X - self.mins) / np.where(const, 1.0, span)
        return np.where(const, 0.5, out)


@dataclass(frozen=True)
class Schema:
    """Column roles for CSV ingestion.

    ``features`` lists raw input columns in order; any of them also named in
    ``categorical`` is one-hot encoded in place. ``categories`` pins the
    category order per categorical column (taken from the data when absent).
    """

    features: tuple
    categorical: tuple = ()
    label: str | None = None
    prediction: str | None = None
    score: str | None = None
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        object.__setattr__(self, "categories", {k: tuple(v) for k, v in self.categories.items()})
        unknown = set(self.categorical) - set(self.features)
        if unknown:
            raise SchemaError(f"categorical columns not among features: {sorted(unknown)}")

    @property
    def role_columns(self):
        return tuple(c for c in (self.label, self.prediction, self.score) if c)

    def encoded_names(self):
        names = []
        for col in self.features:
            if col in self.categorical:
                names.extend(f"{col}={cat}" for cat in self.categories[col])
            else:
                names.append(col)
        return tuple(names)

    def to_dict(self):
        return {
            "features": list(self.features),
            "categorical": list(self.categorical),
            "label": self.label,
            "prediction": self.prediction,
            "score": self.score,
            "categories": {k: list(v) for k, v in sorted(self.categories.items())},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            features=d["features"],
            categorical=d.get("categorical", ()),
            label=d.get("label"),
            prediction=d.get("prediction"),
            score=d.get("score"),
            categories=d.get("categories", {}),
        )


def _is_missing(cell):
    return cell.strip().lower() in MISSING_TOKENS


def _parse_float(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r}", row=row, column=column) from None
    if math.isnan(value):
        raise ParseError("NaN value", row=row, column=column)
    return value


def _parse_binary(cell, row, column):
    value = _parse_float(cell, row, column)
    if value not in (0.0, 1.0):
        raise ParseError(f"expected 0 or 1, got {cell!r}", row=row, column=column)
    return int(value)


def read_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            return next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (no header)") from None


def load_csv(path, schema):
    """Read a comma-separated file into a :class:`FeatureMatrix`.

    Rows with any missing cell in a schema column are dropped and counted
    in ``dropped_count``. Categorical columns become 0/1 indicator columns
    named ``"<col>=<category>"``; categories are ordered by first appearance
    unless the schema pins them. A category not in a pinned list encodes as
    all zeros with a warning.

    Returns
    -------
    (FeatureMatrix, Schema)
        The matrix and the schema with the category order actually used.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (no header)") from None
        records = list(reader)

    wanted = list(schema.features) + list(schema.role_columns)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    pos = {c: header.index(c) for c in wanted}

    kept = []
    dropped = 0
    data_idx = -1
    for lineno, rec in enumerate(records, start=2):
        if not rec:
            continue
        data_idx += 1
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(rec)}", row=lineno)
        if any(_is_missing(rec[pos[c]]) for c in wanted):
            dropped += 1
            continue
        kept.append((lineno, rec, data_idx))

    categories = dict(schema.categories)
    for col in schema.categorical:
        if col in categories:
            continue
        seen = {}
        for _, rec, _ in kept:
            seen.setdefault(rec[pos[col]].strip(), None)
        categories[col] = tuple(seen)
    schema = replace(schema, categories=categories)

    names = schema.encoded_names()
    X = np.zeros((len(kept), len(names)))
    unseen = set()
    for i, (lineno, rec, _) in enumerate(kept):
        j = 0
        for col in schema.features:
            cell = rec[pos[col]]
            if col in schema.categorical:
                cats = categories[col]
                value = cell.strip()
                if value in cats:
                    X[i, j + cats.index(value)] = 1.0
                else:
                    unseen.add((col, value))
                j += len(cats)
            else:
                X[i, j] = _parse_float(cell, lineno, col)
                j += 1
    if unseen:
        warnings.warn(f"{path}: unseen categories encoded as all-zero: {sorted(unseen)}",
                      ReliabilityWarning, stacklevel=2)

    def role(col, parse):
        if not col:
            return None
        return np.array([parse(rec[pos[col]], lineno, col) for lineno, rec, _ in kept])

    matrix = FeatureMatrix(
        names,
        X,
        labels=role(schema.label, _parse_binary),
        predictions=role(schema.prediction, _parse_binary),
        scores=role(schema.score, _parse_float),
        dropped_count=dropped,
        source_rows=np.array([idx for _, _, idx in kept], dtype=np.int64),
    )
    return matrix, schema


def write_csv(matrix, path, label="label", prediction="prediction", score="score", extra=None):
    """Write a matrix as CSV. Floats use ``repr`` so a reload is exact.

    ``extra`` is an optional mapping of additional column name to a
    length-n sequence, appended after the role columns.
    """
    header = list(matrix.names)
    cols = [matrix.X[:, j] for j in range(matrix.n_features)]
    for name, v in ((label, matrix.labels), (prediction, matrix.predictions), (score, matrix.scores)):
        if v is not None:
            header.append(name)
            cols.append(v)
    for name, v in (extra or {}).items():
        header.append(name)
        cols.append(np.asarray(v))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(matrix.n_rows):
            writer.writerow([_fmt(c[i]) for c in cols])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def split(matrix, train_fraction, seed=0, stratify=False):
    """Seeded shuffle split into ``(train, holdout)``.

    With ``stratify`` each class is split separately, ``round(n_c * f)``
    rows going to train.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    n = matrix.n_rows
    if stratify:
        if matrix.labels is None:
            raise ParameterError("stratified split needs labels")
        train_idx, hold_idx = [], []
        for cls in (0, 1):
            members = np.flatnonzero(matrix.labels == cls)
            if len(members) == 0:
                continue
            if len(members) < 2:
                raise ParameterError(f"class {cls} has {len(members)} row(s); stratification needs >= 2")
            members = rng.permutation(members)
            cut = int(round(len(members) * train_fraction))
            cut = min(max(cut, 1), len(members) - 1)
            train_idx.append(members[:cut])
            hold_idx.append(members[cut:])
        train_idx = np.sort(np.concatenate(train_idx))
        hold_idx = np.sort(np.concatenate(hold_idx))
    else:
        order = rng.permutation(n)
        cut = int(round(n * train_fraction))
        train_idx, hold_idx = np.sort(order[:cut]), np.sort(order[cut:])
    return matrix.take(train_idx), matrix.take(hold_idx)


def rebalance(matrix, seed=0):
    """Oversample the minority class with replacement up to the majority count."""
    if matrix.labels is None:
        raise ParameterError("rebalance needs labels")
    counts = np.bincount(matrix.labels, minlength=2)
    if (counts == 0).any():
        raise ParameterError(f"rebalance needs both classes, got counts {counts.tolist()}")
    if counts[0] == counts[1]:
        return matrix
    minority = int(np.argmin(counts))
    members = np.flatnonzero(matrix.labels == minority)
    rng = np.random.default_rng(seed)
    extra = rng.choice(members, size=int(abs(counts[1] - counts[0])), replace=True)
    return matrix.take(np.concatenate([np.arange(matrix.n_rows), extra]))
