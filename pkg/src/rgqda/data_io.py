"""CSV ingestion, stratified splitting, label flips, and the real-data bench.

Labels are opaque strings mapped to dense indices at fit time; features are
parsed as floats with '.' decimals.  The benchmark protocol mirrors the
simulation runner: split, flip a fraction of training labels, fit every
estimator, select the threshold, score the untouched test split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .classifier import fit_gqda, misclassification_error
from .errors import (
    ClassTooSmall,
    DegenerateData,
    EmptyDataset,
    MissingColumn,
    NotPositiveDefinite,
    ParseError,
    TooFewObservations,
)
from .estimators import EstimatorSpec
from .simulate import Report, ReportRow, _estimator_stream_key, _rng_for


@dataclass(frozen=True)
class LabeledDataset:
    """An n x p feature matrix with one string label per row."""

    features: np.ndarray
    labels: tuple
    column_names: tuple
    label_name: str = "label"

    def __post_init__(self):
        if self.features.shape[0] != len(self.labels):
            raise ValueError("features and labels disagree on n")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def class_table(self) -> tuple:
        return tuple(dict.fromkeys(self.labels))

    def class_rows(self, label) -> np.ndarray:
        return np.array([i for i, l in enumerate(self.labels) if l == label])

    def take(self, rows: np.ndarray) -> "LabeledDataset":
        return replace(
            self,
            features=self.features[rows],
            labels=tuple(self.labels[i] for i in rows),
        )


def _resolve_column(header: list[str], column, what: str) -> int:
    if isinstance(column, int):
        if not 0 <= column < len(header):
            raise MissingColumn(f"{what} index {column} out of range (header has {len(header)})")
        return column
    if column in header:
        return header.index(column)
    raise MissingColumn(f"{what} {column!r} not found in header {header}")


def load_csv(
    path,
    label_column,
    feature_columns=None,
    drop_constant_columns: bool = False,
) -> LabeledDataset:
    """Read a headed CSV into a LabeledDataset.

    ``label_column`` and entries of ``feature_columns`` may be header names
    or zero-based indices; by default every non-label column is a feature.
    Non-numeric feature cells raise ParseError with the file row number
    (the header is row 1).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        label_idx = _resolve_column(header, label_column, "label column")
        if feature_columns is None:
            feature_idx = [i for i in range(len(header)) if i != label_idx]
        else:
            feature_idx = [
                _resolve_column(header, col, "feature column") for col in feature_columns
            ]
        rows = []
        labels = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(row_num, "<row>", f"expected {len(header)} fields, got {len(row)}")
            values = []
            for i in feature_idx:
                try:
                    values.append(float(row[i]))
                except ValueError:
                    raise ParseError(row_num, header[i], f"not a number: {row[i]!r}") from None
            rows.append(values)
            labels.append(row[label_idx])
    if not rows:
        raise EmptyDataset(f"{path} has a header but no data rows")
    features = np.array(rows, dtype=float)
    names = [header[i] for i in feature_idx]
    if drop_constant_columns:
        keep = features.var(axis=0) > 0.0
        features = features[:, keep]
        names = [n for n, k in zip(names, keep) if k]
    return LabeledDataset(
        features=features,
        labels=tuple(labels),
        column_names=tuple(names),
        label_name=header[label_idx],
    )


def save_csv(data: LabeledDataset, path) -> None:
    """Write the dataset back out; feature values round-trip bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.column_names) + [data.label_name])
        for row, label in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [label])


def stratified_split(
    data: LabeledDataset, train_fraction: float, rng
) -> tuple[LabeledDataset, LabeledDataset]:
    """Per-class random split; train keeps at least p + 2 rows per class."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    train_rows, test_rows = [], []
    for label in data.class_table:
        rows = data.class_rows(label)
        n_i = rows.size
        k = max(int(math.floor(train_fraction * n_i)), data.p + 2)
        if k >= n_i:
            raise ClassTooSmall(
                f"class {label!r} has {n_i} rows; cannot keep {k} for training "
                "and still leave a test row"
            )
        perm = rng.permutation(n_i)
        train_rows.append(np.sort(rows[perm[:k]]))
        test_rows.append(np.sort(rows[perm[k:]]))
    return data.take(np.concatenate(train_rows)), data.take(np.concatenate(test_rows))


def flip_labels(data: LabeledDataset, fraction: float, rng) -> LabeledDataset:
    """Reassign floor(fraction n) uniformly chosen labels to other classes."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must be in [0, 1)")
    classes = data.class_table
    if len(classes) < 2:
        raise DegenerateData("need at least two classes to flip labels")
    k = int(math.floor(fraction * data.n))
    if k == 0:
        return data
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    rows = rng.choice(data.n, size=k, replace=False)
    labels = list(data.labels)
    for i in rows:
        others = [c for c in classes if c != labels[i]]
        labels[i] = others[int(rng.integers(len(others)))]
    return replace(data, labels=tuple(labels))


def run_real_experiment(
    data: LabeledDataset,
    estimators: tuple[EstimatorSpec, ...],
    replications: int,
    train_fraction: float = 0.7,
    flip_fraction: float = 0.1,
    seed: int = 0,
    jobs: int = 1,
) -> Report:
    """Replicated split/flip/fit/score benchmark on a fixed dataset."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    args = [
        (data, estimators, train_fraction, flip_fraction, seed, r)
        for r in range(replications)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_real_replication_star, args))
    else:
        chunks = [_real_replication(*a) for a in args]
    rows = [row for chunk in chunks for row in chunk]
    return Report(rows=rows, estimator_labels=[s.label for s in estimators])


def _real_replication(data, estimators, train_fraction, flip_fraction, seed, r):
    rng = _rng_for(seed, r, 0)
    train, test = stratified_split(data, train_fraction, rng)
    train = flip_labels(train, flip_fraction, rng)
    rows = []
    for spec in estimators:
        est_rng = _rng_for(seed, r, _estimator_stream_key(spec.kind))
        try:
            model = fit_gqda(train.features, list(train.labels), spec, est_rng)
            if not set(test.labels) <= set(model.classes):
                raise DegenerateData("a class vanished from the training split")
            me = 100.0 * misclassification_error(model, test.features, list(test.labels))
            rows.append(ReportRow(spec.label, r, me, model.c_star, False))
        except (DegenerateData, TooFewObservations, NotPositiveDefinite):
            rows.append(ReportRow(spec.label, r, None, None, True))
    return rows


def _real_replication_star(args):
    return _real_replication(*args)
