"""Tabular data: CSV loading, median imputation, standard scaling,
mutual-information feature selection and stratified repeated k-fold plans.

Everything here is a pure function of its inputs (plus an explicit seed).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MISSING_TOKENS = {"", "na", "nan"}
CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class TabularDataset:
    values: np.ndarray
    missing_mask: np.ndarray
    labels: np.ndarray
    column_names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.missing_mask, dtype=bool)
        labels = np.asarray(self.labels, dtype=np.int64)
        names = tuple(str(c) for c in self.column_names)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        if mask.shape != values.shape:
            raise ValueError("missing_mask must match the shape of values")
        if labels.shape != (values.shape[0],):
            raise ValueError("labels length must equal the row count")
        if len(names) != values.shape[1] or len(set(names)) != len(names):
            raise ValueError("column_names must be unique, one per column")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0/1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_names", names)

    @classmethod
    def from_arrays(cls, values, labels, column_names=None) -> "TabularDataset":
        values = np.asarray(values, dtype=float)
        if column_names is None:
            column_names = [f"x{j}" for j in range(values.shape[1])]
        mask = np.isnan(values)
        return cls(np.where(mask, 0.0, values), mask, labels, column_names)

    @property
    def shape(self):
        return self.values.shape

    def rows(self, index) -> "TabularDataset":
        index = np.asarray(index, dtype=np.int64)
        return replace(self, values=self.values[index], missing_mask=self.missing_mask[index],
                       labels=self.labels[index])

    def columns(self, index) -> "TabularDataset":
        index = [int(j) for j in index]
        return TabularDataset(self.values[:, index], self.missing_mask[:, index], self.labels,
                              tuple(self.column_names[j] for j in index))


@dataclass
class PreprocessReport:
    """Training-fit statistics; ``apply_preprocessing`` replays them on other rows."""

    medians: np.ndarray
    means: np.ndarray
    std_devs: np.ndarray
    constant: np.ndarray
    selected_columns: list
    mi_scores: np.ndarray
    column_names: tuple = ()
    n_bins: int = 10
    mi_threshold: float = 0.005
    top_k: int | None = None

    def to_dict(self) -> dict:
        return {
            "column_names": list(self.column_names),
            "medians": [float(v) for v in self.medians],
            "means": [float(v) for v in self.means],
            "std_devs": [float(v) for v in self.std_devs],
            "constant": [bool(v) for v in self.constant],
            "mi_scores": [float(v) for v in self.mi_scores],
            "selected_columns": [int(j) for j in self.selected_columns],
            "n_bins": self.n_bins,
            "mi_threshold": self.mi_threshold,
            "top_k": self.top_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessReport":
        return cls(
            medians=np.array(d["medians"], dtype=float),
            means=np.array(d["means"], dtype=float),
            std_devs=np.array(d["std_devs"], dtype=float),
            constant=np.array(d["constant"], dtype=bool),
            selected_columns=list(d["selected_columns"]),
            mi_scores=np.array(d["mi_scores"], dtype=float),
            column_names=tuple(d.get("column_names", ())),
            n_bins=d.get("n_bins", 10),
            mi_threshold=d.get("mi_threshold", 0.005),
            top_k=d.get("top_k"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PreprocessReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class SplitPlan:
    n_splits: int
    n_repeats: int
    seed: int
    folds: list = field(default_factory=list)

    def __len__(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def index(self, k: int):
        """``(repeat, fold)`` position of the k-th entry."""
        return divmod(k, self.n_splits)


def _parse_cell(text: str) -> float:
    token = text.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        return math.nan


def load_csv(path, label_column: str) -> TabularDataset:
    """Read a headed CSV; unparseable or empty cells are marked missing.

    The lexicographically larger of the two raw label strings maps to 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if label_column not in header:
        raise ValueError(f"{path}: label column {label_column!r} not in header")
    if len(set(header)) != len(header):
        raise ValueError(f"{path}: duplicate column names in header")
    label_pos = header.index(label_column)
    feature_pos = [k for k in range(len(header)) if k != label_pos]
    raw_labels = []
    values = np.empty((len(rows), len(feature_pos)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 2} has {len(row)} cells, header has {len(header)}")
        raw_labels.append(row[label_pos].strip())
        values[r] = [_parse_cell(row[k]) for k in feature_pos]
    classes = sorted(set(raw_labels))
    if len(classes) != 2:
        raise ValueError(f"{path}: label column must hold exactly two classes, found {classes[:5]}")
    labels = np.array([classes.index(v) for v in raw_labels], dtype=np.int64)
    mask = np.isnan(values)
    names = [header[k] for k in feature_pos]
    empty = np.flatnonzero(mask.all(axis=0)) if len(rows) else np.arange(len(names))
    if empty.size:
        raise ValueError(f"{path}: column {names[empty[0]]!r} is entirely missing")
    return TabularDataset(np.where(mask, 0.0, values), mask, labels, names)


def write_csv(path, data: TabularDataset, label_column: str = "label") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(data.column_names) + [label_column])
        for row, mask, y in zip(data.values, data.missing_mask, data.labels):
            cells = ["" if m else repr(float(v)) for v, m in zip(row, mask)]
            writer.writerow(cells + [int(y)])


def column_medians(data: TabularDataset) -> np.ndarray:
    observed = np.where(data.missing_mask, np.nan, data.values)
    if data.shape[0] and np.any(data.missing_mask.all(axis=0)):
        bad = int(np.flatnonzero(data.missing_mask.all(axis=0))[0])
        raise ValueError(f"column {data.column_names[bad]!r} is entirely missing")
    return np.nanmedian(observed, axis=0)


def impute_median(data: TabularDataset, medians=None):
    """Replace missing cells with column medians; returns ``(dataset, medians)``.

    With ``medians`` given (held-out rows) no statistics are computed.
    """
    if medians is None:
        medians = column_medians(data)
    medians = np.asarray(medians, dtype=float)
    filled = np.where(data.missing_mask, medians[None, :], data.values)
    return replace(data, values=filled, missing_mask=np.zeros_like(data.missing_mask)), medians


def standardize(data: TabularDataset, stats=None):
    """Standard scaling with population std; constant columns become zeros.

    Returns ``(dataset, means, std_devs)``. Pass ``stats=(means, std_devs)``
    to transform held-out rows with training statistics.
    """
    if np.any(data.missing_mask):
        raise ValueError("standardize needs a dataset without missing cells")
    if stats is None:
        means = data.values.mean(axis=0)
        std_devs = data.values.std(axis=0)
    else:
        means, std_devs = (np.asarray(s, dtype=float) for s in stats)
    constant = std_devs < CONSTANT_STD
    scale = np.where(constant, 1.0, std_devs)
    out = np.where(constant[None, :], 0.0, (data.values - means) / scale)
    return replace(data, values=out), means, std_devs


def equal_frequency_bins(feature, n_bins: int = 10) -> np.ndarray:
    """Bin index per entry using quantile edges; duplicate edges are merged."""
    x = np.asarray(feature, dtype=float)
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)))
    return np.searchsorted(edges[1:-1], x, side="right")


def mutual_information(feature, labels, n_bins: int = 10) -> float:
    """Plug-in mutual information (nats) between a binned feature and 0/1 labels."""
    x = np.asarray(feature, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("feature and labels must have the same length")
    if x.size < 2:
        raise ValueError("mutual_information needs at least 2 samples")
    if n_bins < 1:
        raise ValueError("n_bins must be positive")
    bins = equal_frequency_bins(x, n_bins)
    joint = np.zeros((bins.max() + 1, 2))
    np.add.at(joint, (bins, y), 1.0)
    joint /= x.size
    pb = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pb @ py)[nz])))
    return max(mi, 0.0)


def rank_features(values, labels, n_bins: int = 10):
    """MI per column and the column order by descending MI (ties: lower index first)."""
    values = np.asarray(values, dtype=float)
    scores = np.array([mutual_information(values[:, j], labels, n_bins)
                       for j in range(values.shape[1])])
    order = sorted(range(values.shape[1]), key=lambda j: (-scores[j], j))
    return scores, order


def select_features(data: TabularDataset, top_k: int | None = None, mi_threshold: float = 0.005,
                    n_bins: int = 10):
    """Drop zero-variance and low-MI columns, keep the ``top_k`` best.

    Returns the reduced dataset (columns in ranking order) and a report whose
    scaler statistics are left empty; :func:`fit_preprocessing` fills them.
    """
    if np.any(data.missing_mask):
        raise ValueError("select_features needs a dataset without missing cells")
    variance = data.values.var(axis=0)
    zero_var = variance < CONSTANT_STD**2
    scores, order = rank_features(data.values, data.labels, n_bins)
    scores = np.where(zero_var, 0.0, scores)
    selected = [j for j in order if not zero_var[j] and scores[j] >= mi_threshold]
    selected.sort(key=lambda j: (-scores[j], j))
    if top_k is not None:
        selected = selected[:top_k]
    if not selected:
        raise ValueError("feature selection removed every column")
    d = data.shape[1]
    report = PreprocessReport(
        medians=np.zeros(d), means=np.zeros(d), std_devs=np.ones(d), constant=zero_var,
        selected_columns=selected, mi_scores=scores, column_names=data.column_names,
        n_bins=n_bins, mi_threshold=mi_threshold, top_k=top_k)
    return data.columns(selected), report


def fit_preprocessing(train: TabularDataset, top_k: int | None = None, mi_threshold: float = 0.005,
                      n_bins: int = 10):
    """Impute, scale and select on training rows only; returns ``(dataset, report)``."""
    filled, medians = impute_median(train)
    scaled, means, std_devs = standardize(filled)
    selected, report = select_features(scaled, top_k, mi_threshold, n_bins)
    report.medians = medians
    report.means = means
    report.std_devs = std_devs
    report.constant = std_devs < CONSTANT_STD
    return selected, report


def apply_preprocessing(data: TabularDataset, report: PreprocessReport) -> TabularDataset:
    filled, _ = impute_median(data, report.medians)
    scaled, _, _ = standardize(filled, (report.means, report.std_devs))
    return scaled.columns(report.selected_columns)


def stratified_splits(labels, n_splits: int = 10, n_repeats: int = 5, seed: int = 0) -> SplitPlan:
    """Repeated stratified k-fold.

    Repeat r shuffles each class with ``default_rng(seed + r)`` and deals the
    shuffled indices round-robin into folds, continuing the dealing position
    from one class to the next so fold sizes differ by at most one.
    """
    y = np.asarray(labels, dtype=np.int64)
    if n_splits < 2 or n_repeats < 1:
        raise ValueError("need n_splits >= 2 and n_repeats >= 1")
    classes = np.unique(y)
    counts = {int(c): int(np.sum(y == c)) for c in classes}
    too_small = {c: k for c, k in counts.items() if k < n_splits}
    if too_small:
        raise ValueError(f"class counts {too_small} are smaller than n_splits={n_splits}")
    all_rows = np.arange(y.size)
    folds = []
    for r in range(n_repeats):
        rng = np.random.default_rng(seed + r)
        assignment = np.empty(y.size, dtype=np.int64)
        position = 0
        for c in classes:
            members = rng.permutation(np.flatnonzero(y == c))
            assignment[members] = (position + np.arange(members.size)) % n_splits
            position += members.size
        for k in range(n_splits):
            test = all_rows[assignment == k]
            train = all_rows[assignment != k]
            folds.append((train, test))
    return SplitPlan(n_splits, n_repeats, seed, folds)


def stratified_holdout(labels, test_fraction: float = 0.2, seed: int = 0):
    """Single stratified split, used for inner model selection."""
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        n_test = int(round(test_fraction * members.size))
        if n_test < 1 or n_test >= members.size:
            raise ValueError(f"class {int(c)} has too few rows ({members.size}) for an inner split")
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
