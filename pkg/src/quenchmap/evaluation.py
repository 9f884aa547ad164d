"""Cross-validated raw-vs-quantum-feature benchmark and anneal-time sweeps.

Per outer fold everything that is fitted (imputation medians, scaler
statistics, MI ranking, couplings, model hyperparameters) sees the training
rows only. Results are appended to ``ledger.jsonl`` as they complete, so an
interrupted run resumes where it stopped and produces the same CSVs.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .data import (PreprocessReport, TabularDataset, apply_preprocessing, fit_preprocessing,
                   load_csv, stratified_holdout, stratified_splits)
from .encoding import CouplingGraph, fit_couplings
from .features import QuenchCache, map_dataset
from .ml import compute_metrics, gbt_predict, gbt_train, gram_linear, svm_predict, svm_train

log = logging.getLogger(__name__)

METRICS = ("accuracy_balanced", "accuracy_plain", "precision", "recall", "f1", "auc")
FOLD_COLUMNS = ("dataset", "model", "representation", "tau_ns", "repeat", "fold") + METRICS
SUMMARY_COLUMNS = ("dataset", "model", "representation", "tau_ns", "metric", "n_scores",
                   "median", "q25", "q75", "iqr", "min", "max")
REPRESENTATIONS = ("raw", "aqfm")


class FoldSkipped(RuntimeError):
    pass


@dataclass
class FoldArtifacts:
    report: PreprocessReport
    couplings: CouplingGraph
    train: TabularDataset
    test: TabularDataset


def fit_fold(config: ExperimentConfig, data: TabularDataset, train_idx, test_idx=None) -> FoldArtifacts:
    """Fit preprocessing and couplings on ``train_idx`` and transform both splits."""
    p, e = config.preprocess, config.encoding
    train, report = fit_preprocessing(data.rows(train_idx), p.top_k, p.mi_threshold, p.n_bins)
    test = apply_preprocessing(data.rows(test_idx), report) if test_idx is not None else None
    couplings = fit_couplings(train.values, e.corr_threshold, e.max_degree, e.coupling_scale, e.j_max)
    return FoldArtifacts(report, couplings, train, test)


def parameter_grid(spec: dict) -> list:
    keys = list(spec)
    values = [v if isinstance(v, (list, tuple)) else [v] for v in spec.values()]
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def fit_predict(family: str, params: dict, x_train, y_train, x_test):
    """Train one model and return ``(scores, labels)`` on ``x_test``."""
    if family == "svm":
        model = svm_train(gram_linear(x_train), y_train, C=float(params.get("C", 1.0)),
                          tol=float(params.get("tol", 1e-4)))
        return svm_predict(model, gram_linear(x_test, x_train))
    if family == "gbt":
        model = gbt_train(x_train, y_train, n_trees=int(params.get("n_trees", 100)),
                          max_depth=int(params.get("max_depth", 3)),
                          learning_rate=float(params.get("learning_rate", 0.1)),
                          seed=int(params.get("seed", 0)),
                          subsample=float(params.get("subsample", 1.0)))
        return gbt_predict(model, x_test)
    raise ValueError(f"unknown model family {family!r}")


def inner_splits(config: ExperimentConfig, labels, seed: int):
    cv = config.cv
    try:
        if cv.inner == "kfold":
            return list(stratified_splits(labels, cv.inner_splits, 1, seed).folds)
        return [stratified_holdout(labels, cv.inner_test_fraction, seed)]
    except ValueError as err:
        raise FoldSkipped(f"inner split impossible: {err}") from None


def select_params(family: str, grid: list, x, y, splits) -> dict:
    """Grid point with the best mean inner balanced accuracy (first wins ties)."""
    if len(grid) == 1:
        return grid[0]
    best, best_score = grid[0], -np.inf
    for params in grid:
        scores = []
        for tr, va in splits:
            s, p = fit_predict(family, params, x[tr], y[tr], x[va])
            scores.append(compute_metrics(y[va], p, s).accuracy)
        score = float(np.mean(scores))
        if score > best_score:
            best, best_score = params, score
    return best


def evaluate_models(config: ExperimentConfig, x_train, y_train, x_test, y_test, seed: int) -> dict:
    splits = inner_splits(config, y_train, seed)
    out = {}
    for family, spec in config.models.items():
        params = select_params(family, parameter_grid(spec), x_train, y_train, splits)
        scores, labels = fit_predict(family, params, x_train, y_train, x_test)
        out[family] = compute_metrics(y_test, labels, scores)
    return out


def mapped_features(config: ExperimentConfig, art: FoldArtifacts, tau: float,
                    cache: QuenchCache | None = None):
    q, e = config.quench, config.encoding
    qc = config.quench_config(tau)
    enc = {"corr_threshold": e.corr_threshold, "max_degree": e.max_degree,
           "coupling_scale": e.coupling_scale, "j_max": e.j_max}
    both = np.vstack([art.train.values, art.test.values])
    labels = np.concatenate([art.train.labels, art.test.labels])
    mapped = map_dataset(both, labels, art.couplings, qc, q.include_zz, e.h_max, cache, enc)
    m_train = mapped.features[: art.train.shape[0]]
    m_test = mapped.features[art.train.shape[0]:]
    if q.standardize_mapped:
        mean = m_train.mean(axis=0)
        std = m_train.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        m_train = (m_train - mean) / std
        m_test = (m_test - mean) / std
    return m_train, m_test


def _inner_seed(config: ExperimentConfig, repeat: int, fold: int) -> int:
    return config.cv.seed + 7919 * (repeat * config.cv.n_splits + fold) + 1


def run_fold(config: ExperimentConfig, data: TabularDataset, fold, tau: float, repeat: int = 0,
             fold_index: int = 0, cache: QuenchCache | None = None) -> dict:
    """Metrics for each model family on raw and quantum features of one outer fold.

    Returns ``{family: {"raw": MetricsReport, "aqfm": MetricsReport}}``;
    raises :class:`FoldSkipped` when the inner split cannot be formed.
    """
    train_idx, test_idx = fold
    art = fit_fold(config, data, train_idx, test_idx)
    seed = _inner_seed(config, repeat, fold_index)
    raw = evaluate_models(config, art.train.values, art.train.labels, art.test.values,
                          art.test.labels, seed)
    m_train, m_test = mapped_features(config, art, tau, cache)
    aqfm = evaluate_models(config, m_train, art.train.labels, m_test, art.test.labels, seed)
    return {family: {"raw": raw[family], "aqfm": aqfm[family]} for family in config.models}


def _metric_dict(report) -> dict:
    return {"accuracy_balanced": report.accuracy, "accuracy_plain": report.accuracy_plain,
            "precision": report.precision, "recall": report.recall, "f1": report.f1,
            "auc": report.auc}


def _run_task(config: ExperimentConfig, data: TabularDataset, train_idx, test_idx, repeat: int,
              fold: int, taus: list, need_raw: bool, cache_dir) -> list:
    cache = QuenchCache(cache_dir) if cache_dir else None
    base = {"repeat": repeat, "fold": fold}
    try:
        art = fit_fold(config, data, train_idx, test_idx)
        seed = _inner_seed(config, repeat, fold)
        records = []
        if need_raw:
            raw = evaluate_models(config, art.train.values, art.train.labels, art.test.values,
                                  art.test.labels, seed)
            records += [dict(base, kind="result", tau=None, representation="raw", model=m,
                             metrics=_metric_dict(r)) for m, r in raw.items()]
        for tau in taus:
            m_train, m_test = mapped_features(config, art, tau, cache)
            res = evaluate_models(config, m_train, art.train.labels, m_test, art.test.labels, seed)
            records += [dict(base, kind="result", tau=tau, representation="aqfm", model=m,
                             metrics=_metric_dict(r)) for m, r in res.items()]
        return records
    except FoldSkipped as err:
        return [dict(base, kind="skip", reason=str(err))]


class Ledger:
    """Append-only JSON-lines record of finished cells."""

    def __init__(self, path, config_digest: str):
        self.path = Path(path)
        self.digest = config_digest
        if self.path.exists():
            self._drop_torn_tail()
            entries = self.read()
            header = entries[0] if entries else {}
            if header.get("kind") != "header" or header.get("config_sha256") != config_digest:
                raise ValueError(f"{self.path} belongs to a different configuration; "
                                 "use a fresh output directory")
        else:
            self._append([{"kind": "header", "config_sha256": config_digest}])

    def _drop_torn_tail(self) -> None:
        # cut an interrupted final write so later appends start on a fresh line
        raw = self.path.read_bytes()
        keep = len(raw)
        for line in reversed(raw.splitlines(keepends=True)):
            try:
                if line.strip():
                    json.loads(line)
                if line.endswith(b"\n"):
                    break
            except json.JSONDecodeError:
                pass
            keep -= len(line)
        if keep != len(raw):
            with self.path.open("r+b") as fh:
                fh.truncate(keep)

    def read(self) -> list:
        entries = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    # a torn final line from an interrupted write
                    break
        return entries

    def _append(self, records: list) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def append(self, records: list) -> None:
        self._append(records)

    def state(self):
        results, skipped = {}, {}
        for rec in self.read():
            if rec.get("kind") == "result":
                key = (rec["repeat"], rec["fold"], rec["tau"], rec["representation"], rec["model"])
                results[key] = rec["metrics"]
            elif rec.get("kind") == "skip":
                skipped[(rec["repeat"], rec["fold"])] = rec["reason"]
        return results, skipped


@dataclass
class SweepResult:
    """Fold scores keyed by ``(tau, model, representation, metric)``."""

    scores: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    n_folds: int = 0

    def values(self, tau, model, representation, metric) -> np.ndarray:
        return np.asarray(self.scores[(float(tau), model, representation, metric)], dtype=float)

    def median(self, tau, model, representation="aqfm", metric="accuracy_balanced") -> float:
        return float(np.median(self.values(tau, model, representation, metric)))

    def iqr(self, tau, model, representation="aqfm", metric="accuracy_balanced") -> float:
        v = self.values(tau, model, representation, metric)
        return float(np.percentile(v, 75) - np.percentile(v, 25))


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    q25, q75 = np.percentile(v, [25, 75])
    return {"n_scores": v.size, "median": float(np.median(v)), "q25": float(q25),
            "q75": float(q75), "iqr": float(q75 - q25), "min": float(v.min()), "max": float(v.max())}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, columns, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    os.replace(tmp, path)


def run_experiment(config: ExperimentConfig, data: TabularDataset | None = None, out_dir=None,
                   jobs: int | None = None) -> SweepResult:
    """Run every outer fold at every anneal time and write the result files.

    Writes ``folds.csv`` (one row per model, representation, tau and fold),
    ``summary.csv`` (median, quartiles and IQR per group), ``provenance.json``
    and the resume ledger into ``out_dir``.
    """
    config.validate()
    if data is None:
        data = load_csv(config.dataset.path, config.dataset.label_column)
    dataset_name = config.dataset.name or (Path(config.dataset.path).stem if config.dataset.path
                                           else "dataset")
    out = Path(out_dir or config.output.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise OSError(f"output directory {out} is not writable: {err}") from None
    cache_dir = os.environ.get("QUENCHMAP_CACHE_DIR") or config.output.cache_dir or str(out / "cache")
    jobs = jobs or config.output.jobs
    taus = [float(t) for t in config.quench.tau_list]
    models = list(config.models)

    cv = config.cv
    plan = stratified_splits(data.labels, cv.n_splits, cv.n_repeats, cv.seed)
    ledger = Ledger(out / "ledger.jsonl", config.digest())
    done, skipped = ledger.state()

    tasks = []
    for k, (train_idx, test_idx) in enumerate(plan.folds):
        repeat, fold = plan.index(k)
        if (repeat, fold) in skipped:
            continue
        need_raw = any((repeat, fold, None, "raw", m) not in done for m in models)
        todo = [t for t in taus if any((repeat, fold, t, "aqfm", m) not in done for m in models)]
        if need_raw or todo:
            tasks.append((train_idx, test_idx, repeat, fold, todo, need_raw))

    log.info("%d of %d folds pending", len(tasks), len(plan.folds))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_task, config, data, *t, cache_dir) for t in tasks]
            for fut in futures:
                ledger.append(fut.result())
    else:
        for t in tasks:
            ledger.append(_run_task(config, data, *t, cache_dir))

    done, skipped = ledger.state()
    result = SweepResult(skipped=skipped, n_folds=len(plan.folds))
    fold_rows = []
    for model in models:
        for rep in REPRESENTATIONS:
            for tau in taus:
                for k in range(len(plan.folds)):
                    repeat, fold = plan.index(k)
                    if (repeat, fold) in skipped:
                        continue
                    key = (repeat, fold, None if rep == "raw" else tau, rep, model)
                    metrics = done[key]
                    fold_rows.append(dict(dataset=dataset_name, model=model, representation=rep,
                                          tau_ns=tau, repeat=repeat, fold=fold, **metrics))
                    for name in METRICS:
                        result.scores.setdefault((tau, model, rep, name), []).append(metrics[name])

    summary_rows = []
    for (tau, model, rep, name), values in result.scores.items():
        summary_rows.append(dict(dataset=dataset_name, model=model, representation=rep,
                                 tau_ns=tau, metric=name, **summarize(values)))
    _write_csv(out / "folds.csv", FOLD_COLUMNS, fold_rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    provenance = {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_sha256": config.digest(),
        "config": config.to_dict(),
        "dataset": dataset_name,
        "n_rows": int(data.shape[0]),
        "n_columns": int(data.shape[1]),
        "n_folds": len(plan.folds),
        "skipped_folds": [{"repeat": r, "fold": f, "reason": why}
                          for (r, f), why in sorted(skipped.items())],
    }
    (out / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return result


def read_folds_csv(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
