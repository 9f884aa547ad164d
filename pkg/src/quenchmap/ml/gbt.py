"""Gradient-boosted regression trees for binary log-loss."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

FORMAT = "quenchmap.gbt/1"
LEAF_CLAMP = 10.0
HESSIAN_FLOOR = 1e-12


@dataclass
class Tree:
    """Array-encoded binary tree; ``feature[k] == -1`` marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_node(self) -> int:
        for column in (self.feature, self.left, self.right):
            column.append(-1)
        self.threshold.append(0.0)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        node = np.zeros(x.shape[0], dtype=np.int64)
        feature = np.array(self.feature)
        threshold = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        active = feature[node] >= 0
        while np.any(active):
            rows = np.flatnonzero(active)
            k = node[rows]
            go_left = x[rows, feature[k]] <= threshold[k]
            node[rows] = np.where(go_left, left[k], right[k])
            active = feature[node] >= 0
        out[:] = np.array(self.value)[node]
        return out

    def to_dict(self) -> dict:
        return {"feature": list(self.feature), "threshold": list(self.threshold),
                "left": list(self.left), "right": list(self.right), "value": list(self.value)}


@dataclass
class GbtModel:
    trees: list
    learning_rate: float
    max_depth: int
    n_trees: int
    base_score: float
    n_features: int
    train_loss: list = field(default_factory=list)

    def raw_score(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        total = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            total += self.learning_rate * tree.predict(x)
        return total

    def to_dict(self) -> dict:
        return {"format": FORMAT, "learning_rate": self.learning_rate, "max_depth": self.max_depth,
                "n_trees": self.n_trees, "base_score": self.base_score,
                "n_features": self.n_features, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "GbtModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a GBT model file (format={d.get('format')!r})")
        trees = [Tree(**t) for t in d["trees"]]
        return cls(trees, d["learning_rate"], d["max_depth"], d["n_trees"], d["base_score"],
                   d["n_features"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")


def log_loss(labels, raw) -> float:
    y = np.asarray(labels, dtype=float)
    # log(1 + exp(-m)) with m = (2y - 1) * raw, computed stably
    return float(np.mean(np.logaddexp(0.0, -(2.0 * y - 1.0) * raw)))


def _best_split(x: np.ndarray, r: np.ndarray):
    """Exact greedy split maximizing the reduction of squared error of ``r``.

    Returns ``(gain, feature, threshold)`` or ``None`` when no split helps.
    Ties go to the lower feature index, then the lower threshold.
    """
    m, d = x.shape
    total = r.sum()
    base = total * total / m
    best = None
    for j in range(d):
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        cs = np.cumsum(r[order])[:-1]
        valid = xs[1:] > xs[:-1]
        if not np.any(valid):
            continue
        n_left = np.arange(1, m)
        left = cs * cs / n_left
        right = (total - cs) ** 2 / (m - n_left)
        gain = np.where(valid, left + right - base, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > 1e-12 * max(1.0, abs(base)) and (best is None or gain[k] > best[0]):
            best = (float(gain[k]), j, 0.5 * (xs[k] + xs[k + 1]))
    return best


def _fit_tree(x, residual, hess, max_depth) -> Tree:
    tree = Tree()

    def grow(rows, depth):
        node = tree.add_node()
        split = _best_split(x[rows], residual[rows]) if depth < max_depth and rows.size > 1 else None
        if split is None:
            value = residual[rows].sum() / max(hess[rows].sum(), HESSIAN_FLOOR)
            tree.value[node] = float(np.clip(value, -LEAF_CLAMP, LEAF_CLAMP))
            return node
        _, j, thr = split
        go_left = x[rows, j] <= thr
        tree.feature[node] = j
        tree.threshold[node] = float(thr)
        tree.left[node] = grow(rows[go_left], depth + 1)
        tree.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return tree


def gbt_train(features, labels, n_trees: int = 100, max_depth: int = 3,
              learning_rate: float = 0.1, seed: int = 0, subsample: float = 1.0) -> GbtModel:
    """Logistic-loss boosting with Newton leaf values.

    ``seed`` only matters when ``subsample < 1`` (rows drawn without
    replacement each round).
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValueError("features must be (N, d) with N labels")
    if np.unique(y).size < 2:
        raise ValueError("gbt_train needs both classes")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must lie in (0, 1]")
    if max_depth < 1 or n_trees < 0:
        raise ValueError("max_depth must be >= 1 and n_trees >= 0")
    prevalence = y.mean()
    base = float(np.log(prevalence / (1.0 - prevalence)))
    raw = np.full(y.size, base)
    rng = np.random.default_rng(seed)
    trees = []
    losses = [log_loss(y, raw)]
    for _ in range(n_trees):
        p = expit(raw)
        residual = y - p
        hess = p * (1.0 - p)
        if subsample < 1.0:
            rows = np.sort(rng.choice(y.size, max(2, int(round(subsample * y.size))), replace=False))
            tree = _fit_tree(x[rows], residual[rows], hess[rows], max_depth)
        else:
            tree = _fit_tree(x, residual, hess, max_depth)
        trees.append(tree)
        raw = raw + learning_rate * tree.predict(x)
        losses.append(log_loss(y, raw))
    return GbtModel(trees, float(learning_rate), int(max_depth), int(n_trees), base, x.shape[1],
                    losses)


def gbt_predict(model: GbtModel, features):
    """Return ``(probabilities, labels)``; label 1 iff probability > 0.5."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[1]}")
    prob = expit(model.raw_score(x))
    return prob, (prob > 0.5).astype(np.int64)
