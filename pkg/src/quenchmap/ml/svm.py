"""Soft-margin SVM on a precomputed Gram matrix, solved in the dual by SMO.

The first working index is the maximal KKT violator; its partner is the one
with the largest guaranteed objective decrease (second-order selection). The
pair update is the clipped two-variable analytic step.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

FORMAT = "quenchmap.svm/1"
TAU = 1e-12


@dataclass
class SvmModel:
    alphas: np.ndarray
    bias: float
    C: float
    signs: np.ndarray
    iterations: int = 0
    converged: bool = True

    @property
    def support_rows(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 1e-8)

    @property
    def dual_coef(self) -> np.ndarray:
        return self.alphas * self.signs

    def to_dict(self) -> dict:
        return {"format": FORMAT, "C": self.C, "bias": self.bias,
                "alphas": [float(a) for a in self.alphas],
                "signs": [int(s) for s in self.signs],
                "iterations": self.iterations, "converged": self.converged}

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        if d.get("format") != FORMAT:
            raise ValueError(f"not an SVM model file (format={d.get('format')!r})")
        return cls(np.array(d["alphas"], dtype=float), float(d["bias"]), float(d["C"]),
                   np.array(d["signs"], dtype=float), d.get("iterations", 0),
                   d.get("converged", True))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


def _values(gram) -> np.ndarray:
    return np.asarray(getattr(gram, "values", gram), dtype=float)


def _signs(labels) -> np.ndarray:
    y = np.asarray(labels)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ValueError("svm_train needs both classes")
    return np.where(y == 1, 1.0, -1.0)


@njit(cache=True)
def _bias(alpha, grad, y, C):
    """Mean of ``-y grad`` over free SVs, else the midpoint of the feasible interval."""
    total = 0.0
    count = 0
    ub = np.inf
    lb = -np.inf
    for t in range(alpha.size):
        yg = y[t] * grad[t]
        if 0.0 < alpha[t] < C:
            total += yg
            count += 1
        # feasible -bias interval when every alpha sits at a bound
        elif (y[t] > 0 and alpha[t] <= 0.0) or (y[t] < 0 and alpha[t] >= C):
            ub = min(ub, yg)
        else:
            lb = max(lb, yg)
    if count > 0:
        return -total / count
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return -0.5 * (ub + lb)


@njit(cache=True)
def _objectives(Q, alpha, bias, y, C):
    n = alpha.size
    quad = 0.0
    slack = 0.0
    asum = 0.0
    for t in range(n):
        qa = 0.0
        for u in range(n):
            qa += Q[t, u] * alpha[u]
        quad += alpha[t] * qa
        asum += alpha[t]
        # y_t * f(x_t) = (Q alpha)_t + y_t b
        slack += max(0.0, 1.0 - (qa + y[t] * bias))
    return 0.5 * quad + C * slack, asum - 0.5 * quad


def duality_gap(Q, alpha, bias, y, C) -> tuple:
    """``(primal, dual)`` objective values for a candidate solution."""
    primal, dual = _objectives(np.ascontiguousarray(Q, dtype=float), np.asarray(alpha, dtype=float),
                               float(bias), np.asarray(y, dtype=float), float(C))
    return float(primal), float(dual)


@njit(cache=True)
def _smo(Q, y, C, tol, gap_tol, max_iter, alpha, grad):
    """Run SMO in place on ``alpha``/``grad``; returns ``(iterations, converged)``."""
    n = y.size
    it = 0
    while it < max_iter:
        # first index: maximal violator in the "up" set; m - M is the KKT violation
        i = -1
        g_max = -np.inf
        g_min = np.inf
        for t in range(n):
            yg = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if yg > g_max:
                    g_max = yg
                    i = t
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                if yg < g_min:
                    g_min = yg
        if i < 0 or not np.isfinite(g_min):
            return it, True
        violation = g_max - g_min
        if violation <= tol:
            bias = _bias(alpha, grad, y, C)
            primal, dual = _objectives(Q, alpha, bias, y, C)
            if primal - dual <= gap_tol * max(1.0, abs(dual)) or violation <= 1e-14:
                return it, True
        # second index: largest guaranteed decrease among violating partners
        j = -1
        best = -np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                b = g_max + y[t] * grad[t]
                if b > 0:
                    curv = max(Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t], TAU)
                    score = b * b / curv
                    if score > best:
                        best = score
                        j = t
        if j < 0:
            return it, True
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = max(Q[i, i] + Q[j, j] + 2.0 * Q[i, j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = max(Q[i, i] + Q[j, j] - 2.0 * Q[i, j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        it += 1
        if d_i == 0.0 and d_j == 0.0:
            # numerically stuck pair; recompute the gradient once and stop if nothing changes
            changed = False
            for t in range(n):
                fresh = -1.0
                for u in range(n):
                    fresh += Q[t, u] * alpha[u]
                if fresh != grad[t]:
                    changed = True
                grad[t] = fresh
            if not changed:
                return it, False
        else:
            for t in range(n):
                grad[t] += Q[t, i] * d_i + Q[t, j] * d_j
    return it, False


def _ensure_psd(k: np.ndarray) -> np.ndarray:
    n = k.shape[0]
    trace = float(np.trace(k))
    lam = float(np.linalg.eigvalsh(k)[0])
    if lam >= -1e-8 * max(trace, 0.0):
        return k
    eps = 1e-8 * trace / n if trace > 0 else 1e-8
    warnings.warn(f"Gram matrix is not PSD (min eigenvalue {lam:.3g}); shifting diagonal by {eps:.3g}")
    shifted = k + eps * np.eye(n)
    lam = float(np.linalg.eigvalsh(shifted)[0])
    if lam < -1e-8 * max(float(np.trace(shifted)), 0.0):
        raise ValueError(f"Gram matrix is not positive semidefinite (min eigenvalue {lam:.3g})")
    return shifted


def svm_train(gram, labels, C: float = 1.0, tol: float = 1e-4, gap_tol: float = 1e-6,
              max_iter: int | None = None) -> SvmModel:
    """Train on an ``(N, N)`` Gram matrix.

    Stops once the maximal KKT violation is at most ``tol`` and the relative
    duality gap is at most ``gap_tol``, or after ``max_iter`` pair updates
    (``converged=False`` in that case).
    """
    k = _values(gram)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("training Gram matrix must be square")
    y = _signs(labels)
    if y.size != k.shape[0]:
        raise ValueError("labels and Gram matrix sizes differ")
    if not C > 0:
        raise ValueError("C must be positive")
    k = _ensure_psd(0.5 * (k + k.T))
    n = y.size
    Q = (y[:, None] * y[None, :]) * k
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = max_iter if max_iter is not None else max(1_000_000, 1000 * n)
    it, converged = _smo(np.ascontiguousarray(Q), y, float(C), float(tol), float(gap_tol),
                         int(max_iter), alpha, grad)
    bias = float(_bias(alpha, grad, y, C))
    if not converged:
        warnings.warn(f"SMO stopped after {it} iterations without meeting the tolerances")
    return SvmModel(alpha, bias, float(C), y, it, converged)


def decision_function(model: SvmModel, gram_test_train) -> np.ndarray:
    k = np.atleast_2d(_values(gram_test_train))
    if k.shape[1] != model.alphas.size:
        raise ValueError(f"Gram matrix has {k.shape[1]} columns, model has {model.alphas.size} training rows")
    return k @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, gram_test_train):
    """Return ``(scores, labels)`` with label 1 iff the score is positive."""
    scores = decision_function(model, gram_test_train)
    return scores, (scores > 0).astype(np.int64)


def kkt_violations(model: SvmModel, gram, labels) -> np.ndarray:
    """Per-row violation of the KKT conditions (0 when satisfied)."""
    k = _values(gram)
    y = _signs(labels)
    margin = y * decision_function(model, k)
    a, C = model.alphas, model.C
    at_zero = a <= 1e-12
    at_c = a >= C - 1e-12
    free = ~(at_zero | at_c)
    viol = np.zeros_like(margin)
    viol[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    viol[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return viol
