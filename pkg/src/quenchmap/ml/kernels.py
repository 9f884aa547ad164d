"""Gram matrices on quantum features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GramMatrix:
    values: np.ndarray
    kind: str = "linear_on_features"

    @property
    def shape(self):
        return self.values.shape

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.values + self.values.T))[0])

    def is_psd(self, rtol: float = 1e-8) -> bool:
        if self.values.shape[0] != self.values.shape[1]:
            raise ValueError("PSD check needs a square Gram matrix")
        if self.values.size == 0:
            return True
        return self.min_eigenvalue() >= -rtol * max(float(np.trace(self.values)), 0.0)


def gram_linear(features_a, features_b=None) -> GramMatrix:
    """Inner products between rows of ``features_a`` and rows of ``features_b``."""
    a = np.atleast_2d(np.asarray(features_a, dtype=float))
    b = a if features_b is None else np.atleast_2d(np.asarray(features_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    k = a @ b.T
    if features_b is None:
        k = 0.5 * (k + k.T)
    return GramMatrix(k, "linear_on_features")


def gram_fidelity(states, states_b=None) -> GramMatrix:
    """Squared overlaps |<psi_i|psi_j>|^2 between final states."""
    a = np.stack([np.asarray(getattr(s, "amplitudes", s), dtype=complex) for s in states])
    b = a if states_b is None else np.stack(
        [np.asarray(getattr(s, "amplitudes", s), dtype=complex) for s in states_b])
    if a.shape[1] != b.shape[1]:
        raise ValueError("states have different dimensions")
    overlaps = a.conj() @ b.T
    k = overlaps.real**2 + overlaps.imag**2
    if states_b is None:
        k = 0.5 * (k + k.T)
        np.fill_diagonal(k, 1.0)
    return GramMatrix(np.clip(k, 0.0, 1.0), "fidelity")
