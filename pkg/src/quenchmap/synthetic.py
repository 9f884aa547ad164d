"""Synthetic datasets whose labels come from a planted Ising problem."""
from __future__ import annotations

import numpy as np

from .data import TabularDataset
from .encoding import CouplingGraph, encode_sample
from .quench import exact_ground_state, expect_z


def chain_covariance(n: int, rho: float) -> np.ndarray:
    """AR(1)-style correlation ``rho**|i-j|``."""
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def planted_couplings(n: int, rho: float = 0.5, corr_threshold: float = 0.1) -> CouplingGraph:
    """Couplings the correlation-to-coupling map would recover from infinite data."""
    cov = chain_covariance(n, rho)
    edges = [(i, j, -float(cov[i, j])) for i in range(n) for j in range(i + 1, n)
             if abs(cov[i, j]) >= corr_threshold]
    return CouplingGraph(n, tuple(edges))


def ground_magnetization(x, couplings: CouplingGraph, gamma: float = 0.0, h_max: float = 4.0) -> float:
    energy, state = exact_ground_state(encode_sample(x, couplings, h_max), gamma)
    return float(sum(expect_z(state, i) for i in range(couplings.n)))


def make_planted_dataset(n_samples: int = 200, n_features: int = 12, rho: float = 0.5,
                         gamma: float = 0.0, seed: int = 0, h_max: float = 4.0) -> TabularDataset:
    """Correlated Gaussian features labelled by the ground-state magnetization sign.

    Each sample x defines H(x) with fields clamp(x) and the planted couplings;
    the label is 1 when the ground state of ``-gamma sum X + H(x)`` has
    positive total magnetization. Samples with zero magnetization are redrawn.
    """
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(chain_covariance(n_features, rho))
    couplings = planted_couplings(n_features, rho)
    rows, labels = [], []
    while len(rows) < n_samples:
        x = chol @ rng.standard_normal(n_features)
        m = ground_magnetization(x, couplings, gamma, h_max)
        if abs(m) < 1e-9:
            continue
        rows.append(x)
        labels.append(int(m > 0))
    values = np.array(rows)
    return TabularDataset(values, np.zeros_like(values, dtype=bool), np.array(labels),
                          [f"x{j}" for j in range(n_features)])


def make_independent_columns(n_samples: int, n_features: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n_samples, n_features))

