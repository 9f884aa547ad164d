"""Quantum feature vectors: encode -> quench -> <Z_i> (and optionally <Z_i Z_j> per edge)."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import CouplingGraph, diagonal_energies, encode_sample
from .quench import (QuenchConfig, StateVector, evolve_energies, sample_bitstrings,
                     z_expectations, zz_expectations)

CACHE_ENV = "QUENCHMAP_CACHE_DIR"


@dataclass
class QuantumFeatureVector:
    z: np.ndarray
    zz: np.ndarray | None = None

    def as_array(self) -> np.ndarray:
        if self.zz is None:
            return np.asarray(self.z, dtype=float)
        return np.concatenate([self.z, self.zz])


@dataclass
class MappedDataset:
    features: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def column_names(self) -> list:
        n = self.provenance.get("n_qubits", self.features.shape[1])
        names = [f"q{i}" for i in range(n)]
        names += [f"e{k}" for k in range(self.features.shape[1] - n)]
        return names

    def write(self, path) -> Path:
        """Write ``q0..,e0..,label`` CSV plus a ``<stem>.provenance.json`` sidecar."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.column_names + ["label"])
            for row, y in zip(self.features, self.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(y)])
        sidecar = path.with_suffix(".provenance.json")
        sidecar.write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
        return sidecar


def provenance(couplings: CouplingGraph, config: QuenchConfig, include_zz: bool,
               h_max: float, encoding: dict | None = None) -> dict:
    return {
        "n_qubits": couplings.n,
        "n_edges": len(couplings.edges),
        "couplings_sha256": couplings.digest(),
        "tau_ns": config.tau_ns,
        "dt_ns": config.dt_ns,
        "schedule": config.schedule.descriptor(),
        "shots": config.shots,
        "seed": config.seed,
        "include_zz": include_zz,
        "h_max": h_max,
        "encoding": dict(encoding or {}),
    }


def _expectations(amps: np.ndarray, n: int, couplings: CouplingGraph, config: QuenchConfig,
                  include_zz: bool, row_seeds) -> np.ndarray:
    probs = amps.real**2 + amps.imag**2
    if config.shots is not None:
        # one shared set of shots per sample feeds every observable
        counts = np.empty_like(probs)
        for r in range(probs.shape[0]):
            bits = sample_bitstrings(StateVector(n, amps[r]), config.shots, row_seeds[r])
            idx = bits.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
            counts[r] = np.bincount(idx, minlength=1 << n) / config.shots
        probs = counts
    z = z_expectations(probs, n)
    if include_zz:
        zz = zz_expectations(probs, n, couplings.pairs)
        return np.hstack([z, zz])
    return z


def map_sample(x, couplings: CouplingGraph, config: QuenchConfig, include_zz: bool = False,
               h_max: float = 4.0) -> QuantumFeatureVector:
    instance = encode_sample(x, couplings, h_max)
    energies = diagonal_energies(instance, config.n_max_sim)
    amps = evolve_energies(energies[None, :], instance.n, config)
    out = _expectations(amps, instance.n, couplings, config, include_zz, [config.seed])[0]
    n = instance.n
    return QuantumFeatureVector(out[:n], out[n:] if include_zz else None)


class QuenchCache:
    """On-disk store of mapped feature rows keyed by sample, couplings and integrator settings."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_env(cls, default=None):
        directory = os.environ.get(CACHE_ENV, default)
        return cls(directory) if directory else None

    @staticmethod
    def key(x: np.ndarray, couplings_digest: str, settings: str) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(x, dtype="<f8").tobytes())
        h.update(couplings_digest.encode())
        h.update(settings.encode())
        return h.hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.npy"

    def get(self, key: str):
        path = self._path(key)
        if path.is_file():
            return np.load(path)
        return None

    def put(self, key: str, row: np.ndarray) -> None:
        path = self._path(key)
        path.parent.mkdir(exist_ok=True)
        tmp = path.with_suffix(".tmp.npy")
        np.save(tmp, row)
        os.replace(tmp, path)


def map_dataset(values, labels, couplings: CouplingGraph, config: QuenchConfig,
                include_zz: bool = False, h_max: float = 4.0, cache: QuenchCache | None = None,
                encoding: dict | None = None) -> MappedDataset:
    """Map every row; rows are independent and the output keeps their order.

    In shot mode row r is sampled with seed ``config.seed ^ r``.
    """
    x = np.asarray(getattr(values, "values", values), dtype=float)
    if x.ndim != 2 or x.shape[1] != couplings.n:
        raise ValueError(f"expected an (N, {couplings.n}) matrix, got {x.shape}")
    n = couplings.n
    width = n + (len(couplings.edges) if include_zz else 0)
    prov = provenance(couplings, config, include_zz, h_max, encoding)
    labels = np.asarray(labels)
    out = np.empty((x.shape[0], width))
    row_seeds = [config.seed ^ r for r in range(x.shape[0])]

    settings = json.dumps({k: prov[k] for k in ("tau_ns", "dt_ns", "schedule", "shots",
                                                 "include_zz", "h_max")}, sort_keys=True)
    digest = prov["couplings_sha256"]
    keys = [None] * x.shape[0]
    todo = []
    for r in range(x.shape[0]):
        if cache is not None:
            key_settings = settings if config.shots is None else f"{settings}|seed={row_seeds[r]}"
            keys[r] = cache.key(x[r], digest, key_settings)
            hit = cache.get(keys[r])
            if hit is not None and hit.shape == (width,):
                out[r] = hit
                continue
        todo.append(r)

    if todo:
        energies = np.stack([diagonal_energies(encode_sample(x[r], couplings, h_max),
                                               config.n_max_sim) for r in todo])
        amps = evolve_energies(energies, n, config)
        rows = _expectations(amps, n, couplings, config, include_zz,
                             [row_seeds[r] for r in todo])
        out[todo] = rows
        if cache is not None:
            for r, row in zip(todo, rows):
                cache.put(keys[r], row)
    return MappedDataset(out, labels.copy(), prov)


def final_states(values, couplings: CouplingGraph, config: QuenchConfig, h_max: float = 4.0):
    """Final quench states for each row (small n only, used for fidelity kernels)."""
    x = np.asarray(getattr(values, "values", values), dtype=float)
    energies = np.stack([diagonal_energies(encode_sample(row, couplings, h_max), config.n_max_sim)
                         for row in x]) if len(x) else np.zeros((0, 1 << couplings.n))
    amps = evolve_energies(energies, couplings.n, config) if len(x) else energies.astype(complex)
    return [StateVector(couplings.n, a) for a in amps]
