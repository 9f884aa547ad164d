"""Turn standardized samples into Ising problems.

Convention used everywhere in the package::

    H(x) = sum_i h_i Z_i + sum_{i<j} J_ij Z_i Z_j

with basis index bit i = 1 meaning Z_i = -1 (bit i = 0 means +1) and
bit 0 of the index being qubit 0.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_MAX_SIM = 24


@dataclass(frozen=True)
class CouplingGraph:
    """Sparse symmetric couplings stored as ``i < j`` edges."""

    n: int
    edges: tuple = ()
    j_max: float = 1.0

    def __post_init__(self):
        edges = tuple((int(i), int(j), float(v)) for i, j, v in self.edges)
        seen = set()
        for i, j, v in edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if abs(v) > self.j_max:
                raise ValueError(f"|J_{i}{j}| = {abs(v)} exceeds j_max = {self.j_max}")
            seen.add((i, j))
        object.__setattr__(self, "edges", edges)

    @property
    def pairs(self) -> np.ndarray:
        return np.array([(i, j) for i, j, _ in self.edges], dtype=np.int64).reshape(-1, 2)

    @property
    def weights(self) -> np.ndarray:
        return np.array([v for _, _, v in self.edges], dtype=float)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def digest(self) -> str:
        return hashlib.sha256(format_couplings(self).encode()).hexdigest()


@dataclass(frozen=True)
class IsingInstance:
    n: int
    h: np.ndarray
    couplings: CouplingGraph = field(default=None)
    h_max: float = 4.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.n,):
            raise ValueError(f"h has shape {h.shape}, expected ({self.n},)")
        if np.any(np.abs(h) > self.h_max):
            raise ValueError(f"|h| exceeds h_max = {self.h_max}")
        couplings = self.couplings if self.couplings is not None else CouplingGraph(self.n)
        if couplings.n != self.n:
            raise ValueError("couplings and h disagree on the qubit count")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "couplings", couplings)

    def with_fields(self, h) -> "IsingInstance":
        return IsingInstance(self.n, np.asarray(h, dtype=float), self.couplings, self.h_max)


def pearson_matrix(values: np.ndarray) -> np.ndarray:
    """Pearson correlation between columns; zero-variance columns correlate with nothing."""
    x = np.asarray(values, dtype=float)
    centered = x - x.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    ok = norms > 1e-12 * np.sqrt(x.shape[0])
    safe = np.where(ok, norms, 1.0)
    unit = centered / safe
    rho = unit.T @ unit
    rho[~ok, :] = 0.0
    rho[:, ~ok] = 0.0
    np.fill_diagonal(rho, np.where(ok, 1.0, 0.0))
    return np.clip(rho, -1.0, 1.0)


def fit_couplings(train_values, corr_threshold: float = 0.1, max_degree: int | None = None,
                  coupling_scale: float = 1.0, j_max: float = 1.0) -> CouplingGraph:
    """Build couplings ``J_ij = -coupling_scale * rho_ij`` from training-set correlations.

    Edges with ``|rho_ij| < corr_threshold`` are dropped. With ``max_degree``
    each node nominates its ``max_degree`` strongest edges (ties broken by
    ``(i, j)`` order) and an edge survives if either endpoint nominates it.
    """
    x = np.asarray(getattr(train_values, "values", train_values), dtype=float)
    if x.ndim != 2:
        raise ValueError("training values must be a 2-D matrix")
    if x.shape[0] < 2:
        raise ValueError("fit_couplings needs at least 2 training samples")
    n = x.shape[1]
    rho = pearson_matrix(x)
    iu, ju = np.triu_indices(n, k=1)
    strength = np.abs(rho[iu, ju])
    keep = strength >= corr_threshold
    candidates = [(int(i), int(j)) for i, j in zip(iu[keep], ju[keep])]

    if max_degree is not None:
        if max_degree < 0:
            raise ValueError("max_degree must be non-negative")
        incident = {k: [] for k in range(n)}
        for i, j in candidates:
            incident[i].append((i, j))
            incident[j].append((i, j))
        retained = set()
        for node, edges in incident.items():
            edges.sort(key=lambda e: (-abs(rho[e]), e))
            retained.update(edges[:max_degree])
        candidates = sorted(retained)

    edges = []
    for i, j in candidates:
        value = float(np.clip(-coupling_scale * rho[i, j], -j_max, j_max))
        edges.append((i, j, value))
    return CouplingGraph(n=n, edges=tuple(edges), j_max=j_max)


def encode_sample(x, couplings: CouplingGraph, h_max: float = 4.0) -> IsingInstance:
    x = np.asarray(x, dtype=float)
    if x.shape != (couplings.n,):
        raise ValueError(f"sample has length {x.size}, couplings expect {couplings.n}")
    return IsingInstance(couplings.n, np.clip(x, -h_max, h_max), couplings, h_max)


def spin_values(n: int) -> np.ndarray:
    """``(n, 2**n)`` int8 array with entry ``[i, b] = +1`` if bit i of b is 0 else -1."""
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[None, :] >> np.arange(n, dtype=np.int64)[:, None]) & 1
    return (1 - 2 * bits).astype(np.int8)


def diagonal_energies(instance: IsingInstance, n_max: int = N_MAX_SIM) -> np.ndarray:
    """Energy of every computational basis state, length ``2**n``."""
    n = instance.n
    if n > n_max:
        raise ValueError(f"n={n} exceeds the simulable cutoff {n_max}")
    z = spin_values(n)
    energies = instance.h @ z.astype(float) if n else np.zeros(1)
    for i, j, v in instance.couplings.edges:
        energies += v * (z[i] * z[j])
    return energies


# -- text serialization: header `n <count>`, `h <i> <value>`, `J <i> <j> <value>`

def format_couplings(couplings: CouplingGraph) -> str:
    lines = [f"n {couplings.n}"]
    lines += [f"J {i} {j} {v!r}" for i, j, v in couplings.edges]
    return "\n".join(lines) + "\n"


def format_instance(instance: IsingInstance) -> str:
    lines = [f"n {instance.n}"]
    lines += [f"h {i} {float(v)!r}" for i, v in enumerate(instance.h)]
    lines += [f"J {i} {j} {v!r}" for i, j, v in instance.couplings.edges]
    return "\n".join(lines) + "\n"


def parse_instance(text: str, h_max: float = 4.0, j_max: float = 1.0) -> IsingInstance:
    """Inverse of :func:`format_instance`; a file without ``h`` lines gives zero fields."""
    n = None
    fields = {}
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        try:
            if tag == "n" and len(parts) == 2:
                n = int(parts[1])
            elif tag == "h" and len(parts) == 3:
                fields[int(parts[1])] = float(parts[2])
            elif tag == "J" and len(parts) == 4:
                edges.append((int(parts[1]), int(parts[2]), float(parts[3])))
            else:
                raise ValueError
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}") from None
    if n is None:
        raise ValueError("missing `n <count>` header")
    h = np.zeros(n)
    for i, v in fields.items():
        if not 0 <= i < n:
            raise ValueError(f"field index {i} out of range")
        h[i] = v
    return IsingInstance(n, h, CouplingGraph(n, tuple(edges), j_max=j_max), h_max)


def parse_couplings(text: str, j_max: float = 1.0) -> CouplingGraph:
    return parse_instance(text, h_max=np.inf, j_max=j_max).couplings


def write_instance(path, instance: IsingInstance) -> None:
    Path(path).write_text(format_instance(instance), encoding="utf-8")


def read_instance(path, h_max: float = 4.0, j_max: float = 1.0) -> IsingInstance:
    return parse_instance(Path(path).read_text(encoding="utf-8"), h_max, j_max)
