"""Annealing envelopes A(s), B(s) for the time-dependent transverse-field Ising model.

Units are fixed throughout the package: hbar = 1, energies in rad/ns and
times in ns, so a phase is the dimensionless product of the two.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AnnealSchedule:
    """Envelope pair plus the total physical duration ``tau_ns``.

    ``kind="linear"`` gives ``A = gamma0 (1 - s)`` and ``B = beta0 s``.
    ``kind="tabulated"`` interpolates ``table``, an ``(m, 3)`` array of
    ``(s, A, B)`` rows in rad/ns.
    """

    kind: str = "linear"
    gamma0: float = TWO_PI
    beta0: float = TWO_PI
    tau_ns: float = 20.0
    table: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        if self.kind not in ("linear", "tabulated"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.tau_ns > 0:
            raise ValueError(f"tau_ns must be positive, got {self.tau_ns}")
        if self.kind == "linear":
            if not (self.gamma0 > 0 and self.beta0 > 0):
                raise ValueError("gamma0 and beta0 must be positive")
        else:
            if self.table is None:
                raise ValueError("tabulated schedule needs a table")
            table = np.asarray(self.table, dtype=float)
            _check_table(table)
            object.__setattr__(self, "table", table)

    def evaluate(self, s):
        """Return ``(A, B)`` in rad/ns at normalized time ``s``.

        ``s`` may be a scalar or an array; every entry must lie in [0, 1].
        """
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < 0.0) or np.any(s_arr > 1.0) or np.any(np.isnan(s_arr)):
            raise ValueError("s must lie in [0, 1]")
        if self.kind == "linear":
            a = self.gamma0 * (1.0 - s_arr)
            b = self.beta0 * s_arr
        else:
            a = np.interp(s_arr, self.table[:, 0], self.table[:, 1])
            b = np.interp(s_arr, self.table[:, 0], self.table[:, 2])
        if a.ndim == 0:
            return float(a), float(b)
        return a, b

    def with_tau(self, tau_ns: float) -> "AnnealSchedule":
        return replace(self, tau_ns=float(tau_ns))

    def descriptor(self) -> str:
        """Short string that identifies the envelope shape (not tau)."""
        if self.kind == "linear":
            return f"linear(gamma0={self.gamma0!r},beta0={self.beta0!r})"
        digest = hashlib.sha256(np.ascontiguousarray(self.table).tobytes()).hexdigest()[:16]
        return f"tabulated(sha256={digest})"


def _check_table(table: np.ndarray) -> None:
    if table.ndim != 2 or table.shape[1] != 3 or table.shape[0] < 2:
        raise ValueError("schedule table must have shape (m >= 2, 3)")
    s, a, b = table[:, 0], table[:, 1], table[:, 2]
    if not np.all(np.isfinite(table)):
        raise ValueError("schedule table contains non-finite values")
    if np.any(np.diff(s) <= 0):
        raise ValueError("schedule s values must be strictly increasing")
    if s[0] != 0.0 or s[-1] != 1.0:
        raise ValueError("schedule table must contain the endpoints s=0 and s=1")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("schedule envelopes must be non-negative")
    if not (a[0] > 0 and b[-1] > 0):
        raise ValueError("schedule must start transverse-dominated (A(0) > 0) and end with B(1) > 0")


def load_schedule_csv(path, energy_unit: str = "GHz") -> np.ndarray:
    """Read a ``s,A,B`` CSV and return the table in rad/ns.

    ``energy_unit`` is ``"GHz"`` (values multiplied by 2*pi) or
    ``"rad_per_ns"`` (used as-is).
    """
    if energy_unit not in ("GHz", "rad_per_ns"):
        raise ValueError(f"energy_unit must be 'GHz' or 'rad_per_ns', got {energy_unit!r}")
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not {"s", "A", "B"} <= set(header):
            raise ValueError(f"{path}: schedule CSV needs columns s,A,B; found {header}")
        for line in reader:
            line = {k.strip(): v for k, v in line.items()}
            rows.append((float(line["s"]), float(line["A"]), float(line["B"])))
    table = np.array(rows, dtype=float).reshape(-1, 3)
    if energy_unit == "GHz":
        table[:, 1:] *= TWO_PI
    _check_table(table)
    return table


def schedule_from_csv(path, tau_ns: float, energy_unit: str = "GHz") -> AnnealSchedule:
    table = load_schedule_csv(path, energy_unit)
    return AnnealSchedule(kind="tabulated", tau_ns=tau_ns, table=table, source=str(path))


def parse_schedule_spec(spec: str, tau_ns: float, gamma0: float = TWO_PI,
                        beta0: float = TWO_PI, energy_unit: str = "GHz") -> AnnealSchedule:
    """Build a schedule from a command-line style spec: ``linear`` or ``file:<path>``."""
    if spec == "linear":
        return AnnealSchedule(kind="linear", gamma0=gamma0, beta0=beta0, tau_ns=tau_ns)
    if spec.startswith("file:"):
        return schedule_from_csv(spec[len("file:"):], tau_ns, energy_unit)
    raise ValueError(f"schedule must be 'linear' or 'file:<path>', got {spec!r}")
