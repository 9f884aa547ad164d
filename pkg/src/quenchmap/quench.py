"""Exact state-vector simulation of the transverse-field Ising quench

    H(s) = -A(s) sum_i X_i + B(s) H_z,     s = t / tau,

started from |+>^n (the ground state of -sum X) and integrated with a
second-order symmetric Trotter split evaluated at each step's midpoint.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy import linalg

from .encoding import N_MAX_SIM, IsingInstance, diagonal_energies, spin_values
from .schedule import AnnealSchedule

N_MAX_DENSE = 12
MAX_STEPS = 2**31 - 1
STATE_MAGIC = b"QSV1"


@dataclass
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} amplitudes, got {self.amplitudes.shape}")

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return self.amplitudes.real**2 + self.amplitudes.imag**2


@dataclass(frozen=True)
class QuenchConfig:
    """Integrator settings.

    ``dt_ns`` larger than the schedule's ``tau_ns`` is clipped to ``tau_ns``
    (a single step). ``shots=None`` means exact expectation values.
    """

    dt_ns: float = 0.01
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    shots: int | None = None
    seed: int = 0
    n_max_sim: int = N_MAX_SIM

    def __post_init__(self):
        if not self.dt_ns > 0:
            raise ValueError("dt_ns must be positive")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be a positive integer or None")

    @property
    def tau_ns(self) -> float:
        return self.schedule.tau_ns

    def with_tau(self, tau_ns: float) -> "QuenchConfig":
        return QuenchConfig(self.dt_ns, self.schedule.with_tau(tau_ns), self.shots,
                            self.seed, self.n_max_sim)

    def step_count(self) -> int:
        return step_grid(self.tau_ns, self.dt_ns)[0].size


def step_grid(tau_ns: float, dt_ns: float):
    """Step start times and lengths; the last step is shortened to land on tau."""
    dt = min(dt_ns, tau_ns)
    ratio = tau_ns / dt
    if not math.isfinite(ratio) or ratio > MAX_STEPS:
        raise OverflowError(f"tau/dt = {ratio:.3g} steps exceeds the step limit")
    count = max(1, math.ceil(round(ratio, 9)))
    starts = np.arange(count, dtype=float) * dt
    lengths = np.full(count, dt)
    lengths[-1] = tau_ns - starts[-1]
    return starts, lengths


def trotter_plan(config: QuenchConfig):
    """Angles for the merged mixer layers, per-step phase scales and anchor flags.

    The mixer of step k is exp(+i theta_k sum X) with theta_k = A(s_k) dt_k / 2;
    adjacent half-layers commute and are merged, giving K + 1 layers for K
    steps. ``anchors[k]`` marks steps where the diagonal phase is recomputed
    exactly instead of advanced by a constant increment.
    """
    schedule = config.schedule
    starts, lengths = step_grid(schedule.tau_ns, config.dt_ns)
    s_mid = np.clip((starts + 0.5 * lengths) / schedule.tau_ns, 0.0, 1.0)
    a, b = schedule.evaluate(s_mid)
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    half = 0.5 * a * lengths
    mixer = np.empty(half.size + 1)
    mixer[0] = half[0]
    mixer[1:-1] = half[:-1] + half[1:]
    mixer[-1] = half[-1]
    phases = b * lengths
    return mixer, phases, _phase_anchors(phases)


def _phase_anchors(phases: np.ndarray, every: int = 64, rtol: float = 1e-13) -> np.ndarray:
    anchors = np.zeros(phases.size, dtype=np.bool_)
    scale = 1.0 + np.abs(phases).max(initial=0.0)
    anchor = 0
    delta = 0.0
    for k in range(phases.size):
        if k == anchor:
            anchors[k] = True
            delta = phases[k + 1] - phases[k] if k + 1 < phases.size else 0.0
            continue
        predicted = phases[anchor] + (k - anchor) * delta
        if k - anchor >= every or abs(predicted - phases[k]) > rtol * scale:
            anchors[k] = True
            anchor = k
            delta = phases[k + 1] - phases[k] if k + 1 < phases.size else 0.0
    return anchors


@njit(cache=True)
def _mixer_layer(re, im, n, theta):
    # exp(+i theta X) on every qubit; re/im have shape (2**n, block)
    c = math.cos(theta)
    s = math.sin(theta)
    dim, nb = re.shape
    for q in range(n):
        stride = 1 << q
        for base in range(0, dim, 2 * stride):
            for j in range(base, base + stride):
                k = j + stride
                for b in range(nb):
                    r0 = re[j, b]
                    i0 = im[j, b]
                    r1 = re[k, b]
                    i1 = im[k, b]
                    re[j, b] = c * r0 - s * i1
                    im[j, b] = c * i0 + s * r1
                    re[k, b] = c * r1 - s * i0
                    im[k, b] = c * i1 + s * r0


@njit(cache=True)
def _evolve_block(re, im, energies, n, mixer, phases, anchors, norms):
    dim, nb = re.shape
    steps = phases.shape[0]
    wr = np.empty((dim, nb))
    wi = np.empty((dim, nb))
    ur = np.empty((dim, nb))
    ui = np.empty((dim, nb))
    record = norms.shape[0] > 0
    for k in range(steps):
        _mixer_layer(re, im, n, mixer[k])
        if anchors[k]:
            p = phases[k]
            d = phases[k + 1] - p if k + 1 < steps else 0.0
            for idx in range(dim):
                for b in range(nb):
                    e = energies[idx, b]
                    wr[idx, b] = math.cos(p * e)
                    wi[idx, b] = -math.sin(p * e)
                    ur[idx, b] = math.cos(d * e)
                    ui[idx, b] = -math.sin(d * e)
        else:
            for idx in range(dim):
                for b in range(nb):
                    xr = wr[idx, b]
                    xi = wi[idx, b]
                    wr[idx, b] = xr * ur[idx, b] - xi * ui[idx, b]
                    wi[idx, b] = xr * ui[idx, b] + xi * ur[idx, b]
        for idx in range(dim):
            for b in range(nb):
                xr = re[idx, b]
                xi = im[idx, b]
                re[idx, b] = xr * wr[idx, b] - xi * wi[idx, b]
                im[idx, b] = xr * wi[idx, b] + xi * wr[idx, b]
        if record:
            for b in range(nb):
                acc = 0.0
                for idx in range(dim):
                    acc += re[idx, b] * re[idx, b] + im[idx, b] * im[idx, b]
                norms[k, b] = acc
    _mixer_layer(re, im, n, mixer[steps])


def initial_state(n: int, n_max: int = N_MAX_SIM) -> StateVector:
    if not 1 <= n <= n_max:
        raise ValueError(f"n must be in [1, {n_max}], got {n}")
    dim = 1 << n
    return StateVector(n, np.full(dim, dim**-0.5, dtype=np.complex128))


def _block_size(n: int) -> int:
    return max(1, min(16, (1 << 16) >> n))


def evolve_energies(energies: np.ndarray, n: int, config: QuenchConfig,
                    record_norms: bool = False):
    """Evolve one state per row of ``energies`` (shape ``(batch, 2**n)``).

    Returns the final amplitudes ``(batch, 2**n)`` and, when requested, the
    squared norm after every step ``(steps, batch)``.
    """
    energies = np.atleast_2d(np.asarray(energies, dtype=float))
    if not 1 <= n <= config.n_max_sim:
        raise ValueError(f"n must be in [1, {config.n_max_sim}], got {n}")
    if energies.shape[1] != 1 << n:
        raise ValueError("energies width must be 2**n")
    mixer, phases, anchors = trotter_plan(config)
    batch, dim = energies.shape
    out = np.empty((batch, dim), dtype=np.complex128)
    norms = np.empty((phases.size if record_norms else 0, batch))
    block = _block_size(n)
    amp0 = dim**-0.5
    for start in range(0, batch, block):
        stop = min(start + block, batch)
        e = np.ascontiguousarray(energies[start:stop].T)
        re = np.full(e.shape, amp0)
        im = np.zeros(e.shape)
        nrm = np.empty((norms.shape[0], stop - start))
        _evolve_block(re, im, e, n, mixer, phases, anchors, nrm)
        out[start:stop] = (re + 1j * im).T
        if record_norms:
            norms[:, start:stop] = nrm
    if record_norms:
        return out, norms
    return out


def evolve(instance: IsingInstance, config: QuenchConfig) -> StateVector:
    """Final state of the quench for one Ising instance."""
    if instance.n > config.n_max_sim:
        raise ValueError(f"n={instance.n} exceeds the simulable cutoff {config.n_max_sim}")
    energies = diagonal_energies(instance, config.n_max_sim)
    amps = evolve_energies(energies[None, :], instance.n, config)
    return StateVector(instance.n, amps[0])


def _check_index(state: StateVector, i: int) -> None:
    if not 0 <= i < state.n:
        raise IndexError(f"qubit index {i} out of range for n={state.n}")


def expect_z(state: StateVector, i: int) -> float:
    _check_index(state, i)
    idx = np.arange(1 << state.n)
    z = 1 - 2 * ((idx >> i) & 1)
    return float(np.dot(state.probabilities(), z))


def expect_zz(state: StateVector, i: int, j: int) -> float:
    _check_index(state, i)
    _check_index(state, j)
    if i == j:
        raise ValueError("expect_zz needs two distinct qubits")
    idx = np.arange(1 << state.n)
    zz = 1 - 2 * (((idx >> i) ^ (idx >> j)) & 1)
    return float(np.dot(state.probabilities(), zz))


def _rowwise(probs, table: np.ndarray) -> np.ndarray:
    # one matrix-vector product per row keeps each row's result independent of the batch size
    p = np.asarray(probs, dtype=float)
    if p.ndim == 1:
        return table @ p
    out = np.empty((p.shape[0], table.shape[0]))
    for r in range(p.shape[0]):
        out[r] = table @ p[r]
    return out


def z_expectations(probs: np.ndarray, n: int) -> np.ndarray:
    """All single-qubit <Z_i> for one ``(2**n,)`` or many ``(batch, 2**n)`` distributions."""
    return _rowwise(probs, spin_values(n).astype(float))


def zz_expectations(probs: np.ndarray, n: int, pairs) -> np.ndarray:
    z = spin_values(n)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return np.zeros(np.shape(probs)[:-1] + (0,))
    return _rowwise(probs, (z[pairs[:, 0]] * z[pairs[:, 1]]).astype(float))


def sample_bitstrings(state: StateVector, shots: int, seed: int) -> np.ndarray:
    """Draw ``shots`` basis states; returns a ``(shots, n)`` uint8 array, column i = qubit i."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    cdf = np.cumsum(state.probabilities())
    rng = np.random.default_rng(seed)
    u = rng.random(shots) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return ((idx[:, None] >> np.arange(state.n)) & 1).astype(np.uint8)


def tfim_matrix(instance: IsingInstance, gamma: float) -> np.ndarray:
    """Dense real matrix of -gamma sum X + H_z (for small n only)."""
    n = instance.n
    if n > N_MAX_DENSE:
        raise ValueError(f"dense diagonalization is limited to n <= {N_MAX_DENSE}")
    dim = 1 << n
    h = np.diag(diagonal_energies(instance))
    idx = np.arange(dim)
    for q in range(n):
        h[idx, idx ^ (1 << q)] -= gamma
    return h


def exact_ground_state(instance: IsingInstance, gamma: float):
    """Lowest eigenpair of -gamma sum X + H_z.

    At ``gamma == 0`` the Hamiltonian is diagonal and the ground state is the
    lowest-energy basis state (first index on ties).
    """
    n = instance.n
    if n > N_MAX_DENSE:
        raise ValueError(f"exact_ground_state is limited to n <= {N_MAX_DENSE}")
    if gamma == 0:
        energies = diagonal_energies(instance)
        k = int(np.argmin(energies))
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[k] = 1.0
        return float(energies[k]), StateVector(n, amps)
    w, v = linalg.eigh(tfim_matrix(instance, gamma), subset_by_index=[0, 0])
    vec = v[:, 0]
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    return float(w[0]), StateVector(n, vec.astype(np.complex128))


def write_state(path, state: StateVector) -> None:
    """Binary dump: magic ``QSV1``, uint32 qubit count, then little-endian float64 (re, im) pairs."""
    pairs = np.empty((state.amplitudes.size, 2), dtype="<f8")
    pairs[:, 0] = state.amplitudes.real
    pairs[:, 1] = state.amplitudes.imag
    with Path(path).open("wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<I", state.n))
        fh.write(pairs.tobytes())


def read_state(path) -> StateVector:
    data = Path(path).read_bytes()
    if data[:4] != STATE_MAGIC:
        raise ValueError(f"{path}: not a state dump (bad magic)")
    (n,) = struct.unpack("<I", data[4:8])
    pairs = np.frombuffer(data[8:], dtype="<f8")
    if pairs.size != 2 * (1 << n):
        raise ValueError(f"{path}: truncated state dump")
    pairs = pairs.reshape(-1, 2)
    return StateVector(n, pairs[:, 0] + 1j * pairs[:, 1])
