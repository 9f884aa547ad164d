"""Independent reference computations for cross-checking the simulator.

Nothing here reuses the Trotter kernel or the bit-twiddled energy table:
Hamiltonians are assembled from Kronecker products of Pauli matrices and
integrated with classical RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoding import CouplingGraph, IsingInstance
from .schedule import AnnealSchedule

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])


def single_site(op: np.ndarray, i: int, n: int) -> np.ndarray:
    """``op`` on qubit ``i``; qubit 0 is the rightmost Kronecker factor (least significant bit)."""
    out = np.eye(1)
    for q in reversed(range(n)):
        out = np.kron(out, op if q == i else np.eye(2))
    return out


def problem_matrix(instance: IsingInstance) -> np.ndarray:
    n = instance.n
    h = np.zeros((1 << n, 1 << n))
    for i in range(n):
        h += instance.h[i] * single_site(PAULI_Z, i, n)
    for i, j, v in instance.couplings.edges:
        h += v * single_site(PAULI_Z, i, n) @ single_site(PAULI_Z, j, n)
    return h


def transverse_matrix(n: int) -> np.ndarray:
    return sum(single_site(PAULI_X, i, n) for i in range(n))


def rk4_quench(instance: IsingInstance, schedule: AnnealSchedule, dt_ns: float = 1e-4) -> np.ndarray:
    """Final state of i d/dt psi = H(t) psi by fixed-step RK4 from |+>^n."""
    n = instance.n
    hz = problem_matrix(instance).astype(complex)
    hx = transverse_matrix(n).astype(complex)
    psi = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
    tau = schedule.tau_ns
    steps = max(1, math.ceil(round(tau / dt_ns, 9)))
    h = tau / steps

    def rhs(t, v):
        a, b = schedule.evaluate(min(t / tau, 1.0))
        return -1j * (-a * (hx @ v) + b * (hz @ v))

    t = 0.0
    for k in range(steps):
        t = k * h
        k1 = rhs(t, psi)
        k2 = rhs(t + h / 2, psi + h / 2 * k1)
        k3 = rhs(t + h / 2, psi + h / 2 * k2)
        k4 = rhs(t + h, psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def brute_expect_z(amplitudes, i: int) -> float:
    total = 0.0
    for b, a in enumerate(amplitudes):
        total += abs(a) ** 2 * (1 if (b >> i) & 1 == 0 else -1)
    return total


def brute_expect_zz(amplitudes, i: int, j: int) -> float:
    total = 0.0
    for b, a in enumerate(amplitudes):
        zi = 1 if (b >> i) & 1 == 0 else -1
        zj = 1 if (b >> j) & 1 == 0 else -1
        total += abs(a) ** 2 * zi * zj
    return total


def brute_energies(instance: IsingInstance) -> np.ndarray:
    n = instance.n
    out = np.empty(1 << n)
    for b in range(1 << n):
        z = [1 if (b >> i) & 1 == 0 else -1 for i in range(n)]
        e = sum(instance.h[i] * z[i] for i in range(n))
        e += sum(v * z[i] * z[j] for i, j, v in instance.couplings.edges)
        out[b] = e
    return out


def dense_ground_state(instance: IsingInstance, gamma: float):
    m = -gamma * transverse_matrix(instance.n) + problem_matrix(instance)
    w, v = np.linalg.eigh(m)
    return float(w[0]), v[:, 0]


def random_instance(n: int, rng, edge_prob: float = 0.5, h_scale: float = 1.0) -> IsingInstance:
    h = rng.uniform(-h_scale, h_scale, n)
    edges = tuple((i, j, float(rng.uniform(-1, 1))) for i in range(n) for j in range(i + 1, n)
                  if rng.random() < edge_prob)
    return IsingInstance(n, h, CouplingGraph(n, edges))


def spectral_gap_along_path(instance: IsingInstance, schedule: AnnealSchedule, points: int = 101) -> float:
    """Smallest gap between the two lowest levels of -A X + B H_z over s in [0, 1]."""
    hz = problem_matrix(instance)
    hx = transverse_matrix(instance.n)
    gaps = []
    for s in np.linspace(0.0, 1.0, points):
        a, b = schedule.evaluate(float(s))
        w = np.linalg.eigvalsh(-a * hx + b * hz)
        gaps.append(w[1] - w[0])
    return float(min(gaps))


def gapped_instances(n: int, count: int, seed: int, min_gap: float = 0.5,
                     schedule: AnnealSchedule | None = None) -> list:
    """Draw random instances until ``count`` have a path gap of at least ``min_gap`` rad/ns."""
    schedule = schedule or AnnealSchedule()
    rng = np.random.default_rng(seed)
    found = []
    while len(found) < count:
        inst = random_instance(n, rng)
        if spectral_gap_along_path(inst, schedule, 51) >= min_gap:
            found.append(inst)
    return found


@dataclass
class OracleCheck:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<44s} {self.value:12.3e}  (tol {self.tolerance:.1e})"


def run_oracle_checks(n: int = 4, seed: int = 0) -> list:
    """Cross-check the simulator against the references above on seeded instances."""
    from .encoding import diagonal_energies
    from .quench import QuenchConfig, StateVector, evolve, exact_ground_state, expect_z, expect_zz

    rng = np.random.default_rng(seed)
    checks = []

    def add(name, value, tol):
        checks.append(OracleCheck(name, float(value), tol, bool(value <= tol)))

    one = IsingInstance(1, np.array([1.0]))
    sched = AnnealSchedule(tau_ns=10.0)
    ref = rk4_quench(one, sched)
    z_ref = abs(ref[0]) ** 2 - abs(ref[1]) ** 2
    z = expect_z(evolve(one, QuenchConfig(dt_ns=1e-3, schedule=sched)), 0)
    add("n=1 quench <Z> vs RK4 (tau=10 ns)", abs(z - z_ref), 1e-6)

    inst = random_instance(n, rng)
    sched_n = AnnealSchedule(tau_ns=2.0)
    ref = rk4_quench(inst, sched_n)
    st = evolve(inst, QuenchConfig(dt_ns=1e-3, schedule=sched_n))
    ref_state = StateVector(n, ref)
    err = max(abs(expect_z(st, i) - expect_z(ref_state, i)) for i in range(n))
    add(f"n={n} quench <Z_i> vs RK4 (tau=2 ns)", err, 1e-5)

    add(f"n={n} diagonal energies vs enumeration",
        np.max(np.abs(diagonal_energies(inst) - brute_energies(inst))), 1e-12)

    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    amps /= np.linalg.norm(amps)
    state = StateVector(n, amps)
    err = max(abs(expect_z(state, i) - brute_expect_z(amps, i)) for i in range(n))
    if n > 1:
        err = max(err, abs(expect_zz(state, 0, 1) - brute_expect_zz(amps, 0, 1)))
    add("expectations vs basis-state summation", err, 1e-12)

    if n <= 8:
        e_ref, _ = dense_ground_state(inst, 1.0)
        e, _ = exact_ground_state(inst, 1.0)
        add("ground energy vs Kronecker-assembled eigh", abs(e - e_ref), 1e-9)

    if n <= 4:
        worst = 0.0
        for g in gapped_instances(n, 2, seed):
            sched = AnnealSchedule(tau_ns=500.0)
            final = evolve(g, QuenchConfig(schedule=sched))
            _, gs = exact_ground_state(g, 0.0)
            overlap = abs(np.vdot(gs.amplitudes, final.amplitudes)) ** 2
            worst = max(worst, 1.0 - overlap)
        add("adiabatic limit 1 - overlap (tau=500 ns)", worst, 1e-2)
    return checks
