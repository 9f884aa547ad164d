import numpy as np
import pytest

from quenchmap.encoding import CouplingGraph, IsingInstance
from quenchmap.oracles import (brute_energies, brute_expect_z, brute_expect_zz, dense_ground_state,
                               gapped_instances, problem_matrix, rk4_quench, run_oracle_checks,
                               single_site, spectral_gap_along_path, transverse_matrix)
from quenchmap.schedule import AnnealSchedule


def test_single_site_places_operator():
    z = np.diag([1.0, -1.0])
    # qubit 0 is the least significant bit
    assert np.diag(single_site(z, 0, 2)).tolist() == [1.0, -1.0, 1.0, -1.0]
    assert np.diag(single_site(z, 1, 2)).tolist() == [1.0, 1.0, -1.0, -1.0]


def test_problem_matrix_is_diagonal_energies():
    inst = IsingInstance(2, np.array([0.5, -1.0]), CouplingGraph(2, ((0, 1, 0.75),)))
    # index 0b10: qubit 1 has z=-1, qubit 0 has z=+1
    expected = [0.25, -2.25, 0.75, 1.25]
    assert np.diag(problem_matrix(inst)).tolist() == expected
    assert brute_energies(inst).tolist() == expected


def test_two_level_ground_state():
    # -g X + h Z has ground energy -sqrt(g^2 + h^2)
    e, _ = dense_ground_state(IsingInstance(1, np.array([0.6])), 0.8)
    assert e == pytest.approx(-1.0, abs=1e-12)


def test_transverse_matrix_spectrum():
    w = np.linalg.eigvalsh(transverse_matrix(3))
    np.testing.assert_allclose(w, [-3, -1, -1, -1, 1, 1, 1, 3], atol=1e-12)


def test_brute_expectations():
    amps = np.zeros(4, dtype=complex)
    amps[0b01] = amps[0b11] = 1 / np.sqrt(2)
    assert brute_expect_z(amps, 0) == pytest.approx(-1.0)
    assert brute_expect_z(amps, 1) == pytest.approx(0.0)
    assert brute_expect_zz(amps, 0, 1) == pytest.approx(0.0)


def test_rk4_preserves_norm_and_free_precession():
    # zero field: the state stays an eigenstate of X, so only a phase accrues
    out = rk4_quench(IsingInstance(1, np.array([0.0])), AnnealSchedule(tau_ns=1.0), 1e-3)
    np.testing.assert_allclose(np.abs(out) ** 2, [0.5, 0.5], atol=1e-12)


def test_gapped_instances_respect_gap():
    for inst in gapped_instances(3, 2, seed=4):
        assert spectral_gap_along_path(inst, AnnealSchedule(), 51) >= 0.5


def test_oracle_suite_passes():
    checks = run_oracle_checks(4, seed=1)
    assert len(checks) == 6
    assert all(c.passed for c in checks), [c.line() for c in checks]
