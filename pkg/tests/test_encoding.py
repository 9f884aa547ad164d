import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quenchmap.encoding import (CouplingGraph, IsingInstance, diagonal_energies, encode_sample,
                                fit_couplings, format_instance, parse_couplings, parse_instance,
                                pearson_matrix, read_instance, write_instance, format_couplings)
from quenchmap.oracles import brute_energies, random_instance


def edge_map(graph):
    return {(i, j): v for i, j, v in graph.edges}


class TestFitCouplings:
    def test_identical_columns(self):
        col = np.array([1.0, -2.0, 0.5, 3.0])
        graph = fit_couplings(np.column_stack([col, col]))
        assert graph.edges == ((0, 1, -1.0),)

    def test_independent_columns_have_no_edges(self):
        x = np.random.default_rng(0).standard_normal((10_000, 6))
        assert fit_couplings(x, 0.1).edges == ()

    def test_hand_built_three_columns(self):
        a = np.array([1.0, 1.0, -1.0, -1.0]) / 2
        c = np.array([1.0, -1.0, 1.0, -1.0]) / 2
        e = np.array([1.0, -1.0, -1.0, 1.0]) / 2
        b = 0.5 * a - 0.5 * c + math.sqrt(0.5) * e
        graph = fit_couplings(np.column_stack([a, b, c]), 0.1)
        edges = edge_map(graph)
        assert set(edges) == {(0, 1), (1, 2)}
        assert edges[(0, 1)] == pytest.approx(-0.5, abs=1e-12)
        assert edges[(1, 2)] == pytest.approx(0.5, abs=1e-12)

    def test_scale_and_clip(self):
        col = np.arange(5.0)
        graph = fit_couplings(np.column_stack([col, col]), coupling_scale=3.0, j_max=2.0)
        assert graph.edges == ((0, 1, -2.0),)

    def test_max_degree_either_endpoint(self):
        # star: node 0 correlates with 1..3 at decreasing strength, node 3 only with 0
        rng = np.random.default_rng(5)
        base = rng.standard_normal(4000)
        cols = [base]
        for w in (0.9, 0.6, 0.3):
            cols.append(w * base + math.sqrt(1 - w * w) * rng.standard_normal(4000))
        x = np.column_stack(cols)
        full = fit_couplings(x, 0.1)
        capped = fit_couplings(x, 0.1, max_degree=1)
        rho = pearson_matrix(x)
        # node 0 keeps (0,1); each leaf keeps its strongest edge
        expected = set()
        for node in range(4):
            inc = [(i, j) for i, j, _ in full.edges if node in (i, j)]
            inc.sort(key=lambda e: (-abs(rho[e]), e))
            expected.update(inc[:1])
        assert set(edge_map(capped)) == expected

    def test_degree_zero_removes_everything(self):
        col = np.arange(6.0)
        assert fit_couplings(np.column_stack([col, col]), max_degree=0).edges == ()

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            fit_couplings(np.ones((1, 3)))

    def test_constant_column_is_isolated(self):
        x = np.column_stack([np.arange(5.0), np.ones(5), np.arange(5.0)])
        assert set(edge_map(fit_couplings(x))) == {(0, 2)}

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_row_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((30, 5)) @ rng.standard_normal((5, 5))
        perm = rng.permutation(30)
        a = fit_couplings(x, 0.1, max_degree=2)
        b = fit_couplings(x[perm], 0.1, max_degree=2)
        assert set(edge_map(a)) == set(edge_map(b))
        for key, v in edge_map(a).items():
            assert edge_map(b)[key] == pytest.approx(v, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_self_correlation(self, seed):
        x = np.random.default_rng(seed).standard_normal((20, 4)) * 1e3
        assert np.all(np.abs(np.diag(pearson_matrix(x)) - 1.0) < 1e-12)


class TestEncodeSample:
    graph = CouplingGraph(3, ((0, 1, -0.5),))

    def test_zero(self):
        assert encode_sample(np.zeros(3), self.graph).h.tolist() == [0.0, 0.0, 0.0]

    def test_clamp(self):
        assert encode_sample([7.3, -9.0, 1.5], self.graph, h_max=4.0).h.tolist() == [4.0, -4.0, 1.5]

    def test_couplings_attached(self):
        assert encode_sample(np.ones(3), self.graph).couplings is self.graph

    def test_wide_sample(self):
        inst = encode_sample(np.linspace(-1, 1, 200), CouplingGraph(200))
        assert inst.n == 200

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            encode_sample([1.0, 2.0], self.graph)


class TestDiagonalEnergies:
    def test_single_spin(self):
        inst = IsingInstance(1, np.array([1.0]))
        assert diagonal_energies(inst).tolist() == [1.0, -1.0]

    def test_ferromagnetic_pair(self):
        inst = IsingInstance(2, np.zeros(2), CouplingGraph(2, ((0, 1, -1.0),)))
        assert diagonal_energies(inst).tolist() == [-1.0, 1.0, 1.0, -1.0]

    def test_bit_order(self):
        inst = IsingInstance(2, np.array([1.0, 0.0]))
        # index 1 = bit 0 set = qubit 0 down
        assert diagonal_energies(inst).tolist() == [1.0, -1.0, 1.0, -1.0]

    def test_random_three_vs_enumeration(self):
        inst = random_instance(3, np.random.default_rng(7))
        expect = []
        for b in range(8):
            z = [1 - 2 * ((b >> i) & 1) for i in range(3)]
            e = sum(inst.h[i] * z[i] for i in range(3))
            e += sum(v * z[i] * z[j] for i, j, v in inst.couplings.edges)
            expect.append(e)
        np.testing.assert_allclose(diagonal_energies(inst), expect, atol=1e-12)

    def test_matches_kronecker_oracle(self):
        inst = random_instance(6, np.random.default_rng(2))
        np.testing.assert_allclose(diagonal_energies(inst), brute_energies(inst), atol=1e-12)

    def test_cutoff(self):
        with pytest.raises(ValueError):
            diagonal_energies(IsingInstance(5, np.zeros(5)), n_max=4)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 7))
    def test_spin_flip_symmetry(self, seed, n):
        inst = random_instance(n, np.random.default_rng(seed))
        flipped = inst.with_fields(-inst.h)
        complement = np.arange(1 << n) ^ ((1 << n) - 1)
        np.testing.assert_array_equal(diagonal_energies(flipped), diagonal_energies(inst)[complement])


class TestTypes:
    @pytest.mark.parametrize("edges", [((1, 0, 0.1),), ((0, 3, 0.1),), ((0, 1, 0.1), (0, 1, 0.2)),
                                       ((0, 1, 1.5),)])
    def test_graph_invariants(self, edges):
        with pytest.raises(ValueError):
            CouplingGraph(3, edges)

    def test_field_bound(self):
        with pytest.raises(ValueError):
            IsingInstance(2, np.array([0.0, 4.5]))

    def test_degree(self):
        g = CouplingGraph(4, ((0, 1, 0.1), (0, 2, 0.1), (2, 3, 0.1)))
        assert g.degree().tolist() == [2, 1, 2, 1]


class TestTextFormat:
    def test_layout(self):
        inst = IsingInstance(2, np.array([0.5, -1.0]), CouplingGraph(2, ((0, 1, -0.25),)))
        assert format_instance(inst) == "n 2\nh 0 0.5\nh 1 -1.0\nJ 0 1 -0.25\n"

    def test_round_trip_exact(self, tmp_path):
        inst = random_instance(5, np.random.default_rng(11))
        write_instance(tmp_path / "i.txt", inst)
        back = read_instance(tmp_path / "i.txt")
        np.testing.assert_array_equal(back.h, inst.h)
        assert back.couplings.edges == inst.couplings.edges

    def test_couplings_round_trip(self):
        g = CouplingGraph(3, ((0, 2, 0.123456789012345),))
        assert parse_couplings(format_couplings(g)).edges == g.edges

    @pytest.mark.parametrize("text", ["h 0 1.0\n", "n 2\nh 5 1.0\n", "n 2\nq 0 1\n", "n 2\nJ 0 x 1\n"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            parse_instance(text)

    def test_all_pairs_energy_after_round_trip(self):
        inst = random_instance(4, np.random.default_rng(3))
        back = parse_instance(format_instance(inst))
        np.testing.assert_array_equal(diagonal_energies(back), diagonal_energies(inst))


def test_energy_table_all_small_instances():
    for bits in itertools.product([-1.0, 1.0], repeat=2):
        inst = IsingInstance(2, np.array(bits))
        assert diagonal_energies(inst)[0] == sum(bits)
