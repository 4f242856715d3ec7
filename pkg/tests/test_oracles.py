import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complete, cycle, path, star, triangle
from tada import oracles
from tada.errors import DataError
from tada.graph import Graph, WeightedGraph
from tada.pipeline import erdos_renyi
from tada.verify import connected_nonbipartite


class TestJacobi:
    def test_round_robin_covers_every_pair_once(self):
        for n in (2, 5, 8):
            seen = []
            for P, Q in oracles._round_robin(n):
                assert len(set(P.tolist()) | set(Q.tolist())) == 2 * P.size
                seen += list(zip(P.tolist(), Q.tolist()))
            assert sorted(seen) == [(i, j) for i in range(n) for j in range(i + 1, n)]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 25), st.integers(0, 2**31))
    def test_matches_numpy(self, n, seed):
        B = np.random.default_rng(seed).standard_normal((n, n))
        M = B + B.T
        vals, vecs = oracles.jacobi_eigh(M)
        assert np.allclose(vals, np.linalg.eigvalsh(M)[::-1], atol=1e-9)
        assert np.allclose(vecs @ np.diag(vals) @ vecs.T, M, atol=1e-9)
        assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-9)

    def test_diagonal_input(self):
        vals, vecs = oracles.jacobi_eigh(np.diag([1.0, 3.0, 2.0]))
        assert vals.tolist() == [3.0, 2.0, 1.0]
        assert np.array_equal(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])

    def test_rejects_asymmetric(self):
        with pytest.raises(DataError):
            oracles.jacobi_eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_size_cap(self):
        with pytest.raises(DataError):
            oracles.dense_eigs(np.eye(oracles.MAX_NODES + 1))

    def test_triangle_spectrum(self):
        s = oracles.dense_eigs(oracles.dense_normalized_adjacency(triangle()))
        assert np.allclose(s.eigenvalues, [1.0, -0.5, -0.5])
        assert s.lambda2 == pytest.approx(-0.5)
        assert s.sigma == pytest.approx(0.5)

    def test_bipartite_sigma_is_one(self):
        s = oracles.dense_eigs(oracles.dense_normalized_adjacency(cycle(6)))
        assert s.sigma == pytest.approx(1.0)


class TestColoring:
    @pytest.mark.parametrize("g, expected", [
        (triangle(), (True, False)),
        (path(4), (True, True)),
        (cycle(5), (True, False)),
        (cycle(6), (True, True)),
        (Graph.from_edges(4, [0, 2], [1, 3]), (False, True)),
    ])
    def test_two_coloring(self, g, expected):
        assert oracles.two_coloring(g) == expected


class TestEffectiveResistance:
    def test_triangle(self):
        assert oracles.exact_effective_resistance(triangle(), 0, 1) == pytest.approx(2 / 3)

    def test_path_resistances_add(self):
        assert oracles.exact_effective_resistance(path(4), 0, 3) == pytest.approx(3.0)

    def test_weighted_edge_is_conductance(self):
        wg = WeightedGraph(path(2), np.array([4.0]))
        assert oracles.exact_effective_resistance(wg, 0, 1) == pytest.approx(0.25)

    def test_tree_edges_have_unit_resistance(self):
        assert np.allclose(oracles.effective_resistances(star(6)), 1.0)

    def test_foster_theorem(self):
        g = erdos_renyi(40, 0.2, seed=1)
        assert oracles.effective_resistances(g).sum() == pytest.approx(g.n - 1)

    def test_pinv_identities(self):
        g = connected_nonbipartite(30, 0.2, 0)
        W = g.to_dense()
        L = np.diag(W.sum(1)) - W
        Lp = oracles.laplacian_pinv(g)
        assert np.allclose(L @ Lp @ L, L, atol=1e-9)
        assert np.allclose(Lp @ np.ones(g.n), 0, atol=1e-9)

    def test_disconnected_rejected(self):
        with pytest.raises(DataError):
            oracles.laplacian_pinv(Graph.from_edges(4, [0, 2], [1, 3]))


class TestErBounds:
    def test_triangle_attains_upper_bound(self):
        rep = oracles.check_er_bounds(triangle())
        assert rep.asserted and rep.passed
        assert np.allclose(rep.exact, 2 / 3)
        assert np.allclose(rep.tightness, 1.0)

    def test_complete_graph(self):
        rep = oracles.check_er_bounds(complete(6))
        assert rep.passed
        assert np.allclose(rep.exact, 2 / 6)

    def test_bipartite_reported_only(self):
        rep = oracles.check_er_bounds(cycle(6))
        assert not rep.asserted
        assert "bipartite" in rep.note

    def test_random_weighted(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            g = connected_nonbipartite(25, 0.25, seed)
            rep = oracles.check_er_bounds(WeightedGraph(g, rng.uniform(0.1, 2.0, g.m)))
            assert rep.asserted and rep.violations == 0


class TestMixing:
    def test_complete_graph_is_within_envelope(self):
        rep = oracles.check_mixing_bound(complete(8), 10)
        assert rep.passed
        assert rep.sigma == pytest.approx(1 / 7)
        assert len(rep.steps) == 11 and rep.steps[0]["t"] == 0

    def test_deviation_shrinks(self):
        rep = oracles.check_mixing_bound(connected_nonbipartite(40, 0.2, 2), 15)
        devs = [s["max_dev_Anorm"] for s in rep.steps]
        assert devs[-1] < devs[1]
        assert rep.violations == 0

    @pytest.mark.parametrize("g", [cycle(6), Graph.from_edges(4, [0, 1], [1, 2])])
    def test_rejects_bipartite_or_disconnected(self, g):
        with pytest.raises(DataError):
            oracles.check_mixing_bound(g, 5)

    def test_rejects_weighted(self):
        with pytest.raises(DataError):
            oracles.check_mixing_bound(WeightedGraph(triangle(), np.ones(3)), 2)


class TestResidual:
    def test_adding_columns_never_hurts(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            rep = oracles.residual_comparison(rng.standard_normal((30, 4)),
                                              rng.standard_normal((30, 6)),
                                              rng.standard_normal(30))
            assert rep.passed

    def test_exact_fit(self):
        X = np.random.default_rng(1).standard_normal((20, 3))
        rep = oracles.residual_comparison(X, np.zeros((20, 2)), X @ [1.0, -2.0, 0.5])
        assert rep.res_x <= 1e-6 and rep.res_xa <= 1e-6


def test_exact_rwr_limit_rows_sum_to_one():
    g = connected_nonbipartite(20, 0.3, 0)
    assert np.allclose(oracles.exact_rwr(g, 0.5, 200).sum(axis=1), 1.0)


class TestWorkedExamples:
    def test_small_spectra(self):
        assert np.allclose(oracles.dense_eigs(oracles.dense_normalized_adjacency(path(2)))
                           .eigenvalues, [1.0, -1.0])
        assert oracles.dense_eigs(np.diag([3.0, 1.0])).eigenvalues.tolist() == [3.0, 1.0]

    def test_top_eigenvalue_is_one_when_connected(self):
        g = connected_nonbipartite(40, 0.15, 4)
        s = oracles.dense_eigs(oracles.dense_normalized_adjacency(g))
        assert abs(s.eigenvalues[0] - 1.0) <= 1e-9

    def test_reconstruction_is_relative(self):
        B = np.random.default_rng(3).standard_normal((60, 60)) * 1e3
        M = B + B.T
        vals, vecs = oracles.jacobi_eigh(M)
        assert np.linalg.norm(M - (vecs * vals) @ vecs.T) <= 1e-8 * np.linalg.norm(M)

    def test_path_resistances(self):
        assert oracles.exact_effective_resistance(path(2), 0, 1) == pytest.approx(1.0)
        assert oracles.exact_effective_resistance(path(3), 0, 2) == pytest.approx(2.0)

    def test_resistance_is_a_metric(self):
        g = connected_nonbipartite(25, 0.25, 6)
        Lp = oracles.laplacian_pinv(g)
        d = np.diag(Lp)
        R = d[:, None] + d[None, :] - 2 * Lp
        for j in range(g.n):
            assert np.all(R <= R[:, [j]] + R[[j], :] + 1e-9)

    @pytest.mark.parametrize("n", [4, 5, 7])
    def test_complete_graphs_attain_the_upper_bound(self, n):
        # ER = 2/n and 1/(1 - lambda2) * 2/(n-1) = 2/n, so only the lower bound is strict
        rep = oracles.check_er_bounds(complete(n))
        assert rep.passed
        assert np.all(rep.lower < rep.exact)
        assert np.allclose(rep.exact, 2 / n) and np.allclose(rep.upper, 2 / n)

    def test_k4_first_step(self):
        rep = oracles.check_mixing_bound(complete(4), 1)
        assert rep.sigma == pytest.approx(1 / 3)
        assert rep.steps[1]["max_dev_P"] == pytest.approx(1 / 4)
        assert rep.passed
        # at t=1 the off-diagonal entry deviates by |1/3 - 1/4| = 1/12
        P = oracles.dense_transition(complete(4))
        assert abs(P[0, 1] - 0.25) == pytest.approx(1 / 12)

    def test_t0_recorded_but_not_counted(self):
        rep = oracles.check_mixing_bound(complete(5), 0)
        assert len(rep.steps) == 1 and rep.violations == 0

    def test_star_moment_bound(self):
        w = np.random.default_rng(1).standard_normal(10)
        w /= np.linalg.norm(w)
        rep = oracles.count_sketch_moments(star(9), w, 8, 10_000, seed=3)
        assert rep.var[0] <= 1.2 * 2 * 9 / 8
        assert rep.unbiased()[0]

    def test_target_in_span_of_adjacency(self):
        rng = np.random.default_rng(2)
        A = erdos_renyi(40, 0.2, seed=2).to_dense()
        C = A @ rng.standard_normal((40, 3))
        rep = oracles.residual_comparison(rng.standard_normal((40, 4)), A, C)
        assert rep.res_xa <= 1e-3 * rep.res_x
