import json

import numpy as np
import pytest

from tada import pipeline
from tada.errors import DataError
from tada.pipeline import PipelineConfig, generate_sbm


@pytest.fixture(scope="module")
def small_sbm():
    return generate_sbm(120, 2, 0.3, 0.05, attr_dim=6, noise=0.5, seed=1)


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert (cfg.k, cfg.h, cfg.alpha, cfg.T, cfg.rho, cfg.n_p) == (128, 128, 0.5, 2, 0.3, 128)
        assert cfg.candidate_size(1000) == 512
        assert cfg.candidate_size(100) == 100

    def test_updated_ignores_none_and_rejects_unknown(self):
        cfg = PipelineConfig().updated(k=16, rho=None)
        assert cfg.k == 16 and cfg.rho == 0.3
        with pytest.raises(DataError):
            PipelineConfig().updated(kk=3)

    @pytest.mark.parametrize("override", [
        {"gamma": 1.0}, {"rho": 1.0}, {"alpha": 0.0}, {"k": 0}, {"T": -1}, {"c_size": 8, "k": 9},
    ])
    def test_validate(self, override):
        with pytest.raises(DataError):
            PipelineConfig(**override).validate(100)

    def test_k_larger_than_graph(self):
        with pytest.raises(DataError):
            PipelineConfig(k=64).validate(40)

    def test_parse_config_text(self):
        parsed = pipeline.parse_config_text("k = 32  # comment\nrho=0.25\nc-size=none\n\n")
        assert parsed == {"k": 32, "rho": 0.25, "c_size": None}
        assert isinstance(parsed["k"], int)

    @pytest.mark.parametrize("text", ["k\n", "bogus=1\n", "k=abc\n"])
    def test_parse_config_errors(self, text):
        with pytest.raises((DataError, ValueError)):
            pipeline.parse_config_text(text)


class TestSbm:
    def test_shapes_and_splits(self, small_sbm):
        g, X, y = small_sbm
        assert g.n == 120 and X.shape == (120, 6)
        assert y.num_classes == 2
        sizes = [y.split(s).size for s in ("train", "val", "test")]
        assert sizes == [72, 24, 24]

    def test_homophily(self, small_sbm):
        g, _, y = small_sbm
        u, v = g.edges
        assert np.mean(y.labels[u] == y.labels[v]) > 0.7

    def test_average_degree_matches_parameters(self):
        g, _, _ = generate_sbm(500, 2, 0.16, 0.01, seed=0)
        # expected m / n = (250 * 0.16 + 250 * 0.01) / 2 = 21.25
        assert g.m / g.n == pytest.approx(21.25, rel=0.15)
        assert g.m / g.n >= 18

    def test_seeded(self):
        a = generate_sbm(60, 3, 0.3, 0.05, seed=4)
        b = generate_sbm(60, 3, 0.3, 0.05, seed=4)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    @pytest.mark.parametrize("kwargs", [
        {"n": 61, "blocks": 2}, {"p_in": 0.1, "p_out": 0.2}, {"attr_dim": 1}, {"noise": -1},
    ])
    def test_invalid(self, kwargs):
        args = {"n": 60, "blocks": 2, "p_in": 0.3, "p_out": 0.05}
        args.update(kwargs)
        with pytest.raises(DataError):
            generate_sbm(**args)

    def test_pair_sampler_covers_upper_triangle(self):
        rng = np.random.default_rng(0)
        u, v = pipeline._sample_pairs(rng, 6, 6, True, 1.0)
        assert sorted(zip(u.tolist(), v.tolist())) == [(i, j) for i in range(6)
                                                        for j in range(i + 1, 6)]


class TestRunPipeline:
    def test_end_to_end(self, small_sbm, tmp_path):
        g, X, y = small_sbm
        cfg = PipelineConfig(k=8, h=16, n_p=20, rho=0.25)
        sg, feats, report = pipeline.run_pipeline(cfg, g, X, y, out_dir=tmp_path)
        assert feats.H0.shape == (120, 16)
        assert report.m_before == g.m
        assert report.m_after == g.m - int(g.m * 0.25)
        assert len(report.loss_trace) == 20
        for name in ("sketch.bin", "params.bin", "h0.bin", "sparsified.tsv",
                     "sparsify_stats.json", "report.json"):
            assert (tmp_path / name).exists()
        saved = json.loads((tmp_path / "report.json").read_text())
        assert set(saved["timings_ms"]) == {"standardize", "count_sketch", "rwr_sketch",
                                            "hybrid_sketch", "pretrain", "reweight", "sparsify"}

    def test_deterministic(self, small_sbm):
        g, X, y = small_sbm
        cfg = PipelineConfig(k=8, h=8, n_p=5)
        a = pipeline.run_pipeline(cfg, g, X, y)[0]
        b = pipeline.run_pipeline(cfg, g, X, y)[0]
        assert np.array_equal(a.removed, b.removed)

    def test_shape_mismatch(self, small_sbm):
        g, X, y = small_sbm
        with pytest.raises(DataError):
            pipeline.run_pipeline(PipelineConfig(k=8), g, X[:-1], y)


class TestEvaluation:
    def test_propagate_zero_layers_is_identity(self, small_sbm):
        g, X, _ = small_sbm
        assert np.array_equal(pipeline.propagate(g, X, 0), X)

    def test_clean_attributes_are_easy(self):
        g, X, y = generate_sbm(200, 2, 0.2, 0.02, attr_dim=4, noise=0.1, seed=0)
        assert pipeline.eval_downstream(g, X, y, layers=2) >= 0.95

    def test_graph_structure_helps_noisy_attributes(self):
        g, X, y = generate_sbm(200, 2, 0.2, 0.02, attr_dim=4, noise=3.0, seed=0)
        assert pipeline.eval_downstream(g, X, y, layers=2) > pipeline.eval_downstream(g, X, y, 0)

    def test_rejects_empty_test_split(self, small_sbm):
        g, X, y = small_sbm
        y2 = type(y)(y.labels, np.zeros_like(y.mask))
        with pytest.raises(DataError):
            pipeline.eval_downstream(g, X, y2)


class TestBench:
    def test_bench_keys(self):
        g = pipeline.erdos_renyi(300, 0.05, seed=0)
        res = pipeline.bench_sketch(g, 8, reps=3)
        assert res["count_sketch_ms"] >= 0 and res["rwr_sketch_ms"] >= 0
        assert pipeline.bench_sparsify(g, reps=3)["sparsify_ms"] >= 0

    def test_reps_floor(self):
        with pytest.raises(DataError):
            pipeline.bench_sketch(pipeline.erdos_renyi(20, 0.3), 2, reps=1)


class TestWorkedExamples:
    def test_clean_attributes_fit_the_train_split(self):
        _, X, y = generate_sbm(100, 2, 0.3, 0.05, attr_dim=3, noise=0.0, seed=0)
        train = y.split("train")
        from tada.expander import train_softmax
        W, b, _ = train_softmax(X[train], y.labels[train], 2, 200, 0.5)
        assert np.mean(np.argmax(X[train] @ W + b, axis=1) == y.labels[train]) == 1.0

    def test_pass_through_extremes(self, small_sbm):
        from tada import expander, sparsify
        g, X, y = small_sbm
        cfg = PipelineConfig(k=8, h=16, rho=0.0, gamma=0.0, n_p=0)
        sg, feats, _ = pipeline.run_pipeline(cfg, g, X, y)
        assert sg.graph == g
        params = expander.init_params(8, X.shape[1], 16, 2, 0.0, cfg.seed)
        H = np.maximum(expander.standardize_columns(X) @ params.W_attr, 0)
        assert np.allclose(sg.weighted.edge_weights,
                           sparsify.reweight_edges(g, H).edge_weights, atol=1e-12)

    def test_default_config_report(self):
        g, X, y = generate_sbm(500, 2, 0.16, 0.01, attr_dim=8, seed=0)
        sg, _, report = pipeline.run_pipeline(PipelineConfig(n_p=10), g, X, y)
        assert report.m_before - report.m_after == int(np.floor(g.m * 0.3 + 1e-9))
        assert all(v >= 0 for v in report.timings_ms.values())
        json.loads(report.to_json())

    def test_fixed_seed_runs_are_byte_identical(self, small_sbm, tmp_path):
        g, X, y = small_sbm
        cfg = PipelineConfig(k=8, h=8, n_p=5)
        pipeline.run_pipeline(cfg, g, X, y, out_dir=tmp_path / "a")
        pipeline.run_pipeline(cfg, g, X, y, out_dir=tmp_path / "b")
        for name in ("sketch.bin", "params.bin", "h0.bin", "sparsified.tsv",
                     "sparsify_stats.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_zero_layers_is_plain_regression(self, small_sbm):
        from tada.expander import standardize_columns, train_softmax
        g, X, y = small_sbm
        train, test = y.split("train"), y.split("test")
        Z = standardize_columns(X)
        W, b, _ = train_softmax(Z[train], y.labels[train], 2, 200, 0.5, 0)
        expected = np.mean(np.argmax(Z[test] @ W + b, axis=1) == y.labels[test])
        assert pipeline.eval_downstream(g, X, y, layers=0) == expected

    def test_homophilic_clean_sbm_is_solved(self):
        g, X, y = generate_sbm(200, 2, 0.2, 0.01, attr_dim=4, noise=0.0, seed=3)
        assert pipeline.eval_downstream(g, X, y) >= 0.99

    def test_doubling_k_barely_moves_sketch_time(self):
        g = pipeline.erdos_renyi(3000, 40 / 2999, seed=0)
        pipeline.bench_sketch(g, 32, reps=3)
        t1 = pipeline.bench_sketch(g, 32, reps=9)["count_sketch_ms"]
        t2 = pipeline.bench_sketch(g, 64, reps=9)["count_sketch_ms"]
        assert t2 <= 2.0 * t1

    def test_edgeless_graph_sketches(self):
        from tada.graph import Graph
        g = Graph.from_edges(50, [], [])
        res = pipeline.bench_sketch(g, 4, reps=3)
        assert res["m"] == 0 and res["count_sketch_ms"] < 50
