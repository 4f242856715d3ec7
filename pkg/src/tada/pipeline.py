"""End-to-end orchestration, synthetic data, downstream evaluation and timing."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import expander, sketch, sparsify
from .errors import DataError
from .graph import (SPLIT_CODES, Graph, LabelVector, norm_adj_multiply, save_edge_list,
                    save_labels, save_matrix)


@dataclass
class PipelineConfig:
    k: int = 128
    h: int = 128
    gamma: float = 0.5
    beta: float = 1.0
    alpha: float = 0.5
    T: int = 2
    c_size: int | None = None  # None -> min(n, 4k)
    rho: float = 0.3
    n_p: int = 128
    lr: float = 0.05
    seed: int = 0
    layers: int = 2
    eval_epochs: int = 200
    eval_lr: float = 0.5

    def validate(self, n=None):
        if not 0.0 <= self.gamma < 1.0:
            raise DataError(f"gamma={self.gamma} outside [0, 1)")
        if not 0.0 <= self.rho < 1.0:
            raise DataError(f"rho={self.rho} outside [0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha={self.alpha} outside (0, 1)")
        if self.k < 1 or self.h < 1:
            raise DataError("k and h must be positive")
        if self.T < 0 or self.n_p < 0 or self.layers < 0:
            raise DataError("T, n_p and layers must be non-negative")
        c_size = self.candidate_size(n) if n is not None else self.c_size
        if c_size is not None and self.k > c_size:
            raise DataError(f"k={self.k} exceeds candidate set size {c_size}")
        return self

    def candidate_size(self, n):
        return self.c_size if self.c_size is not None else min(n, 4 * self.k)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def updated(self, **overrides):
        values = asdict(self)
        for key, val in overrides.items():
            if key not in values:
                raise DataError(f"unknown config key {key!r}")
            if val is not None:
                values[key] = val
        return PipelineConfig(**values)


def parse_config_text(text):
    """``key=value`` lines (``#`` comments) into typed PipelineConfig overrides."""
    types = {f.name: f.type for f in fields(PipelineConfig)}
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {line_no}: expected key=value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise DataError(f"config line {line_no}: unknown key {key!r}")
        kind = types[key]
        if val.lower() in ("none", ""):
            out[key] = None
        elif "int" in str(kind):
            out[key] = int(val)
        else:
            out[key] = float(val)
    return out


@dataclass
class RunReport:
    timings_ms: dict = field(default_factory=dict)
    m_before: int = 0
    m_after: int = 0
    isolated_nodes: int = 0
    unreachable_nodes: int = 0
    loss_trace: list = field(default_factory=list)
    accuracies: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class _Timer:
    def __init__(self, report, stage):
        self.report, self.stage = report, stage

    def __enter__(self):
        self.start = time.perf_counter()

    def __exit__(self, *exc):
        self.report.timings_ms[self.stage] = (time.perf_counter() - self.start) * 1e3


# ---------------------------------------------------------------- synthetic data

def _sample_pairs(rng, size_a, size_b, same, p):
    """Bernoulli(p) sample over block pairs, returned as local index arrays."""
    total = size_a * (size_a - 1) // 2 if same else size_a * size_b
    count = rng.binomial(total, p) if total else 0
    if count == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    idx = np.sort(rng.choice(total, size=count, replace=False))
    if not same:
        return idx // size_b, idx % size_b
    # row-major upper triangle: row r holds pairs (r, r+1..size-1)
    starts = np.arange(size_a) * (2 * size_a - np.arange(size_a) - 1) // 2
    r = np.searchsorted(starts, idx, side="right") - 1
    return r, idx - starts[r] + r + 1


def generate_sbm(n, blocks, p_in, p_out, attr_dim=None, noise=1.0, seed=0):
    """Planted-partition SBM with block labels and noisy one-hot attributes.

    Attributes are the one-hot block indicator (padded to ``attr_dim`` columns)
    plus Gaussian noise of standard deviation ``noise``; the signal-to-noise
    ratio is therefore ``1 / noise``. Splits are 60/20/20 by seeded shuffle.
    """
    attr_dim = blocks if attr_dim is None else attr_dim
    if blocks < 1 or n % blocks:
        raise DataError("n must be a positive multiple of blocks")
    if not 0 <= p_out < p_in <= 1:
        raise DataError("need 0 <= p_out < p_in <= 1")
    if attr_dim < blocks:
        raise DataError("attr_dim must be at least the number of blocks")
    if noise < 0:
        raise DataError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    size = n // blocks
    us, vs = [], []
    for a in range(blocks):
        for b in range(a, blocks):
            lu, lv = _sample_pairs(rng, size, size, a == b, p_in if a == b else p_out)
            us.append(lu + a * size)
            vs.append(lv + b * size)
    g = Graph.from_edges(n, np.concatenate(us), np.concatenate(vs))

    labels = np.repeat(np.arange(blocks), size)
    X = np.zeros((n, attr_dim))
    X[np.arange(n), labels] = 1.0
    X += noise * rng.standard_normal((n, attr_dim))

    perm = rng.permutation(n)
    mask = np.empty(n, dtype=np.int8)
    n_train, n_val = int(round(0.6 * n)), int(round(0.2 * n))
    mask[perm[:n_train]] = SPLIT_CODES["train"]
    mask[perm[n_train:n_train + n_val]] = SPLIT_CODES["val"]
    mask[perm[n_train + n_val:]] = SPLIT_CODES["test"]
    return g, X, LabelVector(labels, mask)


def save_dataset(out_dir, g, X, y):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(g, out / "edges.txt")
    save_matrix(out / "features.bin", X)
    save_labels(y, out / "labels.txt", out / "splits.txt")


# ---------------------------------------------------------------- pipeline

def run_pipeline(cfg, g, X, y, out_dir=None):
    """Sketch -> pre-train -> reweight -> sparsify. Returns ``(sparsified, features, report)``."""
    cfg.validate(g.n)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != g.n or len(y) != g.n:
        raise DataError(f"graph has {g.n} nodes, attributes {X.shape[0]}, labels {len(y)}")
    report = RunReport(config=asdict(cfg))
    report.m_before = g.m
    c_size = cfg.candidate_size(g.n)

    with _Timer(report, "standardize"):
        Xs = expander.standardize_columns(X)
    with _Timer(report, "count_sketch"):
        cs = sketch.build_count_sketch(g.n, cfg.k, cfg.seed)
    with _Timer(report, "rwr_sketch"):
        rs = sketch.build_rwr_sketch(g, cfg.k, c_size, cfg.T, cfg.alpha, cfg.seed)
    with _Timer(report, "hybrid_sketch"):
        sk = sketch.hybrid_sketch(g, cs, rs, cfg.beta,
                                  {"alpha": cfg.alpha, "T": cfg.T})
    report.unreachable_nodes = rs.unreachable

    pcfg = expander.PretrainConfig(h=cfg.h, gamma=cfg.gamma, n_p=cfg.n_p, lr=cfg.lr, seed=cfg.seed)
    with _Timer(report, "pretrain"):
        params, feats = expander.pretrain(sk, Xs, y, pcfg)
    report.loss_trace = feats.loss_trace

    with _Timer(report, "reweight"):
        wg = sparsify.reweight_edges(g, feats)
    with _Timer(report, "sparsify"):
        sg = sparsify.sparsify(wg, cfg.rho)
    report.m_after = sg.m
    report.isolated_nodes = sg.isolated_nodes

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sketch.save_sketch(sk, out / "sketch.bin")
        expander.save_params(params, out / "params.bin")
        save_matrix(out / "h0.bin", feats.H0)
        sparsify.save_sparsified(sg, out / "sparsified.tsv", out / "sparsify_stats.json")
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return sg, feats, report


def propagate(graph, F, layers):
    """``A~^layers @ F`` with symmetric (weighted) normalisation."""
    Z = np.asarray(F, dtype=np.float64)
    for _ in range(layers):
        Z = norm_adj_multiply(graph, Z)
    return Z


def eval_downstream(graph, F, y, layers=2, epochs=200, lr=0.5, seed=0):
    """Test accuracy of softmax regression on ``A~^L F`` (SGC-style linear model).

    Propagated features are column-standardised before training so a single
    learning rate works across feature scales.
    """
    if layers < 0:
        raise DataError("layers must be >= 0")
    F = np.asarray(getattr(F, "H0", F), dtype=np.float64)
    train, test = y.split("train"), y.split("test")
    if test.size == 0:
        raise DataError("downstream evaluation needs a non-empty test split")
    if train.size == 0:
        raise DataError("downstream evaluation needs a non-empty train split")
    Z = expander.standardize_columns(propagate(graph, F, layers))
    W, b, _ = expander.train_softmax(Z[train], y.labels[train], y.num_classes, epochs, lr, seed)
    pred = np.argmax(Z[test] @ W + b, axis=1)
    return float(np.mean(pred == y.labels[test]))


# ---------------------------------------------------------------- benchmarks

def _median_ms(fn, reps):
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append((time.perf_counter() - start) * 1e3)
    return float(np.median(times))


def bench_sketch(g, k, reps=5, c_size=None, T=2, alpha=0.5, seed=0):
    """Median wall times (ms) of the count-sketch product and the RWR-sketch build."""
    if reps < 3:
        raise DataError("reps must be >= 3")
    cs = sketch.build_count_sketch(g.n, k, seed)
    c_size = min(g.n, 4 * k) if c_size is None else c_size
    return {
        "n": g.n, "m": g.m, "k": k, "reps": reps,
        "count_sketch_ms": _median_ms(lambda: sketch.apply_count_sketch(g, cs), reps),
        "rwr_sketch_ms": _median_ms(
            lambda: sketch.build_rwr_sketch(g, k, c_size, T, alpha, seed), reps),
    }


def bench_sparsify(g, h=32, rho=0.3, reps=5, seed=0):
    """Median wall time (ms) of reweight + centrality + removal on random features."""
    if reps < 3:
        raise DataError("reps must be >= 3")
    H0 = np.random.default_rng(seed).random((g.n, h))
    ms = _median_ms(lambda: sparsify.sparsify(sparsify.reweight_edges(g, H0), rho), reps)
    return {"n": g.n, "m": g.m, "h": h, "rho": rho, "reps": reps, "sparsify_ms": ms}


def erdos_renyi(n, p, seed=0):
    """G(n, p) random graph."""
    rng = np.random.default_rng(seed)
    u, v = _sample_pairs(rng, n, n, True, p)
    return Graph.from_edges(n, u, v)
