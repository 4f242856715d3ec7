"""Small randomized oracle sweep behind ``tada verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expander, oracles, sketch, sparsify
from .graph import Graph, LabelVector, SPLIT_CODES
from .pipeline import erdos_renyi


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def connected_nonbipartite(n, p, seed):
    """First G(n, p) draw (from ``seed`` upward) that is connected and not bipartite."""
    while True:
        g = erdos_renyi(n, p, seed)
        connected, bipartite = oracles.two_coloring(g)
        if connected and not bipartite:
            return g
        seed += 10_007


def _random_weighted(g, rng):
    return sparsify.WeightedGraph(g, rng.uniform(0.05, 1.0, g.m))


def check_count_sketch_exact(seed, graphs):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(graphs):
        g = erdos_renyi(20, 0.3, seed + i)
        cs = sketch.build_count_sketch(g.n, 64, seed + i, injective=True)
        AR = sketch.apply_count_sketch(g, cs)
        R = cs.to_dense()
        for _ in range(10):
            w = rng.standard_normal(g.n)
            w /= np.linalg.norm(w)
            worst = max(worst, np.abs(AR @ (R @ w) - g.adjacency @ w).max())
    return CheckResult("count_sketch_exact", worst <= 1e-6, f"max err {worst:.2e}")


def check_count_sketch_moments(seed, graphs):
    star = Graph.from_edges(10, np.zeros(9, dtype=int), np.arange(1, 10))
    w = np.random.default_rng(seed).standard_normal(10)
    w /= np.linalg.norm(w)
    rep = oracles.count_sketch_moments(star, w, 8, 10_000, seed)
    ok = bool(rep.unbiased().all() and rep.variance_ok().all())
    ratio = (rep.var / rep.var_bound).max()
    return CheckResult("count_sketch_moments", ok, f"max var/bound {ratio:.3f}")


def check_er_bounds(seed, graphs):
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(graphs):
        g = connected_nonbipartite(30, 0.3, seed + i)
        bad += oracles.check_er_bounds(_random_weighted(g, rng)).violations
    tri = oracles.check_er_bounds(Graph.from_edges(3, [0, 1, 2], [1, 2, 0]))
    tight = np.allclose(tri.exact, tri.upper, atol=1e-9)
    return CheckResult("er_bounds", bad == 0 and tight, f"{bad} violations; triangle tight={tight}")


def check_mixing(seed, graphs):
    bad = 0
    for i in range(graphs):
        bad += oracles.check_mixing_bound(connected_nonbipartite(40, 0.2, seed + i), 20).violations
    return CheckResult("mixing_bound", bad == 0, f"{bad} violations")


def check_rwr(seed, graphs):
    worst_tail, worst_match = 0.0, 0.0
    for i in range(graphs):
        g = erdos_renyi(40, 0.15, seed + i)
        src = np.arange(g.n)
        for alpha in (0.3, 0.5, 0.85):
            limit = oracles.exact_rwr(g, alpha, 200)
            for T in (0, 1, 2, 5):
                pi = sketch.rwr_scores(g, src, T, alpha)
                worst_tail = max(worst_tail, (np.abs(pi - limit).max()) / alpha ** (T + 1))
                worst_match = max(worst_match, np.abs(pi - oracles.exact_rwr(g, alpha, T)).max())
    ok = worst_tail <= 1.0 and worst_match <= 1e-12
    return CheckResult("rwr_truncation", ok,
                       f"max tail/bound {worst_tail:.3f}; recurrence vs dense {worst_match:.1e}")


def check_sparsifier(seed, graphs):
    rng = np.random.default_rng(seed)
    ok = True
    for i in range(graphs):
        g = erdos_renyi(60, 0.1, seed + i)
        wg = sparsify.reweight_edges(g, rng.standard_normal((g.n, 8)))
        cent = sparsify.edge_centralities(wg).values
        order = sorted(range(g.m), key=lambda e: (cent[e], e))
        prev = set()
        for rho in (0.0, 0.1, 0.25, 0.5, 0.9):
            removed = sparsify.sparsify(wg, rho).removed
            r = sparsify.removal_count(g.m, rho)
            ok &= removed.size == r and set(removed.tolist()) == set(order[:r])
            ok &= prev <= set(removed.tolist())
            prev = set(removed.tolist())
    return CheckResult("sparsifier_oracle", bool(ok), f"{graphs} graphs x 5 ratios")


def check_gradients(seed, graphs):
    rng = np.random.default_rng(seed)
    n, k, d, h = 6, 4, 3, 5
    A = rng.standard_normal((n, k))
    X = rng.standard_normal((n, d))
    labels = np.array([0, 1, 0, 1, 1, 0])
    params = expander.init_params(k, d, h, 2, 0.4, seed)
    _, grads = expander.loss_and_grads(A, X, labels, params)
    worst = 0.0
    eps = 1e-4
    for name in ("W_topo", "W_attr", "W_cls", "b_cls"):
        arr = getattr(params, name)
        ana = getattr(grads, name)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = expander.loss_and_grads(A, X, labels, params)[0]
            arr[idx] = old - eps
            down = expander.loss_and_grads(A, X, labels, params)[0]
            arr[idx] = old
            num = (up - down) / (2 * eps)
            worst = max(worst, abs(num - ana[idx]) / max(abs(num), abs(ana[idx]), 1e-8))
    return CheckResult("gradient_check", worst <= 1e-4, f"max rel err {worst:.2e}")


def check_residual(seed, graphs):
    rng = np.random.default_rng(seed)
    ok = True
    for i in range(graphs):
        g = erdos_renyi(60, 0.1, seed + i)
        rep = oracles.residual_comparison(rng.standard_normal((60, 8)), g.to_dense(),
                                          rng.standard_normal((60, 3)))
        ok &= rep.passed
    return CheckResult("feature_residual", bool(ok), f"{graphs} instances")


def check_pinv(seed, graphs):
    worst = 0.0
    for i in range(min(graphs, 5)):
        g = connected_nonbipartite(40, 0.2, seed + i)
        W = g.to_dense()
        L = np.diag(W.sum(1)) - W
        Lp = oracles.laplacian_pinv(g)
        worst = max(worst, np.linalg.norm(L @ Lp @ L - L))
    return CheckResult("pinv_sanity", worst <= 1e-8, f"max ||L L+ L - L||_F {worst:.1e}")


CHECKS = (check_count_sketch_exact, check_count_sketch_moments, check_er_bounds, check_mixing,
          check_rwr, check_sparsifier, check_gradients, check_residual, check_pinv)


def run_checks(seed=0, graphs=10):
    return [check(seed, graphs) for check in CHECKS]
