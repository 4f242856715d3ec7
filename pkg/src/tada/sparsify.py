"""Edge reweighting, ER-proxy centrality and bottom-rho edge removal."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError
from .graph import Graph, WeightedGraph

EPS = 1e-8
_BLOCK = 4096


def reweight_edges(g, H0, eps=EPS):
    """Cosine similarity of endpoint rows of ``H0``, clamped to ``[eps, 1]``."""
    H = np.asarray(getattr(H0, "H0", H0), dtype=np.float64)
    if H.shape[0] != g.n:
        raise DataError(f"H0 has {H.shape[0]} rows, graph has {g.n} nodes")
    if not np.isfinite(H).all():
        raise DataError("H0 contains non-finite values")
    u, v = g.edges
    norms = np.linalg.norm(H, axis=1)
    unit = H / np.where(norms > 0, norms, 1.0)[:, None]  # zero rows stay zero
    cos = np.empty(g.m)
    # gather endpoint rows in fixed-size blocks so the temporaries stay
    # O(block * h) instead of O(m * h)
    for start in range(0, g.m, _BLOCK):
        stop = start + _BLOCK
        cos[start:stop] = np.einsum("ij,ij->i", unit[u[start:stop]], unit[v[start:stop]])
    return WeightedGraph(g, np.clip(cos, eps, 1.0))


@dataclass(frozen=True, eq=False)
class EdgeCentrality:
    values: np.ndarray

    @cached_property
    def ranking(self):
        """Edge ids in ascending ``(centrality, edge id)`` order."""
        return np.lexsort((np.arange(self.values.size), self.values))


def edge_centralities(wg):
    """``w(e) * (1/d_w(u) + 1/d_w(v))`` for every edge id."""
    u, v = wg.base.edges
    # isolated nodes have d_w = 0 but no incident edges, so their entry is never read
    dw = wg.weighted_degrees
    inv = np.divide(1.0, dw, out=np.zeros_like(dw), where=dw > 0)
    return EdgeCentrality(wg.edge_weights * (inv[u] + inv[v]))


def removal_count(m, rho):
    # the epsilon keeps products like 0.3 * 10 from flooring below the intended count
    return min(m, math.floor(m * rho + 1e-9))


def bottom_edges(scores, r):
    """Ids of the ``r`` smallest scores under ``(score, id)`` order, in that order.

    Partial selection: O(m) to find the threshold, then only the ties and the
    strictly smaller entries are touched.
    """
    if r <= 0:
        return np.empty(0, dtype=np.int64)
    part = np.argpartition(scores, r - 1)[:r]
    threshold = scores[part].max()
    below = np.flatnonzero(scores < threshold)
    ties = np.flatnonzero(scores == threshold)
    chosen = np.concatenate([below, ties[: r - below.size]])
    return chosen[np.lexsort((chosen, scores[chosen]))]


@dataclass(frozen=True, eq=False)
class SparsifiedGraph:
    weighted: WeightedGraph
    removed: np.ndarray  # edge ids of the input graph, ascending (C_w, id)
    rho: float
    centrality: EdgeCentrality

    @cached_property
    def kept(self):
        mask = np.ones(self.weighted.m, dtype=bool)
        mask[self.removed] = False
        return mask

    @property
    def n(self):
        return self.weighted.n

    @property
    def m(self):
        return int(self.kept.sum())

    def edges(self):
        u, v = self.weighted.base.edges
        return u[self.kept], v[self.kept], self.weighted.edge_weights[self.kept]

    @cached_property
    def graph(self):
        u, v, _ = self.edges()
        return Graph.from_edges(self.n, u, v)

    def to_weighted(self):
        """Survivors as a WeightedGraph over the surviving topology."""
        # surviving edges keep their (u, v) lexicographic order, so ids line up
        _, _, w = self.edges()
        return WeightedGraph(self.graph, w)

    @cached_property
    def isolated_nodes(self):
        return int(np.count_nonzero(self.graph.degrees == 0))

    def stats(self, bins=10):
        _, _, w = self.edges()
        hist, edges = np.histogram(w, bins=bins, range=(0.0, 1.0))
        return {
            "m_before": int(self.weighted.m),
            "m_removed": int(self.removed.size),
            "rho": float(self.rho),
            "isolated_nodes": self.isolated_nodes,
            "weight_histogram": {"edges": edges.tolist(), "counts": hist.tolist()},
        }

    def removed_edges(self):
        u, v = self.weighted.base.edges
        return u[self.removed], v[self.removed]


def sparsify(wg, rho):
    """Drop the ``floor(m * rho)`` edges of lowest centrality; survivors keep ``w(e)``."""
    if not 0.0 <= rho < 1.0:
        raise DataError(f"rho={rho} outside [0, 1)")
    cent = edge_centralities(wg)
    removed = bottom_edges(cent.values, removal_count(wg.m, rho))
    return SparsifiedGraph(wg, removed, float(rho), cent)


def save_sparsified(sg, path, stats_path=None):
    u, v, w = sg.edges()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={sg.n} edges={u.size}\n")
        for a, b, x in zip(u.tolist(), v.tolist(), w.tolist()):
            fh.write(f"{a}\t{b}\t{x:.17g}\n")
    if stats_path is not None:
        with open(stats_path, "w", encoding="utf-8") as fh:
            json.dump(sg.stats(), fh, indent=2)


def load_weighted_edge_list(path):
    """Read ``u<TAB>v<TAB>w`` lines back into a WeightedGraph."""
    n = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes="):
                    n = int(body.split("=", 1)[1].split()[0])
                continue
            a, b, x = line.split()
            rows.append((int(a), int(b), float(x)))
    if not rows and n is None:
        raise DataError(f"{path}: empty weighted edge list")
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    u, v = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
    if n is None:
        n = int(max(u.max(), v.max())) + 1
    g = Graph.from_edges(n, u, v)
    if g.m != len(rows):
        raise DataError(f"{path}: duplicate or self-loop edges in weighted list")
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((hi, lo))
    return WeightedGraph(g, arr[order, 2])
