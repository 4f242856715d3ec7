"""Count-Sketch and RWR-Sketch operators and the hybrid sketched adjacency.

Both ``k x n`` operators are kept in their natural sparse form (one nonzero
per column) so that ``A @ R.T`` and ``A @ S.T`` cost O(m) each.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import DataError
from .graph import read_matrix, transition_multiply, write_matrix

_HASH_LANE = 1
_SIGN_LANE = 2
_PERM_LANE = 3


@dataclass(frozen=True, eq=False)
class CountSketch:
    """``R = Phi @ Delta``: node ``i`` goes to bucket ``hash[i]`` with ``sign[i]``."""

    k: int
    hash: np.ndarray
    sign: np.ndarray
    seed: int = 0

    @property
    def n(self):
        return self.hash.size

    def to_dense(self):
        R = np.zeros((self.k, self.n))
        R[self.hash, np.arange(self.n)] = self.sign
        return R

    @property
    def injective(self):
        return np.unique(self.hash).size == self.n


def count_sketch_arrays(n, k, seeds):
    """Hash and sign arrays for every seed in ``seeds`` (shape ``seeds.shape + (n,)``)."""
    seeds = np.asarray(seeds, dtype=np.uint64)[..., None]
    idx = np.arange(n, dtype=np.uint64)
    h = rng.bounded(rng.stream(seeds, idx, _HASH_LANE), k)
    s = rng.signs(rng.stream(seeds, idx, _SIGN_LANE))
    return h, s


def build_count_sketch(n, k, seed=0, injective=False):
    """Seeded count-sketch for ``n`` nodes and ``k`` buckets.

    With ``injective=True`` the hash is a seeded random injection into
    ``[0, k)`` (requires ``k >= n``), which makes ``R.T @ R`` the identity.
    """
    if k < 1:
        raise DataError("sketch dimension k must be >= 1")
    if n < 1:
        raise DataError("count-sketch needs n >= 1")
    h, s = count_sketch_arrays(n, k, np.uint64(seed))
    if injective:
        if k < n:
            raise DataError(f"injective hash needs k >= n (k={k}, n={n})")
        keys = rng.stream(np.uint64(seed), np.arange(k, dtype=np.uint64), _PERM_LANE)
        h = np.argsort(keys, kind="stable")[:n].astype(np.int64)
    return CountSketch(int(k), h, s, int(seed))


def apply_count_sketch(g, cs):
    """``A @ R.T`` as an ``n x k`` dense matrix (one scatter-add per CSR slot)."""
    if cs.n != g.n:
        raise DataError(f"count-sketch built for {cs.n} nodes, graph has {g.n}")
    flat = g.rows * cs.k + cs.hash[g.neighbors]
    out = np.bincount(flat, weights=cs.sign[g.neighbors].astype(np.float64),
                      minlength=g.n * cs.k)
    # bincount returns integers when there are no edges at all
    return out.astype(np.float64, copy=False).reshape(g.n, cs.k)


@dataclass(frozen=True, eq=False)
class RwrSketch:
    """Clustering-indicator sketch ``S``: node ``i`` belongs to row ``assignment[i]``.

    ``row_norm[r]`` is the L2 norm of indicator row ``r`` before normalisation,
    i.e. the square root of its cluster size; normalised entries are
    ``1 / row_norm[r]``.
    """

    k: int
    assignment: np.ndarray
    row_norm: np.ndarray
    centroids: np.ndarray
    candidate_set_size: int
    unreachable: int = 0
    scores: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.assignment.size

    def to_dense(self):
        S = np.zeros((self.k, self.n))
        vals = _safe_reciprocal(self.row_norm)[self.assignment]
        S[self.assignment, np.arange(self.n)] = vals
        return S


def _safe_reciprocal(x):
    out = np.zeros_like(x, dtype=np.float64)
    nz = x > 0
    out[nz] = 1.0 / x[nz]
    return out


def top_by_score(scores, ids, count):
    """First ``count`` ids by descending score, ties toward the smaller id."""
    order = np.lexsort((ids, -np.asarray(scores)))
    return np.asarray(ids)[order[:count]]


def rwr_scores(g, sources, T, alpha):
    """``sum_{t<=T} (1-alpha) alpha^t P^t`` restricted to the ``sources`` columns."""
    pi0 = np.zeros((g.n, len(sources)))
    pi0[sources, np.arange(len(sources))] = 1.0
    pi = (1 - alpha) * pi0
    for _ in range(T):
        pi = alpha * transition_multiply(g, pi) + (1 - alpha) * pi0
    return pi


def build_rwr_sketch(g, k, c_size=None, T=2, alpha=0.5, seed=0):
    """Structure-aware sketch from truncated RWR scores towards hub centroids.

    Candidates are the ``c_size`` highest-degree nodes; the ``k`` candidates
    with the largest total RWR mass become centroids and every node joins the
    centroid with its largest score. ``seed`` is recorded for provenance only;
    construction is deterministic.
    """
    n = g.n
    if c_size is None:
        c_size = min(n, 4 * k)
    if k < 1:
        raise DataError("sketch dimension k must be >= 1")
    if k > c_size:
        raise DataError(f"k={k} exceeds candidate set size {c_size}")
    if c_size > n:
        raise DataError(f"candidate set size {c_size} exceeds node count {n}")
    if T < 0:
        raise DataError("T must be >= 0")
    if not 0 < alpha < 1:
        raise DataError("alpha must lie in (0, 1)")

    ids = np.arange(n)
    candidates = top_by_score(g.degrees, ids, c_size)
    pi = rwr_scores(g, candidates, T, alpha)
    centrality = pi.sum(axis=0)
    picked = top_by_score(centrality, np.arange(c_size), k)
    centroids = candidates[picked]
    local = pi[:, picked]

    # argmax takes the first maximum, i.e. the smaller centroid index;
    # all-zero rows therefore land on centroid 0.
    assignment = np.argmax(local, axis=1).astype(np.int64)
    unreachable = int(np.count_nonzero(local.max(axis=1) <= 0))
    row_norm = np.sqrt(np.bincount(assignment, minlength=k).astype(np.float64))
    return RwrSketch(int(k), assignment, row_norm, centroids, int(c_size),
                     unreachable, scores=centrality[picked])


def apply_rwr_sketch(g, rs):
    """``A @ S.T``: entry ``(i, r)`` sums ``1 / row_norm[r]`` over neighbours in cluster r."""
    if rs.n != g.n:
        raise DataError(f"RWR sketch built for {rs.n} nodes, graph has {g.n}")
    cluster = rs.assignment[g.neighbors]
    vals = _safe_reciprocal(rs.row_norm)[cluster]
    out = np.bincount(g.rows * rs.k + cluster, weights=vals, minlength=g.n * rs.k)
    return out.astype(np.float64, copy=False).reshape(g.n, rs.k)


@dataclass(frozen=True, eq=False)
class SketchedAdjacency:
    values: np.ndarray
    k: int
    beta: float
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.values.shape[0]


def hybrid_sketch(g, cs, rs, beta=1.0, provenance=None):
    """``A' = A @ (R.T + beta * S.T)``."""
    if cs.k != rs.k:
        raise DataError(f"sketch dimensions differ ({cs.k} vs {rs.k})")
    if beta < 0:
        raise DataError("beta must be >= 0")
    values = apply_count_sketch(g, cs)
    if beta != 0:
        values += beta * apply_rwr_sketch(g, rs)
    prov = {"k": cs.k, "beta": float(beta), "seed": cs.seed,
            "c_size": rs.candidate_set_size}
    prov.update(provenance or {})
    return SketchedAdjacency(values, cs.k, float(beta), prov)


def count_sketch_adjacency(g, cs):
    """Pure count-sketch ``A' = A @ R.T`` wrapped as a SketchedAdjacency."""
    return SketchedAdjacency(apply_count_sketch(g, cs), cs.k, 0.0,
                             {"k": cs.k, "beta": 0.0, "seed": cs.seed})


def estimate_common_neighbors(sk, i, j):
    """Inner product ``A'_i . A'_j`` estimating ``|N(i) & N(j)|`` (degree when i == j)."""
    if sk.beta != 0:
        raise DataError("common-neighbour estimates require a pure count-sketch (beta=0)")
    n = sk.n
    if not (0 <= i < n and 0 <= j < n):
        raise DataError(f"node id out of range [0, {n})")
    return float(sk.values[i] @ sk.values[j])


def save_sketch(sk, path):
    """Write the matrix container plus a ``key=value`` sidecar (``<path>.meta``)."""
    path = Path(path)
    with open(path, "wb") as fh:
        write_matrix(fh, sk.values)
    meta = {"k": sk.k, "beta": sk.beta, **sk.provenance}
    lines = [f"{key}={meta[key]}" for key in sorted(meta)]
    path.with_name(path.name + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_sketch(path):
    path = Path(path)
    with open(path, "rb") as fh:
        values = read_matrix(fh, path)
    meta = {}
    sidecar = path.with_name(path.name + ".meta")
    if sidecar.exists():
        for line in sidecar.read_text(encoding="utf-8").splitlines():
            if "=" in line:
                key, val = line.split("=", 1)
                meta[key.strip()] = _parse_scalar(val.strip())
    k = int(meta.get("k", values.shape[1]))
    if k != values.shape[1]:
        raise DataError(f"{sidecar}: k={k} but matrix has {values.shape[1]} columns")
    return SketchedAdjacency(values, k, float(meta.get("beta", 0.0)), meta)


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text
