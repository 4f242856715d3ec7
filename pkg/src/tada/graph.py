"""Compressed undirected graphs, file formats and propagation kernels."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParseError

MAGIC = b"TADA"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

SPLITS = ("train", "val", "test", "none")
SPLIT_CODES = {name: code for code, name in enumerate(SPLITS)}


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in CSR form.

    ``neighbors[offsets[i]:offsets[i + 1]]`` is the sorted neighbour list of
    node ``i``; every edge is stored in both directions.
    """

    offsets: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, n, u, v):
        """Build from endpoint arrays; duplicates and self-loops are dropped."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if n < 1:
            raise DataError("graph must have at least one node")
        if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise DataError("edge endpoint out of range")
        keep = u != v
        lo = np.minimum(u[keep], v[keep])
        hi = np.maximum(u[keep], v[keep])
        key = np.unique(lo * n + hi)
        lo, hi = key // n, key % n
        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(offsets, cols.astype(np.int64))

    @classmethod
    def from_dense(cls, adj):
        adj = np.asarray(adj)
        u, v = np.nonzero(np.triu(adj, 1))
        return cls.from_edges(adj.shape[0], u, v)

    @property
    def n(self):
        return self.offsets.size - 1

    @property
    def m(self):
        return self.neighbors.size // 2

    @cached_property
    def degrees(self):
        return np.diff(self.offsets)

    @cached_property
    def rows(self):
        """Source node of every CSR slot."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)

    def neighbors_of(self, i):
        return self.neighbors[self.offsets[i]:self.offsets[i + 1]]

    @cached_property
    def edges(self):
        """``(u, v)`` with ``u < v``, ordered by ``(u, v)``; index = edge id."""
        mask = self.neighbors > self.rows
        return self.rows[mask], self.neighbors[mask]

    @cached_property
    def slot_edge_ids(self):
        """Edge id of every CSR slot (both directions map to the same id)."""
        upper = self.neighbors > self.rows
        ids = np.zeros(self.neighbors.size, dtype=np.int64)
        ids[upper] = np.arange(self.m)
        tri = sp.csr_matrix(
            (np.where(upper, ids + 1, 0), self.neighbors, self.offsets),
            shape=(self.n, self.n),
        )
        full = (tri + tri.T).tocsr()
        full.sort_indices()
        return np.asarray(full.data, dtype=np.int64) - 1

    @cached_property
    def adjacency(self):
        """Sparse 0/1 adjacency as a scipy CSR matrix."""
        data = np.ones(self.neighbors.size)
        return sp.csr_matrix((data, self.neighbors, self.offsets), shape=(self.n, self.n))

    def to_dense(self):
        return self.adjacency.toarray()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.neighbors, other.neighbors))

    __hash__ = None

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """A graph with one positive weight per undirected edge (indexed by edge id)."""

    base: Graph
    edge_weights: np.ndarray
    weighted_degrees: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.edge_weights, dtype=np.float64)
        if w.shape != (self.base.m,):
            raise DataError(f"expected {self.base.m} edge weights, got {w.shape}")
        object.__setattr__(self, "edge_weights", w)
        if self.weighted_degrees is None:
            u, v = self.base.edges
            n = self.base.n
            dw = np.bincount(u, weights=w, minlength=n) + np.bincount(v, weights=w, minlength=n)
            object.__setattr__(self, "weighted_degrees", dw)

    @property
    def n(self):
        return self.base.n

    @property
    def m(self):
        return self.base.m

    @cached_property
    def adjacency(self):
        g = self.base
        data = self.edge_weights[g.slot_edge_ids]
        return sp.csr_matrix((data, g.neighbors, g.offsets), shape=(g.n, g.n))

    def to_dense(self):
        return self.adjacency.toarray()


@dataclass
class LabelVector:
    labels: np.ndarray
    mask: np.ndarray  # split codes, see SPLITS

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.mask is None:
            self.mask = np.full(self.labels.size, SPLIT_CODES["none"], dtype=np.int8)
        self.mask = np.asarray(self.mask, dtype=np.int8)
        if self.mask.shape != self.labels.shape:
            raise DataError("labels and split mask differ in length")
        if self.labels.size and self.labels.min() < 0:
            raise DataError("negative class index")

    def __len__(self):
        return self.labels.size

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def split(self, name):
        return np.flatnonzero(self.mask == SPLIT_CODES[name])


@dataclass
class LoadReport:
    lines: int = 0
    edges_read: int = 0
    duplicates: int = 0
    self_loops: int = 0


# ---------------------------------------------------------------- edge lists

def read_edge_list(path, num_nodes=None):
    """Parse an edge list, returning ``(graph, LoadReport)``.

    Node ids must be dense: every id in ``[0, n)`` must appear in some edge
    unless ``num_nodes`` is given (then trailing/isolated ids are allowed).
    A ``# nodes=<n>`` comment written by :func:`save_edge_list` plays the same
    role as ``num_nodes``.
    """
    path = Path(path)
    report = LoadReport()
    us, vs = [], []
    declared = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            report.lines += 1
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("nodes="):
                    declared = int(body.split("=", 1)[1].split()[0])
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ParseError(path, line_no, f"expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, line_no, f"non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise ParseError(path, line_no, "negative node id")
            us.append(u)
            vs.append(v)
    if num_nodes is None:
        num_nodes = declared
    if not us:
        # an edgeless graph is only meaningful when the node count is stated
        if num_nodes is None:
            raise DataError(f"{path}: edge list is empty")
        return Graph.from_edges(num_nodes, [], []), report
    u = np.array(us, dtype=np.int64)
    v = np.array(vs, dtype=np.int64)
    report.edges_read = u.size
    report.self_loops = int(np.count_nonzero(u == v))

    n = int(max(u.max(), v.max())) + 1
    if num_nodes is not None:
        if num_nodes < n:
            raise DataError(f"{path}: node id {n - 1} exceeds declared node count {num_nodes}")
        n = num_nodes
    else:
        seen = np.zeros(n, dtype=bool)
        seen[u] = seen[v] = True
        if not seen.all():
            gap = int(np.flatnonzero(~seen)[0])
            raise DataError(f"{path}: node ids are not dense (id {gap} never appears)")

    g = Graph.from_edges(n, u, v)
    report.duplicates = int(report.edges_read - report.self_loops - g.m)
    return g, report


def load_edge_list(path, num_nodes=None):
    return read_edge_list(path, num_nodes)[0]


def save_edge_list(g, path):
    u, v = g.edges
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={g.n} edges={g.m}\n")
        for a, b in zip(u.tolist(), v.tolist()):
            fh.write(f"{a}\t{b}\n")


# ---------------------------------------------------------------- matrices

def save_matrix(path, values):
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise DataError("only 2-d matrices can be saved")
    with open(path, "wb") as fh:
        write_matrix(fh, values)


def write_matrix(fh, values):
    values = np.ascontiguousarray(values, dtype="<f4")
    rows, cols = values.shape
    fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
    fh.write(values.tobytes())


def read_matrix(fh, path="<stream>"):
    head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack(head)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    nbytes = rows * cols * 4
    payload = fh.read(nbytes)
    if len(payload) != nbytes:
        raise DataError(f"{path}: expected {nbytes} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float64)


def load_matrix(path):
    """Read a dense matrix from the binary container or from headerless CSV."""
    path = Path(path)
    with open(path, "rb") as fh:
        start = fh.read(4)
        fh.seek(0)
        if start == MAGIC:
            values = read_matrix(fh, path)
        else:
            try:
                values = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from None
    if not np.isfinite(values).all():
        raise DataError(f"{path}: non-finite value")
    return values


def load_attributes(path, num_nodes=None):
    X = load_matrix(path)
    if num_nodes is not None and X.shape[0] != num_nodes:
        raise DataError(f"{path}: {X.shape[0]} attribute rows for {num_nodes} nodes")
    return X


def load_labels(path, splits_path=None, num_nodes=None):
    path = Path(path)
    labels = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ParseError(path, line_no, f"non-integer label {line!r}") from None
    mask = None
    if splits_path is not None:
        mask = []
        with open(splits_path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                tag = raw.strip()
                if not tag or tag.startswith("#"):
                    continue
                if tag not in SPLIT_CODES:
                    raise ParseError(splits_path, line_no, f"unknown split {tag!r}")
                mask.append(SPLIT_CODES[tag])
        if len(mask) != len(labels):
            raise DataError(f"{splits_path}: {len(mask)} split tags for {len(labels)} labels")
    if num_nodes is not None and len(labels) != num_nodes:
        raise DataError(f"{path}: {len(labels)} labels for {num_nodes} nodes")
    return LabelVector(np.array(labels, dtype=np.int64), mask)


def save_labels(y, path, splits_path=None):
    Path(path).write_text("".join(f"{c}\n" for c in y.labels.tolist()), encoding="utf-8")
    if splits_path is not None:
        Path(splits_path).write_text(
            "".join(f"{SPLITS[c]}\n" for c in y.mask.tolist()), encoding="utf-8")


# ---------------------------------------------------------------- kernels

def _as_matrix(M, n):
    M = np.asarray(M, dtype=np.float64)
    vector = M.ndim == 1
    if vector:
        M = M[:, None]
    if M.shape[0] != n:
        raise DataError(f"operand has {M.shape[0]} rows, graph has {n} nodes")
    return M, vector


def _inverse(values, power):
    out = np.zeros_like(values, dtype=np.float64)
    nz = values > 0
    out[nz] = values[nz] ** -power
    return out


def transition_multiply(g, M):
    """``P @ M`` with ``P = D^-1 A``; rows of zero-degree nodes are zero."""
    M, vector = _as_matrix(M, g.n)
    out = _inverse(g.degrees.astype(np.float64), 1.0)[:, None] * (g.adjacency @ M)
    return out[:, 0] if vector else out


def norm_adj_multiply(g, M):
    """``D^-1/2 A D^-1/2 @ M``; weighted degrees are used for weighted graphs."""
    if hasattr(g, "to_weighted"):
        g = g.to_weighted()
    M, vector = _as_matrix(M, g.n)
    if isinstance(g, WeightedGraph):
        deg = g.weighted_degrees
    else:
        deg = g.degrees.astype(np.float64)
    s = _inverse(deg, 0.5)[:, None]
    out = s * (g.adjacency @ (s * M))
    return out[:, 0] if vector else out
