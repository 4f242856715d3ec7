"""Dense brute-force references for the bounds the sketches and sparsifier rely on.

Everything here is O(n^3) or worse and refuses graphs above ``MAX_NODES``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, VerificationError
from .graph import Graph, WeightedGraph
from .sketch import count_sketch_arrays

MAX_NODES = 500
SLACK = 1e-9


def _check_size(n):
    if n > MAX_NODES:
        raise DataError(f"dense oracles are capped at {MAX_NODES} nodes (got {n})")


# ---------------------------------------------------------------- eigensolver

def _round_robin(n):
    """Disjoint index pairs per round covering every pair once (circle method)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(M, tol=1e-10, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are scheduled in round-robin order so that each round applies
    ``n/2`` disjoint rotations at once. Returns ``(eigenvalues, eigenvectors)``
    sorted by descending eigenvalue.
    """
    A = np.array(M, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DataError("matrix must be square")
    scale = max(1.0, np.linalg.norm(A))
    if np.abs(A - A.T).max(initial=0.0) > 1e-10 * scale:
        raise DataError("matrix is not symmetric")
    A = (A + A.T) / 2
    V = np.eye(n)
    rounds = _round_robin(n)
    for _ in range(max_sweeps + 1):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * scale:
            break
        for P, Q in rounds:
            apq = A[P, Q]
            active = apq != 0
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            diff = A[Q, Q] - A[P, P]
            # t = tan of the rotation angle, the smaller root of t^2 + 2 theta t - 1 = 0
            # with theta = diff / (2 apq); written to avoid overflow for tiny apq
            t = 2 * apq / (np.abs(diff) + np.hypot(diff, 2 * apq))
            t = np.where(diff >= 0, t, -t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            cc, sc = c[:, None], s[:, None]
            Ap, Aq = A[P, :], A[Q, :]
            A[P, :] = cc * Ap - sc * Aq
            A[Q, :] = sc * Ap + cc * Aq
            Ap, Aq = A[:, P], A[:, Q]
            A[:, P] = Ap * c - Aq * s
            A[:, Q] = Ap * s + Aq * c
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            Vp, Vq = V[:, P], V[:, Q]
            V[:, P] = Vp * c - Vq * s
            V[:, Q] = Vp * s + Vq * c
    else:
        raise VerificationError(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]


@dataclass
class SpectralSummary:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray

    @property
    def lambda2(self):
        return float(self.eigenvalues[1]) if self.eigenvalues.size > 1 else float("nan")

    @property
    def sigma(self):
        """``max(|sigma_2|, |sigma_n|)``: the slowest non-stationary mode."""
        if self.eigenvalues.size < 2:
            return 0.0
        return float(max(abs(self.eigenvalues[1]), abs(self.eigenvalues[-1])))

    @property
    def spectral_gap(self):
        return 1.0 - self.sigma


def dense_eigs(M):
    M = np.asarray(M, dtype=np.float64)
    _check_size(M.shape[0])
    vals, vecs = jacobi_eigh(M)
    return SpectralSummary(vals, vecs)


# ---------------------------------------------------------------- dense views

def dense_weights(g):
    """Dense (weighted) adjacency of a Graph, WeightedGraph or SparsifiedGraph."""
    if hasattr(g, "to_weighted"):
        g = g.to_weighted()
    _check_size(g.n)
    return g.to_dense()


def _inv_pow(deg, power):
    out = np.zeros_like(deg, dtype=np.float64)
    nz = deg > 0
    out[nz] = deg[nz] ** -power
    return out


def dense_transition(g):
    W = dense_weights(g)
    return _inv_pow(W.sum(axis=1), 1.0)[:, None] * W


def dense_normalized_adjacency(g):
    W = dense_weights(g)
    s = _inv_pow(W.sum(axis=1), 0.5)
    return s[:, None] * W * s[None, :]


def two_coloring(g):
    """BFS 2-colouring; returns ``(connected, bipartite)``."""
    base = g.base if isinstance(g, WeightedGraph) else g
    color = np.full(base.n, -1, dtype=np.int8)
    bipartite = True
    components = 0
    for start in range(base.n):
        if color[start] >= 0:
            continue
        components += 1
        color[start] = 0
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in base.neighbors_of(i).tolist():
                if color[j] < 0:
                    color[j] = 1 - color[i]
                    queue.append(j)
                elif color[j] == color[i]:
                    bipartite = False
    return components == 1, bipartite


def is_connected(g):
    return two_coloring(g)[0]


def is_bipartite(g):
    return two_coloring(g)[1]


# ---------------------------------------------------------------- effective resistance

def _as_weighted(g):
    if isinstance(g, Graph):
        return WeightedGraph(g, np.ones(g.m))
    if hasattr(g, "to_weighted"):
        return g.to_weighted()
    return g


def laplacian_pinv(g):
    """``L^+`` of a connected (weighted) graph via its eigen-decomposition."""
    wg = _as_weighted(g)
    _check_size(wg.n)
    if not is_connected(wg):
        raise DataError("effective resistance oracle needs a connected graph")
    W = wg.to_dense()
    L = np.diag(W.sum(axis=1)) - W
    vals, vecs = jacobi_eigh(L)
    keep = vals > 1e-9 * max(vals[0], 1e-300)
    U = vecs[:, keep]
    return (U / vals[keep]) @ U.T


def effective_resistances(g, pinv=None):
    """Exact ER of every edge (indexed by edge id)."""
    wg = _as_weighted(g)
    Lp = laplacian_pinv(wg) if pinv is None else pinv
    u, v = wg.base.edges
    return Lp[u, u] + Lp[v, v] - 2 * Lp[u, v]


def exact_effective_resistance(g, i, j):
    Lp = laplacian_pinv(g)
    return float(Lp[i, i] + Lp[j, j] - 2 * Lp[i, j])


@dataclass
class ERBoundReport:
    lower: np.ndarray
    exact: np.ndarray
    upper: np.ndarray
    lambda2: float
    asserted: bool
    note: str = ""

    @property
    def violations(self):
        low = np.count_nonzero(self.exact < self.lower - SLACK)
        high = np.count_nonzero(self.exact > self.upper + SLACK)
        return int(low + high)

    @property
    def passed(self):
        return not self.asserted or self.violations == 0

    @property
    def tightness(self):
        """``exact / upper`` per edge (1 means the upper bound is attained)."""
        return self.exact / self.upper


def check_er_bounds(g):
    """Sandwich every exact ER between the degree-based lower and spectral upper bounds."""
    wg = _as_weighted(g)
    _check_size(wg.n)
    connected, bipartite = two_coloring(wg)
    if not connected:
        raise DataError("ER bound check needs a connected graph")
    u, v = wg.base.edges
    proxy = 1.0 / wg.weighted_degrees[u] + 1.0 / wg.weighted_degrees[v]
    exact = effective_resistances(wg)
    lam2 = dense_eigs(dense_normalized_adjacency(wg)).lambda2
    gap = 1.0 - lam2
    asserted, note = True, ""
    if bipartite:
        asserted, note = False, "bipartite graph: reported only"
    if gap < 1e-6:
        asserted, note = False, f"1 - lambda2 = {gap:.3g} < 1e-6: reported only"
    upper = proxy / gap if gap > 0 else np.full_like(proxy, np.inf)
    return ERBoundReport(0.5 * proxy, exact, upper, lam2, asserted, note)


# ---------------------------------------------------------------- mixing

@dataclass
class MixingReport:
    sigma: float
    steps: list = field(default_factory=list)  # dicts per t

    @property
    def violations(self):
        return sum(s["violations"] for s in self.steps if s["t"] >= 1)

    @property
    def passed(self):
        return self.violations == 0


def check_mixing_bound(g, t_max):
    """Compare ``P^t`` and ``A~^t`` against their stationary limits for t = 0..t_max."""
    if isinstance(g, WeightedGraph):
        raise DataError("mixing bound is stated for unweighted graphs")
    _check_size(g.n)
    connected, bipartite = two_coloring(g)
    if not connected or bipartite:
        raise DataError("mixing bound needs a connected, non-bipartite graph")
    deg = g.degrees.astype(np.float64)
    two_m = deg.sum()
    P = dense_transition(g)
    Q = dense_normalized_adjacency(g)
    sigma = dense_eigs(Q).sigma
    p_limit = np.broadcast_to(deg[None, :] / two_m, P.shape)
    q_limit = np.sqrt(np.outer(deg, deg)) / two_m
    ratio = np.sqrt(deg[None, :] / deg[:, None])

    report = MixingReport(sigma)
    Pt = np.eye(g.n)
    Qt = np.eye(g.n)
    for t in range(t_max + 1):
        if t:
            Pt = Pt @ P
            Qt = Qt @ Q
        env = sigma ** t
        dev_p = np.abs(Pt - p_limit)
        dev_q = np.abs(Qt - q_limit)
        bad = np.count_nonzero(dev_p > ratio * env + SLACK) + np.count_nonzero(dev_q > env + SLACK)
        report.steps.append({
            "t": t,
            "envelope": env,
            "max_dev_P": float(dev_p.max()),
            "max_dev_Anorm": float(dev_q.max()),
            "violations": int(bad),
        })
    return report


# ---------------------------------------------------------------- RWR

def exact_rwr(g, alpha, T, sources=None):
    """Dense ``sum_{t=0}^{T} (1-alpha) alpha^t P^t`` (columns restricted to ``sources``)."""
    P = dense_transition(g)
    term = (1 - alpha) * np.eye(P.shape[0])
    total = term.copy()
    for _ in range(T):
        term = alpha * (P @ term)
        total += term
    return total if sources is None else total[:, sources]


# ---------------------------------------------------------------- count-sketch moments

@dataclass
class MomentReport:
    exact: np.ndarray      # A w
    mean_err: np.ndarray   # per row
    var: np.ndarray        # per row, sample variance of the estimator
    var_bound: np.ndarray  # 2 d(v_i) ||w||^2 / k
    stderr: np.ndarray
    trials: int

    def unbiased(self, z=3.0):
        return np.abs(self.mean_err) <= z * self.stderr + 1e-12

    def variance_ok(self, factor=1.2):
        return self.var <= factor * self.var_bound + 1e-12


def count_sketch_moments(g, w, k, trials, seed=0, injective=False):
    """Monte-Carlo moments of ``(A_i R^T)(R w)`` over ``trials`` independent sketches."""
    if trials < 1000:
        raise DataError("moment estimates need at least 1000 trials")
    _check_size(g.n)
    w = np.asarray(w, dtype=np.float64)
    A = g.to_dense()
    n = g.n
    seeds = np.uint64(seed) + np.arange(trials, dtype=np.uint64)
    h, s = count_sketch_arrays(n, k, seeds)
    if injective:
        if k < n:
            raise DataError("injective regime needs k >= n")
        h = np.argsort(np.random.default_rng(seed).random((trials, k)), axis=1)[:, :n]
    flat = (np.arange(trials)[:, None] * k + h).ravel()
    Rw = np.bincount(flat, weights=(s * w).ravel(), minlength=trials * k).reshape(trials, k)
    G = s * np.take_along_axis(Rw, h, axis=1)
    est = G @ A.T
    exact = A @ w
    err = est - exact
    var = err.var(axis=0, ddof=1)
    return MomentReport(
        exact=exact,
        mean_err=err.mean(axis=0),
        var=var,
        var_bound=2.0 * g.degrees * (w @ w) / k,
        stderr=np.sqrt(var / trials),
        trials=trials,
    )


# ---------------------------------------------------------------- feature-space residual

@dataclass
class ResidualReport:
    res_x: float
    res_xa: float

    @property
    def passed(self):
        return self.res_xa <= self.res_x + SLACK


def _ls_residual(F, C, ridge):
    G = F.T @ F + ridge * np.eye(F.shape[1])
    W = np.linalg.solve(G, F.T @ C)
    return float(np.linalg.norm(F @ W - C))


def residual_comparison(X, A, C, ridge=1e-10):
    """Best linear-fit residual of ``C`` from ``X`` alone and from ``[X | A]``."""
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    _check_size(X.shape[0])
    if C.ndim == 1:
        C = C[:, None]
    return ResidualReport(_ls_residual(X, C, ridge), _ls_residual(np.hstack([X, A]), C, ridge))
