"""Feature expansion: structure/attribute embeddings and task-aware pre-training."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, TrainingError
from .graph import read_matrix, write_matrix


@dataclass
class ExpanderParams:
    W_topo: np.ndarray
    W_attr: np.ndarray
    W_cls: np.ndarray
    b_cls: np.ndarray
    gamma: float

    @property
    def h(self):
        return self.W_topo.shape[1]

    def copy(self):
        return ExpanderParams(self.W_topo.copy(), self.W_attr.copy(),
                              self.W_cls.copy(), self.b_cls.copy(), self.gamma)

    def arrays(self):
        return {"W_topo": self.W_topo, "W_attr": self.W_attr,
                "W_cls": self.W_cls, "b_cls": self.b_cls[None, :]}


@dataclass
class InitialFeatures:
    H0: np.ndarray
    gamma: float
    loss_trace: list = field(default_factory=list)


@dataclass
class PretrainConfig:
    h: int = 128
    gamma: float = 0.5
    n_p: int = 128
    lr: float = 0.05
    seed: int = 0


def relu_affine(M, W):
    M = np.asarray(M, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if M.shape[1] != W.shape[0]:
        raise DataError(f"cannot multiply {M.shape} by {W.shape}")
    return np.maximum(M @ W, 0.0)


def combine(H_attr, H_topo, gamma):
    if np.shape(H_attr) != np.shape(H_topo):
        raise DataError(f"shape mismatch {np.shape(H_attr)} vs {np.shape(H_topo)}")
    if not 0.0 <= gamma <= 1.0:
        raise DataError(f"gamma={gamma} outside [0, 1]")
    return (1.0 - gamma) * np.asarray(H_attr) + gamma * np.asarray(H_topo)


def standardize_columns(X):
    """Zero-mean, unit-variance columns; constant columns become zero."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(k, d, h, num_classes, gamma, seed):
    rng = np.random.default_rng(seed)
    return ExpanderParams(
        W_topo=glorot(rng, k, h),
        W_attr=glorot(rng, d, h),
        W_cls=glorot(rng, h, num_classes),
        b_cls=np.zeros(num_classes),
        gamma=float(gamma),
    )


def softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _sketch_values(A_prime):
    return np.asarray(getattr(A_prime, "values", A_prime), dtype=np.float64)


def forward_initial_features(A_prime, X, params):
    A = _sketch_values(A_prime)
    X = np.asarray(X, dtype=np.float64)
    if A.shape[0] != X.shape[0]:
        raise DataError(f"sketch has {A.shape[0]} rows, attributes have {X.shape[0]}")
    H_topo = relu_affine(A, params.W_topo)
    H_attr = relu_affine(X, params.W_attr)
    return InitialFeatures(combine(H_attr, H_topo, params.gamma), params.gamma)


def loss_and_grads(A, X, labels, params):
    """Mean cross-entropy of ``softmax(H0 W + b)`` over the given rows, with gradients.

    ``A``, ``X`` and ``labels`` must already be restricted to the training rows.
    """
    g = params.gamma
    Zt = A @ params.W_topo
    Za = X @ params.W_attr
    H = (1 - g) * np.maximum(Za, 0) + g * np.maximum(Zt, 0)
    P = softmax(H @ params.W_cls + params.b_cls)
    rows = np.arange(labels.size)
    loss = -np.mean(np.log(np.maximum(P[rows, labels], 1e-300)))

    dlogits = P
    dlogits[rows, labels] -= 1.0
    dlogits /= labels.size
    dH = dlogits @ params.W_cls.T
    grads = ExpanderParams(
        W_topo=A.T @ (g * dH * (Zt > 0)),
        W_attr=X.T @ ((1 - g) * dH * (Za > 0)),
        W_cls=H.T @ dlogits,
        b_cls=dlogits.sum(axis=0),
        gamma=g,
    )
    return loss, grads


def pretrain(A_prime, X, y, cfg=None):
    """Full-batch gradient descent on the train split; returns ``(params, features)``."""
    cfg = cfg or PretrainConfig()
    A = _sketch_values(A_prime)
    X = np.asarray(X, dtype=np.float64)
    if A.shape[0] != X.shape[0] or len(y) != X.shape[0]:
        raise DataError("sketch, attributes and labels disagree on node count")
    train = y.split("train")
    if train.size == 0:
        raise DataError("pre-training needs at least one train-split node")
    num_classes = y.num_classes
    params = init_params(A.shape[1], X.shape[1], cfg.h, num_classes, cfg.gamma, cfg.seed)

    A_tr, X_tr, y_tr = A[train], X[train], y.labels[train]
    trace = []
    for epoch in range(cfg.n_p):
        loss, grads = loss_and_grads(A_tr, X_tr, y_tr, params)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite pre-training loss at epoch {epoch} (lr={cfg.lr})")
        trace.append(float(loss))
        params.W_topo -= cfg.lr * grads.W_topo
        params.W_attr -= cfg.lr * grads.W_attr
        params.W_cls -= cfg.lr * grads.W_cls
        params.b_cls -= cfg.lr * grads.b_cls

    feats = forward_initial_features(A, X, params)
    feats.loss_trace = trace
    return params, feats


def predict(params, A_prime, X):
    H0 = forward_initial_features(A_prime, X, params).H0
    return np.argmax(H0 @ params.W_cls + params.b_cls, axis=1)


def train_softmax(Z, labels, num_classes, epochs, lr, seed=0):
    """Plain softmax regression by full-batch gradient descent; returns ``(W, b, trace)``."""
    rng = np.random.default_rng(seed)
    W = glorot(rng, Z.shape[1], num_classes)
    b = np.zeros(num_classes)
    rows = np.arange(labels.size)
    trace = []
    for epoch in range(epochs):
        P = softmax(Z @ W + b)
        loss = -np.mean(np.log(np.maximum(P[rows, labels], 1e-300)))
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch} (lr={lr})")
        trace.append(float(loss))
        P[rows, labels] -= 1.0
        P /= labels.size
        W -= lr * (Z.T @ P)
        b -= lr * P.sum(axis=0)
    return W, b, trace


def save_params(params, path):
    """Concatenated matrix containers plus a JSON manifest at ``<path>.manifest``."""
    path = Path(path)
    entries = []
    with open(path, "wb") as fh:
        for name, arr in params.arrays().items():
            entries.append({"name": name, "offset": fh.tell(),
                            "rows": int(arr.shape[0]), "cols": int(arr.shape[1])})
            write_matrix(fh, arr)
    manifest = {"gamma": params.gamma, "h": params.h, "entries": entries}
    path.with_name(path.name + ".manifest").write_text(json.dumps(manifest, indent=2) + "\n",
                                                       encoding="utf-8")


def load_params(path):
    path = Path(path)
    manifest = json.loads(path.with_name(path.name + ".manifest").read_text(encoding="utf-8"))
    arrays = {}
    with open(path, "rb") as fh:
        for entry in manifest["entries"]:
            fh.seek(entry["offset"])
            arr = read_matrix(fh, path)
            if arr.shape != (entry["rows"], entry["cols"]):
                raise DataError(f"{path}: entry {entry['name']} has shape {arr.shape}")
            arrays[entry["name"]] = arr
    missing = {"W_topo", "W_attr", "W_cls", "b_cls"} - arrays.keys()
    if missing:
        raise DataError(f"{path}: manifest lacks {sorted(missing)}")
    return ExpanderParams(arrays["W_topo"], arrays["W_attr"], arrays["W_cls"],
                          arrays["b_cls"][0], float(manifest["gamma"]))
