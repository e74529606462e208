"""Learned recursive space partition: 2-means on value-augmented points,
linear hinge-loss boundaries, and routing of points to leaves."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

PEGASOS_LAMBDA = 1e-3
PEGASOS_ITERS = 200
KMEANS_MAX_ITER = 100


class DegenerateCluster(ValueError):
    """k-means cannot produce two non-empty clusters."""


class FitFailure(ValueError):
    """The trained classifier has a zero weight vector."""


@dataclass(frozen=True)
class LinearBoundary:
    weights: np.ndarray
    bias: float
    positive_is_good: bool = True
    train_accuracy: float = float("nan")

    def margin(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) @ self.weights + self.bias

    def is_good(self, z: np.ndarray):
        """True on the good side; points exactly on the plane count as good."""
        m = self.margin(z)
        return m >= 0 if self.positive_is_good else m < 0


def kmeans2(points: np.ndarray, rng=None, max_iter: int = KMEANS_MAX_ITER):
    """Two-cluster Lloyd iteration with farthest-pair seeding.

    The last column of ``points`` is taken to be the value coordinate; the
    cluster with the higher mean value is labelled good (True).

    Returns ``(labels, (good_center, bad_center))``.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if len(P) < 2:
        raise DegenerateCluster("need at least two points")
    if np.all(P == P[0]):
        raise DegenerateCluster("all points identical")

    labels, centers = _lloyd2(np.ascontiguousarray(P), max_iter)
    if labels.all() or not labels.any():
        raise DegenerateCluster("empty cluster during Lloyd iteration")
    # labels mark membership of cluster 1
    if centers[1][-1] > centers[0][-1]:
        return labels, (centers[1], centers[0])
    return ~labels, (centers[0], centers[1])


@njit(cache=True)
def _sqdist_to(P, c):
    n, d = P.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            diff = P[i, j] - c[j]
            acc += diff * diff
        out[i] = acc
    return out


@njit(cache=True)
def _lloyd2(P, max_iter):
    n, d = P.shape
    # double sweep approximation of the farthest pair
    mean = np.zeros(d)
    for i in range(n):
        mean += P[i]
    mean /= n
    a = np.argmax(_sqdist_to(P, mean))
    b = np.argmax(_sqdist_to(P, P[a]))
    a = np.argmax(_sqdist_to(P, P[b]))
    centers = np.empty((2, d))
    centers[0] = P[a]
    centers[1] = P[b]
    labels = np.zeros(n, dtype=np.bool_)
    for it in range(max_iter):
        changed = False
        n1 = 0
        for i in range(n):
            d0 = 0.0
            d1 = 0.0
            for j in range(d):
                e0 = P[i, j] - centers[0, j]
                e1 = P[i, j] - centers[1, j]
                d0 += e0 * e0
                d1 += e1 * e1
            lab = d1 < d0
            if lab != labels[i] or it == 0:
                changed = True
            labels[i] = lab
            n1 += lab
        if not changed and it > 0:
            break
        if n1 == 0 or n1 == n:
            break
        centers[:] = 0.0
        for i in range(n):
            centers[1 if labels[i] else 0] += P[i]
        centers[0] /= n - n1
        centers[1] /= n1
    return labels, centers


@njit(cache=True, fastmath=True)
def _pegasos_batch(X, y, lam, iters):
    n, d = X.shape
    w = np.zeros(d)
    radius = 1.0 / np.sqrt(lam)
    g = np.zeros(d)
    for t in range(1, iters + 1):
        eta = 1.0 / (lam * t)
        g[:] = 0.0
        for i in range(n):
            m = 0.0
            for j in range(d):
                m += w[j] * X[i, j]
            if y[i] * m < 1.0:
                for j in range(d):
                    g[j] += y[i] * X[i, j]
        shrink = 1.0 - eta * lam
        norm2 = 0.0
        for j in range(d):
            w[j] = shrink * w[j] + eta / n * g[j]
            norm2 += w[j] * w[j]
        norm = np.sqrt(norm2)
        if norm > radius:
            for j in range(d):
                w[j] *= radius / norm
    return w


@njit(cache=True)
def _fit_kernel(X, y, lam, iters):
    # standardize, append a bias column, train, fold the scaling back
    n, d = X.shape
    mu = np.zeros(d)
    sd = np.zeros(d)
    for i in range(n):
        mu += X[i]
    mu /= n
    for i in range(n):
        for j in range(d):
            e = X[i, j] - mu[j]
            sd[j] += e * e
    for j in range(d):
        sd[j] = np.sqrt(sd[j] / n)
        if sd[j] < 1e-12:
            sd[j] = 1.0
    Xs = np.empty((n, d + 1))
    for i in range(n):
        for j in range(d):
            Xs[i, j] = (X[i, j] - mu[j]) / sd[j]
        Xs[i, d] = 1.0
    w = _pegasos_batch(Xs, y, lam, iters)
    ok = False
    for j in range(d):
        if abs(w[j]) > 1e-12:
            ok = True
    w_feat = w[:d] / sd
    bias = w[d] - np.dot(w_feat, mu)
    return w_feat, bias, ok


@njit(cache=True)
def _augment(Z, v):
    n, d = Z.shape
    P = np.empty((n, d + 1))
    for j in range(d):
        m = 0.0
        for i in range(n):
            m += Z[i, j]
        m /= n
        s = 0.0
        for i in range(n):
            s += (Z[i, j] - m) ** 2
        s = np.sqrt(s / n)
        if s < 1e-12:
            s = 1.0
        for i in range(n):
            P[i, j] = (Z[i, j] - m) / s
    lo = v.min()
    span = v.max() - lo
    for i in range(n):
        P[i, d] = (v[i] - lo) / span if span > 0 else 0.0
    return P


@njit(cache=True)
def _split_kernel(Z, v, lam, iters, max_iter):
    """Status 0 = split, 1 = degenerate clustering, 2 = fit failure, 3 = empty child."""
    n, d = Z.shape
    side = np.zeros(n, dtype=np.bool_)
    w = np.zeros(d)
    P = _augment(Z, v)
    same = True
    for i in range(1, n):
        for j in range(d + 1):
            if P[i, j] != P[0, j]:
                same = False
    if n < 2 or same:
        return 1, w, 0.0, side, 0.0
    labels, centers = _lloyd2(P, max_iter)
    n1 = labels.sum()
    if n1 == 0 or n1 == n:
        return 1, w, 0.0, side, 0.0
    good_is_one = centers[1, d] > centers[0, d]
    y = np.empty(n)
    for i in range(n):
        y[i] = 1.0 if labels[i] == good_is_one else -1.0
    w, bias, ok = _fit_kernel(Z, y, lam, iters)
    if not ok:
        return 2, w, bias, side, 0.0
    ng = 0
    hits = 0
    for i in range(n):
        side[i] = np.dot(Z[i], w) + bias >= 0.0
        ng += side[i]
        hits += side[i] == (y[i] > 0)
    acc = hits / n
    if ng == 0 or ng == n:
        return 3, w, bias, side, acc
    return 0, w, bias, side, acc


def fit_boundary(good, bad, rng=None, lam: float = PEGASOS_LAMBDA,
                 iters: int = PEGASOS_ITERS) -> LinearBoundary:
    """Linear soft-margin classifier separating ``good`` from ``bad``.

    Full-batch Pegasos on standardized features with a constant column for
    the bias; the scaling is folded back so the boundary acts on raw inputs.
    """
    G = np.asarray(good, dtype=float)
    B = np.asarray(bad, dtype=float)
    # 1-D input is a list of scalar points
    G = G.reshape(-1, 1) if G.ndim == 1 else G
    B = B.reshape(-1, 1) if B.ndim == 1 else B
    if len(G) == 0 or len(B) == 0:
        raise ValueError("both classes must be non-empty")
    X = np.ascontiguousarray(np.vstack([G, B]))
    y = np.concatenate([np.ones(len(G)), -np.ones(len(B))])
    w, bias, ok = _fit_kernel(X, y, lam, iters)
    if not ok:
        raise FitFailure("classifier collapsed to a zero weight vector")
    acc = float(np.mean((X @ w + bias >= 0) == (y > 0)))
    return LinearBoundary(w, float(bias), True, acc)


@dataclass
class RegionNode:
    id: int
    depth: int
    members: list[int]
    parent: Optional[int] = None
    boundary: Optional[LinearBoundary] = None
    children: Optional[tuple[int, int]] = None  # (good, bad)
    n: int = 0
    score_max: float = -np.inf
    score_sum: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def score_mean(self) -> float:
        return self.score_sum / self.n if self.n else -np.inf


@dataclass
class PartitionTree:
    nodes: list[RegionNode]
    root_id: int = 0
    features: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    @property
    def root(self) -> RegionNode:
        return self.nodes[self.root_id]

    def leaves(self) -> list[RegionNode]:
        return [nd for nd in self.nodes if nd.is_leaf]

    def internal(self) -> list[RegionNode]:
        return [nd for nd in self.nodes if not nd.is_leaf]

    def path(self, z: np.ndarray) -> list[int]:
        nd = self.root
        out = [nd.id]
        while not nd.is_leaf:
            good, bad = nd.children
            nd = self.nodes[good if nd.boundary.is_good(z) else bad]
            out.append(nd.id)
        return out

    def route(self, z: np.ndarray) -> int:
        return self.path(z)[-1]

    def add_sample(self, index: int, z: np.ndarray, value: float) -> int:
        """Route a new sample and update statistics along its path."""
        path = self.path(z)
        for nid in path:
            nd = self.nodes[nid]
            nd.members.append(index)
            nd.n += 1
            nd.score_max = max(nd.score_max, value)
            nd.score_sum += value
        return path[-1]

    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes)

    def to_dict(self, include_members: bool = True) -> dict:
        nodes = []
        for nd in self.nodes:
            row = {
                "id": nd.id,
                "depth": nd.depth,
                "parent": nd.parent,
                "n": nd.n,
                "score_max": nd.score_max,
                "score_mean": nd.score_mean,
                "children": list(nd.children) if nd.children else None,
                "weights": nd.boundary.weights.tolist() if nd.boundary else None,
                "bias": nd.boundary.bias if nd.boundary else None,
            }
            if include_members:
                row["members"] = list(nd.members)
            nodes.append(row)
        return {"root_id": self.root_id, "nodes": nodes}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw))

    @classmethod
    def from_dict(cls, data: dict, features=None, values=None) -> "PartitionTree":
        nodes = []
        for row in data["nodes"]:
            b = None
            if row["weights"] is not None:
                b = LinearBoundary(np.asarray(row["weights"], dtype=float), float(row["bias"]))
            nodes.append(RegionNode(
                id=row["id"], depth=row["depth"], members=list(row.get("members", [])),
                parent=row["parent"], boundary=b,
                children=tuple(row["children"]) if row["children"] else None,
                n=row["n"], score_max=row["score_max"],
                score_sum=row["score_mean"] * row["n"],
            ))
        return cls(nodes, data["root_id"], features, values)


def augment(Z: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Standardize coordinates per dimension and min-max scale values to [0, 1]."""
    return _augment(np.ascontiguousarray(Z, dtype=float),
                    np.ascontiguousarray(values, dtype=float))


def _make_node(nodes, members, values, depth, parent):
    v = values[members]
    nd = RegionNode(id=len(nodes), depth=depth, members=list(members), parent=parent,
                    n=len(members), score_max=float(v.max()), score_sum=float(v.sum()))
    nodes.append(nd)
    return nd


def split_node(Z: np.ndarray, values: np.ndarray, members: np.ndarray):
    """Try to split ``members``; returns (boundary, good_idx, bad_idx) or None.

    k-means runs on value-augmented features, the classifier on ``Z`` alone,
    and children take members by classifier decision.
    """
    Zm = np.ascontiguousarray(Z[members])
    status, w, bias, side, acc = _split_kernel(Zm, values[members], PEGASOS_LAMBDA,
                                          PEGASOS_ITERS, KMEANS_MAX_ITER)
    if status != 0:
        return None
    boundary = LinearBoundary(w, float(bias), True, float(acc))
    return boundary, members[side], members[~side]


def build_partition_arrays(Z: np.ndarray, values: np.ndarray, n_thres: int,
                           rng=None) -> PartitionTree:
    """Breadth-first recursive splitting of samples with partition features ``Z``."""
    Z = np.asarray(Z, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(Z) < 1:
        raise ValueError("need at least one sample")
    nodes: list[RegionNode] = []
    root = _make_node(nodes, np.arange(len(Z)), values, 0, None)
    queue = deque([root])
    while queue:
        nd = queue.popleft()
        if nd.n < n_thres:
            continue
        res = split_node(Z, values, np.asarray(nd.members))
        if res is None:
            continue
        boundary, good, bad = res
        g = _make_node(nodes, good, values, nd.depth + 1, nd.id)
        b = _make_node(nodes, bad, values, nd.depth + 1, nd.id)
        nd.boundary = boundary
        nd.children = (g.id, b.id)
        queue.extend([g, b])
    return PartitionTree(nodes, root.id, Z, values)


def build_partition(samples, encoder=None, n_thres: int = 10, rng=None) -> PartitionTree:
    """Build the partition tree for ``samples`` in the encoder's partition space."""
    X = np.array([s.x for s in samples])
    values = np.array([s.value for s in samples])
    Z = X if encoder is None else encoder.encode_many(X)
    return build_partition_arrays(Z, values, n_thres, rng)


def route(tree: PartitionTree, z: np.ndarray) -> int:
    return tree.route(z)
