"""Sampling codecs (encode/decode) and one-way partition encoders."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import rankdata

RANK_WEIGHT_BETA = 2.0


def rank_weights(values: np.ndarray, beta: float = RANK_WEIGHT_BETA) -> np.ndarray:
    """Weights proportional to exp(beta * rank percentile), summing to one.

    Monotone non-decreasing in value and strictly positive; ties share
    the average rank.
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 1:
        return np.ones(1)
    pct = (rankdata(values) - 1) / (len(values) - 1)
    w = np.exp(beta * pct)
    return w / w.sum()


@dataclass
class LatentCodec:
    """Affine codec x -> basis^T (x - mean) with decode mean + basis z.

    ``identity`` leaves points untouched. ``trainable`` codecs are re-fitted
    by the search loop on its re-partition schedule.
    """

    kind: str
    mean: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None  # (ambient, latent)
    latent_dim: int = 0
    trainable: bool = False
    weight_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def encode(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(x, dtype=float)
        return (np.asarray(x) - self.mean) @ self.basis

    def decode(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(z, dtype=float)
        return self.mean + np.asarray(z) @ self.basis.T

    encode_many = encode
    decode_many = decode

    def refit(self, X: np.ndarray, values: np.ndarray) -> "LatentCodec":
        if not self.trainable:
            return self
        return fit_weighted_pca_arrays(X, values, self.latent_dim, self.weight_fn)

    @classmethod
    def identity(cls, dim: int) -> "LatentCodec":
        return cls("identity", latent_dim=dim)

    @classmethod
    def random_projection(cls, dim: int, latent_dim: int, rng: np.random.Generator,
                          center: Optional[np.ndarray] = None) -> "LatentCodec":
        """Fixed orthonormal projection; decode is its pseudo-inverse."""
        if latent_dim > dim:
            raise ValueError("latent_dim exceeds ambient dimension")
        q, _ = np.linalg.qr(rng.standard_normal((dim, latent_dim)))
        mean = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        return cls("random_projection", mean, q, latent_dim)


def fit_weighted_pca_arrays(X: np.ndarray, values: np.ndarray, latent_dim: int,
                            weight_fn=None) -> LatentCodec:
    X = np.asarray(X, dtype=float)
    n, dim = X.shape
    if latent_dim > dim:
        raise ValueError(f"latent_dim {latent_dim} exceeds ambient dimension {dim}")
    if n < latent_dim + 1:
        raise ValueError("need at least latent_dim + 1 samples")
    w = rank_weights(values) if weight_fn is None else np.asarray(weight_fn(values), float)
    w = w / w.sum()
    mean = w @ X
    Xc = (X - mean) * np.sqrt(w)[:, None]
    # right singular vectors of the weighted, centred data are the
    # eigenvectors of the weighted covariance
    _, sv, vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * 1e-10)) if len(sv) and sv[0] > 0 else 0
    basis = np.zeros((dim, latent_dim))
    k = min(rank, latent_dim)
    basis[:, :k] = vt[:k].T
    return LatentCodec("weighted_pca", mean, basis, latent_dim, True, weight_fn)


def fit_weighted_pca(samples, latent_dim: int, weight_fn=None) -> LatentCodec:
    """Affine codec minimizing the weighted reconstruction error of ``samples``."""
    X = np.array([s.x for s in samples])
    values = np.array([s.value for s in samples])
    return fit_weighted_pca_arrays(X, values, latent_dim, weight_fn)


def snapshot_encode(states, stride: int) -> np.ndarray:
    """Concatenate every ``stride``-th state (1-based) and the final state."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    states = np.asarray(states, dtype=float)
    horizon = len(states)
    idx = list(range(stride - 1, horizon, stride))
    if not idx or idx[-1] != horizon - 1:
        idx.append(horizon - 1)
    return states[idx].reshape(-1)


@dataclass
class PartitionEncoder:
    """One-way map from search space to partition space (no decoder)."""

    kind: str
    stride: int = 1
    states_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    projection: Optional[np.ndarray] = None

    def encode(self, x: np.ndarray) -> np.ndarray:
        return self.encode_many(np.asarray(x)[None, :])[0]

    def encode_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "identity":
            return X
        if self.kind == "random_projection":
            return X @ self.projection
        if self.kind == "state_snapshots":
            S = self.states_fn(X)  # (batch, horizon, state_dim)
            horizon = S.shape[1]
            idx = list(range(self.stride - 1, horizon, self.stride))
            if not idx or idx[-1] != horizon - 1:
                idx.append(horizon - 1)
            return S[:, idx, :].reshape(len(X), -1)
        raise ValueError(f"unknown encoder kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "PartitionEncoder":
        return cls("identity")

    @classmethod
    def random_projection(cls, dim: int, out_dim: int, rng: np.random.Generator):
        proj = rng.standard_normal((dim, out_dim)) / np.sqrt(out_dim)
        return cls("random_projection", projection=proj)

    @classmethod
    def snapshots(cls, states_fn, stride: int) -> "PartitionEncoder":
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return cls("state_snapshots", stride=stride, states_fn=states_fn)
