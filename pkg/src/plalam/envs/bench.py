"""Analytic multimodal test functions, negated so that larger is better."""

from __future__ import annotations

import numpy as np

BENCH_BOUNDS = {"deceptive_twin": 5.0, "rastrigin": 5.12, "ackley": 32.768, "flat": 1.0}


def twin_attractors(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Near attractor ``a`` and far rewarding attractor ``b``."""
    a = np.zeros(dim)
    b = np.zeros(dim)
    a[0] = 1.5
    b[0] = -3.5
    return a, b


def deceptive_twin(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    a, b = twin_attractors(X.shape[1])
    da = np.linalg.norm(X - a, axis=1)
    db = np.linalg.norm(X - b, axis=1)
    return -np.minimum(da, db) + (db < 0.5)


def rastrigin(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return -(10.0 * X.shape[1] + np.sum(X**2 - 10.0 * np.cos(2 * np.pi * X), axis=1))


def ackley(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    r = np.sqrt(np.mean(X**2, axis=1))
    c = np.mean(np.cos(2 * np.pi * X), axis=1)
    return -(-20.0 * np.exp(-0.2 * r) - np.exp(c) + 20.0 + np.e)


def flat(X: np.ndarray) -> np.ndarray:
    """Constant zero reward; a degenerate case for diagnostics."""
    return np.zeros(len(X))


BENCHES = {"deceptive_twin": deceptive_twin, "rastrigin": rastrigin, "ackley": ackley,
           "flat": flat}


def multimodal_bench(name: str, x) -> float:
    if name not in BENCHES:
        raise ValueError(f"unknown benchmark {name!r}")
    return float(BENCHES[name](np.asarray(x, dtype=float))[0])
