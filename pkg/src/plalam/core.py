"""Domain types, seeded randomness and the budgeted objective oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

METHODS = (
    "plalam",
    "plalam_mean",
    "plalam_notree",
    "plalam_noucb",
    "cem",
    "cmaes",
    "random_shooting",
)


class BudgetExhausted(RuntimeError):
    """Raised when an oracle is asked for more evaluations than its budget."""


class NonFiniteObjective(ValueError):
    """Raised when an objective returns NaN or an infinite value."""


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    value: float
    eval_index: int


@dataclass(frozen=True)
class SearchBudget:
    total_queries: int
    n_init: int = 50
    n_par: int = 50
    n_thres: int = 10
    cp: float = 2.0

    def __post_init__(self):
        if not self.total_queries >= self.n_init >= 1:
            raise ValueError("need total_queries >= n_init >= 1")
        if self.n_par < 1:
            raise ValueError("n_par must be >= 1")
        if self.n_thres < 2:
            raise ValueError("n_thres must be >= 2")
        if self.cp < 0:
            raise ValueError("cp must be non-negative")


def seeded_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 stream for ``seed``.

    PCG64 output is specified bit-for-bit by numpy, so results reproduce
    across platforms. Independent child streams come from ``split``.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split(rng: np.random.Generator, n: int = 2) -> list[np.random.Generator]:
    """Spawn ``n`` statistically independent child streams."""
    return list(rng.spawn(n))


def record_best(samples: Sequence[Sample] | Sequence[float]) -> list[tuple[int, float]]:
    """Running maximum of sample values as (eval_index, best so far) pairs."""
    if len(samples) == 0:
        raise ValueError("record_best needs at least one sample")
    curve = []
    best = -math.inf
    for i, s in enumerate(samples):
        if isinstance(s, Sample):
            idx, v = s.eval_index, s.value
        else:
            idx, v = i, float(s)
        best = max(best, v)
        curve.append((idx, best))
    return curve


class ObjectiveOracle:
    """Budgeted wrapper around a deterministic objective (maximized).

    Every call to :meth:`evaluate` consumes one query. ``batch_fn`` is an
    optional vectorized implementation used by :meth:`evaluate_many`; each
    row still counts as one query.
    """

    def __init__(
        self,
        fn: Callable[[np.ndarray], float],
        dim: int,
        budget: int,
        bounds: Optional[np.ndarray] = None,
        batch_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        self.fn = fn
        self.dim = int(dim)
        self.budget = int(budget)
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float)
        if self.bounds is not None and self.bounds.shape != (self.dim, 2):
            raise ValueError("bounds must have shape (dim, 2)")
        self.batch_fn = batch_fn
        self.n_queries = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.n_queries

    def _check(self, values: np.ndarray) -> None:
        if not np.all(np.isfinite(values)):
            raise NonFiniteObjective("objective returned a non-finite value")

    def evaluate(self, x: np.ndarray) -> float:
        if self.n_queries >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} queries exhausted")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {x.shape}")
        value = float(self.fn(x))
        self._check(np.array([value]))
        self.n_queries += 1
        return value

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate rows of ``X``; raises if the batch exceeds the budget."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) > self.remaining:
            raise BudgetExhausted(
                f"batch of {len(X)} exceeds remaining budget {self.remaining}"
            )
        if self.batch_fn is not None:
            values = np.asarray(self.batch_fn(X), dtype=float)
        else:
            values = np.array([float(self.fn(x)) for x in X])
        self._check(values)
        self.n_queries += len(X)
        return values


@dataclass
class RunRecord:
    seed: int
    method: str
    samples: list[Sample] = field(default_factory=list)
    best_curve: list[tuple[int, float]] = field(default_factory=list)
    tree: Optional[dict] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def append(self, x: np.ndarray, value: float) -> Sample:
        s = Sample(np.asarray(x, dtype=float).copy(), float(value), len(self.samples))
        self.samples.append(s)
        prev = self.best_curve[-1][1] if self.best_curve else -math.inf
        self.best_curve.append((s.eval_index, max(prev, s.value)))
        return s

    @property
    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.samples])

    @property
    def best(self) -> Sample:
        return max(self.samples, key=lambda s: (s.value, -s.eval_index))


def uniform_in_bounds(rng: np.random.Generator, bounds: np.ndarray, n: int) -> np.ndarray:
    lo, hi = bounds[:, 0], bounds[:, 1]
    return lo + (hi - lo) * rng.random((n, len(lo)))
