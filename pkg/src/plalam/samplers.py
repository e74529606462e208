"""Evolutionary samplers: CMA-ES, the cross-entropy method and random shooting.

All optimizers maximize. CMA-ES follows the standard (mu/mu_w, lambda)
strategy with cumulative step-size adaptation and rank-one plus rank-mu
covariance updates, using the usual default constants:

    lambda  = 4 + floor(3 ln n),  mu = floor(lambda / 2)
    w_i     ~ ln(mu + 1/2) - ln i,  normalized to sum 1
    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 max(0, sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c     = (4 + mu_eff / n) / (n + 4 + 2 mu_eff / n)
    c_1     = 2 / ((n + 1.3)^2 + mu_eff)
    c_mu    = min(1 - c_1, 2 (mu_eff - 2 + 1 / mu_eff) / ((n + 2)^2 + mu_eff))

Ranking ties are broken by candidate index (stable sort).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ObjectiveOracle, RunRecord, uniform_in_bounds

EIG_FLOOR = 1e-20
SIGMA_MAX = 1e8


@dataclass
class CmaesState:
    mean: np.ndarray
    step_size: float
    covariance: Optional[np.ndarray]
    p_sigma: np.ndarray
    p_c: np.ndarray
    popsize: int
    mu: int
    weights: np.ndarray
    generation: int = 0
    # eigendecomposition C = B diag(D^2) B^T, refreshed lazily
    B: np.ndarray = field(default=None, repr=False)
    D: np.ndarray = field(default=None, repr=False)
    eigen_generation: int = 0

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def mu_eff(self) -> float:
        return 1.0 / np.sum(self.weights**2)

    def constants(self):
        n, me = self.dim, self.mu_eff
        cs = (me + 2) / (n + me + 5)
        ds = 1 + 2 * max(0.0, np.sqrt((me - 1) / (n + 1)) - 1) + cs
        cc = (4 + me / n) / (n + 4 + 2 * me / n)
        c1 = 2 / ((n + 1.3) ** 2 + me)
        cmu = min(1 - c1, 2 * (me - 2 + 1 / me) / ((n + 2) ** 2 + me))
        chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        return cs, ds, cc, c1, cmu, chi_n

    def copy(self) -> "CmaesState":
        return copy.deepcopy(self)

    @classmethod
    def new(cls, mean, sigma: float, popsize: Optional[int] = None,
            diag: Optional[np.ndarray] = None) -> "CmaesState":
        """Fresh state with covariance ``diag(diag^2)`` (identity by default)."""
        mean = np.asarray(mean, dtype=float).copy()
        n = len(mean)
        lam = popsize or 4 + int(3 * np.log(n))
        lam = max(lam, 2)
        mu = lam // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w /= w.sum()
        D = np.ones(n) if diag is None else np.asarray(diag, dtype=float).copy()
        # the dense covariance is built on the first update; until then
        # C = diag(D^2) with an implicit identity eigenbasis
        return cls(mean, float(sigma), None, np.zeros(n), np.zeros(n),
                   lam, mu, w, 0, None, D, 0)

    def dense(self) -> "CmaesState":
        if self.B is None:
            self.covariance = np.diag(self.D**2)
            self.B = np.eye(self.dim)
        return self

    @property
    def C(self) -> np.ndarray:
        return np.diag(self.D**2) if self.covariance is None else self.covariance

    @classmethod
    def from_diagonal(cls, mean, stds, popsize: Optional[int] = None) -> "CmaesState":
        """Unit step size with per-dimension standard deviations ``stds``."""
        return cls.new(mean, 1.0, popsize, diag=stds)


def _refresh_eigen(state: CmaesState) -> None:
    C = (state.covariance + state.covariance.T) / 2
    vals, vecs = np.linalg.eigh(C)
    floor = max(EIG_FLOOR, vals.max() * 1e-14) if vals.max() > 0 else EIG_FLOOR
    if vals.min() < floor:
        # repair to the nearest SPD matrix with the floored spectrum
        vals = np.maximum(vals, floor)
        C = (vecs * vals) @ vecs.T
    state.covariance = C
    state.B = vecs
    state.D = np.sqrt(vals)
    state.eigen_generation = state.generation


def cmaes_ask(state: CmaesState, rng: np.random.Generator,
              n: Optional[int] = None) -> np.ndarray:
    """Draw ``n`` (default lambda) candidates from N(mean, sigma^2 C)."""
    n = state.popsize if n is None else n
    z = rng.standard_normal((n, state.dim))
    y = z * state.D if state.B is None else (z * state.D) @ state.B.T
    return state.mean + state.step_size * y


def cmaes_tell(state: CmaesState, candidates: np.ndarray, values: np.ndarray) -> CmaesState:
    """One generation update from evaluated candidates (values maximized)."""
    X = np.asarray(candidates, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(X) != len(values) or len(X) != state.popsize:
        raise ValueError("need exactly popsize candidates and values")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite objective values")
    s = state.copy().dense()
    n = s.dim
    cs, ds, cc, c1, cmu, chi_n = s.constants()
    order = np.argsort(-values, kind="stable")[: s.mu]
    Y = (X[order] - s.mean) / s.step_size
    yw = s.weights @ Y
    s.mean = s.mean + s.step_size * yw

    # C^{-1/2} y_w via the cached eigenbasis
    inv_sqrt_yw = s.B @ ((s.B.T @ yw) / s.D)
    s.p_sigma = (1 - cs) * s.p_sigma + np.sqrt(cs * (2 - cs) * s.mu_eff) * inv_sqrt_yw
    g = s.generation + 1
    ps_norm = np.linalg.norm(s.p_sigma)
    hsig = ps_norm / np.sqrt(1 - (1 - cs) ** (2 * g)) / chi_n < 1.4 + 2 / (n + 1)
    s.p_c = (1 - cc) * s.p_c + hsig * np.sqrt(cc * (2 - cc) * s.mu_eff) * yw

    rank_mu = (Y.T * s.weights) @ Y
    decay = 1 - c1 - cmu + (1 - hsig) * c1 * cc * (2 - cc)
    s.covariance = decay * s.covariance + c1 * np.outer(s.p_c, s.p_c) + cmu * rank_mu
    s.step_size = float(min(SIGMA_MAX, s.step_size * np.exp((cs / ds) * (ps_norm / chi_n - 1))))
    s.generation = g
    if g - s.eigen_generation > s.popsize / (c1 + cmu) / n / 10:
        _refresh_eigen(s)
    return s


@dataclass
class CemState:
    mean: np.ndarray
    stddev: np.ndarray
    popsize: int = 50
    n_elite: int = 10
    floor: float = 1e-3

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.stddev = np.maximum(np.broadcast_to(np.asarray(self.stddev, float), self.mean.shape),
                                 self.floor).astype(float)
        if not 1 <= self.n_elite <= self.popsize:
            raise ValueError("need 1 <= n_elite <= popsize")


def _clip(oracle: ObjectiveOracle, X: np.ndarray) -> np.ndarray:
    if oracle.bounds is None:
        return X
    return np.clip(X, oracle.bounds[:, 0], oracle.bounds[:, 1])


def cem_update(state: CemState, X: np.ndarray, values: np.ndarray) -> CemState:
    """New mean from the top ``n_elite`` candidates; the spread stays fixed."""
    order = np.argsort(-np.asarray(values), kind="stable")[: state.n_elite]
    return CemState(X[order].mean(axis=0), state.stddev, state.popsize, state.n_elite,
                    state.floor)


def cem_step(state: CemState, oracle: ObjectiveOracle, rng: np.random.Generator,
             n: Optional[int] = None):
    """Sample, evaluate and refit; returns ``(state, X, values)``.

    ``n`` truncates the population when the budget runs short.
    """
    n = state.popsize if n is None else n
    X = state.mean + state.stddev * rng.standard_normal((n, len(state.mean)))
    X = _clip(oracle, X)
    values = oracle.evaluate_many(X)
    if n < state.n_elite:
        return state, X, values
    sub = CemState(state.mean, state.stddev, n, min(state.n_elite, n), state.floor)
    new = cem_update(sub, X, values)
    new.popsize = state.popsize
    new.n_elite = state.n_elite
    return new, X, values


def _start_mean(oracle: ObjectiveOracle, mean) -> np.ndarray:
    if mean is not None:
        return np.asarray(mean, dtype=float)
    if oracle.bounds is not None:
        return oracle.bounds.mean(axis=1)
    return np.zeros(oracle.dim)


def run_cem(oracle: ObjectiveOracle, budget: int, sigma: float, rng: np.random.Generator,
            popsize: int = 50, n_elite: int = 10, seed: int = 0, mean=None) -> RunRecord:
    rec = RunRecord(seed, "cem")
    state = CemState(_start_mean(oracle, mean), sigma, popsize, n_elite)
    while len(rec.samples) < budget:
        n = min(popsize, budget - len(rec.samples))
        state, X, values = cem_step(state, oracle, rng, n)
        for x, v in zip(X, values):
            rec.append(x, v)
    rec.extras["final_mean"] = state.mean.tolist()
    return rec


def run_cmaes(oracle: ObjectiveOracle, budget: int, sigma: float, rng: np.random.Generator,
              popsize: Optional[int] = None, seed: int = 0, mean=None) -> RunRecord:
    """Standalone CMA-ES; candidates are clipped to the bounds for evaluation
    while the update uses the unclipped draws."""
    rec = RunRecord(seed, "cmaes")
    state = CmaesState.new(_start_mean(oracle, mean), sigma, popsize)
    while len(rec.samples) < budget:
        X = cmaes_ask(state, rng)
        n = min(len(X), budget - len(rec.samples))
        Xe = _clip(oracle, X[:n])
        values = oracle.evaluate_many(Xe)
        for x, v in zip(Xe, values):
            rec.append(x, v)
        if n == len(X):
            state = cmaes_tell(state, X, values)
    rec.extras["final_sigma"] = state.step_size
    return rec


def random_shooting(oracle: ObjectiveOracle, budget: int, rng: np.random.Generator,
                    sigma: float = 1.0, seed: int = 0, batch: int = 500) -> RunRecord:
    """Independent draws: uniform in the bounds, else N(0, sigma^2)."""
    rec = RunRecord(seed, "random_shooting")
    while len(rec.samples) < budget:
        n = min(batch, budget - len(rec.samples))
        if oracle.bounds is not None:
            X = uniform_in_bounds(rng, oracle.bounds, n)
        else:
            X = sigma * rng.standard_normal((n, oracle.dim))
        for x, v in zip(X, oracle.evaluate_many(X)):
            rec.append(x, v)
    return rec
