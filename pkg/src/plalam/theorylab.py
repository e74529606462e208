"""Fixed-region UCB bandit simulator for the regret analysis.

Each region ``k`` is described by its optimum ``g*_k`` and a strictly
decreasing gap CDF ``F_k(y) = P[f <= g*_k - y]`` with ``F_k(0) = 1``.
Values are drawn exactly as ``f = g*_k - F_k^{-1}(U)`` with ``U`` uniform,
so the simulator matches the distributional assumptions by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, stats


@dataclass(frozen=True)
class RegionCdfSpec:
    """A region's value distribution.

    Parameters
    ----------
    g_star : float
        Best value attainable in the region.
    cdf : callable
        Vectorized ``y -> F(y)`` for gaps ``y >= 0``.
    inverse : callable
        Vectorized ``u -> F^{-1}(u)`` for ``u`` in ``(0, 1]``.
    d : int
        Exponent of the dilution law.
    z, c : float, optional
        Declared dilution parameters, when known.
    delta : float
        Gap ``f* - g_star`` to the global optimum (filled by the caller).
    """

    g_star: float
    cdf: Callable
    inverse: Callable
    d: int = 1
    z: Optional[float] = None
    c: Optional[float] = None
    delta: float = 0.0
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return self.g_star - self.inverse(rng.random(size))

    def with_gap(self, delta: float) -> "RegionCdfSpec":
        return RegionCdfSpec(self.g_star, self.cdf, self.inverse, self.d, self.z, self.c,
                             float(delta), self.family, self.params)

    @property
    def support(self) -> float:
        """Largest gap (``F^{-1}(0)``)."""
        return float(self.inverse(np.array(0.0)))


def power_law(c: float = 1.0, d: int = 1, g_star: float = 0.0) -> RegionCdfSpec:
    """``F(y) = 1 - (y / c)^d`` on ``[0, c]``; exactly (0, c)-diluted."""
    cdf = lambda y: np.clip(1.0 - (np.asarray(y, float) / c) ** d, 0.0, 1.0)
    inv = lambda u: c * (1.0 - np.asarray(u, float)) ** (1.0 / d)
    return RegionCdfSpec(g_star, cdf, inv, d, 0.0, c, family="power_law",
                         params={"c": c, "d": d})


def uniform_values(g_star: float = 1.0) -> RegionCdfSpec:
    """Values uniform on ``[g_star - 1, g_star]``."""
    spec = power_law(1.0, 1, g_star)
    return RegionCdfSpec(g_star, spec.cdf, spec.inverse, 1, 0.0, 1.0, family="uniform",
                         params={})


def truncated_exponential(rate: float = 4.0, y_max: float = 1.0, d: int = 1,
                          g_star: float = 0.0, z: float = 0.0) -> RegionCdfSpec:
    """Exponentially concentrated gaps truncated at ``y_max``."""
    tail = math.exp(-rate * y_max)

    def cdf(y):
        y = np.clip(np.asarray(y, float), 0.0, y_max)
        return (np.exp(-rate * y) - tail) / (1.0 - tail)

    def inv(u):
        u = np.asarray(u, float)
        return -np.log(u * (1.0 - tail) + tail) / rate

    spec = RegionCdfSpec(g_star, cdf, inv, d, family="truncated_exponential",
                         params={"rate": rate, "y_max": y_max, "d": d})
    return _declare(spec, z)


def heavy_tail(c1: float = 0.3, y_max: float = 1.0, weight: float = 0.2, d: int = 1,
               g_star: float = 0.0, z: Optional[float] = None) -> RegionCdfSpec:
    """Mixture of a concentrated power law and a uniform tail over ``[0, y_max]``.

    The tail carries mass ``weight``, so small dilution scales only hold
    for ``z`` somewhat above ``weight``.
    """

    def cdf(y):
        y = np.asarray(y, float)
        core = np.clip(1.0 - (y / c1) ** d, 0.0, 1.0)
        return (1 - weight) * core + weight * np.clip(1.0 - y / y_max, 0.0, 1.0)

    def _inv_scalar(u):
        if u >= 1.0:
            return 0.0
        if u <= 0.0:
            return y_max
        return optimize.brentq(lambda y: float(cdf(y)) - u, 0.0, y_max, xtol=1e-14)

    def inv(u):
        u = np.asarray(u, float)
        return np.vectorize(_inv_scalar, otypes=[float])(u)

    spec = RegionCdfSpec(g_star, cdf, inv, d, family="heavy_tail",
                         params={"c1": c1, "y_max": y_max, "weight": weight, "d": d})
    return _declare(spec, 1.5 * weight if z is None else z)


def fit_dilution(spec: RegionCdfSpec, z: float, grid: int = 20001,
                 safety: float = 1.0 + 1e-6) -> float:
    """Smallest ``c`` with ``F(y) <= 1 - (y/c)^d`` on ``[0, c (1-z)^(1/d)]``.

    Substituting ``y = F^{-1}(u)`` the condition reads
    ``c >= F^{-1}(u) / (1 - u)^(1/d)`` for all ``u >= z``; the supremum is
    taken on a grid dense near ``u = 1``.
    """
    t = np.linspace(0.0, 1.0, grid)[:-1]
    u = z + (1.0 - z) * (1.0 - (1.0 - t) ** 3)
    ratio = spec.inverse(u) / (1.0 - u) ** (1.0 / spec.d)
    return float(np.max(ratio) * safety)


def _declare(spec: RegionCdfSpec, z: float) -> RegionCdfSpec:
    c = fit_dilution(spec, z, safety=1.001)
    return RegionCdfSpec(spec.g_star, spec.cdf, spec.inverse, spec.d, z, c, spec.delta,
                         spec.family, spec.params)


def confidence_radius(spec: RegionCdfSpec, delta: float, n: int) -> float:
    """``F^{-1}(delta^(1/n))``: with probability exactly ``1 - delta`` the best
    of ``n`` draws lies within this gap of the region optimum."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(spec.inverse(np.array(delta ** (1.0 / n))))


def check_fbound(spec: RegionCdfSpec, delta: float, j: int):
    """Compare ``F^{-1}(delta^(1/j))`` with ``c (ln(1/delta) / j)^(1/d)``.

    Returns ``(lhs, rhs, holds)``.
    """
    if spec.z is None or spec.c is None:
        raise ValueError("spec must declare (z, c)")
    if not spec.z <= delta < 1:
        raise ValueError(f"need z <= delta < 1, got delta={delta} with z={spec.z}")
    if j < 1:
        raise ValueError("j must be >= 1")
    lhs = float(spec.inverse(np.array(delta ** (1.0 / j))))
    rhs = spec.c * (math.log(1.0 / delta) / j) ** (1.0 / spec.d)
    return lhs, rhs, lhs <= rhs + 1e-12


def lipschitz_to_dilution(L: float, eps0: float, relative_volume: float, d: int = 1):
    """Dilution pair implied by Lipschitz continuity and an ``eps0``-ball
    around the optimum, under uniform sampling.

    ``relative_volume`` is the region volume over the unit ball volume.
    """
    if L < 0 or eps0 <= 0:
        raise ValueError("need L >= 0 and eps0 > 0")
    if relative_volume < eps0**d * (1 - 1e-12):
        raise ValueError("relative volume smaller than the eps0-ball")
    return 1.0 - eps0**d / relative_volume, L * relative_volume ** (1.0 / d)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass
class RegretRecord:
    T: int
    choices: np.ndarray
    regret: np.ndarray  # cumulative, length T
    M: float
    K: int
    delta: float
    eta: float
    counts: np.ndarray
    c_good: float = float("nan")
    c_bad: float = float("nan")
    delta_0: float = float("nan")

    @property
    def total(self) -> float:
        return float(self.regret[-1])


def _decomposition(specs: Sequence[RegionCdfSpec]):
    # reporting only: l_d norms of the declared scales of optimal/suboptimal regions
    d = max(s.d for s in specs)
    gaps = np.array([s.delta for s in specs])
    cs = np.array([s.c if s.c is not None else np.nan for s in specs])
    good = gaps <= 0
    c_good = float(np.sum(cs[good] ** d) ** (1 / d)) if good.any() else 0.0
    c_bad = float(np.sum(cs[~good] ** d) ** (1 / d)) if (~good).any() else 0.0
    delta_0 = float(gaps[~good].min()) if (~good).any() else 0.0
    return c_good, c_bad, delta_0


def with_gaps(specs: Sequence[RegionCdfSpec]) -> list:
    f_star = max(s.g_star for s in specs)
    return [s.with_gap(f_star - s.g_star) for s in specs]


def run_bandit(specs: Sequence[RegionCdfSpec], T: int, eta: float = 1.0,
               rng: Optional[np.random.Generator] = None,
               schedule: Optional[Callable[[int, float], float]] = None) -> RegretRecord:
    """Simulate region-level UCB for ``T`` steps.

    Every region is visited once, then ``argmax_k g_t(k) + r_t(k)`` is
    sampled, with ``r_t(k) = F_k^{-1}(delta^(1/n_k))`` and ties to the
    lower index. ``delta = eta / T^3`` unless ``schedule(T, eta)`` is given.
    """
    specs = with_gaps(specs)
    K = len(specs)
    if K < 1 or T < K:
        raise ValueError("need 1 <= K <= T")
    rng = rng if rng is not None else np.random.default_rng()
    delta = schedule(T, eta) if schedule else eta / T**3
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    f_star = max(s.g_star for s in specs)

    # pre-draw uniforms; region k consumes its own stream in visit order
    U = rng.random((K, T))
    best = np.full(K, -np.inf)
    counts = np.zeros(K, dtype=np.int64)
    radius = np.zeros(K)
    choices = np.empty(T, dtype=np.int64)
    inst = np.empty(T)
    for t in range(T):
        k = t if t < K else int(np.argmax(best + radius))
        u = U[k, counts[k]]
        f = specs[k].g_star - float(specs[k].inverse(np.array(u)))
        counts[k] += 1
        if f > best[k]:
            best[k] = f
        radius[k] = float(specs[k].inverse(np.array(delta ** (1.0 / counts[k]))))
        choices[t] = k
        inst[t] = f_star - best[k]
    M = max(s.support for s in specs) + max(s.delta for s in specs)
    c_good, c_bad, delta_0 = _decomposition(specs)
    return RegretRecord(T, choices, np.cumsum(inst), M, K, delta, eta, counts,
                        c_good, c_bad, delta_0)


def _batched_regret(specs, T, eta, rng, runs) -> np.ndarray:
    """Cumulative regret curves ``(runs, T)``, vectorized over runs.

    Inverse-CDF calls are batched across runs; statistically identical to
    ``run_bandit`` called ``runs`` times.
    """
    specs = with_gaps(specs)
    K = len(specs)
    delta = eta / T**3
    f_star = max(s.g_star for s in specs)
    g = np.array([s.g_star for s in specs])
    best = np.full((runs, K), -np.inf)
    counts = np.zeros((runs, K), dtype=np.int64)
    radius = np.zeros((runs, K))
    inst = np.empty((runs, T))
    rows = np.arange(runs)
    # radii depend only on the count; tabulate per region
    n_tab = np.arange(1, T + 1)
    rad_tab = np.stack([s.inverse(delta ** (1.0 / n_tab)) for s in specs])
    for t in range(T):
        k = np.full(runs, t) if t < K else np.argmax(best + radius, axis=1)
        u = rng.random(runs)
        f = np.empty(runs)
        for j in range(K):
            sel = k == j
            if sel.any():
                f[sel] = g[j] - specs[j].inverse(u[sel])
        counts[rows, k] += 1
        best[rows, k] = np.maximum(best[rows, k], f)
        radius[rows, k] = rad_tab[k, counts[rows, k] - 1]
        inst[:, t] = f_star - best[rows, k]
    return np.cumsum(inst, axis=1)


def mean_regret(specs, T: int, eta: float = 1.0, rng=None, runs: int = 100) -> np.ndarray:
    rng = rng if rng is not None else np.random.default_rng()
    return _batched_regret(specs, T, eta, rng, runs)[:, -1]


def split_experiment(parent: RegionCdfSpec, good: RegionCdfSpec, bad: RegionCdfSpec,
                     T: int, eta: float = 1.0, rng=None, runs: int = 200,
                     return_samples: bool = False):
    """Mean final regret of the unsplit region, a learned split and a random split.

    The random split is two copies of ``parent`` (same value distribution
    on each side). All three share the optimum ``parent.g_star``.
    """
    rng = rng if rng is not None else np.random.default_rng()
    r_un = mean_regret([parent], T, eta, rng, runs)
    r_le = mean_regret([good, bad], T, eta, rng, runs)
    r_ra = mean_regret([parent, parent], T, eta, rng, runs)
    means = (float(r_un.mean()), float(r_le.mean()), float(r_ra.mean()))
    return (means, (r_un, r_le, r_ra)) if return_samples else means


def regret_slope(specs, T_grid: Sequence[int], eta: float = 1.0, runs: int = 100,
                 rng=None, tail: Optional[int] = None) -> float:
    """Least-squares slope of ``log E[R(T)]`` against ``log T``.

    Each grid point runs an independent simulation with its own horizon
    (``delta`` depends on ``T``). ``tail`` restricts the fit to the last
    grid points.
    """
    rng = rng if rng is not None else np.random.default_rng()
    T_grid = np.asarray(sorted(T_grid), dtype=int)
    means = np.array([mean_regret(specs, int(T), eta, rng, runs).mean() for T in T_grid])
    sel = slice(-tail, None) if tail else slice(None)
    res = stats.linregress(np.log(T_grid[sel]), np.log(means[sel]))
    return float(res.slope)


def coverage(spec: RegionCdfSpec, delta: float, n: int, episodes: int,
             rng: np.random.Generator) -> float:
    """Fraction of episodes whose best of ``n`` draws is within the radius."""
    r = confidence_radius(spec, delta, n)
    # best of n draws = g* - F^{-1}(max U) in distribution; draw directly
    best = spec.g_star - spec.inverse(rng.random((episodes, n)).max(axis=1))
    return float(np.mean(best >= spec.g_star - r - 1e-12))
