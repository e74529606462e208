"""Sample-based estimates of region smoothness and value concentration.

For a region with samples ``(z_i, f_i)`` the estimators are

* ``L``: the largest pairwise slope ``|f_i - f_j| / ||z_i - z_j||``;
* ``c``: the smallest scale such that the empirical gap distribution
  ``F(y) = #{f_i <= g* - y} / n`` satisfies ``F(y) <= 1 - (y / c)^d`` for
  all ``y`` in ``[0, c (1 - z)^(1/d)]``;
* ``z``: the smallest tail mass (on a 1/n grid) for which that inequality
  holds at a fixed ``c``.

All are loose, sample-based lower-bound style approximations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

MIN_PAIR_DIST = 1e-12
CK_RTOL = 1e-6


class UndefinedEstimate(ValueError):
    """No pair of distinct positions is available."""


@dataclass(frozen=True)
class DilutionEstimate:
    l_k: float
    c_k: float
    z_k: float
    d: int
    n_samples: int


@njit(cache=True)
def _max_slope(Z, f, min_dist):
    n, d = Z.shape
    best = -1.0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                e = Z[i, k] - Z[j, k]
                s += e * e
            dist = np.sqrt(s)
            if dist < min_dist:
                continue
            r = abs(f[i] - f[j]) / dist
            if r > best:
                best = r
    return best


def estimate_lipschitz(Z, values) -> float:
    Z = np.asarray(Z, dtype=float)
    Z = Z.reshape(-1, 1) if Z.ndim == 1 else Z
    best = _max_slope(np.ascontiguousarray(Z), np.asarray(values, dtype=float), MIN_PAIR_DIST)
    if best < 0:
        raise UndefinedEstimate("all positions coincide")
    return float(best)


def _gap_profile(values):
    """Distinct gaps u_j = g* - f (ascending) and F(u_j) = #{gap >= u_j} / n."""
    v = np.asarray(values, dtype=float)
    gaps = np.sort(v.max() - v)
    n = len(gaps)
    u = np.unique(gaps)
    # number of gaps >= u_j
    count = n - np.searchsorted(gaps, u, side="left")
    return gaps, u, count / n


def dilution_holds(values, c: float, d: int, z: float) -> bool:
    """Whether the empirical gap CDF meets the dilution bound on its range.

    The CDF is a non-increasing step function and the bound is decreasing,
    so it suffices to check every gap point inside the range plus the
    range's right end.
    """
    if c <= 0:
        # the range collapses to y = 0 where F(0) = 1 = bound
        return True
    gaps, u, F = _gap_profile(values)
    y_max = c * (1.0 - z) ** (1.0 / d)
    inside = u <= y_max
    if np.any(F[inside] > 1.0 - (u[inside] / c) ** d + 1e-12):
        return False
    F_end = np.sum(gaps >= y_max) / len(gaps)
    return bool(F_end <= 1.0 - (y_max / c) ** d + 1e-12)


def estimate_ck(values, d: int, z: float = 0.5, rtol: float = CK_RTOL) -> float:
    """Smallest dilution scale at tail mass ``z`` (bisection on feasibility).

    Feasibility is monotone in ``c``: a larger scale relaxes the bound at
    every point and the newly covered range only reaches CDF levels <= z.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ValueError("need at least two samples")
    span = values.max() - values.min()
    if span == 0:
        return 0.0
    lo, hi = 0.0, span
    while not dilution_holds(values, hi, d, z):
        lo, hi = hi, hi * 2
    # every c > 0 may be feasible, so also stop once hi is negligible
    floor = span * 1e-12
    for _ in range(200):
        if hi - lo <= rtol * hi:
            break
        if hi < floor:
            return 0.0
        mid = 0.5 * (lo + hi)
        if dilution_holds(values, mid, d, z):
            hi = mid
        else:
            lo = mid
    return float(hi)


def estimate_zk(values, c_k: float, d: int) -> float:
    """Smallest ``z`` in {0, 1/n, ..., 1} meeting the dilution bound at ``c_k``."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        raise ValueError("need at least two samples")
    if c_k <= 0:
        raise ValueError("c_k must be positive")
    # feasibility is monotone in z (a larger z shrinks the checked range)
    lo, hi = 0, n
    if dilution_holds(values, c_k, d, 0.0):
        return 0.0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if dilution_holds(values, c_k, d, mid / n):
            hi = mid
        else:
            lo = mid
    return hi / n


def estimate_region(Z, values, d: Optional[int] = None, z: float = 0.5) -> DilutionEstimate:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    d = Z.shape[1] if d is None else d
    c = estimate_ck(values, d, z)
    zk = estimate_zk(values, c, d) if c > 0 else 0.0
    return DilutionEstimate(estimate_lipschitz(Z, values), c, zk, d, len(values))


def zk_series(values, n_init: int, n_par: int, d: int, c_k: float = 1.0,
              n_intervals: Optional[int] = None) -> np.ndarray:
    """z_k of the samples drawn in each interval between tree rebuilds.

    Interval 0 holds the initial samples; interval k >= 1 the ``n_par``
    samples that followed the k-th rebuild.
    """
    values = np.asarray(values, dtype=float)
    edges = [0, n_init]
    while edges[-1] + n_par <= len(values):
        edges.append(edges[-1] + n_par)
    out = [estimate_zk(values[a:b], c_k, d) for a, b in zip(edges[:-1], edges[1:])]
    return np.array(out[:n_intervals] if n_intervals else out)


@dataclass
class PartitionComparison:
    """Learned versus same-ratio random splits over a tree's internal nodes."""

    n_nodes: int = 0
    frac_l_better: float = 0.5
    frac_c_better: float = 0.5
    mean_learned_l: float = float("nan")
    mean_random_l: float = float("nan")
    mean_learned_c: float = float("nan")
    mean_random_c: float = float("nan")
    rows: list = field(default_factory=list)

    @property
    def learned_wins_l(self) -> bool:
        return self.n_nodes > 0 and self.mean_learned_l < self.mean_random_l

    @property
    def learned_wins_c(self) -> bool:
        return self.n_nodes > 0 and self.mean_learned_c < self.mean_random_c


def _split_metrics(X, values, a, b, d):
    out = []
    for idx in (a, b):
        out.append((estimate_lipschitz(X[idx], values[idx]),
                    estimate_ck(values[idx], d)))
    return np.mean([o[0] for o in out]), np.mean([o[1] for o in out])


def compare_random_partition(tree, rng: np.random.Generator, trials: int = 10,
                             Z: Optional[np.ndarray] = None,
                             values: Optional[np.ndarray] = None,
                             d: Optional[int] = None,
                             X: Optional[np.ndarray] = None) -> PartitionComparison:
    """Compare each learned split to random splits of the same sizes.

    Per internal node the metric of a split is the mean over its two
    children of the estimated Lipschitz constant and dilution scale.
    Nodes whose children cannot support the estimators (fewer than two
    samples, or coincident positions) are skipped.

    Lipschitz constants are taken over the candidates ``X`` (defaulting to
    the partition features ``Z``); the dilution law uses ``d = dim(Z)``.
    """
    Z = tree.features if Z is None else Z
    values = tree.values if values is None else values
    Z = np.asarray(Z, dtype=float)
    X = Z if X is None else np.asarray(X, dtype=float)
    values = np.asarray(values, dtype=float)
    d = Z.shape[1] if d is None else d
    rows = []
    for nd in tree.internal():
        g, b = (np.asarray(tree.nodes[c].members) for c in nd.children)
        if len(g) < 2 or len(b) < 2:
            continue
        members = np.asarray(nd.members)
        try:
            learned_l, learned_c = _split_metrics(X, values, g, b, d)
            rand = []
            for _ in range(trials):
                perm = rng.permutation(members)
                rand.append(_split_metrics(X, values, perm[: len(g)], perm[len(g):], d))
        except UndefinedEstimate:
            continue
        rand_l, rand_c = np.mean(rand, axis=0)
        rows.append({"node": nd.id, "depth": nd.depth, "n": nd.n,
                     "learned_l": learned_l, "random_l": rand_l,
                     "learned_c": learned_c, "random_c": rand_c})
    if not rows:
        return PartitionComparison()
    get = lambda k: np.array([r[k] for r in rows])
    return PartitionComparison(
        n_nodes=len(rows),
        frac_l_better=float(np.mean(get("learned_l") < get("random_l"))),
        frac_c_better=float(np.mean(get("learned_c") < get("random_c"))),
        mean_learned_l=float(get("learned_l").mean()),
        mean_random_l=float(get("random_l").mean()),
        mean_learned_c=float(get("learned_c").mean()),
        mean_random_c=float(get("random_c").mean()),
        rows=rows,
    )
