import numpy as np
import pytest
from hypothesis import given, strategies as st

from plalam.core import seeded_rng
from plalam.diagnostics import (UndefinedEstimate, compare_random_partition, dilution_holds,
                                estimate_ck, estimate_lipschitz, estimate_region, estimate_zk,
                                zk_series)
from plalam.partition import PartitionTree, RegionNode, build_partition_arrays


def _holds_bruteforce(values, c, d, z):
    """Independent check of the dilution inequality on a dense y grid.

    Uses F(y) = #{f <= g* - y} / n; the step function is right-continuous in
    the gap variable's complement, so the check at each gap point uses the
    count of gaps >= y.
    """
    gaps = np.max(values) - np.asarray(values)
    y_max = c * (1 - z) ** (1 / d)
    ys = np.concatenate([gaps[gaps <= y_max], [y_max]])
    F = np.array([(gaps >= y).mean() for y in ys])
    return bool(np.all(F <= 1 - (ys / c) ** d + 1e-12))


def _min_c_bruteforce(values, d, z, grid=100_000):
    cs = np.linspace(0, np.ptp(values) * 1.5, grid + 1)[1:]
    for c in cs:
        if _holds_bruteforce(values, c, d, z):
            return c
    return np.inf


def test_lipschitz_examples():
    assert estimate_lipschitz([[0.0], [1.0]], [0.0, 2.0]) == 2.0
    assert estimate_lipschitz([[0.0], [1.0], [2.0]], [0.0, 2.0, 2.5]) == 2.0
    assert estimate_lipschitz(np.random.default_rng(0).normal(size=(5, 2)), np.ones(5)) == 0.0
    with pytest.raises(UndefinedEstimate):
        estimate_lipschitz(np.ones((4, 2)), [0, 1, 2, 3])


@given(st.integers(0, 1000), st.integers(1, 4))
def test_lipschitz_linear_exact(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=d)
    Z = rng.normal(size=(12, d))
    est = estimate_lipschitz(Z, Z @ a + 3.0)
    # the ratio never exceeds |a|
    assert est <= np.linalg.norm(a) * (1 + 1e-9)
    # points on a line along a attain it exactly
    t = rng.normal(size=12)
    line = np.outer(t, a / np.linalg.norm(a))
    est_line = estimate_lipschitz(line, line @ a + 3.0)
    assert est_line == pytest.approx(np.linalg.norm(a), rel=1e-9)


def test_ck_constant_region():
    assert estimate_ck(np.full(6, 2.0), 2) == 0.0


def test_ck_uniform_quantiles():
    f = np.arange(1, 101) / 100
    c = estimate_ck(f, 1)
    assert abs(c - 1) < 0.05
    assert c == pytest.approx(_min_c_bruteforce(f, 1, 0.5, 20_000), abs=1e-4)


def test_ck_four_values_bruteforce():
    f = np.array([1.0, 0.9, 0.5, 0.1])
    brute = _min_c_bruteforce(f, 1, 0.5)
    assert estimate_ck(f, 1) == pytest.approx(brute, abs=2e-5)
    # hand derivation: binding gap 0.1 with F = 3/4 gives c = 0.1 / (1/4) = 0.4
    assert estimate_ck(f, 1) == pytest.approx(0.4, rel=1e-5)


def test_zk_examples():
    assert estimate_zk(np.ones(5), 1.0, 2) == 0.0
    f = np.arange(1, 101) / 100
    assert estimate_zk(f, 1.0, 1) <= 2 / 100
    brute = min(k / 100 for k in range(101) if _holds_bruteforce(f, 0.5, 1, k / 100))
    assert estimate_zk(f, 0.5, 1) == pytest.approx(brute)
    with pytest.raises(ValueError):
        estimate_zk(f, 0.0, 1)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=30), st.integers(1, 3))
def test_ck_monotone_under_top_value(values, d):
    v = np.array(values)
    c0 = estimate_ck(v, d)
    c1 = estimate_ck(np.append(v, v.max()), d)
    assert c1 <= c0 * (1 + 1e-5) + 1e-12


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=30), st.floats(0.1, 5),
       st.floats(0.1, 5), st.integers(1, 3))
def test_zk_nonincreasing_in_c(values, c1, c2, d):
    v = np.array(values)
    lo, hi = sorted([c1, c2])
    assert estimate_zk(v, hi, d) <= estimate_zk(v, lo, d)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=20), st.floats(0.05, 5),
       st.floats(0, 1), st.integers(1, 3))
def test_feasibility_matches_bruteforce(values, c, z, d):
    v = np.array(values)
    assert dilution_holds(v, c, d, z) == _holds_bruteforce(v, c, d, z)


def test_region_estimate_fields():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(40, 2))
    est = estimate_region(Z, -np.linalg.norm(Z, axis=1))
    assert est.d == 2 and est.l_k >= 0 and est.c_k >= 0 and 0 <= est.z_k <= 1


def test_zk_series_blocks():
    v = np.r_[np.linspace(0, -5, 50), np.zeros(50), np.zeros(30)]
    s = zk_series(v, 50, 50, 1, 1.0)
    assert len(s) == 2 and s[1] == 0.0 and s[0] > 0


def _node_tree(Z, values, good, bad):
    n = len(values)
    root = RegionNode(0, 0, list(range(n)), children=(1, 2), n=n)
    from plalam.partition import LinearBoundary
    root.boundary = LinearBoundary(np.ones(Z.shape[1]), 0.0)
    return PartitionTree([root, RegionNode(1, 1, list(good), 0, n=len(good)),
                          RegionNode(2, 1, list(bad), 0, n=len(bad))], 0, Z, values)


def test_separated_node_beats_random():
    rng = np.random.default_rng(0)
    Zg = rng.normal(10, 0.1, size=(20, 2))
    Zb = rng.normal(-10, 0.1, size=(20, 2))
    Z = np.vstack([Zg, Zb])
    values = np.r_[10 + rng.normal(0, .01, 20), rng.normal(0, .01, 20)]
    tree = _node_tree(Z, values, range(20), range(20, 40))
    comp = compare_random_partition(tree, seeded_rng(0), trials=20)
    assert comp.n_nodes == 1 and comp.frac_c_better == 1.0
    assert comp.mean_learned_c < comp.mean_random_c / 10


def test_unstructured_nodes_near_half():
    wins = []
    rng = np.random.default_rng(1)
    for k in range(150):
        Z = rng.normal(size=(16, 2))
        values = rng.normal(size=16)
        perm = rng.permutation(16)
        tree = _node_tree(Z, values, perm[:8], perm[8:])
        wins.append(compare_random_partition(tree, seeded_rng(k), trials=5).frac_c_better)
    assert abs(np.mean(wins) - 0.5) < 0.12


def test_single_leaf_neutral():
    tree = PartitionTree([RegionNode(0, 0, [0, 1], n=2)], 0, np.zeros((2, 1)), np.zeros(2))
    comp = compare_random_partition(tree, seeded_rng(0))
    assert comp.n_nodes == 0 and comp.rows == []


def test_on_built_tree():
    rng = np.random.default_rng(0)
    Z = rng.uniform(-3, 3, size=(300, 2))
    values = -np.minimum(np.linalg.norm(Z - 1.5, axis=1), np.linalg.norm(Z + 1.5, axis=1))
    tree = build_partition_arrays(Z, values, 10)
    comp = compare_random_partition(tree, seeded_rng(0), trials=5)
    assert comp.n_nodes > 0 and comp.learned_wins_c


def test_lipschitz_measured_on_candidates():
    rng = np.random.default_rng(2)
    Z = rng.normal(size=(30, 2))
    X = rng.normal(size=(30, 5))
    values = rng.normal(size=30)
    tree = _node_tree(Z, values, range(15), range(15, 30))
    a = compare_random_partition(tree, seeded_rng(0), trials=3, X=X)
    b = compare_random_partition(tree, seeded_rng(0), trials=3, X=2 * X)
    # slopes halve when candidates are stretched; c depends on values only
    assert b.mean_learned_l == pytest.approx(a.mean_learned_l / 2, rel=1e-12)
    assert b.mean_learned_c == a.mean_learned_c
