import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from plalam.core import Sample, seeded_rng
from plalam.envs import make_env
from plalam.latent import (LatentCodec, PartitionEncoder, fit_weighted_pca,
                           fit_weighted_pca_arrays, rank_weights, snapshot_encode)


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6)))
def test_identity_round_trip(X):
    c = LatentCodec.identity(X.shape[1])
    assert np.array_equal(c.decode(c.encode(X)), X)


def test_full_rank_pca_exact():
    X = seeded_rng(0).normal(size=(20, 4))
    c = fit_weighted_pca_arrays(X, np.zeros(20), 4, weight_fn=lambda v: np.ones_like(v))
    assert np.abs(c.decode(c.encode(X)) - X).max() < 1e-10


def test_line_direction():
    t = np.linspace(-1, 1, 9)
    X = np.stack([t, 2 * t], 1)
    c = fit_weighted_pca_arrays(X, t, 1)
    d = c.basis[:, 0]
    assert abs(abs(d @ np.array([1, 2]) / np.sqrt(5)) - 1) < 1e-12
    assert np.abs(c.decode(c.encode(X)) - X).max() < 1e-12


def test_weighted_mean_follows_heavy_cluster():
    X = np.vstack([np.zeros((5, 2)), np.full((5, 2), 10.0)])
    w = lambda v: np.where(v > 0, 1000.0, 1.0)
    c = fit_weighted_pca_arrays(X, np.r_[np.zeros(5), np.ones(5)], 1, weight_fn=w)
    expected = (5 * 1000 * 10.0) / (5 * 1000 + 5)
    assert np.allclose(c.mean, expected)
    assert np.abs(c.mean - 10).max() < 0.02


def test_uniform_weights_match_plain_pca():
    X = seeded_rng(2).normal(size=(30, 5)) @ np.diag([3, 2, 1, .5, .1])
    c = fit_weighted_pca_arrays(X, np.zeros(30), 2, weight_fn=lambda v: np.ones_like(v))
    Xc = X - X.mean(0)
    _, vecs = np.linalg.eigh(np.cov(Xc.T))
    ref = vecs[:, ::-1][:, :2]
    assert np.allclose(np.abs(c.basis.T @ ref), np.eye(2), atol=1e-8)
    rec_ref = Xc @ ref @ ref.T + X.mean(0)
    err = lambda R: np.sum((R - X) ** 2, 1)
    assert np.allclose(err(c.decode(c.encode(X))), err(rec_ref), atol=1e-10)


def test_pca_errors_and_rank_deficiency():
    X = seeded_rng(0).normal(size=(5, 3))
    with pytest.raises(ValueError):
        fit_weighted_pca_arrays(X, np.zeros(5), 4)
    with pytest.raises(ValueError):
        fit_weighted_pca_arrays(X[:2], np.zeros(2), 2)
    Xr = np.outer(np.arange(6.0), [1, 1, 0])
    c = fit_weighted_pca_arrays(Xr, np.arange(6.0), 2)
    assert np.allclose(c.basis[:, 1], 0)
    assert np.allclose(c.decode(np.zeros(2)), c.mean)


def test_fit_from_samples():
    X = seeded_rng(0).normal(size=(10, 3))
    samples = [Sample(x, float(i), i) for i, x in enumerate(X)]
    assert fit_weighted_pca(samples, 2).latent_dim == 2


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30))
def test_rank_weights_positive_monotone(v):
    v = np.array(v)
    w = rank_weights(v)
    assert np.all(w > 0) and np.isclose(w.sum(), 1)
    order = np.argsort(v, kind="stable")
    assert np.all(np.diff(w[order]) >= -1e-15)


def test_snapshot_examples():
    S = np.arange(8.0).reshape(4, 2)
    assert snapshot_encode(S, 2).tolist() == [2, 3, 6, 7]
    assert snapshot_encode(S, 4).tolist() == [6, 7]
    assert snapshot_encode(S, 9).tolist() == [6, 7]
    assert snapshot_encode(S, 3).tolist() == [4, 5, 6, 7]


def test_snapshots_diverge_after_collision():
    env = make_env("four_rooms", 0)
    w = env.world
    H = w.horizon
    # same actions, different start: one run hits a wall, the other does not
    X = np.zeros((1, 2 * H))
    X[0, 0::2] = 1.0
    enc = env.partition_encoder()
    z1 = enc.encode_many(X)
    A = X.copy()
    A[0, :40:2] = -1.0
    z2 = enc.encode_many(A)
    assert z1.shape == (1, 16) and not np.allclose(z1, z2)


def test_random_projection_repeatable():
    a = PartitionEncoder.random_projection(6, 2, seeded_rng(0)).encode_many(np.ones((3, 6)))
    b = PartitionEncoder.random_projection(6, 2, seeded_rng(0)).encode_many(np.ones((3, 6)))
    assert np.array_equal(a, b) and a.shape == (3, 2)
    c = LatentCodec.random_projection(6, 3, seeded_rng(1))
    assert np.allclose(c.basis.T @ c.basis, np.eye(3))
