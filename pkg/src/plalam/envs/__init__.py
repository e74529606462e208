"""Benchmark objectives exposed through a common vectorized interface."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..core import ObjectiveOracle
from ..latent import PartitionEncoder
from . import bench, nav, seqorder
from .bench import multimodal_bench
from .nav import NavWorld, nav_reward, nav_step, simulate
from .seqorder import SeqOrderWorld, make_seqorder, seqorder_reward


class Environment:
    """A deterministic objective over a box, maximized.

    Subclasses implement ``evaluate_batch`` and optionally ``states_batch``
    (per-step states used by snapshot partition encoders) and
    ``success_batch``.
    """

    name: str = "env"
    dim: int
    bounds: np.ndarray
    n_init: int = 50

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.evaluate_batch(np.asarray(x)[None, :])[0])

    def success_batch(self, X: np.ndarray) -> np.ndarray:
        return np.zeros(len(np.atleast_2d(X)), dtype=bool)

    def success(self, x: np.ndarray) -> bool:
        return bool(self.success_batch(np.asarray(x)[None, :])[0])

    def states_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def partition_encoder(self) -> PartitionEncoder:
        return PartitionEncoder.identity()

    def oracle(self, budget: int) -> ObjectiveOracle:
        return ObjectiveOracle(self.evaluate, self.dim, budget, self.bounds,
                               batch_fn=self.evaluate_batch)

    def to_dict(self) -> dict:
        return {"name": self.name, "dim": self.dim}


class NavEnv(Environment):
    """Plans are ``2H`` normalized actions in [-1, 1]; see ``nav.actions_from_vector``."""

    snapshots = 8

    def __init__(self, world: NavWorld):
        self.world = world
        self.name = world.name
        self.dim = 2 * world.horizon
        self.bounds = np.tile([-1.0, 1.0], (self.dim, 1))

    def rollout(self, X: np.ndarray):
        A = nav.actions_from_vector(self.world, X)
        return simulate(self.world, A)

    def evaluate_batch(self, X):
        pos, reached = self.rollout(X)
        return nav._rewards(self.world, pos[:, -1], reached)

    def success_batch(self, X):
        pos, reached = self.rollout(X)
        return nav.is_success(self.world, pos[:, -1], reached)

    def states_batch(self, X):
        return self.rollout(X)[0]

    def partition_encoder(self) -> PartitionEncoder:
        stride = math.ceil(self.world.horizon / self.snapshots)
        return PartitionEncoder.snapshots(self.states_batch, stride)

    def to_dict(self):
        return {"name": self.name, "dim": self.dim, "world": self.world.to_dict()}


class SeqOrderEnv(Environment):
    """Plans are per-step action probabilities in [0, 1]^(H x n_actions)."""

    n_init = 5
    snapshot_stride = 5

    def __init__(self, world: SeqOrderWorld):
        self.world = world
        self.name = "seqorder"
        self.dim = world.horizon * world.n_actions
        self.bounds = np.tile([0.0, 1.0], (self.dim, 1))

    def evaluate_batch(self, X):
        acts = seqorder.decode_actions(self.world, X)
        return np.array([seqorder_reward(self.world, a) for a in acts])

    def states_batch(self, X):
        return seqorder.histogram_states(self.world, seqorder.decode_actions(self.world, X))

    def partition_encoder(self):
        return PartitionEncoder.snapshots(self.states_batch, self.snapshot_stride)

    def success_batch(self, X):
        best = sum(p for _, p in self.world.chains)
        return self.evaluate_batch(X) >= best - self.world.base_cost * (
            self.world.horizon - sum(len(c) for c, _ in self.world.chains)) - 1e-9

    def to_dict(self):
        return {"name": self.name, "dim": self.dim, "world": self.world.to_dict()}


class BenchEnv(Environment):
    def __init__(self, name: str, dim: int = 2):
        if name not in bench.BENCHES:
            raise ValueError(f"unknown benchmark {name!r}")
        self.name = name
        self.dim = int(dim)
        half = bench.BENCH_BOUNDS[name]
        self.bounds = np.tile([-half, half], (self.dim, 1))
        self._fn = bench.BENCHES[name]

    def evaluate_batch(self, X):
        return self._fn(np.atleast_2d(np.asarray(X, dtype=float)))

    def success_batch(self, X):
        X = np.atleast_2d(X)
        if self.name == "deceptive_twin":
            _, b = bench.twin_attractors(self.dim)
            return np.linalg.norm(X - b, axis=1) < 0.5
        return self.evaluate_batch(X) > -1e-2

    def to_dict(self):
        return {"name": self.name, "dim": self.dim}


ENV_NAMES = ("maze_s3", "four_rooms", "select_obj", "seqorder",
             "deceptive_twin", "rastrigin", "ackley", "flat")


def make_env(name: str, seed: int = 0, params: Optional[dict] = None) -> Environment:
    """Build a named environment; the seed fixes any random world layout."""
    params = dict(params or {})
    if name in nav.WORLDS:
        return NavEnv(nav.WORLDS[name](seed, **params))
    if name == "seqorder":
        return SeqOrderEnv(make_seqorder(seed, **params))
    if name in bench.BENCHES:
        return BenchEnv(name, **params)
    raise ValueError(f"unknown environment {name!r}")


__all__ = [
    "Environment", "NavEnv", "SeqOrderEnv", "BenchEnv", "make_env", "ENV_NAMES",
    "NavWorld", "SeqOrderWorld", "nav_step", "nav_reward", "simulate",
    "seqorder_reward", "make_seqorder", "multimodal_bench",
]
