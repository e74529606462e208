"""Permutation-sensitive surrogate for compiler pass ordering.

A plan is a sequence of action indices. Hidden chains pay out when their
actions appear as an in-order (not necessarily contiguous) subsequence;
every action that does not take part in a matched chain costs
``base_cost``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core import seeded_rng

DEFAULT_PAYOFFS = (10.0, 6.0, 4.0)


@dataclass(frozen=True)
class SeqOrderWorld:
    n_actions: int
    horizon: int
    chains: tuple  # ((actions tuple, payoff), ...)
    base_cost: float

    def to_dict(self) -> dict:
        return {
            "n_actions": self.n_actions,
            "horizon": self.horizon,
            "chains": [[list(a), p] for a, p in self.chains],
            "base_cost": self.base_cost,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SeqOrderWorld":
        chains = tuple((tuple(int(v) for v in a), float(p)) for a, p in d["chains"])
        return cls(int(d["n_actions"]), int(d["horizon"]), chains, float(d["base_cost"]))


def make_seqorder(seed: int, n_actions: int = 16, horizon: int = 20,
                  payoffs=DEFAULT_PAYOFFS, min_len: int = 2, max_len: int = 4,
                  base_cost: float = 0.1) -> SeqOrderWorld:
    """Draw disjoint hidden chains of length ``min_len..max_len``."""
    rng = seeded_rng(seed)
    lengths = rng.integers(min_len, max_len + 1, size=len(payoffs))
    if lengths.sum() > n_actions:
        raise ValueError("not enough distinct actions for the requested chains")
    pool = rng.permutation(n_actions)
    chains, k = [], 0
    for length, p in zip(lengths, payoffs):
        chains.append((tuple(int(a) for a in pool[k:k + length]), float(p)))
        k += length
    return SeqOrderWorld(n_actions, horizon, tuple(chains), float(base_cost))


def seqorder_reward(world: SeqOrderWorld, actions) -> float:
    actions = [int(a) for a in actions]
    if any(a < 0 or a >= world.n_actions for a in actions):
        raise ValueError("action out of range")
    used = np.zeros(len(actions), dtype=bool)
    total = 0.0
    for chain, payoff in world.chains:
        # greedy leftmost match over positions not claimed by earlier chains
        pos, hits = 0, []
        for a in chain:
            while pos < len(actions) and (used[pos] or actions[pos] != a):
                pos += 1
            if pos == len(actions):
                break
            hits.append(pos)
            pos += 1
        if len(hits) == len(chain):
            used[hits] = True
            total += payoff
    return total - world.base_cost * float(np.sum(~used))


def decode_actions(world: SeqOrderWorld, X: np.ndarray) -> np.ndarray:
    """Per-step argmax of the action-probability matrix (lowest index on ties)."""
    X = np.asarray(X, dtype=float).reshape(-1, world.horizon, world.n_actions)
    return X.argmax(axis=-1)


def histogram_states(world: SeqOrderWorld, actions: np.ndarray) -> np.ndarray:
    """Normalized action histogram after each step, shape (batch, H, n_actions)."""
    onehot = np.eye(world.n_actions)[np.atleast_2d(actions)]
    counts = np.cumsum(onehot, axis=1)
    return counts / np.arange(1, world.horizon + 1)[None, :, None]
