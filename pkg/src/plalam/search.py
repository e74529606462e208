"""Tree-guided planner: UCB descent over a learned partition with leaf-local
CMA-ES proposals, plus the ablation variants."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ObjectiveOracle, RunRecord, SearchBudget, uniform_in_bounds
from .latent import LatentCodec, PartitionEncoder
from .partition import PartitionTree, build_partition_arrays
from .samplers import CmaesState, cmaes_ask

SIGMA_MULT = 1.0
SIGMA_FLOOR = 1e-3
MAX_RETRIES = 20

NODE_SCORES = ("max", "mean")
DESCENTS = ("tree_ucb", "flat_leaf_ucb", "tree_greedy")


@dataclass(frozen=True)
class UcbScore:
    exploit: float
    explore: float

    @property
    def total(self) -> float:
        return self.exploit + self.explore


@dataclass(frozen=True)
class SearchVariant:
    node_score: str = "max"
    descend: str = "tree_ucb"

    def __post_init__(self):
        if self.node_score not in NODE_SCORES:
            raise ValueError(f"node_score must be one of {NODE_SCORES}")
        if self.descend not in DESCENTS:
            raise ValueError(f"descend must be one of {DESCENTS}")


VARIANTS = {
    "plalam": SearchVariant("max", "tree_ucb"),
    "plalam_mean": SearchVariant("mean", "tree_ucb"),
    "plalam_notree": SearchVariant("max", "flat_leaf_ucb"),
    "plalam_noucb": SearchVariant("max", "tree_greedy"),
}


def ucb_score(node_score: float, n_child: int, n_parent: int, cp: float) -> UcbScore:
    if n_child == 0:
        return UcbScore(node_score, math.inf)
    return UcbScore(node_score, cp * math.sqrt(2.0 * math.log(n_parent) / n_child))


def ucb(node_score: float, n_child: int, n_parent: int, cp: float) -> float:
    """``node_score + cp * sqrt(2 ln n_parent / n_child)``; +inf for unvisited children."""
    return ucb_score(node_score, n_child, n_parent, cp).total


def _score(node, variant: SearchVariant) -> float:
    return node.score_max if variant.node_score == "max" else node.score_mean


def select_leaf(tree: PartitionTree, variant: SearchVariant, cp: float) -> int:
    """Pick a leaf; ties go to the good child, then to the lower node id."""
    if variant.descend == "flat_leaf_ucb":
        n_root = tree.root.n
        best_id, best = None, -math.inf
        for nd in sorted(tree.leaves(), key=lambda nd: nd.id):
            b = ucb(_score(nd, variant), nd.n, n_root, cp)
            if best_id is None or b > best:
                best_id, best = nd.id, b
        return best_id

    nd = tree.root
    greedy = variant.descend == "tree_greedy"
    while not nd.is_leaf:
        good, bad = (tree.nodes[c] for c in nd.children)
        if greedy:
            bg, bb = _score(good, variant), _score(bad, variant)
        else:
            bg = ucb(_score(good, variant), good.n, nd.n, cp)
            bb = ucb(_score(bad, variant), bad.n, nd.n, cp)
        nd = good if bg >= bb else bad
    return nd.id


def leaf_mask(tree: PartitionTree, leaf_id: int, Z: np.ndarray) -> np.ndarray:
    """Rows of ``Z`` that satisfy every boundary decision on the path to ``leaf_id``."""
    Z = np.atleast_2d(Z)
    mask = np.ones(len(Z), dtype=bool)
    child = tree.nodes[leaf_id]
    while child.parent is not None:
        parent = tree.nodes[child.parent]
        good_side = parent.boundary.is_good(Z)
        mask &= good_side if parent.children[0] == child.id else ~good_side
        child = parent
    return mask


def leaf_sampler(tree: PartitionTree, leaf_id: int, X: np.ndarray,
                 codec: LatentCodec, sigma_mult: float = SIGMA_MULT,
                 sigma_floor: float = SIGMA_FLOOR, init: str = "mean",
                 values: Optional[np.ndarray] = None) -> CmaesState:
    """Fresh CMA-ES distribution fitted to the leaf members in sampling space.

    ``init="mean"`` centres it on the member mean; ``init="ranked"`` on the
    CMA-ES weighted recombination of the better half of the members.
    """
    members = tree.nodes[leaf_id].members
    H = np.atleast_2d(codec.encode(X[members]))
    std = np.maximum(sigma_mult * H.std(axis=0), sigma_floor)
    if init == "mean":
        centre = H.mean(axis=0)
    elif init == "ranked":
        v = (tree.values if values is None else values)[members]
        order = np.argsort(-v, kind="stable")
        mu = (len(order) + 1) // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        centre = (w / w.sum()) @ H[order[:mu]]
    else:
        raise ValueError(f"unknown leaf init {init!r}")
    return CmaesState.from_diagonal(centre, std)


def propose_in_leaf(tree: PartitionTree, leaf_id: int, X: np.ndarray,
                    codec: LatentCodec, encoder: PartitionEncoder,
                    rng: np.random.Generator, bounds: Optional[np.ndarray] = None,
                    retries: int = MAX_RETRIES, state: Optional[CmaesState] = None,
                    **sampler_kw):
    """Draw a candidate that routes to ``leaf_id``.

    Up to ``retries + 1`` draws are made in one batch; the first in-region
    draw is returned, else the last one. Returns ``(x, z, n_rejected)``
    where ``z`` is the candidate's partition-space encoding.
    """
    if state is None:
        state = leaf_sampler(tree, leaf_id, X, codec, **sampler_kw)
    Xc = np.atleast_2d(codec.decode(cmaes_ask(state, rng, retries + 1)))
    if bounds is not None:
        Xc = np.clip(Xc, bounds[:, 0], bounds[:, 1])
    if tree.nodes[leaf_id].parent is None:
        return Xc[0], encoder.encode(Xc[0]), 0
    Zc = encoder.encode_many(Xc)
    ok = np.flatnonzero(leaf_mask(tree, leaf_id, Zc))
    i = int(ok[0]) if len(ok) else len(Xc) - 1
    return Xc[i], Zc[i], i


def run_plalam(oracle: ObjectiveOracle, budget: SearchBudget,
               variant: SearchVariant | str = "plalam",
               codec: Optional[LatentCodec] = None,
               encoder: Optional[PartitionEncoder] = None,
               rng: Optional[np.random.Generator] = None,
               init_sigma: float = 1.0, seed: int = 0,
               keep_tree: bool = True, **sampler_kw) -> RunRecord:
    """Run the planner for ``budget.total_queries`` oracle evaluations.

    The first ``n_init`` points are uniform in the bounds (or N(0,
    init_sigma^2) when unbounded). Afterwards, every ``n_par`` iterations
    the codec is refitted (if trainable) and the tree rebuilt; each
    iteration descends to a leaf, proposes one point in it and evaluates it.
    """
    method = variant if isinstance(variant, str) else _variant_name(variant)
    variant = VARIANTS[variant] if isinstance(variant, str) else variant
    rng = rng if rng is not None else np.random.default_rng(seed)
    codec = codec or LatentCodec.identity(oracle.dim)
    encoder = encoder or PartitionEncoder.identity()
    T = budget.total_queries
    rec = RunRecord(seed, method)

    if oracle.bounds is not None:
        X0 = uniform_in_bounds(rng, oracle.bounds, budget.n_init)
    else:
        X0 = init_sigma * rng.standard_normal((budget.n_init, oracle.dim))
    v0 = oracle.evaluate_many(X0)
    for x, v in zip(X0, v0):
        rec.append(x, v)
    if T == budget.n_init:
        return rec

    X = np.empty((T, oracle.dim))
    X[: budget.n_init] = X0
    values = np.empty(T)
    values[: budget.n_init] = v0
    Z0 = encoder.encode_many(X0)
    Z = np.empty((T, Z0.shape[1]))
    Z[: budget.n_init] = Z0

    tree = None
    n_rebuilds = 0
    rejections = 0
    for t in range(budget.n_init, T):
        if (t - budget.n_init) % budget.n_par == 0:
            codec = codec.refit(X[:t], values[:t])
            tree = build_partition_arrays(Z[:t], values[:t], budget.n_thres)
            tree.features, tree.values = Z, values
            n_rebuilds += 1
        leaf = select_leaf(tree, variant, budget.cp)
        x, z, rej = propose_in_leaf(tree, leaf, X[:t], codec, encoder, rng, oracle.bounds,
                                    **sampler_kw)
        rejections += rej
        v = oracle.evaluate(x)
        X[t], Z[t], values[t] = x, z, v
        rec.append(x, v)
        tree.add_sample(t, z, v)

    rec.extras.update(n_rebuilds=n_rebuilds, rejections=rejections)
    if keep_tree:
        rec.extras["tree_obj"] = tree
        rec.tree = tree.to_dict()
    return rec


def _variant_name(variant: SearchVariant) -> str:
    for name, v in VARIANTS.items():
        if v == variant:
            return name
    return "plalam"
