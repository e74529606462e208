"""Command-line orchestration: batch runs, diagnostics, theory experiments, sweeps.

Usage::

    plalam run --config exp.toml [--seeds 0:8] [--out DIR] [--jobs N]
    plalam diagnose --config exp.toml [--out DIR]
    plalam theory --experiment {coverage,fbound,slope,split,bandit} [--out DIR]
    plalam sweep --config exp.toml [--jobs N]

Outputs (under the output directory, overridable with $PLALAM_OUTPUT_DIR):

* ``runs/<method>_seed<k>.json``: one run record per (method, seed) cell;
* ``runs/<method>_seed<k>.npz``: candidates, partition features and values, tree
  methods only;
* ``aggregate.csv``: one row per method with columns ``AGG_COLUMNS``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from . import diagnostics, theorylab
from .config import MethodConfig, RunConfig, SeedRange, load_config
from .core import BudgetExhausted, NonFiniteObjective, RunRecord, seeded_rng, split
from .envs import make_env
from .latent import LatentCodec
from .partition import PartitionTree
from .samplers import random_shooting, run_cem, run_cmaes
from .search import VARIANTS, run_plalam

log = logging.getLogger("plalam")

AGG_COLUMNS = ("method", "env", "n_seeds", "mean_best", "sem_best", "success_rate",
               "sem_success", "wall_ms", "config_hash")
TREE_METHODS = tuple(VARIANTS)


def _codec(mcfg: MethodConfig, dim: int, rng) -> LatentCodec:
    if mcfg.codec == "identity":
        return LatentCodec.identity(dim)
    if mcfg.codec == "pca":
        return LatentCodec("weighted_pca", latent_dim=mcfg.latent_dim, trainable=True)
    return LatentCodec.random_projection(dim, mcfg.latent_dim, rng)


def run_cell(env_name: str, env_params: dict, mcfg: MethodConfig, seed: int):
    """Run one (method, seed) cell; returns ``(record, env, wall_ms)``.

    The environment layout uses ``seed`` directly; the optimizer draws from
    an independent child stream of the same seed.
    """
    env = make_env(env_name, seed, env_params)
    rng = split(seeded_rng(seed), 2)[1]
    budget = mcfg.budget.resolve(env.n_init)
    oracle = env.oracle(budget.total_queries)
    t0 = time.perf_counter()
    if mcfg.name in VARIANTS:
        encoder = env.partition_encoder() if mcfg.encoder == "snapshots" else None
        rec = run_plalam(oracle, budget, mcfg.name, _codec(mcfg, env.dim, rng), encoder, rng,
                         init_sigma=mcfg.sigma, seed=seed, init=mcfg.leaf_init,
                         sigma_mult=mcfg.sigma_mult)
    elif mcfg.name == "cem":
        rec = run_cem(oracle, budget.total_queries, mcfg.sigma, rng, mcfg.popsize or 50,
                      mcfg.n_elite, seed)
    elif mcfg.name == "cmaes":
        rec = run_cmaes(oracle, budget.total_queries, mcfg.sigma, rng, mcfg.popsize, seed)
    else:
        rec = random_shooting(oracle, budget.total_queries, rng, mcfg.sigma, seed)
    wall_ms = (time.perf_counter() - t0) * 1e3
    if oracle.n_queries != budget.total_queries:
        raise BudgetExhausted(f"{mcfg.key} used {oracle.n_queries} of "
                              f"{budget.total_queries} queries")
    return rec, env, wall_ms


def record_to_dict(rec: RunRecord, env, mcfg: MethodConfig, config_hash: str,
                   wall_ms: float) -> dict:
    best = rec.best
    return {
        "config_hash": config_hash,
        "method": mcfg.key,
        "algorithm": rec.method,
        "env": env.name,
        "seed": rec.seed,
        "n_queries": len(rec.samples),
        "best_value": best.value,
        "best_index": best.eval_index,
        "best_x": best.x.tolist(),
        "success": bool(env.success(best.x)),
        "values": rec.values.tolist(),
        "best_curve": [v for _, v in rec.best_curve],
        "tree": rec.tree,
        "wall_ms": wall_ms,
        "extras": {k: v for k, v in rec.extras.items() if k != "tree_obj"},
    }


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _cell_job(args):
    env_name, env_params, mcfg_dict, seed, config_hash, run_dir, timing = args
    mcfg = MethodConfig.model_validate(mcfg_dict)
    rec, env, wall_ms = run_cell(env_name, env_params, mcfg, seed)
    row = record_to_dict(rec, env, mcfg, config_hash, wall_ms if timing else 0.0)
    stem = Path(run_dir) / f"{mcfg.key}_seed{seed}"
    stem.with_suffix(".json").write_text(json.dumps(row, sort_keys=True, default=_jsonable))
    tree = rec.extras.get("tree_obj")
    if tree is not None:
        n = len(rec.samples)
        np.savez_compressed(stem.with_suffix(".npz"), features=tree.features[:n],
                            values=tree.values[:n],
                            x=np.array([smp.x for smp in rec.samples]))
    return {k: row[k] for k in ("method", "env", "seed", "best_value", "success",
                                "wall_ms", "config_hash")}


def _sem(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Per-method mean and standard error of best value and success."""
    hashes = {r["config_hash"] for r in rows}
    if len(hashes) > 1:
        raise ValueError("refusing to aggregate runs from different configs")
    out = []
    for method in dict.fromkeys(r["method"] for r in rows):
        sel = [r for r in rows if r["method"] == method]
        best = np.array([r["best_value"] for r in sel])
        succ = np.array([float(r["success"]) for r in sel])
        out.append({
            "method": method, "env": sel[0]["env"], "n_seeds": len(sel),
            "mean_best": float(best.mean()), "sem_best": _sem(best),
            "success_rate": float(succ.mean()), "sem_success": _sem(succ),
            "wall_ms": float(np.mean([r["wall_ms"] for r in sel])),
            "config_hash": sel[0]["config_hash"],
        })
    return out


def write_csv(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()
                        if k in columns})


def run_batch(config: RunConfig, jobs: int = 1, out: Optional[Path] = None) -> list[dict]:
    """Run every (method, seed) cell and write run files plus ``aggregate.csv``."""
    out = Path(out) if out else config.resolved_output_dir()
    run_dir = out / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    h = config.hash()
    (out / "config.toml").write_text(config.to_toml())
    tasks = [(config.environment.name, dict(config.environment.params), m.model_dump(),
              seed, h, str(run_dir), config.timing)
             for m in config.methods for seed in config.seed_list()]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_cell_job, tasks))
    else:
        rows = [_cell_job(t) for t in tasks]
    summary = aggregate(rows)
    write_csv(out / "aggregate.csv", summary, AGG_COLUMNS)
    return summary


def load_runs(run_dir: Path, config_hash: Optional[str] = None) -> list[dict]:
    runs = []
    for p in sorted(Path(run_dir).glob("*.json")):
        r = json.loads(p.read_text())
        if config_hash is not None and r["config_hash"] != config_hash:
            continue
        r["_path"] = str(p)
        runs.append(r)
    return runs


def diagnose_run(run: dict, rng, trials: int, c_k: float, n_init: int, n_par: int,
                 n_intervals: int):
    """Partition comparison and z_k series for one persisted tree run."""
    if run.get("tree") is None:
        raise FileNotFoundError(f"run {run['_path']} has no tree snapshot")
    arrays = np.load(Path(run["_path"]).with_suffix(".npz"))
    Z, values = arrays["features"], arrays["values"]
    tree = PartitionTree.from_dict(run["tree"], Z, values)
    comp = diagnostics.compare_random_partition(tree, rng, trials, X=arrays["x"])
    zk = diagnostics.zk_series(values, n_init, n_par, Z.shape[1], c_k, n_intervals)
    return comp, zk


PARTITION_COLUMNS = ("method", "env", "seed", "n_nodes", "learned_l", "random_l",
                     "learned_c", "random_c", "frac_l_better", "frac_c_better",
                     "config_hash")
NODE_COLUMNS = ("method", "seed", "node", "depth", "n", "metric", "learned", "random")
ZK_COLUMNS = ("method", "seed", "interval", "z_k", "c_k")


def run_diagnostics(config: RunConfig, out: Optional[Path] = None) -> dict:
    """Learned-vs-random partition tables and z_k series from persisted runs."""
    out = Path(out) if out else config.resolved_output_dir()
    dcfg = config.diagnostics
    runs = [r for r in load_runs(out / "runs", config.hash()) if r["algorithm"] in TREE_METHODS]
    if not runs:
        raise FileNotFoundError(f"no tree runs for this config under {out / 'runs'}")
    per_run, nodes, zks = [], [], []
    by_key = {m.key: m for m in config.methods}
    for r in runs:
        mcfg = by_key[r["method"]]
        env = make_env(config.environment.name, r["seed"], config.environment.params)
        b = mcfg.budget.resolve(env.n_init)
        comp, zk = diagnose_run(r, seeded_rng(r["seed"]), dcfg.trials, dcfg.c_k, b.n_init,
                                b.n_par, dcfg.n_intervals)
        per_run.append({"method": r["method"], "env": r["env"], "seed": r["seed"],
                        "n_nodes": comp.n_nodes,
                        "learned_l": comp.mean_learned_l, "random_l": comp.mean_random_l,
                        "learned_c": comp.mean_learned_c, "random_c": comp.mean_random_c,
                        "frac_l_better": comp.frac_l_better,
                        "frac_c_better": comp.frac_c_better,
                        "config_hash": r["config_hash"]})
        for row in comp.rows:
            for metric in ("l", "c"):
                nodes.append({"method": r["method"], "seed": r["seed"], "node": row["node"],
                              "depth": row["depth"], "n": row["n"], "metric": metric,
                              "learned": row[f"learned_{metric}"],
                              "random": row[f"random_{metric}"]})
        for i, z in enumerate(zk):
            zks.append({"method": r["method"], "seed": r["seed"], "interval": i,
                        "z_k": float(z), "c_k": dcfg.c_k})
    write_csv(out / "partition_runs.csv", per_run, PARTITION_COLUMNS)
    write_csv(out / "partition_nodes.csv", nodes, NODE_COLUMNS)
    write_csv(out / "zk_series.csv", zks, ZK_COLUMNS)
    valid = [r for r in per_run if r["n_nodes"] > 0]
    summary = {
        "config_hash": config.hash(),
        "n_runs": len(per_run),
        "frac_runs_l_better": float(np.mean([r["learned_l"] < r["random_l"] for r in valid]))
        if valid else float("nan"),
        "frac_runs_c_better": float(np.mean([r["learned_c"] < r["random_c"] for r in valid]))
        if valid else float("nan"),
    }
    (out / "diagnostics.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    return summary


def run_sweep(config: RunConfig, jobs: int = 1, out: Optional[Path] = None) -> list[dict]:
    """Expand the ``sweep`` grid into labelled method copies and run them as one batch."""
    grid = config.sweep
    methods = []
    for m in config.methods:
        cps = grid.cp or [m.budget.cp]
        sigmas = grid.sigma or [m.sigma]
        for cp in cps:
            for sigma in sigmas:
                budget = m.budget.model_copy(update={"cp": cp})
                label = f"{m.key}_cp{cp:g}_sigma{sigma:g}"
                methods.append(m.model_copy(update={"budget": budget, "sigma": sigma,
                                                    "label": label}))
    expanded = config.model_copy(update={"methods": methods})
    return run_batch(RunConfig.model_validate(expanded.to_dict()), jobs, out)


THEORY_EXPERIMENTS = ("coverage", "fbound", "slope", "split", "bandit")


def run_theory(experiment: str, out: Path, seed: int = 0, d: int = 2, T: int = 10_000,
               runs: int = 100) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    rng = seeded_rng(seed)
    if experiment == "coverage":
        rows = []
        for name, spec in (("uniform", theorylab.uniform_values()),
                           ("power_law", theorylab.power_law(1.0, d))):
            for delta in (0.05, 0.2, 0.5):
                for n in (1, 5, 50):
                    cov = theorylab.coverage(spec, delta, n, 100_000, rng)
                    rows.append({"spec": name, "delta": delta, "n": n, "coverage": cov,
                                 "target": 1 - delta})
        write_csv(out / "coverage.csv", rows, ("spec", "delta", "n", "coverage", "target"))
        result = {"max_abs_error": max(abs(r["coverage"] - r["target"]) for r in rows)}
    elif experiment == "fbound":
        rows = []
        for spec in default_specs():
            for delta in np.linspace(max(0.01, spec.z), 0.9, 12):
                for j in range(1, 101):
                    lhs, rhs, ok = theorylab.check_fbound(spec, float(delta), j)
                    rows.append({"family": spec.family, "delta": float(delta), "j": j,
                                 "lhs": lhs, "rhs": rhs, "holds": ok})
        write_csv(out / "fbound.csv", rows, ("family", "delta", "j", "lhs", "rhs", "holds"))
        result = {"violations": sum(not r["holds"] for r in rows), "checks": len(rows)}
    elif experiment == "slope":
        grid = np.unique(np.geomspace(100, T, 7).astype(int))
        slope = theorylab.regret_slope([theorylab.power_law(1.0, d)], grid, runs=runs, rng=rng,
                                       tail=4)
        result = {"d": d, "slope": slope, "theory": (d - 1) / d, "T_grid": grid.tolist()}
    elif experiment == "split":
        parent, good, bad = split_family(d)
        means = theorylab.split_experiment(parent, good, bad, T, rng=rng, runs=runs)
        result = dict(zip(("unsplit", "split_learned", "split_random"), means))
    elif experiment == "bandit":
        parent, good, bad = split_family(d)
        rows = []
        for run in range(runs):
            rec = theorylab.run_bandit([good, bad], T, rng=rng)
            for k in range(rec.K):
                rows.append({"T": T, "run": run, "region": k, "n_k": int(rec.counts[k]),
                             "R": rec.total})
        write_csv(out / "bandit.csv", rows, ("T", "run", "region", "n_k", "R"))
        result = {"mean_regret": float(np.mean([r["R"] for r in rows[::2]]))}
    else:
        raise ValueError(f"unknown experiment {experiment!r}")
    (out / f"theory_{experiment}.json").write_text(json.dumps(result, indent=1, sort_keys=True))
    return result


def default_specs() -> list:
    """Five valid specs with declared dilution parameters."""
    return [theorylab.uniform_values(), theorylab.power_law(0.5, 2),
            theorylab.power_law(2.0, 4), theorylab.truncated_exponential(4.0, 1.0),
            theorylab.heavy_tail(0.3, 1.0, 0.2)]


def split_family(d: int = 2):
    """Parent region and an informed split: a concentrated good child holding
    the optimum and a bad child with a positive gap."""
    return (theorylab.power_law(1.0, d), theorylab.power_law(0.3, d),
            theorylab.power_law(0.7, d, g_star=-0.5))


def _parse_seeds(text: str):
    if ":" in text:
        a, b = text.split(":")
        return SeedRange(start=int(a), count=int(b) - int(a))
    return [int(s) for s in text.split(",")]


def _with_overrides(config: RunConfig, args) -> RunConfig:
    update = {}
    if args.seeds:
        update["seeds"] = _parse_seeds(args.seeds)
    if getattr(args, "out", None):
        update["output_dir"] = args.out
    return config.model_copy(update=update) if update else config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plalam", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "diagnose", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--seeds", help="'start:stop' or comma-separated list")
        s.add_argument("--out")
        s.add_argument("--jobs", type=int, default=1)
    t = sub.add_parser("theory")
    t.add_argument("--experiment", choices=THEORY_EXPERIMENTS, required=True)
    t.add_argument("--out", default="theory")
    t.add_argument("--seeds", default="0")
    t.add_argument("--d", type=int, default=2)
    t.add_argument("--T", type=int, default=10_000)
    t.add_argument("--runs", type=int, default=100)
    t.add_argument("--jobs", type=int, default=1)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        if args.command == "theory":
            seed = int(args.seeds.split(",")[0].split(":")[0])
            res = run_theory(args.experiment, Path(args.out), seed, args.d, args.T, args.runs)
            print(json.dumps(res, sort_keys=True))
            return 0
        config = _with_overrides(load_config(args.config), args)
        # an explicit --out beats the environment override
        out = Path(args.out) if args.out else config.resolved_output_dir()
        if args.command == "run":
            summary = run_batch(config, args.jobs, out)
        elif args.command == "sweep":
            summary = run_sweep(config, args.jobs, out)
        else:
            print(json.dumps(run_diagnostics(config, out), sort_keys=True))
            return 0
        for row in summary:
            log.info("%s: success %.3f  best %.4f", row["method"], row["success_rate"],
                     row["mean_best"])
        return 0
    except (ValidationError, ValueError, FileNotFoundError, BudgetExhausted,
            NonFiniteObjective, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
