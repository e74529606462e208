import numpy as np
import pytest
from hypothesis import given, strategies as st

from plalam.core import seeded_rng
from plalam.envs import ENV_NAMES, make_env, multimodal_bench, nav_reward, nav_step, simulate
from plalam.envs.bench import twin_attractors
from plalam.envs.nav import NavWorld, inside_any_wall, maze_layout, maze_s3
from plalam.envs.seqorder import SeqOrderWorld, seqorder_reward


def _open_world(walls=()):
    return NavWorld("test", np.array(walls, dtype=float).reshape(-1, 4), np.zeros(2),
                    ((np.array([5.0, 0.0]), "only"),), 0.3, 10, True)


def test_step_open_space():
    assert np.allclose(nav_step(_open_world(), (0, 0), (0.3, 0)), (0.3, 0))


def test_step_stops_at_wall():
    w = _open_world([(1.0, -1.0, 2.0, 1.0)])
    p = nav_step(w, (0.9, 0.0), (0.3, 0.0))
    assert p[0] == pytest.approx(1 - 1e-6, abs=1e-12) and p[1] == 0.0


def test_step_clipped():
    p = nav_step(_open_world(), (0, 0), (0.6, 0))
    assert np.linalg.norm(p) == pytest.approx(0.3, abs=1e-15)


def test_wall_impermeability_maze():
    world = maze_s3(0)
    rng = seeded_rng(0)
    lo, hi = -0.1, world.size[0] + 0.1
    pos = rng.uniform(lo, hi, size=(300_000, 2))
    pos = pos[~inside_any_wall(world, pos)][:100_000]
    assert len(pos) == 100_000
    acts = rng.normal(scale=0.4, size=(len(pos), 2))
    out = np.array([nav_step(world, p, a) for p, a in zip(pos, acts)])
    assert not inside_any_wall(world, out).any()


def test_maze_spanning_tree():
    for seed in range(20):
        openings, order = maze_layout(seeded_rng(seed))
        assert len(openings) == 8 and len(set(order)) == 9 and order[0] == (0, 0)
        # connectivity via breadth-first search over openings
        adj = {r: set() for r in order}
        for a, b in openings:
            adj[a].add(b)
            adj[b].add(a)
        seen, todo = {(0, 0)}, [(0, 0)]
        while todo:
            for nb in adj[todo.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        assert len(seen) == 9
    assert maze_layout(seeded_rng(3)) == maze_layout(seeded_rng(3))


def test_world_geometry():
    m = make_env("maze_s3", 1).world
    assert (m.step_size, m.horizon, m.terminate_on_goal) == (0.3, 216, True)
    f = make_env("four_rooms", 1).world
    assert (f.step_size, f.horizon) == (0.2, 250)
    assert np.allclose(f.start + f.goal_points[0], 14.0)
    for seed in range(30):
        s = make_env("select_obj", seed).world
        near, far = s.goal("near"), s.goal("far")
        assert (s.step_size, s.horizon, s.terminate_on_goal) == (0.05, 200, False)
        assert np.allclose(s.start, 6.0)
        assert 4 <= np.linalg.norm(near - s.start) <= 4.5
        assert 5 <= np.linalg.norm(far - s.start) <= 5.5
        assert 3 <= np.linalg.norm(near - far) <= 4 + 1e-12


def test_select_obj_far_goal_reward():
    w = make_env("select_obj", 0).world
    assert nav_reward(w, w.goal("far")) == 1.0
    assert nav_reward(w, w.goal("near")) == 0.0


def test_unmoved_reward_and_full_horizon():
    env = make_env("four_rooms", 2)
    w = env.world
    pos, reached = simulate(w, np.zeros((w.horizon, 2)))
    assert reached == -1
    assert env.evaluate(np.zeros(env.dim)) == pytest.approx(-np.linalg.norm(w.start - w.goal_points[0]))
    m = make_env("maze_s3", 0).world
    assert nav_reward(m, m.goal_points[0], m.horizon) == pytest.approx(0.8)
    assert nav_reward(m, m.goal_points[0], 0) == 1.0


def test_reward_determinism():
    env = make_env("maze_s3", 4)
    X = seeded_rng(0).uniform(-1, 1, size=(20, env.dim))
    assert np.array_equal(env.evaluate_batch(X), env.evaluate_batch(X.copy()))
    assert env.evaluate(X[3]) == env.evaluate_batch(X)[3]


def test_nav_world_json_round_trip():
    w = make_env("maze_s3", 5).world
    back = type(w).from_json(w.to_json())
    assert np.array_equal(back.walls, w.walls) and back.horizon == w.horizon


def test_seqorder_examples():
    empty = SeqOrderWorld(8, 6, (), 0.5)
    assert seqorder_reward(empty, [1, 2, 3, 4, 5, 6]) == pytest.approx(-3.0)
    w = SeqOrderWorld(8, 5, (((2, 5), 10.0),), 0.0)
    assert seqorder_reward(w, [2, 5, 0, 0, 0]) == 10.0
    assert seqorder_reward(w, [5, 2, 0, 0, 0]) == 0.0
    w2 = SeqOrderWorld(8, 6, (((2, 5), 10.0), ((1, 3, 4), 6.0)), 0.0)
    assert seqorder_reward(w2, [1, 2, 3, 5, 4, 0]) == 16.0
    with pytest.raises(ValueError):
        seqorder_reward(w, [9, 0, 0, 0, 0])


@given(st.permutations([0, 1, 2]), st.lists(st.integers(3, 7), min_size=2, max_size=2))
def test_seqorder_permutation_sensitive(perm, fill):
    w = SeqOrderWorld(8, 5, (((0, 1, 2), 5.0),), 0.0)
    r = seqorder_reward(w, list(perm) + fill)
    assert r == (5.0 if list(perm) == [0, 1, 2] else 0.0)


def test_bench_examples():
    assert multimodal_bench("rastrigin", np.zeros(3)) == 0.0
    assert multimodal_bench("ackley", np.zeros(3)) == pytest.approx(0.0, abs=1e-12)
    a, b = twin_attractors(2)
    assert multimodal_bench("deceptive_twin", b) == 1.0
    assert multimodal_bench("deceptive_twin", a) == 0.0


@pytest.mark.parametrize("name", ENV_NAMES)
def test_env_interface(name):
    env = make_env(name, 0)
    X = seeded_rng(1).uniform(env.bounds[:, 0], env.bounds[:, 1], size=(4, env.dim))
    v = env.evaluate_batch(X)
    assert v.shape == (4,) and np.all(np.isfinite(v))
    assert env.success_batch(X).dtype == bool
    z = env.partition_encoder().encode_many(X)
    assert len(z) == 4


def test_unknown_env():
    with pytest.raises(ValueError):
        make_env("mujoco")
