"""Deterministic 2-D point-mass navigation worlds.

Walls are axis-aligned rectangles ``(x0, y0, x1, y1)``; a zero-width
rectangle is a wall segment. Motion is kinematic: each step moves along the
clipped action vector and stops just short of the first wall it would
enter. There is no sliding along walls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..core import seeded_rng

CONTACT_EPS = 1e-6
GOAL_RADIUS = 0.5
FAR_BONUS_RADIUS = 1.0
MIN_REACH_REWARD = 0.8
STEP_PENALTY = 0.2

GOAL_KINDS = ("only", "near", "far")


@dataclass(frozen=True)
class NavWorld:
    name: str
    walls: np.ndarray  # (n_walls, 4) rectangles x0, y0, x1, y1
    start: np.ndarray
    goals: tuple  # ((point, kind), ...)
    step_size: float
    horizon: int
    terminate_on_goal: bool
    size: tuple = (0.0, 0.0)
    goal_radius: float = GOAL_RADIUS
    meta: dict = field(default_factory=dict)

    @property
    def goal_points(self) -> np.ndarray:
        return np.array([np.asarray(p, dtype=float) for p, _ in self.goals])

    def goal(self, kind: str) -> np.ndarray:
        for p, k in self.goals:
            if k == kind:
                return np.asarray(p, dtype=float)
        raise KeyError(kind)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "walls": self.walls.tolist(),
            "start": self.start.tolist(),
            "goals": [[list(map(float, p)), k] for p, k in self.goals],
            "step_size": self.step_size,
            "horizon": self.horizon,
            "terminate_on_goal": self.terminate_on_goal,
            "size": list(self.size),
            "goal_radius": self.goal_radius,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NavWorld":
        return cls(
            name=d["name"],
            walls=np.asarray(d["walls"], dtype=float).reshape(-1, 4),
            start=np.asarray(d["start"], dtype=float),
            goals=tuple((np.asarray(p, dtype=float), k) for p, k in d["goals"]),
            step_size=float(d["step_size"]),
            horizon=int(d["horizon"]),
            terminate_on_goal=bool(d["terminate_on_goal"]),
            size=tuple(d.get("size", (0.0, 0.0))),
            goal_radius=float(d.get("goal_radius", GOAL_RADIUS)),
            meta=dict(d.get("meta", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "NavWorld":
        return cls.from_dict(json.loads(text))


# -- kernels ---------------------------------------------------------------

@njit(cache=True)
def _move(walls, px, py, dx, dy, step):
    norm = math.sqrt(dx * dx + dy * dy)
    if norm > step:
        dx *= step / norm
        dy *= step / norm
        norm = step
    if norm == 0.0:
        return px, py
    s_hit = 1.0
    hit = False
    for k in range(walls.shape[0]):
        tmin = -np.inf
        tmax = np.inf
        miss = False
        # slab test along x then y
        for ax in range(2):
            p = px if ax == 0 else py
            d = dx if ax == 0 else dy
            lo = walls[k, ax]
            hi = walls[k, ax + 2]
            if d == 0.0:
                if p < lo or p > hi:
                    miss = True
                    break
            else:
                t1 = (lo - p) / d
                t2 = (hi - p) / d
                if t1 > t2:
                    t1, t2 = t2, t1
                if t1 > tmin:
                    tmin = t1
                if t2 < tmax:
                    tmax = t2
        if miss or tmin > tmax or tmax < 0.0 or tmin > 1.0:
            continue
        t_enter = tmin if tmin > 0.0 else 0.0
        if t_enter <= s_hit:
            s_hit = t_enter
            hit = True
    if not hit:
        return px + dx, py + dy
    s = s_hit - CONTACT_EPS / norm
    if s < 0.0:
        s = 0.0
    return px + s * dx, py + s * dy


@njit(cache=True)
def _simulate_batch(walls, start, actions, step, goal, radius, terminate):
    # actions: (batch, horizon, 2) raw displacements
    nb, horizon, _ = actions.shape
    pos = np.empty((nb, horizon, 2))
    reached = np.full(nb, -1, dtype=np.int64)
    r2 = radius * radius
    for b in range(nb):
        px = start[0]
        py = start[1]
        done = False
        for t in range(horizon):
            if not done:
                px, py = _move(walls, px, py, actions[b, t, 0], actions[b, t, 1], step)
                if terminate:
                    ex = px - goal[0]
                    ey = py - goal[1]
                    if ex * ex + ey * ey <= r2:
                        reached[b] = t + 1
                        done = True
            pos[b, t, 0] = px
            pos[b, t, 1] = py
    return pos, reached


def nav_step(world: NavWorld, pos, action) -> np.ndarray:
    """Advance one step; the action is clipped to the world's step size."""
    x, y = _move(world.walls, float(pos[0]), float(pos[1]), float(action[0]),
                 float(action[1]), world.step_size)
    return np.array([x, y])


def actions_from_vector(world: NavWorld, X: np.ndarray) -> np.ndarray:
    """Map normalized actions in [-1, 1]^(2H) to raw displacements.

    Each per-step pair is scaled by the step size and shrunk to the unit
    disc, so any vector in the box is a valid plan.
    """
    A = np.asarray(X, dtype=float).reshape(-1, world.horizon, 2)
    norm = np.maximum(1.0, np.linalg.norm(A, axis=-1, keepdims=True))
    return world.step_size * A / norm


def simulate(world: NavWorld, actions: np.ndarray):
    """Roll out raw ``(batch, H, 2)`` or ``(H, 2)`` actions.

    Returns ``(positions, steps_used)``; steps_used is -1 where the goal was
    not reached (or termination is disabled). Positions after termination
    stay at the stopping point.
    """
    A = np.asarray(actions, dtype=float)
    single = A.ndim == 2
    A = np.ascontiguousarray(A[None] if single else A)
    goal = world.goal_points[0] if world.terminate_on_goal else np.zeros(2)
    pos, reached = _simulate_batch(world.walls, world.start, A, world.step_size,
                                   goal, world.goal_radius, world.terminate_on_goal)
    return (pos[0], int(reached[0])) if single else (pos, reached)


def nav_reward(world: NavWorld, final_pos, steps_used: int = -1) -> float:
    """Terminal reward of a trajectory given its final position.

    Worlds with a single goal pay ``max(0.8, 1 - 0.2 * steps / H)`` once
    reached and the negated distance otherwise. Near/far worlds pay the
    negated distance to the closest goal plus a unit bonus within one unit
    of the far goal.
    """
    return float(_rewards(world, np.atleast_2d(final_pos),
                          np.atleast_1d(np.asarray(steps_used)))[0])


def _rewards(world: NavWorld, final: np.ndarray, reached: np.ndarray) -> np.ndarray:
    goals = world.goal_points
    dists = np.linalg.norm(final[:, None, :] - goals[None], axis=-1)
    if any(k == "far" for _, k in world.goals):
        far = [i for i, (_, k) in enumerate(world.goals) if k == "far"][0]
        return -dists.min(axis=1) + (dists[:, far] <= FAR_BONUS_RADIUS)
    out = -dists[:, 0]
    hit = reached >= 0
    frac = reached[hit] / world.horizon
    out[hit] = np.maximum(MIN_REACH_REWARD, 1.0 - STEP_PENALTY * frac)
    return out


def is_success(world: NavWorld, final: np.ndarray, reached: np.ndarray) -> np.ndarray:
    final = np.atleast_2d(final)
    if any(k == "far" for _, k in world.goals):
        d = np.linalg.norm(final - world.goal("far"), axis=-1)
        return d <= FAR_BONUS_RADIUS
    return np.atleast_1d(reached) >= 0


def inside_any_wall(world: NavWorld, P: np.ndarray) -> np.ndarray:
    """True where a point lies strictly inside a wall rectangle."""
    P = np.atleast_2d(P)
    W = world.walls
    inside = ((P[:, None, 0] > W[None, :, 0]) & (P[:, None, 0] < W[None, :, 2])
              & (P[:, None, 1] > W[None, :, 1]) & (P[:, None, 1] < W[None, :, 3]))
    return inside.any(axis=1)


# -- world builders ----------------------------------------------------------

def _frame(width: float, height: float, t: float = 1.0) -> list:
    return [
        (-t, -t, width + t, 0.0),
        (-t, height, width + t, height + t),
        (-t, 0.0, 0.0, height),
        (width, 0.0, width + t, height),
    ]


def maze_layout(rng: np.random.Generator, rows: int = 3, cols: int = 3):
    """Recursive-backtracking spanning tree from the top-left room.

    Returns ``(openings, order)``: the set of opened room pairs and the
    order in which rooms were first visited. Room (0, 0) is top-left.
    """
    visited = {(0, 0)}
    order = [(0, 0)]
    openings = set()
    stack = [(0, 0)]
    while stack:
        r, c = stack[-1]
        nbrs = [(r + dr, c + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                if 0 <= r + dr < rows and 0 <= c + dc < cols and (r + dr, c + dc) not in visited]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[int(rng.integers(len(nbrs)))]
        openings.add(tuple(sorted([(r, c), nxt])))
        visited.add(nxt)
        order.append(nxt)
        stack.append(nxt)
    return openings, order


def maze_s3(seed: int, room: float = 3.0, wall: float = 0.25) -> NavWorld:
    """3x3 maze of square rooms separated by thin walls.

    Row 0 is the top row, drawn at the largest y. The goal sits at the
    centre of the last room reached by the maze construction.
    """
    rng = seeded_rng(seed)
    openings, order = maze_layout(rng)
    pitch = room + wall
    size = 3 * room + 2 * wall

    def origin(r, c):
        return c * pitch, size - (r + 1) * room - r * wall

    walls = _frame(size, size)
    for r in range(3):
        for c in range(3):
            x0, y0 = origin(r, c)
            if c < 2 and ((r, c), (r, c + 1)) not in openings:
                walls.append((x0 + room, y0, x0 + pitch, y0 + room))
            if r < 2 and ((r, c), (r + 1, c)) not in openings:
                walls.append((x0, y0 - wall, x0 + room, y0))
            if r < 2 and c < 2:
                walls.append((x0 + room, y0 - wall, x0 + pitch, y0))
    sx, sy = origin(0, 0)
    gx, gy = origin(*order[-1])
    return NavWorld(
        name="maze_s3",
        walls=np.array(walls, dtype=float),
        start=np.array([sx + room / 2, sy + room / 2]),
        goals=((np.array([gx + room / 2, gy + room / 2]), "only"),),
        step_size=0.3,
        horizon=216,
        terminate_on_goal=True,
        size=(size, size),
        meta={"openings": sorted([list(map(list, o)) for o in openings]),
              "goal_room": list(order[-1])},
    )


def four_rooms(seed: int) -> NavWorld:
    """14x14 space with a central cross; rooms connect via outer corridors."""
    rng = seeded_rng(seed)
    size = 14.0
    walls = _frame(size, size)
    walls += [(6.0, 2.0, 8.0, 12.0), (2.0, 6.0, 12.0, 8.0)]
    corner = int(rng.integers(4))
    lo = np.array([0.5 if corner in (0, 2) else 8.5, 0.5 if corner in (0, 1) else 8.5])
    start = lo + 5.0 * rng.random(2)
    goal = size - start
    return NavWorld(
        name="four_rooms",
        walls=np.array(walls, dtype=float),
        start=start,
        goals=((goal, "only"),),
        step_size=0.2,
        horizon=250,
        terminate_on_goal=True,
        size=(size, size),
    )


def select_obj(seed: int) -> NavWorld:
    """Open 12x12 space with a near decoy goal and a far rewarding goal."""
    rng = seeded_rng(seed)
    size = 12.0
    centre = np.array([size / 2, size / 2])
    while True:
        a = rng.uniform(4.0, 4.5)
        b = rng.uniform(5.0, 5.5)
        sep = rng.uniform(3.0, 4.0)
        cos = (a * a + b * b - sep * sep) / (2 * a * b)
        if abs(cos) <= 1.0:
            break
    theta = rng.uniform(0.0, 2 * np.pi)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    phi = theta + sign * np.arccos(cos)
    near = centre + a * np.array([np.cos(theta), np.sin(theta)])
    far = centre + b * np.array([np.cos(phi), np.sin(phi)])
    return NavWorld(
        name="select_obj",
        walls=np.array(_frame(size, size), dtype=float),
        start=centre,
        goals=((near, "near"), (far, "far")),
        step_size=0.05,
        horizon=200,
        terminate_on_goal=False,
        size=(size, size),
    )


WORLDS = {"maze_s3": maze_s3, "four_rooms": four_rooms, "select_obj": select_obj}
