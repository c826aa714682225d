"""Deterministic gridworld dynamics, trajectories, and trajectory features.

Cells are (x, y) pairs with (0, 0) at the bottom-left. Moves are clamped
at walls and obstacle cells are never entered, so the successor function
is total on free cells. A trajectory is a finite (state, action) sequence;
the feature map condenses it into a fixed-length vector so a reward can be
scored as a dot product against a weight vector.

Everything here is a pure function of its inputs; there is no shared
mutable state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

Cell = tuple[int, int]

ACTIONS = ("up", "down", "left", "right", "stay")

_MOVES: dict[str, tuple[int, int]] = {
    "up": (0, 1),
    "down": (0, -1),
    "left": (-1, 0),
    "right": (1, 0),
    "stay": (0, 0),
}

#: Names of the default feature components, in order.
FEATURE_NAMES = ("goal_distance", "path_length", "obstacle_proximity", "goal_reached")

#: Dimension of the default feature map.
DEFAULT_FEATURE_DIM = len(FEATURE_NAMES)


@dataclass(frozen=True)
class GridWorld:
    """A rectangular grid with obstacle cells, a goal cell, and a horizon.

    The horizon bounds the number of states in any trajectory. It must be
    at least 2 so that at least one move is ever possible.
    """

    width: int
    height: int
    obstacles: frozenset[Cell]
    goal: Cell
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "obstacles", frozenset(tuple(c) for c in self.obstacles))
        object.__setattr__(self, "goal", tuple(self.goal))
        if self.width < 1 or self.height < 1:
            raise DomainError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if self.horizon < 2:
            raise DomainError(f"horizon must be >= 2, got {self.horizon}")
        for cell in self.obstacles:
            if not self.in_bounds(cell):
                raise DomainError(f"obstacle {cell} out of bounds")
        if not self.in_bounds(self.goal):
            raise DomainError(f"goal {self.goal} out of bounds")
        if self.goal in self.obstacles:
            raise DomainError(f"goal {self.goal} is an obstacle")

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell: Cell) -> bool:
        """True if the cell is in bounds and not an obstacle."""
        return self.in_bounds(cell) and cell not in self.obstacles

    def free_cells(self) -> list[Cell]:
        """All free cells in row-major order (deterministic)."""
        return [
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if (x, y) not in self.obstacles
        ]

    def obstacle_adjacent_cells(self) -> frozenset[Cell]:
        """Free cells sharing an edge with at least one obstacle."""
        adjacent = set()
        for (ox, oy) in self.obstacles:
            for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                cell = (ox + dx, oy + dy)
                if self.is_free(cell):
                    adjacent.add(cell)
        return frozenset(adjacent)


def step(world: GridWorld, state: Cell, action: str) -> Cell:
    """Deterministic successor of ``state`` under ``action``.

    Moves that would leave the grid or enter an obstacle return the input
    state unchanged. The input state itself must be a free in-bounds cell.
    """
    state = tuple(state)
    if not world.is_free(state):
        raise DomainError(f"state {state} is not a free cell")
    if action not in _MOVES:
        raise DomainError(f"unknown action {action!r}")
    dx, dy = _MOVES[action]
    target = (state[0] + dx, state[1] + dy)
    return target if world.is_free(target) else state


@dataclass(frozen=True)
class Trajectory:
    """An ordered (state, action) sequence; the unit humans evaluate.

    The final pair's action is always ``stay`` so a length-(T+1) trajectory
    is self-contained. Self-transitions are canonically labelled ``stay``
    (a clamped move and an explicit stay produce the same successor, so
    only one label is kept).
    """

    steps: tuple[tuple[Cell, str], ...]

    @classmethod
    def from_states(cls, states: Sequence[Cell]) -> "Trajectory":
        """Build a trajectory from a state path, deriving canonical actions."""
        if len(states) < 1:
            raise DomainError("trajectory needs at least one state")
        steps = []
        for i, cell in enumerate(states[:-1]):
            nxt = states[i + 1]
            delta = (nxt[0] - cell[0], nxt[1] - cell[1])
            for action, move in _MOVES.items():
                if move == delta:
                    steps.append((tuple(cell), action))
                    break
            else:
                raise DomainError(f"states {cell} -> {nxt} are not one move apart")
        steps.append((tuple(states[-1]), "stay"))
        return cls(tuple(steps))

    @property
    def states(self) -> tuple[Cell, ...]:
        return tuple(s for s, _ in self.steps)

    @property
    def start_state(self) -> Cell:
        return self.steps[0][0]

    @property
    def final_state(self) -> Cell:
        return self.steps[-1][0]

    @property
    def n_moves(self) -> int:
        return len(self.steps) - 1

    def __len__(self) -> int:
        return len(self.steps)

    def validate(self, world: GridWorld) -> None:
        """Raise DomainError unless the trajectory is feasible in ``world``."""
        if len(self.steps) < 1:
            raise DomainError("empty trajectory")
        if len(self.steps) > world.horizon:
            raise DomainError(
                f"trajectory has {len(self.steps)} states, horizon is {world.horizon}"
            )
        for state, action in self.steps:
            if not world.is_free(state):
                raise DomainError(f"trajectory passes through blocked cell {state}")
            if action not in _MOVES:
                raise DomainError(f"unknown action {action!r}")
        for (state, action), (nxt, _) in zip(self.steps, self.steps[1:]):
            if step(world, state, action) != nxt:
                raise DomainError(f"inconsistent step {state} --{action}--> {nxt}")
        if self.steps[-1][1] != "stay":
            raise DomainError("final action must be 'stay'")


def features(world: GridWorld, traj: Trajectory) -> np.ndarray:
    """Default feature map: four components, each in [-1, 1].

    1. negated Manhattan distance from the final state to the goal,
       normalized by the largest distance the grid admits;
    2. negated path length, normalized by the horizon (a single-state
       trajectory scores 0);
    3. negated fraction of visited states that touch an obstacle;
    4. indicator that the trajectory ends on the goal.
    """
    traj.validate(world)
    max_dist = max(1, (world.width - 1) + (world.height - 1))
    fx, fy = traj.final_state
    gx, gy = world.goal
    goal_dist = abs(fx - gx) + abs(fy - gy)

    adjacent = world.obstacle_adjacent_cells()
    touch_count = sum(1 for s in traj.states if s in adjacent)

    return np.array(
        [
            -goal_dist / max_dist,
            -traj.n_moves / (world.horizon - 1),
            -touch_count / len(traj.steps),
            1.0 if traj.final_state == world.goal else 0.0,
        ],
        dtype=np.float64,
    )


def _successors(world: GridWorld, state: Cell) -> list[Cell]:
    """Distinct successor cells in fixed action order (dedupes clamped moves)."""
    seen: list[Cell] = []
    for action in ACTIONS:
        nxt = step(world, state, action)
        if nxt not in seen:
            seen.append(nxt)
    return seen


def _walk(
    world: GridWorld,
    path: list[Cell],
    waypoints: Sequence[Cell],
    matched: int,
    max_states: int,
) -> Iterator[Trajectory]:
    if matched < len(waypoints) and path[-1] == waypoints[matched]:
        matched += 1
    if matched == len(waypoints):
        yield Trajectory.from_states(path)
    if len(path) < max_states:
        for nxt in _successors(world, path[-1]):
            path.append(nxt)
            yield from _walk(world, path, waypoints, matched, max_states)
            path.pop()


def enumerate_trajectories(
    world: GridWorld,
    start: Cell,
    waypoints: Sequence[Cell] = (),
    max_count: int = 1000,
    seed: int = 0,
    max_states: int | None = None,
) -> list[Trajectory]:
    """All trajectories from ``start`` visiting ``waypoints`` in order.

    Trajectories of every length from 1 up to the horizon qualify, provided
    their state path contains the waypoints as a subsequence (one state per
    waypoint). If more than ``max_count`` exist, a uniformly seeded sample
    of ``max_count`` is returned, preserving enumeration order. Returns []
    when no trajectory can satisfy the waypoints.

    ``max_states`` overrides the world horizon as the length cap (it may go
    below the horizon floor of 2, down to 1).
    """
    start = tuple(start)
    if not world.is_free(start):
        raise DomainError(f"start {start} is not a free cell")
    if max_count < 1:
        raise DomainError(f"max_count must be >= 1, got {max_count}")
    waypoints = [tuple(w) for w in waypoints]
    for w in waypoints:
        if not world.in_bounds(w):
            raise DomainError(f"waypoint {w} out of bounds")
    cap = world.horizon if max_states is None else max_states
    if cap < 1:
        raise DomainError(f"max_states must be >= 1, got {max_states}")
    if any(not world.is_free(w) for w in waypoints):
        return []

    found = list(_walk(world, [start], waypoints, 0, cap))
    if len(found) <= max_count:
        return found
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(len(found), size=max_count, replace=False))
    return [found[i] for i in keep]
