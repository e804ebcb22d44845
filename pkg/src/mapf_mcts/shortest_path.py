"""Single-agent shortest paths and moving subgoals.

Paths are computed on the static map with unit edge costs. Distances come
from a breadth-first sweep rooted at the goal; the path itself is the greedy
walk that always takes the first distance-decreasing direction in the fixed
order UP, DOWN, LEFT, RIGHT. That makes every path, and everything derived
from one (subgoals, difficulty scores), deterministic and reproducible.

A subgoal is the cell a few steps ahead of an agent along its own path,
ignoring other agents. It is re-placed whenever the agent reaches it or
drifts more than its radius away (Manhattan), and is consumed by planners
that reward intermediate progress.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .grid_world import (
    DELTA,
    MOVE_ORDER,
    Cell,
    GridMap,
    StepEvents,
    ValidationError,
)


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class DistanceField:
    """Exact step distances from every cell to one goal cell.

    `occupied` cells are treated as blocked. Unreachable cells have distance
    None. `step_toward` gives the canonical next cell of the greedy walk.
    """

    __slots__ = ("grid", "goal", "dist")

    def __init__(self, grid: GridMap, goal: Cell, occupied: Iterable[Cell] = ()):
        if grid.is_blocked(goal):
            raise ValidationError(f"goal {goal} is blocked or out of bounds")
        self.grid = grid
        self.goal = goal
        width, height = grid.width, grid.height
        blocked = list(grid.blocked)
        for cell in occupied:
            if grid.in_bounds(cell):
                blocked[cell[0] * width + cell[1]] = True
        dist: list[int | None] = [None] * (width * height)
        goal_idx = goal[0] * width + goal[1]
        if not blocked[goal_idx]:
            dist[goal_idx] = 0
            queue = deque([goal])
            while queue:
                r, c = queue.popleft()
                d = dist[r * width + c] + 1
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < height and 0 <= nc < width:
                        idx = nr * width + nc
                        if not blocked[idx] and dist[idx] is None:
                            dist[idx] = d
                            queue.append((nr, nc))
        self.dist = dist

    def distance(self, cell: Cell) -> int | None:
        if not self.grid.in_bounds(cell):
            return None
        return self.dist[cell[0] * self.grid.width + cell[1]]

    def step_toward(self, cell: Cell) -> Cell | None:
        """Next cell of the canonical walk from `cell`, None at/below goal."""
        d = self.distance(cell)
        if d is None or d == 0:
            return None
        width = self.grid.width
        for action in MOVE_ORDER:
            dr, dc = DELTA[action]
            nr, nc = cell[0] + dr, cell[1] + dc
            if 0 <= nr < self.grid.height and 0 <= nc < width:
                if self.dist[nr * width + nc] == d - 1:
                    return (nr, nc)
        raise AssertionError("distance field inconsistent")  # pragma: no cover

    def walk(self, start: Cell, steps: int | None = None) -> list[Cell] | None:
        """Canonical path from `start`: the whole path, or just `steps` moves."""
        d = self.distance(start)
        if d is None:
            return None
        if steps is not None:
            d = min(d, steps)
        cells = [start]
        cur = start
        for _ in range(d):
            cur = self.step_toward(cur)
            cells.append(cur)
        return cells


@dataclass(frozen=True)
class Path:
    """Cells from start to goal inclusive; consecutive cells are 4-adjacent."""

    cells: tuple[Cell, ...]

    @property
    def n_moves(self) -> int:
        return len(self.cells) - 1

    def __len__(self) -> int:
        return len(self.cells)


def find_path(
    grid: GridMap,
    start: Cell,
    goal: Cell,
    occupied: Iterable[Cell] | None = None,
) -> Path | None:
    """Shortest path from start to goal, or None when no path exists.

    `occupied` cells are treated as blocked (the start itself is exempt, so a
    caller can pass all agent positions without excluding the moving agent).
    Ties between equally short paths are broken by preferring moves in the
    order UP, DOWN, LEFT, RIGHT at every step.
    """
    if grid.is_blocked(start):
        raise ValidationError(f"start {start} is blocked or out of bounds")
    if grid.is_blocked(goal):
        raise ValidationError(f"goal {goal} is blocked or out of bounds")
    if start == goal:
        return Path((start,))
    occ = set(occupied) if occupied else set()
    occ.discard(start)
    field = DistanceField(grid, goal, occ)
    cells = field.walk(start)
    if cells is None:
        return None
    return Path(tuple(cells))


@dataclass(frozen=True)
class SubgoalTracker:
    """Per-agent moving subgoal on the agent's own shortest path to its goal.

    Trackers are immutable; updates return a new tracker. The distance field
    is shared between copies (the map and goal never change mid-episode).
    """

    agent: int
    goal: Cell
    current_subgoal: Cell
    subgoal_radius: int = 2
    field: DistanceField = None  # type: ignore[assignment]  # shared, compare by identity

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubgoalTracker):
            return NotImplemented
        return (
            self.agent == other.agent
            and self.goal == other.goal
            and self.current_subgoal == other.current_subgoal
            and self.subgoal_radius == other.subgoal_radius
        )


def init_subgoal(
    grid: GridMap,
    agent: int,
    position: Cell,
    goal: Cell,
    radius: int = 2,
    field: DistanceField | None = None,
) -> SubgoalTracker | None:
    """Place the subgoal `radius` steps along the path from `position`.

    When the remaining path is shorter than the radius the subgoal is the
    goal itself. Returns None when the goal is unreachable from `position`.
    """
    if field is None:
        field = DistanceField(grid, goal)
    walk = field.walk(position, steps=radius)
    if walk is None:
        return None
    return SubgoalTracker(
        agent=agent,
        goal=goal,
        current_subgoal=walk[-1],
        subgoal_radius=radius,
        field=field,
    )


def update_subgoal(
    tracker: SubgoalTracker, grid: GridMap, position: Cell
) -> tuple[SubgoalTracker | None, bool]:
    """Advance the tracker for an agent now at `position`.

    Returns (tracker, reached): `reached` is True when the agent stands on
    its current subgoal. The subgoal is re-placed when reached or when the
    agent has drifted more than its radius away; otherwise the tracker is
    returned unchanged. Returns (None, reached) if no path exists anymore.
    """
    reached = position == tracker.current_subgoal
    if reached or manhattan(position, tracker.current_subgoal) > tracker.subgoal_radius:
        walk = tracker.field.walk(position, steps=tracker.subgoal_radius)
        if walk is None:
            return None, reached
        return replace(tracker, current_subgoal=walk[-1]), reached
    return tracker, False


Trackers = tuple["SubgoalTracker | None", ...]


def init_trackers(
    grid: GridMap,
    positions: Sequence[Cell],
    goals: Sequence[Cell],
    active: Sequence[bool],
    radius: int = 2,
    fields: Sequence[DistanceField] | None = None,
) -> Trackers:
    """One tracker per agent; None for inactive or pathless agents."""
    out: list[SubgoalTracker | None] = []
    for i, (pos, goal) in enumerate(zip(positions, goals)):
        if not active[i]:
            out.append(None)
            continue
        field = fields[i] if fields is not None else None
        out.append(init_subgoal(grid, i, pos, goal, radius=radius, field=field))
    return tuple(out)


def update_trackers(
    grid: GridMap,
    trackers: Trackers,
    was_active: Sequence[bool],
    new_positions: Sequence[Cell],
    events: StepEvents,
) -> Trackers:
    """Advance all trackers after one executed joint step.

    Fills `events.reached_subgoal` with the agents that stepped onto their
    subgoal. Agents that reached their goal this step lose their tracker (the
    goal reward supersedes any subgoal reward).
    """
    out = list(trackers)
    for i, tracker in enumerate(trackers):
        if tracker is None or not was_active[i]:
            continue
        if i in events.reached_goal:
            out[i] = None
            continue
        new_tracker, reached = update_subgoal(tracker, grid, new_positions[i])
        out[i] = new_tracker
        if reached:
            events.reached_subgoal.add(i)
    return tuple(out)
