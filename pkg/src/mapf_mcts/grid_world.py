"""Grid world for simultaneous multi-agent navigation episodes.

The map is a 4-connected grid of free and blocked cells. Each time step every
active agent either waits or moves to an adjacent free cell; moves into walls
or off the grid are illegal. All chosen actions are applied simultaneously:

* two or more agents moving into the same cell -> one uniformly random winner
  moves, the rest stay (an agent already waiting in the cell always keeps it);
* two agents exchanging cells in one step -> both stay;
* an agent whose destination ends up occupied by a non-moving agent stays too
  (denials propagate until a fixed point).

An agent that lands on its own goal is removed from the grid at the end of
the step. States are immutable values carrying their own counter-based random
stream, so a state can be stored and re-stepped later with identical results,
which is what tree planners rely on for cheap rollback.

Coordinates are `(row, col)` with row 0 at the top.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

from .seeding import MASK64, mix64, stream_draw

Cell = tuple[int, int]


class GridWorldError(Exception):
    """Base error for this module."""


class MapParseError(GridWorldError):
    """Raised when map text is malformed (reports line and column)."""


class ValidationError(GridWorldError):
    """Raised when agents or parameters violate a documented precondition."""


class ContractError(GridWorldError):
    """Raised when an operation is called outside its contract."""


class Action(IntEnum):
    WAIT = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4


# Canonical order used wherever move directions are tried deterministically.
MOVE_ORDER: tuple[Action, ...] = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

DELTA: dict[Action, Cell] = {
    Action.WAIT: (0, 0),
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}

JointAction = tuple[Action, ...]


class GridMap:
    """Static 4-connected grid; anything outside the bounds counts as blocked.

    Per-cell legal action tuples are precomputed once because planners query
    them millions of times per decision.
    """

    __slots__ = ("width", "height", "blocked", "_legal", "_dest")

    def __init__(self, width: int, height: int, blocked: Sequence[bool]):
        if width < 1 or height < 1:
            raise ValidationError(f"map must be at least 1x1, got {width}x{height}")
        if len(blocked) != width * height:
            raise ValidationError("blocked mask size does not match width*height")
        self.width = width
        self.height = height
        self.blocked = tuple(bool(b) for b in blocked)
        legal: dict[Cell, tuple[Action, ...]] = {}
        dest: dict[Cell, dict[Action, Cell]] = {}
        for r in range(height):
            for c in range(width):
                if self.blocked[r * width + c]:
                    continue
                acts = [Action.WAIT]
                dmap = {Action.WAIT: (r, c)}
                for a in MOVE_ORDER:
                    dr, dc = DELTA[a]
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < height and 0 <= nc < width and not self.blocked[nr * width + nc]:
                        acts.append(a)
                        dmap[a] = (nr, nc)
                legal[(r, c)] = tuple(acts)
                dest[(r, c)] = dmap
        self._legal = legal
        self._dest = dest

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_blocked(self, cell: Cell) -> bool:
        if not self.in_bounds(cell):
            return True
        return self.blocked[cell[0] * self.width + cell[1]]

    def is_free(self, cell: Cell) -> bool:
        return not self.is_blocked(cell)

    def legal_actions_at(self, cell: Cell) -> tuple[Action, ...]:
        """Actions legal at `cell` w.r.t. static obstacles only, WAIT first."""
        return self._legal[cell]

    def destination(self, cell: Cell, action: Action) -> Cell | None:
        """Target cell of `action` from `cell`, or None if illegal."""
        return self._dest[cell].get(action)

    def free_cells(self) -> list[Cell]:
        """All free cells in row-major order."""
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if not self.blocked[r * self.width + c]
        ]

    def to_text(self) -> str:
        rows = []
        for r in range(self.height):
            rows.append(
                "".join("#" if self.blocked[r * self.width + c] else "." for c in range(self.width))
            )
        return "\n".join(rows)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.blocked == other.blocked
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.blocked))

    def __repr__(self) -> str:
        n_blocked = sum(self.blocked)
        return f"GridMap({self.width}x{self.height}, {n_blocked} blocked)"


def load_map(text: str) -> GridMap:
    """Parse a map from rows of '.' (free) and '#' (blocked)."""
    lines = text.split("\n")
    # A single trailing newline is tolerated.
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise MapParseError("empty map text")
    width = len(lines[0])
    cells: list[bool] = []
    for ln, row in enumerate(lines, start=1):
        if len(row) != width:
            raise MapParseError(f"line {ln}: ragged row, expected width {width}, got {len(row)}")
        if width == 0:
            raise MapParseError(f"line {ln}: empty row")
        for col, ch in enumerate(row, start=1):
            if ch == ".":
                cells.append(False)
            elif ch == "#":
                cells.append(True)
            else:
                raise MapParseError(f"line {ln}, column {col}: illegal character {ch!r}")
    return GridMap(width, len(lines), cells)


@dataclass(frozen=True)
class AgentSpec:
    """Agent `id` starts at `start` and must reach `goal`."""

    id: int
    start: Cell
    goal: Cell


@dataclass(frozen=True, slots=True)
class EnvState:
    """Immutable environment state.

    `rng_seed`/`rng_calls` are the state of the deterministic stream used for
    conflict resolution, so stepping a stored state replays identically.
    """

    positions: tuple[Cell, ...]
    goals: tuple[Cell, ...]
    active: tuple[bool, ...]
    step: int
    rng_seed: int
    rng_calls: int

    @property
    def rng_state(self) -> tuple[int, int]:
        return (self.rng_seed, self.rng_calls)

    @property
    def n_agents(self) -> int:
        return len(self.positions)

    def active_ids(self) -> list[int]:
        return [i for i, a in enumerate(self.active) if a]

    def active_count(self) -> int:
        return sum(self.active)


# States are immutable, so a snapshot is just the state itself.
Snapshot = EnvState


@dataclass
class StepEvents:
    """What happened during one joint step.

    `reached_subgoal` is always empty straight out of `step`; subgoal tracking
    lives outside the environment and fills it in.
    """

    reached_goal: set[int] = field(default_factory=set)
    reached_subgoal: set[int] = field(default_factory=set)
    blocked_moves: set[int] = field(default_factory=set)


def validate_agents(grid: GridMap, agents: Sequence[AgentSpec]) -> None:
    """Check the agent roster preconditions, raising ValidationError."""
    if not agents:
        raise ValidationError("need at least one agent")
    for idx, spec in enumerate(agents):
        if spec.id != idx:
            raise ValidationError(f"agent at position {idx} has id {spec.id}; ids must be 0..n-1 in order")
        if grid.is_blocked(spec.start):
            raise ValidationError(f"agent {idx}: start {spec.start} is blocked or out of bounds")
        if grid.is_blocked(spec.goal):
            raise ValidationError(f"agent {idx}: goal {spec.goal} is blocked or out of bounds")
    starts = [a.start for a in agents]
    if len(set(starts)) != len(starts):
        raise ValidationError("agent starts must be pairwise distinct")
    goals = [a.goal for a in agents]
    if len(set(goals)) != len(goals):
        raise ValidationError("agent goals must be pairwise distinct")


def reset(grid: GridMap, agents: Sequence[AgentSpec], seed: int) -> EnvState:
    """Initial state: agents at their starts; an agent whose start equals its
    goal is removed immediately and counts as having reached it at step 0."""
    validate_agents(grid, agents)
    positions = tuple(a.start for a in agents)
    goals = tuple(a.goal for a in agents)
    active = tuple(a.start != a.goal for a in agents)
    return EnvState(
        positions=positions,
        goals=goals,
        active=active,
        step=0,
        rng_seed=mix64(seed & MASK64),
        rng_calls=0,
    )


def legal_actions(state: EnvState, grid: GridMap, agent: int) -> tuple[Action, ...]:
    """Static-obstacle legality only; other agents never restrict an action."""
    if not state.active[agent]:
        raise ContractError(f"agent {agent} is inactive")
    return grid.legal_actions_at(state.positions[agent])


def step(state: EnvState, action: Sequence[Action], grid: GridMap) -> tuple[EnvState, StepEvents]:
    """Apply one joint action; see the module docstring for conflict rules.

    Entries for inactive agents are ignored. Raises ContractError when the
    state is terminal (no active agents) or an illegal action is supplied.
    """
    n = len(state.positions)
    if len(action) != n:
        raise ContractError(f"joint action length {len(action)} != {n} agents")
    pos = state.positions
    dest_table = grid._dest
    act_ids = []
    desired: dict[int, Cell] = {}
    moving = []
    for i, is_active in enumerate(state.active):
        if not is_active:
            continue
        act_ids.append(i)
        dest = dest_table[pos[i]].get(action[i])
        if dest is None:
            raise ContractError(f"agent {i}: illegal action {action[i]!r} at {pos[i]}")
        desired[i] = dest
        if dest != pos[i]:
            moving.append(i)
    if not act_ids:
        raise ContractError("cannot step a state with no active agents")
    denied: set[int] = set()
    rng_seed = state.rng_seed
    rng_calls = state.rng_calls

    if moving:
        # Vertex conflicts: group claimants per target cell; a waiting occupant
        # always keeps its cell, otherwise one mover wins a uniform draw.
        claims: dict[Cell, list[int]] = {}
        for i in act_ids:
            claims.setdefault(desired[i], []).append(i)
        for cell, claimants in claims.items():
            if len(claimants) < 2:
                continue
            if any(desired[i] == pos[i] for i in claimants):
                for i in claimants:
                    if desired[i] != pos[i]:
                        denied.add(i)
            else:
                value = stream_draw(rng_seed, rng_calls)
                rng_calls += 1
                winner = claimants[value % len(claimants)]
                for i in claimants:
                    if i != winner:
                        denied.add(i)

        # Swap conflicts: both participants stay.
        pos_index = {pos[i]: i for i in act_ids}
        for i in moving:
            j = pos_index.get(desired[i])
            if j is not None and j > i and desired.get(j) == pos[i] and desired[j] != pos[j]:
                denied.add(i)
                denied.add(j)

        # Denial cascade: nobody may enter a cell that is still occupied by a
        # non-moving (waiting or denied) agent.
        while True:
            settled = {pos[i] for i in act_ids if desired[i] == pos[i] or i in denied}
            grew = False
            for i in moving:
                if i not in denied and desired[i] in settled:
                    denied.add(i)
                    grew = True
            if not grew:
                break

    new_positions = list(pos)
    for i in moving:
        if i not in denied:
            new_positions[i] = desired[i]

    reached = {i for i in act_ids if new_positions[i] == state.goals[i]}
    new_active = list(state.active)
    for i in reached:
        new_active[i] = False

    events = StepEvents(reached_goal=reached, blocked_moves=denied)
    new_state = EnvState(
        positions=tuple(new_positions),
        goals=state.goals,
        active=tuple(new_active),
        step=state.step + 1,
        rng_seed=rng_seed,
        rng_calls=rng_calls,
    )
    return new_state, events


def snapshot(state: EnvState) -> Snapshot:
    """States are immutable values, so the snapshot is the state itself."""
    return state


def restore(snap: Snapshot) -> EnvState:
    return snap


def is_terminal(state: EnvState, k_max: int) -> bool:
    """Terminal when every agent is done or the step budget is exhausted."""
    return state.step >= k_max or not any(state.active)


# --- instance sidecar files -------------------------------------------------
#
# A benchmark instance on disk is a map text file plus a JSON sidecar:
#   {"agents": [{"id": 0, "start": [r, c], "goal": [r, c]}, ...],
#    "seed": 7, "k_max": 64}


def dump_instance_json(agents: Sequence[AgentSpec], seed: int, k_max: int) -> str:
    payload = {
        "agents": [{"id": a.id, "start": list(a.start), "goal": list(a.goal)} for a in agents],
        "seed": seed,
        "k_max": k_max,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_instance_json(text: str) -> tuple[list[AgentSpec], int, int]:
    """Parse an instance sidecar; returns (agents, seed, k_max)."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad instance JSON: {exc}") from exc
    try:
        agents = [
            AgentSpec(id=int(a["id"]), start=tuple(a["start"]), goal=tuple(a["goal"]))
            for a in payload["agents"]
        ]
        return agents, int(payload["seed"]), int(payload["k_max"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad instance JSON structure: {exc}") from exc
