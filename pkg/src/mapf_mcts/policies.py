"""Single-step decision policies: uniform random and the replanning baseline.

The baseline plans an individual shortest path at every step, treating the
other agents' current cells as obstacles, and executes the first move. Pure
replanning livelocks easily (two agents blocking each other replan into each
other forever), so it keeps a short history: when the last two executed
actions have not brought the agent closer to its goal, it plays one uniform
random legal action instead and starts the history afresh.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .grid_world import DELTA, Action, Cell, ContractError, EnvState, GridMap, JointAction
from .shortest_path import DistanceField, find_path

_ACTION_OF_DELTA = {delta: action for action, delta in DELTA.items()}


def random_policy_act(state: EnvState, grid: GridMap, agent: int, rng: random.Random) -> Action:
    """Uniform draw over the agent's legal actions."""
    if not state.active[agent]:
        raise ContractError(f"agent {agent} is inactive")
    legal = grid.legal_actions_at(state.positions[agent])
    return legal[rng.randrange(len(legal))]


@dataclass
class PolicyContext:
    """Per-agent mutable state for the replanning baseline.

    `recent_positions` holds up to the last 3 positions (current one last),
    `recent_actions` the last 2 executed actions since the window was reset.
    `dist_field` measures distance-to-goal on the empty map, ignoring agents.
    """

    agent: int
    goal: Cell
    rng: random.Random
    dist_field: DistanceField
    recent_positions: deque = field(default_factory=lambda: deque(maxlen=3))
    recent_actions: deque = field(default_factory=lambda: deque(maxlen=2))

    def reset_history(self, position: Cell) -> None:
        self.recent_positions.clear()
        self.recent_actions.clear()
        self.recent_positions.append(position)

    def record_step(self, action: Action, new_position: Cell) -> None:
        """Record one executed action and the position it produced."""
        self.recent_actions.append(action)
        self.recent_positions.append(new_position)


def make_context(
    grid: GridMap, agent: int, start: Cell, goal: Cell, seed: int
) -> PolicyContext:
    ctx = PolicyContext(
        agent=agent,
        goal=goal,
        rng=random.Random(seed),
        dist_field=DistanceField(grid, goal),
    )
    ctx.reset_history(start)
    return ctx


def _fallback_due(ctx: PolicyContext) -> bool:
    """Two executed actions with no net progress toward the goal."""
    if len(ctx.recent_actions) < 2:
        return False
    d_now = ctx.dist_field.distance(ctx.recent_positions[-1])
    d_before = ctx.dist_field.distance(ctx.recent_positions[0])
    if d_now is None or d_before is None:
        return False
    return d_now >= d_before


def astar_policy_act(state: EnvState, grid: GridMap, agent: int, ctx: PolicyContext) -> Action:
    """First move of the agent's shortest path around the other agents.

    Waits when fully boxed in. When the history shows no progress over the
    last two steps, plays one random legal action and resets the window.
    """
    if not state.active[agent]:
        raise ContractError(f"agent {agent} is inactive")
    position = state.positions[agent]
    if _fallback_due(ctx):
        ctx.reset_history(position)
        return random_policy_act(state, grid, agent, ctx.rng)
    occupied = {
        state.positions[j]
        for j in state.active_ids()
        if j != agent
    }
    path = find_path(grid, position, ctx.goal, occupied)
    if path is None or path.n_moves == 0:
        return Action.WAIT
    nxt = path.cells[1]
    return _ACTION_OF_DELTA[(nxt[0] - position[0], nxt[1] - position[1])]


def joint_policy_act(
    state: EnvState,
    grid: GridMap,
    act_for_agent,
) -> JointAction:
    """Combine independent per-agent decisions into one joint action.

    `act_for_agent(agent_id)` is called once per active agent; inactive
    agents wait.
    """
    active = state.active_ids()
    if not active:
        raise ContractError("cannot act in a terminal state")
    joint = [Action.WAIT] * state.n_agents
    for i in active:
        joint[i] = act_for_agent(i)
    return tuple(joint)
