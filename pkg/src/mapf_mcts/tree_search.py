"""Monte-Carlo tree search planners for simultaneous multi-agent navigation.

Three variants share one search skeleton:

* JOINT      - every tree edge is a full joint action; the branching factor
               is the product of the agents' individual action counts, so the
               untried action set is kept implicit and sampled lazily (it is
               never materialized for large agent counts).
* MAMCTS     - the joint choice is decomposed: each tree node belongs to one
               agent and its edges are that agent's individual actions. The
               buffered actions are applied to the environment as one joint
               step when the last active agent has chosen ("boundary" nodes),
               which caps the per-node branching factor at five.
* SUBGOAL_MAMCTS - MAMCTS plus a small intrinsic reward whenever an agent
               reaches its current subgoal (two steps ahead on its own
               shortest path), which densifies the otherwise sparse
               goal-only signal. Rollouts are depth-limited in this mode.

Each joint step yields one reward component per agent (goal beats subgoal,
non-events pay zero); the shared step reward is their mean, which keeps it
on the same O(1) scale as the components and the UCT exploration term.
Returns discount once per executed joint action, never between the
per-agent decision levels of one joint step.

Credit assignment in the decomposed modes is per agent: a node reached by
agent i's choice accumulates the discounted stream of agent i's own reward
components, so the statistics that rank agent i's actions are not drowned
in the other agents' noise. This is what keeps deep decision levels
informative at realistic iteration budgets; with one agent it coincides
exactly with the shared return. JOINT nodes (and the root) accumulate the
shared return.

Node statistics are plain visit counts and summed returns; selection uses
UCT and the executed action is read off the most-visited root branch.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from . import grid_world
from .grid_world import (
    Action,
    ContractError,
    EnvState,
    GridMap,
    JointAction,
    StepEvents,
)
from .shortest_path import Trackers, init_trackers, update_trackers

# Joint action spaces at most this large are enumerated exactly; larger ones
# are rejection-sampled (1000 iterations cannot exhaust them anyway).
_JOINT_ENUM_CAP = 10_000


class SearchMode(Enum):
    JOINT = "joint"
    MAMCTS = "mamcts"
    SUBGOAL_MAMCTS = "subgoal_mamcts"


@dataclass(frozen=True)
class MctsConfig:
    iterations: int = 1000
    exploration_c: float = 1.0
    gamma: float = 0.9
    sim_depth_limit: int | None = None
    r_target: float = 1.0
    r_subgoal: float = 0.1
    mode: SearchMode = SearchMode.MAMCTS

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.sim_depth_limit is not None and self.sim_depth_limit < 0:
            raise ValueError("sim_depth_limit must be >= 0")
        if not self.r_subgoal < self.r_target:
            raise ValueError("r_subgoal must be smaller than r_target")

    @classmethod
    def for_mode(cls, mode: SearchMode, **overrides) -> "MctsConfig":
        """Defaults per variant: the subgoal planner limits rollouts to 10
        joint steps, the others simulate until the episode step budget."""
        if mode is SearchMode.SUBGOAL_MAMCTS:
            overrides.setdefault("sim_depth_limit", 10)
        return cls(mode=mode, **overrides)


def uct_score(value_sum: float, visits: int, parent_visits: int, c_explore: float) -> float:
    """UCT: mean value plus exploration bonus; unvisited nodes come first."""
    if visits == 0:
        return math.inf
    return value_sum / visits + c_explore * math.sqrt(2.0 * math.log(parent_visits) / visits)


def reward(events: StepEvents, n: int, cfg: MctsConfig) -> float:
    """Shared reward of one joint step, divided by the episode agent count.

    Goal arrivals pay r_target; in subgoal mode an agent on its subgoal pays
    r_subgoal unless it reached its goal the same step.
    """
    total = len(events.reached_goal) * cfg.r_target
    if cfg.mode is SearchMode.SUBGOAL_MAMCTS and events.reached_subgoal:
        total += cfg.r_subgoal * len(events.reached_subgoal - events.reached_goal)
    return total / n


def reward_components(events: StepEvents, n: int, cfg: MctsConfig) -> tuple[float, ...]:
    """Per-agent rewards of one joint step: component i pays r_target for a
    goal arrival, r_subgoal for a subgoal arrival (subgoal mode, goal wins),
    0 otherwise. The shared reward is the mean of the components, so both
    stay on the same O(1) scale the exploration constant is tuned for."""
    vec = [0.0] * n
    for i in events.reached_goal:
        vec[i] = cfg.r_target
    if cfg.mode is SearchMode.SUBGOAL_MAMCTS and events.reached_subgoal:
        for i in events.reached_subgoal:
            if i not in events.reached_goal:
                vec[i] = cfg.r_subgoal
    return tuple(vec)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of rewards[k] * gamma**k."""
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total


class SearchNode:
    """One decision point in the tree.

    Mid-segment nodes carry the actions buffered so far (`pending`) and the
    agents still to choose (`to_choose`). Boundary nodes (and the root) also
    carry the environment state: for a boundary node it is the state right
    after its buffered joint action was applied, together with the reward
    that application produced (shared scalar plus per-agent components).
    Because states are immutable and carry their own random stream, the
    cached state is exactly what re-applying the buffered actions from the
    root snapshot would produce.

    `owner` is the agent whose choice leads into the node; its accumulated
    value ranks that agent's actions at the parent. The root and JOINT-mode
    children have no single owner and accumulate the shared return.
    """

    __slots__ = (
        "visits",
        "value_sum",
        "owner",
        "pending",
        "to_choose",
        "children",
        "untried",
        "state",
        "trackers",
        "boundary_reward",
        "boundary_rewards",
        "legal_sets",
        "joint_space",
    )

    def __init__(
        self,
        pending: tuple[tuple[int, Action], ...],
        to_choose: tuple[int, ...],
        state: EnvState | None = None,
        trackers: Trackers | None = None,
        boundary_reward: float | None = None,
        owner: int | None = None,
    ):
        self.visits = 0
        self.value_sum = 0.0
        self.owner = owner
        self.pending = pending
        self.to_choose = to_choose
        self.children: dict = {}
        self.untried: list | None = None
        self.state = state
        self.trackers = trackers
        self.boundary_reward = boundary_reward
        self.boundary_rewards: tuple[float, ...] | None = None
        self.legal_sets: tuple[tuple[Action, ...], ...] | None = None
        self.joint_space: int | None = None

    @property
    def is_boundary(self) -> bool:
        """True when a joint action is applied at this node (root excluded)."""
        return self.boundary_reward is not None

    @property
    def agent_index(self) -> int | None:
        """Agent whose action is chosen at this node (None when terminal)."""
        return self.to_choose[0] if self.to_choose else None

    def mean_value(self) -> float:
        return self.value_sum / self.visits if self.visits else 0.0


class MctsPlanner:
    """Runs one search per decision and returns the joint action to execute.

    The planner owns a private random stream for action sampling and
    tie-breaking; environment stochasticity comes from the planned state's
    own stream, so planning never perturbs the episode.
    """

    def __init__(
        self,
        grid: GridMap,
        cfg: MctsConfig,
        n_agents: int,
        k_max: int,
        seed: int = 0,
        rng: random.Random | None = None,
    ):
        self.grid = grid
        self.cfg = cfg
        self.n_agents = n_agents
        self.k_max = k_max
        self.rng = rng if rng is not None else random.Random(seed)

    # -- node construction -----------------------------------------------

    def _segment_order(self, state: EnvState) -> tuple[int, ...]:
        """Decision order of the active agents for the segment at `state`.

        Ascending ids, rotated by the step counter: the front of the order is
        where the search gathers the densest statistics, so rotating it every
        step shares that privilege across agents instead of permanently
        starving the highest ids.
        """
        active = state.active_ids()
        if not active:
            return ()
        r = state.step % len(active)
        return tuple(active[r:] + active[:r])

    def _make_root(self, state: EnvState, trackers: Trackers | None) -> SearchNode:
        if self.cfg.mode is SearchMode.SUBGOAL_MAMCTS and trackers is None:
            trackers = init_trackers(self.grid, state.positions, state.goals, state.active)
        root = SearchNode(
            pending=(),
            to_choose=self._segment_order(state),
            state=state,
            trackers=trackers,
        )
        self._init_untried(root)
        return root

    def _init_untried(self, node: SearchNode) -> None:
        """Prepare the untried-action bookkeeping for a state-bearing node."""
        state = node.state
        if state is None or grid_world.is_terminal(state, self.k_max):
            node.to_choose = () if state is not None else node.to_choose
            node.untried = []
            node.joint_space = 0
            return
        if self.cfg.mode is SearchMode.JOINT:
            legal_sets = tuple(
                self.grid.legal_actions_at(state.positions[i]) for i in node.to_choose
            )
            node.legal_sets = legal_sets
            space = 1
            for s in legal_sets:
                space *= len(s)
            node.joint_space = space
            if space <= _JOINT_ENUM_CAP:
                node.untried = [tuple(combo) for combo in itertools.product(*legal_sets)]
            else:
                node.untried = None  # sampled lazily
        else:
            agent = node.to_choose[0]
            node.untried = list(self.grid.legal_actions_at(state.positions[agent]))

    def _has_untried(self, node: SearchNode) -> bool:
        if self.cfg.mode is SearchMode.JOINT and node.untried is None:
            return len(node.children) < node.joint_space
        return bool(node.untried)

    def _segment_state(self, path: list[SearchNode]) -> SearchNode:
        """Nearest node at or above the end of `path` that carries a state."""
        for node in reversed(path):
            if node.state is not None:
                return node
        raise AssertionError("path has no state-bearing node")  # pragma: no cover

    def _apply_boundary(
        self, seg: SearchNode, pending: tuple[tuple[int, Action], ...]
    ) -> tuple[EnvState, Trackers | None, tuple[float, ...]]:
        """Apply a completed buffer as one joint action to the segment state."""
        joint = [Action.WAIT] * self.n_agents
        for agent, act in pending:
            joint[agent] = act
        state, events = grid_world.step(seg.state, tuple(joint), self.grid)
        trackers = seg.trackers
        if self.cfg.mode is SearchMode.SUBGOAL_MAMCTS and trackers is not None:
            trackers = update_trackers(
                self.grid, trackers, seg.state.active, state.positions, events
            )
        return state, trackers, reward_components(events, self.n_agents, self.cfg)

    # -- the four phases ---------------------------------------------------

    def select_descend(self, root: SearchNode) -> list[SearchNode]:
        """Walk down by UCT until a node with an untried action or a terminal
        boundary; ties are broken uniformly at random."""
        node = root
        path = [node]
        while True:
            if node.state is not None and grid_world.is_terminal(node.state, self.k_max):
                return path
            if self._has_untried(node):
                return path
            if not node.children:  # pragma: no cover - untried implies children here
                return path
            node = self._uct_child(node)
            path.append(node)

    def _uct_child(self, node: SearchNode) -> SearchNode:
        c = self.cfg.exploration_c
        parent_visits = node.visits
        best_score = -math.inf
        best: list[SearchNode] = []
        for child in node.children.values():
            score = uct_score(child.value_sum, child.visits, parent_visits, c)
            if score > best_score:
                best_score = score
                best = [child]
            elif score == best_score:
                best.append(child)
        if len(best) == 1:
            return best[0]
        return best[self.rng.randrange(len(best))]

    def _attach_boundary(
        self, child: SearchNode, seg: SearchNode, pending: tuple[tuple[int, Action], ...]
    ) -> None:
        state, trackers, components = self._apply_boundary(seg, pending)
        child.state = state
        child.trackers = trackers
        child.boundary_rewards = components
        child.boundary_reward = sum(components) / self.n_agents
        child.to_choose = self._segment_order(state)
        self._init_untried(child)

    def expand_leaf(self, leaf: SearchNode, path: list[SearchNode]) -> SearchNode:
        """Create one child for a uniformly random untried action."""
        seg = self._segment_state(path)
        if self.cfg.mode is SearchMode.JOINT:
            key = self._draw_joint_action(leaf)
            pending = tuple(zip(leaf.to_choose, key))
            child = SearchNode(pending=pending, to_choose=())
            self._attach_boundary(child, seg, pending)
        else:
            if not leaf.untried:
                raise ContractError("expand called on a node with no untried actions")
            action = leaf.untried.pop(self.rng.randrange(len(leaf.untried)))
            key = action
            agent = leaf.to_choose[0]
            base_pending = () if leaf.state is not None else leaf.pending
            pending = base_pending + ((agent, action),)
            remaining = leaf.to_choose[1:]
            child = SearchNode(pending=pending, to_choose=remaining, owner=agent)
            if remaining:
                child.untried = list(
                    self.grid.legal_actions_at(seg.state.positions[remaining[0]])
                )
            else:
                self._attach_boundary(child, seg, pending)
        leaf.children[key] = child
        path.append(child)
        return child

    def _draw_joint_action(self, node: SearchNode) -> JointAction:
        if node.untried is not None:
            return node.untried.pop(self.rng.randrange(len(node.untried)))
        # Huge space: sample per-agent actions until an unseen combination.
        for _ in range(100_000):  # pragma: no branch
            combo = tuple(s[self.rng.randrange(len(s))] for s in node.legal_sets)
            if combo not in node.children:
                return combo
        raise ContractError("failed to sample an untried joint action")  # pragma: no cover

    def simulate_rollout(self, path: list[SearchNode]) -> tuple[float, ...]:
        """Random playout from the end of `path`; returns per-agent returns.

        A partial buffer is completed with uniform random legal actions; from
        then on whole joint actions are drawn uniformly per agent. Rewards are
        discounted per simulated joint step, starting undiscounted at the
        first one. Stops at terminal states or the configured step limit. The
        shared return is the sum of the returned components.
        """
        leaf = path[-1]
        if leaf.state is not None:
            state = leaf.state
            trackers = leaf.trackers
            first_pending: dict[int, Action] = {}
        else:
            seg = self._segment_state(path)
            state = seg.state
            trackers = seg.trackers
            first_pending = dict(leaf.pending)

        cfg = self.cfg
        n = self.n_agents
        subgoal_mode = cfg.mode is SearchMode.SUBGOAL_MAMCTS
        goal_reward = cfg.r_target
        sub_reward = cfg.r_subgoal
        limit = cfg.sim_depth_limit
        uniform = self.rng.random
        legal_at = self.grid.legal_actions_at
        grid = self.grid
        totals = [0.0] * n
        discount = 1.0
        steps = 0
        while not grid_world.is_terminal(state, self.k_max):
            if limit is not None and steps >= limit:
                break
            joint = [Action.WAIT] * n
            positions = state.positions
            for i, is_active in enumerate(state.active):
                if not is_active:
                    continue
                if first_pending and i in first_pending:
                    joint[i] = first_pending[i]
                else:
                    legal = legal_at(positions[i])
                    joint[i] = legal[int(uniform() * len(legal))]
            was_active = state.active
            state, events = grid_world.step(state, tuple(joint), grid)
            if subgoal_mode and trackers is not None:
                trackers = update_trackers(grid, trackers, was_active, state.positions, events)
            for i in events.reached_goal:
                totals[i] += discount * goal_reward
            if subgoal_mode and events.reached_subgoal:
                for i in events.reached_subgoal:
                    if i not in events.reached_goal:
                        totals[i] += discount * sub_reward
            discount *= cfg.gamma
            steps += 1
            first_pending = {}
        return tuple(totals)

    def backpropagate(self, path: list[SearchNode], g) -> None:
        """Credit the rollout return up the path.

        Walking leaf to root, crossing a boundary folds in that boundary's
        reward and applies the discount exactly once. A node owned by agent i
        receives agent i's running return component; ownerless nodes (root,
        JOINT children) receive the shared running return, i.e. the mean of
        the components. `g` may be the per-agent component sequence from
        `simulate_rollout` or a plain float (treated as both the shared
        return and every component).
        """
        gamma = self.cfg.gamma
        if isinstance(g, (int, float)):
            shared = float(g)
            vec = None
        else:
            vec = list(g)
            shared = sum(vec) / self.n_agents
        for node in reversed(path):
            if node.boundary_reward is not None:
                shared = node.boundary_reward + gamma * shared
                if vec is not None:
                    comps = node.boundary_rewards
                    if comps is None:
                        comps = (node.boundary_reward,) * len(vec)
                    for i in range(len(vec)):
                        vec[i] = comps[i] + gamma * vec[i]
            node.visits += 1
            if node.owner is not None and vec is not None:
                node.value_sum += vec[node.owner]
            else:
                node.value_sum += shared

    # -- the public entry point ---------------------------------------------

    def run_search(self, state: EnvState, trackers: Trackers | None = None) -> SearchNode:
        """Build and grow a fresh tree from `state`; returns the root.

        Each iteration drives its expansion through to the next joint
        boundary: after the selected untried action, the remaining agents of
        the segment get default-policy (uniform random) actions, materialized
        as chain nodes, so the buffered joint action is applied and the
        simulation starts from a real successor state. Without this, no
        joint action would ever be applied inside the tree at realistic
        iteration budgets once the per-segment action space outgrows them.
        """
        if grid_world.is_terminal(state, self.k_max):
            raise ContractError("cannot plan from a terminal state")
        root = self._make_root(state, trackers)
        for _ in range(self.cfg.iterations):
            path = self.select_descend(root)
            leaf = path[-1]
            if self._has_untried(leaf) and not (
                leaf.state is not None and grid_world.is_terminal(leaf.state, self.k_max)
            ):
                node = self.expand_leaf(leaf, path)
                while node.state is None:
                    node = self.expand_leaf(node, path)
            g = self.simulate_rollout(path)
            self.backpropagate(path, g)
        return root

    def plan_action(
        self, state: EnvState, trackers: Trackers | None = None
    ) -> JointAction:
        """Search from `state` and return the joint action to execute.

        The executed action is read along the most-visited branch (one child
        in JOINT mode, one per-agent level otherwise); ties prefer the lowest
        action value. Inactive agents wait.
        """
        return self._extract_action(self.run_search(state, trackers))

    def _extract_action(self, root: SearchNode) -> JointAction:
        joint = [Action.WAIT] * self.n_agents
        if self.cfg.mode is SearchMode.JOINT:
            if root.children:
                key = self._most_visited_key(root)
                for agent, act in zip(root.to_choose, key):
                    joint[agent] = act
        else:
            node = root
            for agent in root.to_choose:
                if not node.children:
                    break
                key = self._most_visited_key(node)
                joint[agent] = key
                node = node.children[key]
        return tuple(joint)

    @staticmethod
    def _most_visited_key(node: SearchNode):
        """Most-visited child; visit ties prefer the higher mean value, value
        ties the lower action. Sparsely visited levels tie on visits all the
        time, and falling straight back to the lowest action would
        systematically inject WAIT there."""
        best_visits = max(child.visits for child in node.children.values())
        candidates = [
            (k, child) for k, child in node.children.items() if child.visits == best_visits
        ]
        best_value = max(child.mean_value() for _, child in candidates)
        return min(k for k, child in candidates if child.mean_value() == best_value)


def plan_action(
    state: EnvState,
    grid: GridMap,
    cfg: MctsConfig,
    rng: random.Random,
    k_max: int = 64,
    trackers: Trackers | None = None,
) -> JointAction:
    """One-shot convenience wrapper around MctsPlanner."""
    planner = MctsPlanner(
        grid, cfg, n_agents=state.n_agents, k_max=k_max, rng=rng
    )
    return planner.plan_action(state, trackers)
