"""Multi-agent pathfinding on 4-connected grids.

Decomposed Monte-Carlo tree search planners with optional subgoal reward
shaping, a stochastic simultaneous-move grid environment, map and instance
generators, single-step baselines, and a reproducible benchmark harness.
"""

from .bench import Algorithm, EpisodeMetrics, Report, SuiteConfig, run_episode, run_suite
from .grid_world import (
    Action,
    AgentSpec,
    EnvState,
    GridMap,
    StepEvents,
    is_terminal,
    legal_actions,
    load_map,
    reset,
    restore,
    snapshot,
    step,
)
from .map_forge import (
    Instance,
    MazeParams,
    RandomMapParams,
    difficulty_score,
    fill_small_components,
    generate_maze_map,
    generate_random_map,
    place_agents,
    select_hard_instances,
)
from .policies import astar_policy_act, joint_policy_act, random_policy_act
from .shortest_path import (
    DistanceField,
    Path,
    SubgoalTracker,
    find_path,
    init_subgoal,
    update_subgoal,
)
from .tree_search import (
    MctsConfig,
    MctsPlanner,
    SearchMode,
    SearchNode,
    discounted_return,
    reward,
    uct_score,
)

__version__ = "0.1.0"
