"""Experiment harness: run (algorithm x agent-count x instance) cells,
collect success metrics, and write deterministic reports.

Metrics per episode:
  csr  - 1 iff every agent reached its goal before the step budget;
  isr  - fraction of agents that reached their goals;
  episode_length - steps until all agents were done, or k_max on failure;
  mean_decision_time_s - wall clock per decision (never asserted, hardware
  dependent).

Seeding: every cell derives an episode seed from the suite master seed and
the cell coordinates, and environment / search streams are derived from
that, so reports are bit-identical across runs and across worker counts
(timing column aside).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path as FsPath
from typing import Sequence

from . import grid_world, policies
from .grid_world import AgentSpec, GridMap
from .map_forge import Instance
from .seeding import derive
from .shortest_path import DistanceField, init_trackers, update_trackers
from .tree_search import MctsConfig, MctsPlanner, SearchMode


class Algorithm(Enum):
    JOINT = "joint"
    MAMCTS = "mamcts"
    SUBGOAL_MAMCTS = "subgoal_mamcts"
    ASTAR = "astar"


_MODE_OF = {
    Algorithm.JOINT: SearchMode.JOINT,
    Algorithm.MAMCTS: SearchMode.MAMCTS,
    Algorithm.SUBGOAL_MAMCTS: SearchMode.SUBGOAL_MAMCTS,
}


@dataclass(frozen=True)
class EpisodeMetrics:
    csr: int
    isr: float
    episode_length: int
    mean_decision_time: float


@dataclass(frozen=True)
class RunRow:
    algorithm: str
    agents: int
    instance_id: str
    seed: int
    isr: float
    csr: int
    episode_length: int
    mean_decision_time_s: float


@dataclass(frozen=True)
class AggregateRow:
    algorithm: str
    agents: int
    episodes: int
    isr: float
    csr: float
    episode_length: float
    mean_decision_time_s: float


@dataclass
class Report:
    rows: list[RunRow] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


@dataclass
class SuiteConfig:
    """What to run; `instances` are (id, Instance) pairs."""

    instances: list[tuple[str, Instance]]
    algorithms: list[Algorithm]
    agent_counts: list[int]
    k_max: int = 64
    master_seed: int = 0
    episodes_per_instance: int = 1
    iterations: int = 1000
    exploration_c: float = 1.0
    gamma: float = 0.9
    r_target: float = 1.0
    r_subgoal: float = 0.1

    def __post_init__(self) -> None:
        if not self.instances:
            raise ValueError("suite needs at least one instance")
        if not self.algorithms:
            raise ValueError("suite needs at least one algorithm")
        if not self.agent_counts:
            raise ValueError("suite needs at least one agent count")

    def mcts_config(self, algorithm: Algorithm) -> MctsConfig:
        return MctsConfig.for_mode(
            _MODE_OF[algorithm],
            iterations=self.iterations,
            exploration_c=self.exploration_c,
            gamma=self.gamma,
            r_target=self.r_target,
            r_subgoal=self.r_subgoal,
        )


def run_episode(
    grid: GridMap,
    agents: Sequence[AgentSpec],
    algorithm: Algorithm,
    k_max: int,
    env_seed: int,
    search_seed: int,
    mcts_cfg: MctsConfig | None = None,
) -> EpisodeMetrics:
    """Play one full episode under the given decision maker."""
    n = len(agents)
    state = grid_world.reset(grid, agents, env_seed)
    times: list[float] = []

    if algorithm is Algorithm.ASTAR:
        contexts = {
            a.id: policies.make_context(
                grid, a.id, a.start, a.goal, derive(search_seed, "astar", a.id)
            )
            for a in agents
        }
        while not grid_world.is_terminal(state, k_max):
            t0 = time.perf_counter()
            joint = policies.joint_policy_act(
                state, grid, lambda i: policies.astar_policy_act(state, grid, i, contexts[i])
            )
            times.append(time.perf_counter() - t0)
            was_active = state.active
            state, _events = grid_world.step(state, joint, grid)
            for i in range(n):
                if was_active[i]:
                    contexts[i].record_step(joint[i], state.positions[i])
    else:
        cfg = mcts_cfg if mcts_cfg is not None else MctsConfig.for_mode(_MODE_OF[algorithm])
        planner = MctsPlanner(grid, cfg, n_agents=n, k_max=k_max, seed=search_seed)
        trackers = None
        if cfg.mode is SearchMode.SUBGOAL_MAMCTS:
            fields = [DistanceField(grid, a.goal) for a in agents]
            trackers = init_trackers(
                grid, state.positions, state.goals, state.active, fields=fields
            )
        while not grid_world.is_terminal(state, k_max):
            t0 = time.perf_counter()
            joint = planner.plan_action(state, trackers)
            times.append(time.perf_counter() - t0)
            was_active = state.active
            state, events = grid_world.step(state, joint, grid)
            if trackers is not None:
                trackers = update_trackers(grid, trackers, was_active, state.positions, events)

    reached = n - state.active_count()
    isr = reached / n
    return EpisodeMetrics(
        csr=1 if reached == n else 0,
        isr=isr,
        episode_length=state.step if reached == n else k_max,
        mean_decision_time=sum(times) / len(times) if times else 0.0,
    )


def _cell_seed(master: int, algorithm: Algorithm, agents: int, instance_id: str, repeat: int) -> int:
    return derive(master, algorithm.value, agents, instance_id, repeat)


def _run_cell(args) -> tuple[RunRow | None, str | None]:
    """One suite cell; module-level so worker processes can pickle it."""
    instance_id, instance, algorithm, count, k_max, cell_seed, mcts_cfg = args
    try:
        if count > len(instance.agents):
            raise ValueError(
                f"instance {instance_id} has {len(instance.agents)} agents, need {count}"
            )
        roster = instance.agents[:count]
        metrics = run_episode(
            instance.grid,
            roster,
            algorithm,
            k_max,
            env_seed=derive(cell_seed, "env"),
            search_seed=derive(cell_seed, "search"),
            mcts_cfg=mcts_cfg,
        )
        row = RunRow(
            algorithm=algorithm.value,
            agents=count,
            instance_id=instance_id,
            seed=cell_seed,
            isr=metrics.isr,
            csr=metrics.csr,
            episode_length=metrics.episode_length,
            mean_decision_time_s=metrics.mean_decision_time,
        )
        return row, None
    except Exception as exc:  # noqa: BLE001 - a bad cell must not kill the suite
        return None, f"{algorithm.value}/{count}/{instance_id}: {exc}"


def run_suite(config: SuiteConfig, jobs: int = 1) -> Report:
    """Run every (algorithm, agent count, instance, repeat) cell.

    Failed cells are recorded in `report.errors` and the suite continues.
    Results are deterministic and independent of `jobs`.
    """
    cells = []
    for algorithm in config.algorithms:
        mcts_cfg = None if algorithm is Algorithm.ASTAR else config.mcts_config(algorithm)
        for count in config.agent_counts:
            for instance_id, instance in config.instances:
                for repeat in range(config.episodes_per_instance):
                    seed = _cell_seed(config.master_seed, algorithm, count, instance_id, repeat)
                    cells.append(
                        (instance_id, instance, algorithm, count, config.k_max, seed, mcts_cfg)
                    )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]

    report = Report(
        meta={
            "k_max": config.k_max,
            "master_seed": config.master_seed,
            "iterations": config.iterations,
            "algorithms": [a.value for a in config.algorithms],
            "agent_counts": list(config.agent_counts),
            "episodes_per_instance": config.episodes_per_instance,
        }
    )
    for row, error in outcomes:
        if row is not None:
            report.rows.append(row)
        else:
            report.errors.append(error)
    report.aggregates = aggregate_rows(report.rows)
    return report


def aggregate_rows(rows: Sequence[RunRow]) -> list[AggregateRow]:
    """Mean metrics per (algorithm, agent count), in first-seen order."""
    groups: dict[tuple[str, int], list[RunRow]] = {}
    for row in rows:
        groups.setdefault((row.algorithm, row.agents), []).append(row)
    out = []
    for (algorithm, agents), members in groups.items():
        k = len(members)
        out.append(
            AggregateRow(
                algorithm=algorithm,
                agents=agents,
                episodes=k,
                isr=sum(r.isr for r in members) / k,
                csr=sum(r.csr for r in members) / k,
                episode_length=sum(r.episode_length for r in members) / k,
                mean_decision_time_s=sum(r.mean_decision_time_s for r in members) / k,
            )
        )
    return out


# --- report files -------------------------------------------------------------

CSV_COLUMNS = (
    "algorithm",
    "agents",
    "instance_id",
    "seed",
    "isr",
    "csr",
    "episode_length",
    "mean_decision_time_s",
)


def _fmt(value) -> str:
    # repr() of a float round-trips exactly, keeping reports bit-stable.
    return repr(value) if isinstance(value, float) else str(value)


def render_report(report: Report, fmt: str) -> str:
    """Render to 'csv' (raw rows), 'jsonl' (rows + aggregates), or 'table'."""
    if not report.rows:
        raise ValueError("refusing to write an empty report")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in report.rows:
            d = asdict(row)
            lines.append(",".join(_fmt(d[col]) for col in CSV_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "jsonl":
        lines = [json.dumps({"kind": "meta", **report.meta}, sort_keys=True)]
        for row in report.rows:
            lines.append(json.dumps({"kind": "row", **asdict(row)}, sort_keys=True))
        for agg in report.aggregates:
            lines.append(json.dumps({"kind": "aggregate", **asdict(agg)}, sort_keys=True))
        for error in report.errors:
            lines.append(json.dumps({"kind": "error", "message": error}, sort_keys=True))
        return "\n".join(lines) + "\n"
    if fmt == "table":
        header = f"{'algorithm':<16} {'agents':>6} {'episodes':>8} {'isr':>7} {'csr':>7} {'ep_len':>8} {'sec/dec':>9}"
        lines = [header, "-" * len(header)]
        for a in report.aggregates:
            lines.append(
                f"{a.algorithm:<16} {a.agents:>6} {a.episodes:>8} "
                f"{a.isr:>7.3f} {a.csr:>7.3f} {a.episode_length:>8.2f} {a.mean_decision_time_s:>9.4f}"
            )
        if report.errors:
            lines.append(f"[{len(report.errors)} cell(s) failed]")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(report: Report, path: str | FsPath, fmt: str = "csv") -> FsPath:
    out = FsPath(path)
    out.write_text(render_report(report, fmt))
    return out


def read_report(path: str | FsPath) -> Report:
    """Read a jsonl report back into a Report."""
    report = Report()
    for line in FsPath(path).read_text().splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        kind = payload.pop("kind")
        if kind == "meta":
            report.meta = payload
        elif kind == "row":
            report.rows.append(RunRow(**payload))
        elif kind == "aggregate":
            report.aggregates.append(AggregateRow(**payload))
        elif kind == "error":
            report.errors.append(payload["message"])
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    return report


def verify_report(report: Report) -> list[str]:
    """Recompute aggregates from raw rows; returns mismatch descriptions."""
    recomputed = {(a.algorithm, a.agents): a for a in aggregate_rows(report.rows)}
    stored = {(a.algorithm, a.agents): a for a in report.aggregates}
    problems = []
    for key in stored.keys() | recomputed.keys():
        if key not in stored:
            problems.append(f"{key}: aggregate missing from report")
        elif key not in recomputed:
            problems.append(f"{key}: aggregate has no backing rows")
        elif stored[key] != recomputed[key]:
            problems.append(f"{key}: stored {stored[key]} != recomputed {recomputed[key]}")
    return sorted(problems)
