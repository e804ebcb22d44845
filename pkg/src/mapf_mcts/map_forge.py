"""Benchmark instance generators: random maps, maze maps, agent placement,
and difficulty ranking.

Random maps block each cell independently with a given probability, then
erase free pockets smaller than a threshold. Maze maps are rooms connected
by narrow corridors (recursive backtracker on the odd lattice), which makes
them congested by construction. Instances are ranked by how much the agents'
individual shortest paths overlap: the more shared cells, the more the
agents will have to coordinate.

All generators are pure functions of (params, seed).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Sequence

from .grid_world import (
    AgentSpec,
    Cell,
    GridMap,
    dump_instance_json,
    load_map,
    parse_instance_json,
    validate_agents,
)
from .seeding import derive
from .shortest_path import find_path

_REROLL_LIMIT = 64
_PLACEMENT_ATTEMPTS = 200


class GenerationError(Exception):
    """Raised when a generator cannot satisfy its constraints."""


@dataclass(frozen=True)
class RandomMapParams:
    size: int = 16
    density: float = 0.3
    min_component_fill: int = 5

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(f"size must be >= 2, got {self.size}")
        if not 0.0 <= self.density < 1.0:
            raise ValueError(f"density must be in [0, 1), got {self.density}")
        if self.min_component_fill < 0:
            raise ValueError("min_component_fill must be >= 0")


@dataclass(frozen=True)
class MazeParams:
    size: int = 15
    max_rooms: int = 30
    room_min_size: int = 5
    room_max_size: int = 5
    has_doors: bool = True
    extra_connection_probability: float = 0.0
    min_component_size: int = 4
    retry_count: int = 1000

    def __post_init__(self) -> None:
        if self.size < 5 or self.size % 2 == 0:
            raise ValueError(f"maze size must be odd and >= 5, got {self.size}")
        if not 1 <= self.room_min_size <= self.room_max_size < self.size:
            raise ValueError("need 1 <= room_min_size <= room_max_size < size")
        if not 0.0 <= self.extra_connection_probability <= 1.0:
            raise ValueError("extra_connection_probability must be in [0, 1]")


@dataclass(frozen=True)
class Instance:
    """A solvable benchmark unit: map, agent roster, and its difficulty."""

    grid: GridMap
    agents: tuple[AgentSpec, ...]
    seed: int
    difficulty: int


def free_components(grid: GridMap) -> list[list[Cell]]:
    """4-connected components of free cells, each in row-major discovery order."""
    seen = [False] * (grid.width * grid.height)
    components: list[list[Cell]] = []
    for r in range(grid.height):
        for c in range(grid.width):
            idx = r * grid.width + c
            if grid.blocked[idx] or seen[idx]:
                continue
            comp = [(r, c)]
            seen[idx] = True
            cursor = 0
            while cursor < len(comp):
                cr, cc = comp[cursor]
                cursor += 1
                for nr, nc in ((cr - 1, cc), (cr + 1, cc), (cr, cc - 1), (cr, cc + 1)):
                    if 0 <= nr < grid.height and 0 <= nc < grid.width:
                        nidx = nr * grid.width + nc
                        if not grid.blocked[nidx] and not seen[nidx]:
                            seen[nidx] = True
                            comp.append((nr, nc))
            components.append(comp)
    return components


def fill_small_components(grid: GridMap, threshold: int) -> GridMap:
    """Block every free component strictly smaller than `threshold` cells."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    blocked = list(grid.blocked)
    changed = False
    for comp in free_components(grid):
        if len(comp) < threshold:
            for r, c in comp:
                blocked[r * grid.width + c] = True
            changed = True
    if not changed:
        return grid
    return GridMap(grid.width, grid.height, blocked)


def generate_random_map(params: RandomMapParams, seed: int) -> GridMap:
    """Bernoulli-blocked square map with small free pockets filled in.

    Degenerate draws with no free cell left are re-rolled a bounded number of
    times before giving up.
    """
    for attempt in range(_REROLL_LIMIT):
        rng = random.Random(derive("random-map", seed, attempt))
        cells = [rng.random() < params.density for _ in range(params.size * params.size)]
        grid = fill_small_components(
            GridMap(params.size, params.size, cells), params.min_component_fill
        )
        if any(not b for b in grid.blocked):
            return grid
    raise GenerationError(
        f"no usable map after {_REROLL_LIMIT} draws (density {params.density})"
    )


def place_agents(grid: GridMap, n: int, seed: int) -> list[AgentSpec]:
    """Sample n distinct free starts and n distinct free goals, uniformly
    without replacement, redrawing until every start can reach its goal."""
    free = grid.free_cells()
    if len(free) < 2 * n:
        raise GenerationError(f"need at least {2 * n} free cells, map has {len(free)}")
    label: dict[Cell, int] = {}
    for k, comp in enumerate(free_components(grid)):
        for cell in comp:
            label[cell] = k
    rng = random.Random(derive("agents", seed))
    for _ in range(_PLACEMENT_ATTEMPTS):
        starts = rng.sample(free, n)
        goals = rng.sample(free, n)
        if all(label[s] == label[g] for s, g in zip(starts, goals)):
            return [AgentSpec(id=i, start=starts[i], goal=goals[i]) for i in range(n)]
    raise GenerationError(
        f"could not place {n} connected start/goal pairs in {_PLACEMENT_ATTEMPTS} attempts"
    )


def difficulty_score(instance: Instance) -> int:
    """Sum over agent pairs of the number of cells their individual shortest
    paths share (paths ignore other agents; deterministic tie-breaking)."""
    paths = []
    for a in instance.agents:
        p = find_path(instance.grid, a.start, a.goal)
        if p is None:
            raise GenerationError(f"agent {a.id}: goal unreachable from start")
        paths.append(set(p.cells))
    score = 0
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            score += len(paths[i] & paths[j])
    return score


def make_random_instance(params: RandomMapParams, n_agents: int, seed: int) -> Instance:
    grid = generate_random_map(params, derive("map", seed))
    agents = place_agents(grid, n_agents, derive("placement", seed))
    inst = Instance(grid=grid, agents=tuple(agents), seed=seed, difficulty=0)
    return Instance(grid=grid, agents=tuple(agents), seed=seed, difficulty=difficulty_score(inst))


def select_hard_instances(
    params: RandomMapParams, n_agents: int, n_seeds: int, n_keep: int
) -> list[Instance]:
    """Generate instances for seeds 0..n_seeds-1 and keep the n_keep highest
    difficulty scores (ties favor the lower seed). Seeds whose generation
    fails are skipped."""
    if n_keep > n_seeds:
        raise ValueError(f"n_keep {n_keep} exceeds n_seeds {n_seeds}")
    pool: list[Instance] = []
    for s in range(n_seeds):
        try:
            pool.append(make_random_instance(params, n_agents, s))
        except GenerationError:
            continue
    if len(pool) < n_keep:
        raise GenerationError(f"only {len(pool)} of {n_seeds} seeds produced instances")
    pool.sort(key=lambda inst: (-inst.difficulty, inst.seed))
    return pool[:n_keep]


# --- maze maps ---------------------------------------------------------------


def _carve_rooms(
    rng: random.Random, size: int, params: MazeParams, free: set[Cell]
) -> list[tuple[int, int, int, int]]:
    """Place non-overlapping rooms with odd top-left corners and odd sides.
    Returns the room rectangles as (r0, c0, h, w)."""
    odd_sides = [s for s in range(params.room_min_size, params.room_max_size + 1) if s % 2 == 1]
    if not odd_sides:
        odd_sides = [params.room_min_size | 1]
    rooms: list[tuple[int, int, int, int]] = []
    for _ in range(params.max_rooms):
        h = rng.choice(odd_sides)
        w = rng.choice(odd_sides)
        if size - 1 - h < 1 or size - 1 - w < 1:
            continue
        for _try in range(20):
            r0 = rng.randrange(1, size - h, 2)
            c0 = rng.randrange(1, size - w, 2)
            # Keep at least a one-cell wall ring between rooms.
            clash = any(
                r0 - 1 <= rr + rh - 1 and rr <= r0 + h and c0 - 1 <= cc + rw - 1 and cc <= c0 + w
                for rr, cc, rh, rw in rooms
            )
            if not clash:
                rooms.append((r0, c0, h, w))
                for r in range(r0, r0 + h):
                    for c in range(c0, c0 + w):
                        free.add((r, c))
                break
    return rooms


def _carve_maze(rng: random.Random, size: int, free: set[Cell], in_room: set[Cell]) -> None:
    """Recursive backtracker over the odd lattice cells outside rooms."""
    lattice = [
        (r, c)
        for r in range(1, size, 2)
        for c in range(1, size, 2)
        if (r, c) not in in_room
    ]
    unvisited = set(lattice)
    for origin in lattice:
        if origin not in unvisited:
            continue
        stack = [origin]
        unvisited.discard(origin)
        free.add(origin)
        while stack:
            r, c = stack[-1]
            candidates = [
                (r + dr, c + dc)
                for dr, dc in ((-2, 0), (2, 0), (0, -2), (0, 2))
                if (r + dr, c + dc) in unvisited
            ]
            if not candidates:
                stack.pop()
                continue
            nxt = rng.choice(candidates)
            unvisited.discard(nxt)
            free.add(nxt)
            free.add(((r + nxt[0]) // 2, (c + nxt[1]) // 2))
            stack.append(nxt)


def _room_door_candidates(
    size: int, room: tuple[int, int, int, int], free: set[Cell]
) -> list[Cell]:
    """Wall cells on the room's ring whose outside neighbor is already free."""
    r0, c0, h, w = room
    cands = []
    for c in range(c0, c0 + w):
        if r0 - 2 >= 0 and (r0 - 2, c) in free:
            cands.append((r0 - 1, c))
        if r0 + h + 1 < size and (r0 + h + 1, c) in free:
            cands.append((r0 + h, c))
    for r in range(r0, r0 + h):
        if c0 - 2 >= 0 and (r, c0 - 2) in free:
            cands.append((r, c0 - 1))
        if c0 + w + 1 < size and (r, c0 + w + 1) in free:
            cands.append((r, c0 + w))
    return sorted(set(cands))


def _connector_candidates(size: int, free: set[Cell]) -> list[Cell]:
    """Wall cells sitting directly between two free cells."""
    out = []
    for r in range(1, size - 1):
        for c in range(1, size - 1):
            if (r, c) in free:
                continue
            if ((r - 1, c) in free and (r + 1, c) in free) or (
                (r, c - 1) in free and (r, c + 1) in free
            ):
                out.append((r, c))
    return out


def generate_maze_map(params: MazeParams, seed: int) -> GridMap:
    """Rooms-and-corridors maze on an odd-sized square.

    Rooms are carved first, then a perfect maze fills the remaining odd
    lattice, every room gets doors to adjacent corridors, components are
    joined until the free space is a single region, optional extra loops are
    added, and tiny leftover pockets are filled. Retries with fresh draws up
    to `retry_count` times if a draw violates the constraints.
    """
    size = params.size
    for attempt in range(max(1, params.retry_count)):
        rng = random.Random(derive("maze-map", seed, attempt))
        free: set[Cell] = set()
        rooms = _carve_rooms(rng, size, params, free)
        in_room = set(free)
        _carve_maze(rng, size, free, in_room)
        if not free:
            continue

        if params.has_doors:
            ok = True
            for room in rooms:
                cands = [c for c in _room_door_candidates(size, room, free) if c not in free]
                if not cands:
                    ok = False
                    break
                n_doors = min(2, len(cands))
                for door in rng.sample(cands, n_doors):
                    free.add(door)
            if not ok:
                continue

        # Join remaining disconnected regions through the thinnest walls so the
        # final map is one component (required for agent placement).
        while True:
            comp_of: dict[Cell, int] = {}
            grid_tmp = _grid_from_free(size, free)
            comps = free_components(grid_tmp)
            if len(comps) <= 1:
                break
            for k, comp in enumerate(comps):
                for cell in comp:
                    comp_of[cell] = k
            connectors = [
                cell
                for cell in _connector_candidates(size, free)
                if _joins_two_components(cell, comp_of)
            ]
            if not connectors:
                break
            free.add(rng.choice(connectors))

        if params.extra_connection_probability > 0:
            for cell in _connector_candidates(size, free):
                if rng.random() < params.extra_connection_probability:
                    free.add(cell)

        grid = fill_small_components(_grid_from_free(size, free), params.min_component_size)
        comps = free_components(grid)
        if len(comps) == 1 and len(comps[0]) >= 2:
            return grid
    raise GenerationError(f"maze constraints unsatisfiable after {params.retry_count} attempts")


def _grid_from_free(size: int, free: set[Cell]) -> GridMap:
    cells = [(r, c) not in free for r in range(size) for c in range(size)]
    return GridMap(size, size, cells)


def _joins_two_components(cell: Cell, comp_of: dict[Cell, int]) -> bool:
    r, c = cell
    comps = {
        comp_of[nb]
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
        if nb in comp_of
    }
    return len(comps) >= 2


def make_maze_instance(params: MazeParams, n_agents: int, seed: int) -> Instance:
    grid = generate_maze_map(params, derive("map", seed))
    agents = place_agents(grid, n_agents, derive("placement", seed))
    inst = Instance(grid=grid, agents=tuple(agents), seed=seed, difficulty=0)
    return Instance(grid=grid, agents=tuple(agents), seed=seed, difficulty=difficulty_score(inst))


def make_maze_instances(params: MazeParams, n_agents: int, n_instances: int) -> list[Instance]:
    """One instance per seed 0..n-1; failed seeds are skipped and replaced by
    continuing the seed sequence."""
    out: list[Instance] = []
    s = 0
    while len(out) < n_instances:
        if s >= n_instances * 20:
            raise GenerationError("maze instance generation keeps failing")
        try:
            out.append(make_maze_instance(params, n_agents, s))
        except GenerationError:
            pass
        s += 1
    return out


# --- suite files --------------------------------------------------------------
#
# A suite on disk is a directory of map/instance file pairs plus manifest.json:
#   {"generator": {...}, "k_max": 64,
#    "instances": [{"id": "seed00007", "map": "maps/seed00007.map",
#                   "spec": "maps/seed00007.json", "seed": 7, "difficulty": 42}]}


def save_suite(
    out_dir: str | FsPath,
    instances: Sequence[Instance],
    generator_meta: dict,
    k_max: int = 64,
) -> FsPath:
    """Write maps, instance sidecars and the manifest; returns manifest path."""
    out = FsPath(out_dir)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    entries = []
    for inst in instances:
        name = f"seed{inst.seed:05d}"
        map_rel = f"maps/{name}.map"
        spec_rel = f"maps/{name}.json"
        (out / map_rel).write_text(inst.grid.to_text() + "\n")
        (out / spec_rel).write_text(dump_instance_json(inst.agents, inst.seed, k_max))
        entries.append(
            {
                "id": name,
                "map": map_rel,
                "spec": spec_rel,
                "seed": inst.seed,
                "difficulty": inst.difficulty,
            }
        )
    manifest = {"generator": generator_meta, "k_max": k_max, "instances": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_suite(manifest_path: str | FsPath) -> tuple[list[tuple[str, Instance]], dict]:
    """Read a manifest; returns ([(instance_id, Instance), ...], manifest dict)."""
    path = FsPath(manifest_path)
    manifest = json.loads(path.read_text())
    base = path.parent
    loaded = []
    for entry in manifest["instances"]:
        grid = load_map((base / entry["map"]).read_text())
        agents, seed, _k_max = parse_instance_json((base / entry["spec"]).read_text())
        validate_agents(grid, agents)
        inst = Instance(
            grid=grid,
            agents=tuple(agents),
            seed=seed,
            difficulty=int(entry.get("difficulty", 0)),
        )
        loaded.append((entry["id"], inst))
    return loaded, manifest
