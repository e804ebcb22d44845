"""Command line front end.

Subcommands:
  generate  build an instance suite (random or maze maps) and write it to disk
  run       run a benchmark suite and write a report
  score     print difficulty scores for a saved suite
  verify    recompute a jsonl report's aggregates from its raw rows

Exit codes: 0 success, 1 bad input or validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench, map_forge
from .bench import Algorithm, Report, SuiteConfig
from .grid_world import GridWorldError
from .map_forge import GenerationError, MazeParams, RandomMapParams


class CliError(Exception):
    """Input/validation problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise CliError(message)


def _add_generate(sub) -> None:
    p = sub.add_parser("generate", help="generate an instance suite")
    p.add_argument("--kind", choices=["random", "maze"], default="random")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=20, help="instances to keep")
    p.add_argument("--agents", type=int, default=8, help="agents per instance")
    p.add_argument("--k-max", type=int, default=64)
    p.add_argument("--size", type=int, default=None, help="map side (default 16/15)")
    p.add_argument("--density", type=float, default=0.3, help="random maps only")
    p.add_argument("--fill-threshold", type=int, default=5, help="random maps only")
    p.add_argument(
        "--seeds",
        type=int,
        default=None,
        help="random maps: seeds to scan before keeping the hardest --count",
    )


def _add_run(sub) -> None:
    p = sub.add_parser("run", help="run a benchmark suite")
    p.add_argument("--manifest", help="suite manifest written by 'generate'")
    p.add_argument("--kind", choices=["random", "maze"], help="generate instances in memory")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--agents", type=int, default=8, help="agents per generated instance")
    p.add_argument("--size", type=int, default=None)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--fill-threshold", type=int, default=5)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument(
        "--algorithms",
        default="subgoal_mamcts,astar",
        help="comma list of joint,mamcts,subgoal_mamcts,astar",
    )
    p.add_argument("--agent-counts", default="4", help="comma list, e.g. 4,8")
    p.add_argument("--k-max", type=int, default=64)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--exploration-c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--r-target", type=float, default=1.0)
    p.add_argument("--r-subgoal", type=float, default=0.1)
    p.add_argument("--episodes", type=int, default=1, help="episodes per instance")
    p.add_argument("--seed", type=int, default=0, help="suite master seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="report path (stdout table when omitted)")
    p.add_argument("--format", choices=["csv", "jsonl", "table"], default="csv")


def _add_score(sub) -> None:
    p = sub.add_parser("score", help="print instance difficulty ranking")
    p.add_argument("--manifest", required=True)


def _add_verify(sub) -> None:
    p = sub.add_parser("verify", help="check a jsonl report's aggregates")
    p.add_argument("--report", required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="mapf-mcts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_run(sub)
    _add_score(sub)
    _add_verify(sub)
    return parser


def _generate_instances(args) -> tuple[list[tuple[str, map_forge.Instance]], dict]:
    if args.kind == "maze":
        params = MazeParams(size=args.size if args.size else 15)
        instances = map_forge.make_maze_instances(params, args.agents, args.count)
        meta = {"kind": "maze", "size": params.size, "agents": args.agents}
    else:
        params = RandomMapParams(
            size=args.size if args.size else 16,
            density=args.density,
            min_component_fill=args.fill_threshold,
        )
        n_seeds = args.seeds if args.seeds is not None else max(args.count * 10, args.count)
        instances = map_forge.select_hard_instances(params, args.agents, n_seeds, args.count)
        meta = {
            "kind": "random",
            "size": params.size,
            "density": params.density,
            "min_component_fill": params.min_component_fill,
            "agents": args.agents,
            "seeds_scanned": n_seeds,
        }
    return [(f"seed{inst.seed:05d}", inst) for inst in instances], meta


def cmd_generate(args) -> int:
    instances, meta = _generate_instances(args)
    manifest = map_forge.save_suite(
        args.out, [inst for _id, inst in instances], meta, k_max=args.k_max
    )
    print(f"wrote {len(instances)} instances to {manifest}")
    return 0


def cmd_run(args) -> int:
    if bool(args.manifest) == bool(args.kind):
        raise CliError("pass exactly one of --manifest or --kind")
    if args.manifest:
        instances, _manifest = map_forge.load_suite(args.manifest)
    else:
        instances, _meta = _generate_instances(args)
    try:
        algorithms = [Algorithm(name.strip()) for name in args.algorithms.split(",") if name.strip()]
    except ValueError as exc:
        raise CliError(f"unknown algorithm: {exc}") from exc
    try:
        agent_counts = [int(x) for x in args.agent_counts.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad --agent-counts: {exc}") from exc
    config = SuiteConfig(
        instances=instances,
        algorithms=algorithms,
        agent_counts=agent_counts,
        k_max=args.k_max,
        master_seed=args.seed,
        episodes_per_instance=args.episodes,
        iterations=args.iterations,
        exploration_c=args.exploration_c,
        gamma=args.gamma,
        r_target=args.r_target,
        r_subgoal=args.r_subgoal,
    )
    report = bench.run_suite(config, jobs=args.jobs)
    if args.out:
        bench.write_report(report, args.out, args.format)
        print(f"wrote {len(report.rows)} rows to {args.out}")
        print(bench.render_report(report, "table"), end="")
    else:
        print(bench.render_report(report, "table"), end="")
    if report.errors:
        for error in report.errors:
            print(f"error: {error}", file=sys.stderr)
        return 2
    return 0


def cmd_score(args) -> int:
    instances, _manifest = map_forge.load_suite(args.manifest)
    scored = [
        (map_forge.difficulty_score(inst), instance_id) for instance_id, inst in instances
    ]
    for score, instance_id in sorted(scored, key=lambda t: (-t[0], t[1])):
        print(f"{instance_id}\t{score}")
    return 0


def cmd_verify(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise CliError(f"no such report: {path}")
    report: Report = bench.read_report(path)
    problems = bench.verify_report(report)
    if problems:
        for problem in problems:
            print(f"mismatch: {problem}", file=sys.stderr)
        return 2
    print(f"ok: {len(report.rows)} rows, {len(report.aggregates)} aggregates consistent")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "score": cmd_score,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (CliError, GridWorldError, GenerationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
