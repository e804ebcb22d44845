"""Benchmark on rooms-and-corridors maze maps.

Mazes are congested by construction (single-width corridors, doored rooms),
so no difficulty selection is applied; instances are taken seed by seed.

    python scripts/run_maze_bench.py --count 20 --agent-counts 4 --jobs 2
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mapf_mcts.bench import Algorithm, SuiteConfig, render_report, run_suite, write_report
from mapf_mcts.map_forge import MazeParams, make_maze_instances


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=15, help="odd maze side")
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--roster", type=int, default=16)
    parser.add_argument("--agent-counts", default="4")
    parser.add_argument("--algorithms", default="subgoal_mamcts,astar")
    parser.add_argument("--iterations", type=int, default=1000)
    parser.add_argument("--k-max", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    t0 = time.perf_counter()
    instances = make_maze_instances(MazeParams(size=args.size), args.roster, args.count)
    print(f"generated {len(instances)} maze instances in {time.perf_counter() - t0:.1f}s")

    config = SuiteConfig(
        instances=[(f"seed{inst.seed:05d}", inst) for inst in instances],
        algorithms=[Algorithm(a.strip()) for a in args.algorithms.split(",") if a.strip()],
        agent_counts=[int(x) for x in args.agent_counts.split(",")],
        k_max=args.k_max,
        master_seed=args.seed,
        iterations=args.iterations,
    )
    t0 = time.perf_counter()
    report = run_suite(config, jobs=args.jobs)
    print(f"suite finished in {(time.perf_counter() - t0) / 60:.1f} min")
    print(render_report(report, "table"), end="")
    if args.out:
        fmt = "csv" if args.out.endswith(".csv") else "jsonl"
        write_report(report, args.out, fmt)
        print(f"wrote {args.out}")
    return 2 if report.errors else 0


if __name__ == "__main__":
    sys.exit(main())
