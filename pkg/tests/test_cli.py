"""CLI surface: subcommands, files on disk, exit codes."""

import json

import pytest

from mapf_mcts.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_generate_run_score_verify_roundtrip(tmp_path, capsys):
    suite_dir = tmp_path / "suite"
    rc = run_cli(
        "generate",
        "--kind", "random",
        "--out", str(suite_dir),
        "--count", "2",
        "--seeds", "6",
        "--agents", "2",
        "--size", "8",
        "--density", "0.2",
        "--fill-threshold", "4",
    )
    assert rc == 0
    manifest = suite_dir / "manifest.json"
    assert manifest.exists()
    payload = json.loads(manifest.read_text())
    assert len(payload["instances"]) == 2
    for entry in payload["instances"]:
        assert (suite_dir / entry["map"]).exists()
        assert (suite_dir / entry["spec"]).exists()

    report_path = tmp_path / "report.jsonl"
    rc = run_cli(
        "run",
        "--manifest", str(manifest),
        "--algorithms", "astar",
        "--agent-counts", "2",
        "--iterations", "20",
        "--seed", "3",
        "--out", str(report_path),
        "--format", "jsonl",
    )
    assert rc == 0
    assert report_path.exists()

    rc = run_cli("verify", "--report", str(report_path))
    assert rc == 0
    out = capsys.readouterr().out
    assert "consistent" in out

    rc = run_cli("score", "--manifest", str(manifest))
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    scores = [int(line.split("\t")[1]) for line in lines]
    assert scores == sorted(scores, reverse=True)


def test_run_table_to_stdout(tmp_path, capsys):
    suite_dir = tmp_path / "suite"
    assert run_cli(
        "generate", "--kind", "random", "--out", str(suite_dir),
        "--count", "1", "--seeds", "4", "--agents", "2", "--size", "8",
    ) == 0
    rc = run_cli(
        "run", "--manifest", str(suite_dir / "manifest.json"),
        "--algorithms", "astar", "--agent-counts", "2",
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "astar" in out and "isr" in out


def test_csv_report_is_deterministic(tmp_path):
    suite_dir = tmp_path / "suite"
    run_cli(
        "generate", "--kind", "random", "--out", str(suite_dir),
        "--count", "2", "--seeds", "5", "--agents", "2", "--size", "8",
    )
    args = [
        "run", "--manifest", str(suite_dir / "manifest.json"),
        "--algorithms", "astar", "--agent-counts", "1,2",
        "--seed", "9", "--format", "csv",
    ]
    run_cli(*args, "--out", str(tmp_path / "a.csv"))
    run_cli(*args, "--out", str(tmp_path / "b.csv"))

    def strip_timing(path):
        lines = path.read_text().splitlines()
        return [",".join(line.split(",")[:-1]) for line in lines]

    assert strip_timing(tmp_path / "a.csv") == strip_timing(tmp_path / "b.csv")


def test_bad_arguments_exit_1(capsys):
    assert run_cli("run") == 1  # neither --manifest nor --kind
    assert run_cli("run", "--manifest", "x", "--kind", "random") == 1
    assert run_cli("nonsense") == 1
    assert run_cli("verify", "--report", "/nonexistent/report.jsonl") == 1
    assert run_cli("run", "--kind", "random", "--algorithms", "frobnicate") == 1


def test_verify_mismatch_exits_2(tmp_path, capsys):
    suite_dir = tmp_path / "suite"
    run_cli(
        "generate", "--kind", "random", "--out", str(suite_dir),
        "--count", "1", "--seeds", "4", "--agents", "2", "--size", "8",
    )
    report_path = tmp_path / "report.jsonl"
    run_cli(
        "run", "--manifest", str(suite_dir / "manifest.json"),
        "--algorithms", "astar", "--agent-counts", "2",
        "--out", str(report_path), "--format", "jsonl",
    )
    # corrupt one aggregate line
    lines = report_path.read_text().splitlines()
    for i, line in enumerate(lines):
        payload = json.loads(line)
        if payload["kind"] == "aggregate":
            payload["isr"] = 0.123456
            lines[i] = json.dumps(payload, sort_keys=True)
            break
    report_path.write_text("\n".join(lines) + "\n")
    assert run_cli("verify", "--report", str(report_path)) == 2
    assert "mismatch" in capsys.readouterr().err


def test_maze_generate(tmp_path):
    suite_dir = tmp_path / "mazes"
    rc = run_cli(
        "generate", "--kind", "maze", "--out", str(suite_dir),
        "--count", "2", "--agents", "3",
    )
    assert rc == 0
    payload = json.loads((suite_dir / "manifest.json").read_text())
    assert payload["generator"]["kind"] == "maze"
    assert len(payload["instances"]) == 2
