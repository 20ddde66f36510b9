"""Command-line front end: ``agvtwin run|validate|graph``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .floor import FloorGraph, ZoneId, build_graph
from .scenario import ParseError, Scenario, ValidationError, load_scenario_file, simulate
from .twin import MetricsReport, Trace, TwinError

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_DEADLOCK = 3
EXIT_MAX_SLOTS = 4
EXIT_INTERNAL = 5

_OUTCOME_CODES = {"completed": EXIT_OK, "deadlock": EXIT_DEADLOCK, "max_slots": EXIT_MAX_SLOTS}


def exit_code(metrics: MetricsReport | dict) -> int:
    outcome = metrics["outcome"] if isinstance(metrics, dict) else metrics.outcome
    return _OUTCOME_CODES[outcome]


def render_frame(graph: FloorGraph, stations, occupancy: dict[int, ZoneId]) -> str:
    """Text frame: '.' free, '#' occupied, 'C' station, last digit of the AGV id on its zone."""
    cells = [["." for _ in range(graph.n)] for _ in range(graph.m)]
    for z in stations:
        cells[z.b - 1][z.a - 1] = "C"
    for z in graph.occupied:
        cells[z.b - 1][z.a - 1] = "#"
    for agv_id, z in sorted(occupancy.items()):
        cells[z.b - 1][z.a - 1] = str(agv_id)[-1]
    return "\n".join("".join(row) for row in cells) + "\n"


def run(scenario: Scenario, trace_path, metrics_path, render_dir=None, max_slots: int | None = None) -> int:
    render = Path(render_dir) if render_dir is not None else None
    try:
        if render is not None:
            render.mkdir(parents=True, exist_ok=True)
        with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
            hook = None
            if render is not None:

                def hook(twin, slot, occupancy):
                    frame = render_frame(twin.graph, twin.stations, occupancy)
                    (render / f"frame_{slot:05d}.txt").write_text(frame, encoding="utf-8")

            twin = simulate(scenario, Trace(fh, keep=False), max_slots, hook)
        with open(metrics_path, "w", encoding="utf-8") as fh:
            json.dump(twin.metrics.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except TwinError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return exit_code(twin.metrics)


def _load(path: str) -> Scenario:
    return load_scenario_file(path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="agvtwin", description="Zone-graph AGV fleet simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--trace", required=True, help="JSON Lines event trace output")
    p_run.add_argument("--metrics", required=True, help="metrics JSON output")
    p_run.add_argument("--render", help="directory for per-slot text frames")
    p_run.add_argument("--max-slots", type=int, help="override the scenario's run cap")

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")

    p_graph = sub.add_parser("graph", help="dump the adjacency matrix as CSV")
    p_graph.add_argument("scenario")

    args = parser.parse_args(argv)
    try:
        scenario = _load(args.scenario)
    except (ParseError, ValidationError) as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {args.scenario}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(f"{args.scenario}: ok ({scenario.grid.n}x{scenario.grid.m}, {len(scenario.agvs)} AGVs, {len(scenario.missions)} missions)")
        return EXIT_OK
    if args.command == "graph":
        sys.stdout.write(build_graph(scenario.grid, scenario.config.wait_weight).to_csv())
        return EXIT_OK
    if args.max_slots is not None and args.max_slots < 1:
        print("--max-slots must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    return run(scenario, args.trace, args.metrics, args.render, args.max_slots)


if __name__ == "__main__":
    sys.exit(main())
