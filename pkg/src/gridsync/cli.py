"""``sync`` command line: run scenarios, print dispatch schedules, check configs.

Exit codes: 0 success, 1 configuration error, 2 safety violation during a run.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from gridsync.config import ConfigError, load_scenario, with_seed
from gridsync.dispatch import (
    DispatchFileError,
    DispatchOptions,
    Source,
    all_grid,
    build_schedule,
    default_gen_tariff,
    default_grid_tariff,
    default_load,
    load_profile,
    load_tariff,
    schedule_cost,
)
from gridsync.scenario import ScenarioError, simulate
from gridsync.trace import export_trace

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SAFETY = 2


def _errors(exc: ConfigError | DispatchFileError) -> None:
    for line in exc.errors:
        print(f"error: {line}", file=sys.stderr)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_scenario(args.scenario)
        if args.seed is not None:
            config = with_seed(config, args.seed)
    except ConfigError as exc:
        _errors(exc)
        return EXIT_CONFIG
    try:
        result = simulate(config)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    csv = export_trace(result.records)
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    final = result.records[-1]
    print(
        f"{len(result.records)} ticks, supervisor {result.supervisor.phase.value}, "
        f"active source {final.active_source.value}, "
        f"cost {final.cumulative_cost_rupees:.4f} rupees",
        file=sys.stderr,
    )
    if result.safety_violation:
        for event in result.safety_events:
            print(f"safety: tick {event.tick}: {event.message}", file=sys.stderr)
        return EXIT_SAFETY
    return EXIT_OK


def format_schedule(schedule, grid, gen, load) -> str:
    lines = []
    for h, src in enumerate(schedule.assignment):
        rate = gen.rates[h] if src is Source.GENERATOR else grid.rates[h]
        lines.append(
            f"{h:02d}-{h + 1:02d}  {src.value:<9}  grid={grid.rates[h]:.2f}  "
            f"gen={gen.rates[h]:.2f}  cost={load.demand_kW[h] * rate:.2f}"
        )
    lines.append(f"total_cost_rupees {schedule.total_cost_rupees:.2f}")
    lines.append(f"switch_count {schedule.switch_count}")
    return "\n".join(lines) + "\n"


def cmd_dispatch(args: argparse.Namespace) -> int:
    try:
        grid = load_tariff(args.grid, Source.GRID) if args.grid else default_grid_tariff()
        gen = load_tariff(args.gen, Source.GENERATOR) if args.gen else default_gen_tariff()
        load = load_profile(args.load) if args.load else default_load()
        opts = DispatchOptions(
            startup_cost_rupees=args.startup,
            hysteresis_margin=args.hysteresis,
            power_saver=args.power_saver,
        )
    except DispatchFileError as exc:
        _errors(exc)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    schedule = build_schedule(grid, gen, load, opts)
    sys.stdout.write(format_schedule(schedule, grid, gen, load))
    if args.compare:
        baseline = schedule_cost(all_grid(), load, grid, gen, opts)
        print(f"all_grid_cost_rupees {baseline:.2f}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    try:
        load_scenario(args.scenario)
    except ConfigError as exc:
        _errors(exc)
        return EXIT_CONFIG
    print(f"{args.scenario}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sync", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log safety events")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and export its trace")
    run.add_argument("scenario")
    run.add_argument("--out", help="write the CSV trace here instead of stdout")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.set_defaults(func=cmd_run)

    disp = sub.add_parser("dispatch", help="print the hourly source schedule")
    disp.add_argument("--grid", help="grid tariff file (default: packaged curve)")
    disp.add_argument("--gen", help="generator tariff file (default: packaged curve)")
    disp.add_argument("--load", help="load profile file (default: flat 1 kW)")
    disp.add_argument("--startup", type=float, default=2.0, help="start-up cost, rupees")
    disp.add_argument("--hysteresis", type=float, default=0.0, help="hold band, rupees/kWh")
    disp.add_argument("--power-saver", action="store_true", help="idle instead of shutting down")
    disp.add_argument("--compare", action="store_true", help="also print the all-grid cost")
    disp.set_defaults(func=cmd_dispatch)

    check = sub.add_parser("check", help="validate a scenario file")
    check.add_argument("scenario")
    check.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
