"""Command-line front end: ``run``, ``sweep``, ``tables`` and ``verify``.

Exit codes: 0 success, 1 invalid input (or a failed ``verify``), 2 when at
least one cluster had no feasible allocation.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from dataclasses import replace

from nomaclust.clustering import ClusteringConfig
from nomaclust.domain import Direction
from nomaclust.pipeline import (
    INFEASIBLE,
    run_scenario,
    run_tables,
    sweep,
    write_run_csv,
    write_sweep_csv,
    write_tables_csv,
)
from nomaclust.scenario import Scenario, ScenarioError, SweepSpec, load_scenarios
from nomaclust.verification import check_agreement

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input, keep 2 for infeasible clusters
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _direction(text: str) -> Direction:
    try:
        return Direction.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_scenario_args(p: argparse.ArgumentParser):
    p.add_argument("scenario", help="scenario file (INI, '# nomaclust-scenario v1' header)")
    p.add_argument("--section", action="append", help="only run the named section (repeatable)")
    p.add_argument("--direction", type=_direction, help="override direction (downlink/uplink, dl/ul)")
    p.add_argument("--cluster-size", type=int, help="force clusters of this many users")
    p.add_argument("--min-rate", type=float, help="minimum rate for every user, bits/s")


def _add_output_args(p: argparse.ArgumentParser):
    p.add_argument("--output", "-o", help="CSV destination (default: stdout)")
    p.add_argument("--precision", type=int, default=2, help="decimals for Mbps columns (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nomaclust", description="NOMA user clustering and optimal power allocation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="cluster, allocate and report each scenario")
    _add_scenario_args(p)
    _add_output_args(p)
    p.add_argument("--oracle", action="store_true", help="add numeric-oracle columns (clusters up to 4 users)")

    p = sub.add_parser("sweep", help="vary one user's gain and report each point")
    _add_scenario_args(p)
    _add_output_args(p)
    p.add_argument("--user", type=int, help="1-based user number to vary")
    p.add_argument("--start", type=float, help="first gain, dB")
    p.add_argument("--stop", type=float, help="last gain, dB")
    p.add_argument("--step", type=float, help="gain step, dB")

    p = sub.add_parser("tables", help="reproduce the bundled downlink/uplink comparison tables")
    _add_output_args(p)
    p.add_argument("--table", choices=("dl", "ul", "both"), default="both")

    p = sub.add_parser("verify", help="compare closed forms with the numeric oracle on random clusters")
    p.add_argument("--count", type=int, default=100, help="instances per direction and size (default 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4], choices=(2, 3, 4))
    p.add_argument("--direction", choices=("dl", "ul", "both"), default="both")
    return parser


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if args.direction is not None:
        scenario = replace(scenario, direction=args.direction)
    if args.cluster_size is not None:
        scenario = replace(scenario, clustering=ClusteringConfig.forced_size(args.cluster_size, scenario.direction))
    if args.min_rate is not None:
        scenario = replace(scenario, min_rates=(args.min_rate,))
    return scenario


def _load(args) -> list[Scenario]:
    scenarios = load_scenarios(args.scenario)
    if args.section:
        known = {s.name for s in scenarios}
        missing = [name for name in args.section if name not in known]
        if missing:
            raise ScenarioError(f"no such section(s): {', '.join(missing)}")
        scenarios = [s for s in scenarios if s.name in args.section]
    return [_apply_overrides(s, args) for s in scenarios]


@contextlib.contextmanager
def _open_output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _cmd_run(args) -> int:
    results = [run_scenario(s, oracle=args.oracle or None) for s in _load(args)]
    with _open_output(args.output) as out:
        write_run_csv(results, out, args.precision, oracle=args.oracle)
    return EXIT_INFEASIBLE if any(r.num_infeasible for r in results) else EXIT_OK


def _cmd_sweep(args) -> int:
    given = [args.user, args.start, args.stop, args.step]
    if any(v is not None for v in given) and not all(v is not None for v in given):
        raise ScenarioError("--user, --start, --stop and --step go together")
    scenarios = _load(args)
    infeasible = False
    with _open_output(args.output) as out:
        for k, scenario in enumerate(scenarios):
            spec = SweepSpec(args.user, args.start, args.stop, args.step) if args.user is not None else scenario.sweep
            if spec is None:
                raise ScenarioError(f"{scenario.name}: no sweep given in the file or on the command line")
            points = sweep(scenario, spec)
            infeasible |= any(p.status == INFEASIBLE for p in points)
            if k:
                out.write("\n")
            write_sweep_csv(scenario, spec, points, out, args.precision)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def _cmd_tables(args) -> int:
    keys = ("dl", "ul") if args.table == "both" else (args.table,)
    cases = run_tables(keys)
    with _open_output(args.output) as out:
        write_tables_csv(cases, out, args.precision)
    return EXIT_INFEASIBLE if any(r.result.num_infeasible for rows in cases for r in rows) else EXIT_OK


def _cmd_verify(args) -> int:
    directions = {"dl": [Direction.DOWNLINK], "ul": [Direction.UPLINK]}.get(
        args.direction, [Direction.DOWNLINK, Direction.UPLINK]
    )
    ok = True
    for direction in directions:
        for m in args.sizes:
            res = check_agreement(direction, m, args.count, args.seed)
            ok &= res.passed
            print(
                f"{'PASS' if res.passed else 'FAIL'} {direction.value} m={m} n={res.count} "
                f"worst_rel_gap={res.worst_rel_gap:.2e} kkt_failures={res.kkt_failures} "
                f"time={res.seconds:.1f}s"
            )
    return EXIT_OK if ok else EXIT_INVALID


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "tables": _cmd_tables, "verify": _cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, ValueError) as exc:
        print(f"nomaclust: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
