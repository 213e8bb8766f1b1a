"""
Command-line interface for busroute.
"""

import argparse
import datetime as dt
import json
import logging
import os
from typing import Callable, List, Optional, Sequence

import pandas as pd

from .allocation import optimal_second_departure
from .analysis import summaries_and_figs
from .config import (
    BUS_CAPACITY, DAY_KINDS, DEFAULT_LINK_THRESHOLD_MINUTES, DEFAULT_PA_MIN, DEFAULT_SEARCH_CAP_MINUTES,
    DEFAULT_SIMULATIONS, DEFAULT_SWEEP_PA_MIN, DEFAULT_SWEEP_TP, DEFAULT_TP, DIRECTIONS, INPUT_FILES,
    WORKSPACE_ENV_VAR,
)
from .evaluation import dry_run, parameter_sweep
from .export import export_html
from .passenger import aggregate_pickup, infer_total_boardings, new_seed, station_probabilities
from .routing import RoutingTables, plan_route, static_route
from .utils import format_clock, hour_of, parse_clock
from .workspace import Workspace, WorkspaceError

logger = logging.getLogger(__name__)


def _clock(value: str) -> float:
    try:
        return parse_clock(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _date(value: str) -> dt.date:
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid date {value!r} (expected YYYY-MM-DD)") from None


def _float_list(value: str) -> List[float]:
    try:
        values = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {value!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _stamp(minutes: float) -> str:
    return format_clock(minutes, seconds=False).replace(':', '')


def _seed(args) -> int:
    if args.seed is None:
        args.seed = new_seed()
        logger.info("No --seed given; generated seed %d (recorded in the artifact)", args.seed)
    return args.seed


def _total_boardings(args, workspace: Workspace, departure_time: float) -> int:
    if args.total is not None:
        if args.total < 1:
            raise ValueError(f"--total must be >= 1, got {args.total}")
        return args.total
    path = workspace.boarding_averages_path()
    if path is None:
        raise WorkspaceError("no boarding averages ingested: pass --total or ingest --boardings")
    return infer_total_boardings(departure_time, path)


def _load(workspace: Workspace):
    tables, document = workspace.load_tables()
    return tables, document['dataset_hash']


# Commands

def cmd_ingest(args, workspace: Workspace) -> List[str]:
    sources = {name: getattr(args, name) for name in INPUT_FILES if getattr(args, name)}
    summary = workspace.ingest(sources)
    events = summary['validation']['events']
    print(f"Events: {events['total']:,} rows, {events['accepted']:,} accepted, {events['rejected']:,} rejected")
    return [workspace.write_report('ingest', summary), workspace.manifest_path]


def cmd_metrics(args, workspace: Workspace) -> List[str]:
    artifacts = workspace.build_metrics(threshold_minutes=args.threshold, direction_id=args.direction,
                                        day_kinds=args.day_kind, start_date=args.start_date,
                                        end_date=args.end_date)
    document = workspace.read_metrics()
    counts = document['counts']
    print(f"Built tables from {counts['trips']:,} trips ({counts['linked_visits']:,} linked visits)")
    if document['shortcuts']['flagged']:
        print(f"Shortcuts excluded: {', '.join(document['shortcuts']['flagged'])}")
    return artifacts


def _plan(args, workspace: Workspace, tables: RoutingTables, departure_time: float):
    total = _total_boardings(args, workspace, departure_time)
    return plan_route(departure_time, tables, total, t_p=args.tp, pa_min=args.pa_min,
                      n_simulations=args.sims, seed=args.seed)


def cmd_propose(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    _seed(args)
    proposal, _ = _plan(args, workspace, tables, args.depart)
    document = dict(proposal.to_dict(), dataset_hash=digest)
    print(f"Stops: {' → '.join(proposal.stopped_ids)}")
    print(f"Trip time: {proposal.total_minutes:.1f} min, intermediate stops: {proposal.num_stops}")
    return [workspace.write_report(f"propose-{_stamp(args.depart)}", document)]


def cmd_simulate(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    seed = _seed(args)
    total = _total_boardings(args, workspace, args.depart)
    probs = station_probabilities(tables.probabilities, tables.route, args.depart)
    aggregate = aggregate_pickup(args.depart, total, probs, tables.route.densities, args.sims, seed)
    document = dict(aggregate.to_dict(), dataset_hash=digest)
    name = f"simulate-{_stamp(args.depart)}"
    return [workspace.write_report(name, document), workspace.write_table(name, aggregate.to_frame())]


def cmd_dry_run(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    seed = _seed(args)
    total = _total_boardings(args, workspace, args.depart)
    report = dry_run(args.depart, static_route(args.depart, tables), {'t_p': args.tp, 'pa_min': args.pa_min},
                     args.sims, seed, tables, total, capacity=args.capacity)
    for row in report.table_rows():
        print(row)
    name = f"dry-run-{_stamp(args.depart)}"
    document = dict(report.to_dict(), dataset_hash=digest)
    return [workspace.write_report(name, document), workspace.write_table(name, report.to_frame())]


def cmd_allocate(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    _seed(args)
    trip_a, _ = _plan(args, workspace, tables, args.trip_a)

    def route_trip_b(start: float):
        return _plan(args, workspace, tables, start)[0]

    result = optimal_second_departure(trip_a, args.max_wait, route_trip_b, worst_case=args.worst_case,
                                      search_cap=args.cap)
    print(result.table_row())
    if result.capped:
        print(f"No violation within {args.cap} minutes; returned the search cap")
    if result.infeasible:
        print("Infeasible: the wait limit is exceeded one minute after trip A")
    trip_b_total = _total_boardings(args, workspace, result.trip_b_start)
    document = dict(result.to_dict(), dataset_hash=digest,
                    parameters={'t_p': args.tp, 'pa_min': args.pa_min, 'n_simulations': args.sims,
                                'seed': args.seed, 'search_cap': args.cap,
                                'total_boardings': trip_a.parameters['total_boardings'],
                                'trip_b_total_boardings': trip_b_total})
    return [workspace.write_report(f"allocate-{_stamp(args.trip_a)}", document)]


def _sweep(args, workspace: Workspace, tables: RoutingTables):
    seed = _seed(args)
    total = _total_boardings(args, workspace, args.depart)
    return parameter_sweep(args.depart, args.tp_values, args.pa_min_values, args.sims, seed, tables, total)


def cmd_sweep(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    report = _sweep(args, workspace, tables)
    name = f"sweep-{_stamp(args.depart)}"
    print(report.matrix('num_stops').to_string())
    return [
        workspace.write_report(name, dict(report.to_dict(), dataset_hash=digest)),
        workspace.write_table(f"{name}-num_stops", report.matrix('num_stops').reset_index()),
        workspace.write_table(f"{name}-total_minutes", report.matrix('total_minutes').reset_index()),
    ]


def cmd_report(args, workspace: Workspace) -> List[str]:
    tables, digest = _load(workspace)
    seed = _seed(args)
    total = _total_boardings(args, workspace, args.depart)
    probs = station_probabilities(tables.probabilities, tables.route, args.depart)
    pickup = aggregate_pickup(args.depart, total, probs, tables.route.densities, args.sims, seed)
    sweep = parameter_sweep(args.depart, args.tp_values, args.pa_min_values, args.sims, seed, tables, total)
    lateness = pd.read_csv(os.path.join(workspace.tables_dir, 'lateness.csv'), dtype={'stop_id': str})
    summaries = summaries_and_figs(lateness, tables.probabilities, pickup, sweep, hour_of(args.depart))

    artifacts = [workspace.write_table(name, frame, subdir='plots')
                 for name, frame in summaries['frames'].items()]
    if args.html is not None:
        out_path = args.html or os.path.join(workspace.reports_dir, 'report.html')
        context = {'departure': format_clock(args.depart, seconds=False), 'seed': seed,
                   'simulations': args.sims, 'total boardings': total, 'dataset': digest}
        export_html(out_path, args.title, summaries, context)
        artifacts.append(out_path)
    return artifacts


# Parser

def _add_run_args(parser: argparse.ArgumentParser, depart: bool = True, routing: bool = True) -> None:
    if depart:
        parser.add_argument("--depart", type=_clock, required=True, help="Departure time HH:MM")
    if routing:
        parser.add_argument("--tp", type=float, default=DEFAULT_TP,
                            help=f"Skip-threshold percentile t_p (default: {DEFAULT_TP})")
        parser.add_argument("--pa-min", type=float, default=DEFAULT_PA_MIN,
                            help=f"Minimum pick-up fraction PA_min (default: {DEFAULT_PA_MIN})")
    parser.add_argument("--sims", type=int, default=DEFAULT_SIMULATIONS,
                        help=f"Passenger simulations (default: {DEFAULT_SIMULATIONS})")
    parser.add_argument("--seed", type=int, help="Random seed (default: generated and recorded)")
    parser.add_argument("--total", type=int, help="Total boardings (default: inferred from boarding averages)")


def _add_sweep_args(parser: argparse.ArgumentParser) -> None:
    _add_run_args(parser, routing=False)
    parser.add_argument("--tp-values", type=_float_list, default=DEFAULT_SWEEP_TP,
                        help="Comma-separated t_p values")
    parser.add_argument("--pa-min-values", type=_float_list, default=DEFAULT_SWEEP_PA_MIN,
                        help="Comma-separated PA_min values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="busroute", description="Semi-dynamic bus routing from historical trip data")
    parser.add_argument("--workspace", help=f"Workspace directory (default: ${WORKSPACE_ENV_VAR} or ./workspace)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Validate and copy input files into the workspace")
    for name in INPUT_FILES:
        p.add_argument(f"--{name}", help=f"Path to the {name} file (CSV or Excel)")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("metrics", help="Build idle-time, trip-time and stopping-probability tables")
    p.add_argument("--threshold", type=float, default=DEFAULT_LINK_THRESHOLD_MINUTES,
                   help=f"Linking/sanity threshold in minutes (default: {DEFAULT_LINK_THRESHOLD_MINUTES:g})")
    p.add_argument("--direction", choices=DIRECTIONS, help="Route direction (required if both are present)")
    p.add_argument("--day-kind", action="append", choices=DAY_KINDS, help="Keep only these day kinds (repeatable)")
    p.add_argument("--start-date", type=_date, help="First service date kept (YYYY-MM-DD)")
    p.add_argument("--end-date", type=_date, help="Last service date kept (YYYY-MM-DD)")
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("propose", help="Propose a semi-dynamic route for one departure")
    _add_run_args(p)
    p.set_defaults(handler=cmd_propose)

    p = sub.add_parser("simulate", help="Simulate passenger pick-up fractions")
    _add_run_args(p, routing=False)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("dry-run", help="Compare static and semi-dynamic routes on shared scenarios")
    _add_run_args(p)
    p.add_argument("--capacity", type=int, nargs="?", const=BUS_CAPACITY,
                   help=f"Cap boardings per bus (default: off; {BUS_CAPACITY} when given without value)")
    p.set_defaults(handler=cmd_dry_run)

    p = sub.add_parser("allocate", help="Latest start of a second bus within a passenger wait limit")
    p.add_argument("--trip-a", type=_clock, required=True, help="Start of trip A, HH:MM")
    p.add_argument("--max-wait", type=float, required=True, help="Maximum waiting time in minutes")
    p.add_argument("--worst-case", action="store_true", help="Use the full headway instead of its half")
    p.add_argument("--cap", type=int, default=DEFAULT_SEARCH_CAP_MINUTES,
                   help=f"Search cap in minutes (default: {DEFAULT_SEARCH_CAP_MINUTES})")
    _add_run_args(p, depart=False)
    p.set_defaults(handler=cmd_allocate)

    p = sub.add_parser("sweep", help="Sweep t_p and PA_min")
    _add_sweep_args(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("report", help="Write plot data (and optionally an HTML report)")
    _add_sweep_args(p)
    p.set_defaults(handler=cmd_report)
    p.add_argument("--html", nargs="?", const="", help="Also export an HTML report (default: reports/report.html)")
    p.add_argument("--title", default="Semi-dynamic routing report", help="HTML report title")
    return parser


def _log_arguments(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ('handler', 'verbose', 'workspace')}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    workspace = Workspace.resolve(args.workspace)
    handler: Callable = args.handler

    entry = {'command': args.command, 'timestamp': dt.datetime.now().isoformat(timespec='seconds')}
    try:
        artifacts = handler(args, workspace)
        for path in artifacts:
            print(f"Wrote {path}")
        entry.update(status='ok', artifacts=artifacts, diagnostic=None)
        code = 0
    except Exception as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"Error: {e}")
        entry.update(status='error', artifacts=[], diagnostic=str(e))
        code = 1

    entry['arguments'] = json.loads(json.dumps(_log_arguments(args), default=str))
    if os.path.isdir(workspace.root):
        workspace.append_log(entry)
    return code


if __name__ == "__main__":
    exit(main())
