"""
busroute - semi-dynamic bus routing
Builds per-trip bus routes from historical arrival/departure records: hourly
idle-time, trip-time and stopping-probability tables, threshold-based skip
decisions, simulated passenger pick-up and second-bus allocation.
"""

__version__ = "1.0.0"
__author__ = "busroute developers"

from .data_loader import (
    load_table, parse_events, parse_stations, parse_schedule, parse_shortcuts,
    validate_shortcuts, parse_boarding_averages, Route,
)
from .filters import apply_filters
from .wrangle import (
    link_events, compute_lateness, extract_trips, build_idle_table, build_trip_time_matrix,
)
from .probability import skipped_station_time, build_probability_table, threshold_for_hour
from .passenger import generate_scenario, aggregate_pickup, infer_total_boardings
from .routing import (
    RoutingTables, propose_route, revise_for_pickup, compute_timeline, static_route, plan_route,
)
from .allocation import wait_proxy, optimal_second_departure
from .evaluation import dry_run, parameter_sweep
from .analysis import summaries_and_figs
from .export import export_html
from .workspace import Workspace, WorkspaceError
from .config import DEFAULT_TP, DEFAULT_PA_MIN, DEFAULT_SIMULATIONS, DEFAULT_LINK_THRESHOLD_MINUTES

__all__ = [
    'load_table',
    'parse_events',
    'parse_stations',
    'parse_schedule',
    'parse_shortcuts',
    'validate_shortcuts',
    'parse_boarding_averages',
    'Route',
    'apply_filters',
    'link_events',
    'compute_lateness',
    'extract_trips',
    'build_idle_table',
    'build_trip_time_matrix',
    'skipped_station_time',
    'build_probability_table',
    'threshold_for_hour',
    'generate_scenario',
    'aggregate_pickup',
    'infer_total_boardings',
    'RoutingTables',
    'propose_route',
    'revise_for_pickup',
    'compute_timeline',
    'static_route',
    'plan_route',
    'wait_proxy',
    'optimal_second_departure',
    'dry_run',
    'parameter_sweep',
    'summaries_and_figs',
    'export_html',
    'Workspace',
    'WorkspaceError',
    'DEFAULT_TP',
    'DEFAULT_PA_MIN',
    'DEFAULT_SIMULATIONS',
    'DEFAULT_LINK_THRESHOLD_MINUTES',
]
