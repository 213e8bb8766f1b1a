"""
Evaluation module.
Dry-run comparison of static and semi-dynamic routes against shared passenger
scenarios, and parameter sweeps over t_p and PA_min.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import DEFAULT_PA_MIN, DEFAULT_TP
from .passenger import aggregate_pickup, generate_scenario, simulation_rng, station_probabilities
from .routing import RouteProposal, RoutingTables, plan_route, propose_route, revise_for_pickup
from .utils import format_clock

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemScore:
    pickup_fraction_mean: float
    num_stops: int
    per_simulation: Tuple[float, ...]
    stopped_ids: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            'pickup_fraction_mean': self.pickup_fraction_mean,
            'pickup_fraction_std': float(np.std(self.per_simulation)),
            'num_stops': self.num_stops,
            'stopped_ids': list(self.stopped_ids),
            'per_simulation': list(self.per_simulation),
        }


@dataclass(frozen=True)
class DryRunReport:
    departure_time: float
    n_simulations: int
    seed: int
    total_boardings: int
    capacity: Optional[int]
    systems: Mapping[str, SystemScore]
    parameters: Mapping[str, object]

    def table_rows(self) -> list:
        return [f"{name.replace('_', '-').title():<13} {score.pickup_fraction_mean:.3f}  {score.num_stops}"
                for name, score in self.systems.items()]

    def to_dict(self) -> dict:
        return {
            'departure_time': format_clock(self.departure_time, seconds=False),
            'n_simulations': self.n_simulations,
            'seed': self.seed,
            'total_boardings': self.total_boardings,
            'capacity': self.capacity,
            'parameters': dict(self.parameters),
            'systems': {name: score.to_dict() for name, score in self.systems.items()},
        }

    def to_frame(self) -> pd.DataFrame:
        """Per-simulation pickup fractions, one column per system."""
        frame = pd.DataFrame({name: list(score.per_simulation) for name, score in self.systems.items()})
        frame.insert(0, 'simulation', range(self.n_simulations))
        return frame


@dataclass(frozen=True)
class SweepPoint:
    t_p: float
    pa_min: float
    num_stops: int
    total_minutes: float


@dataclass(frozen=True)
class SweepReport:
    departure_time: float
    n_simulations: int
    seed: int
    points: Tuple[SweepPoint, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(p) for p in self.points], columns=['t_p', 'pa_min', 'num_stops', 'total_minutes'])

    def matrix(self, metric: str) -> pd.DataFrame:
        """Grid of one metric, t_p down the rows and PA_min across the columns."""
        return self.to_frame().pivot(index='t_p', columns='pa_min', values=metric)

    def to_dict(self) -> dict:
        return {
            'departure_time': format_clock(self.departure_time, seconds=False),
            'n_simulations': self.n_simulations,
            'seed': self.seed,
            'grid': [vars(p) for p in self.points],
        }


def pickup_fraction(assignment: Mapping[str, int], stopped_ids: Sequence[str], total: int,
                    capacity: Optional[int] = None) -> float:
    """Fraction of a scenario's passengers boarding at the stopped stations.

    With a capacity, passengers at earlier stations board first.
    """
    if total <= 0:
        raise ValueError("scenario has no passengers")
    boarded = 0
    for stop_id in stopped_ids:
        waiting = assignment.get(stop_id, 0)
        if capacity is not None:
            waiting = min(waiting, capacity - boarded)
        boarded += waiting
    return boarded / total


def score_routes(routes: Mapping[str, RouteProposal], tables: RoutingTables, total_boardings: int,
                 n_simulations: int, seed: int, capacity: Optional[int] = None) -> Dict[str, SystemScore]:
    """Score every route against the same generated scenario in each simulation."""
    if n_simulations < 1:
        raise ValueError(f"n_simulations must be >= 1, got {n_simulations}")
    departure_time = next(iter(routes.values())).departure_time
    probs = station_probabilities(tables.probabilities, tables.route, departure_time)
    densities = tables.route.densities

    fractions: Dict[str, list] = {name: [] for name in routes}
    for index in range(n_simulations):
        scenario = generate_scenario(total_boardings, probs, densities,
                                     simulation_rng(seed, index), departure_time)
        for name, route in routes.items():
            fractions[name].append(pickup_fraction(scenario.assignment, route.stopped_ids,
                                                   total_boardings, capacity))

    return {name: SystemScore(pickup_fraction_mean=float(np.mean(values)), num_stops=routes[name].num_stops,
                              per_simulation=tuple(values), stopped_ids=tuple(routes[name].stopped_ids))
            for name, values in fractions.items()}


def dry_run(departure_time: float, static_route: RouteProposal, dynamic_params: Mapping[str, float],
            n_simulations: int, seed: int, tables: RoutingTables, total_boardings: int,
            capacity: Optional[int] = None) -> DryRunReport:
    """Compare the static route with a semi-dynamic one over shared scenarios."""
    t_p = dynamic_params.get('t_p', DEFAULT_TP)
    pa_min = dynamic_params.get('pa_min', DEFAULT_PA_MIN)
    dynamic, _ = plan_route(departure_time, tables, total_boardings, t_p=t_p, pa_min=pa_min,
                            n_simulations=n_simulations, seed=seed)
    systems = score_routes({'static': static_route, 'semi_dynamic': dynamic}, tables, total_boardings,
                           n_simulations, seed, capacity)
    logger.info("Dry run at %s: static %.3f vs semi-dynamic %.3f", format_clock(departure_time, seconds=False),
                systems['static'].pickup_fraction_mean, systems['semi_dynamic'].pickup_fraction_mean)
    return DryRunReport(departure_time=departure_time, n_simulations=n_simulations, seed=seed,
                        total_boardings=total_boardings, capacity=capacity, systems=systems,
                        parameters={'t_p': t_p, 'pa_min': pa_min})


def parameter_sweep(departure_time: float, t_p_values: Sequence[float], pa_min_values: Sequence[float],
                    n_simulations: int, seed: int, tables: RoutingTables, total_boardings: int) -> SweepReport:
    """Run the full planning pipeline on every (t_p, PA_min) grid point."""
    if not t_p_values or not pa_min_values:
        raise ValueError("parameter sweep needs at least one t_p and one PA_min value")

    # the pickup aggregate depends only on departure and seed, so it is shared
    probs = station_probabilities(tables.probabilities, tables.route, departure_time)
    aggregate = aggregate_pickup(departure_time, total_boardings, probs, tables.route.densities,
                                 n_simulations, seed)
    points = []
    for t_p in t_p_values:
        proposal = propose_route(departure_time, t_p, tables)
        for pa_min in pa_min_values:
            route = revise_for_pickup(proposal, aggregate, pa_min, tables)
            points.append(SweepPoint(t_p=float(t_p), pa_min=float(pa_min), num_stops=route.num_stops,
                                     total_minutes=float(route.total_minutes)))
    logger.info("Swept %d grid points at %s", len(points), format_clock(departure_time, seconds=False))
    return SweepReport(departure_time=departure_time, n_simulations=n_simulations, seed=seed,
                       points=tuple(points))
