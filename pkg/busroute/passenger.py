"""
Passenger simulation module.
Generates artificial boardings from stopping probabilities (with a
population-density tie-break) and aggregates simulations into per-station
pickup fractions.
"""

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Mapping, Union

import numpy as np
import pandas as pd

from .data_loader import Route, parse_boarding_averages
from .probability import StopProbabilityTable
from .utils import format_clock, hour_of, round_half_up

logger = logging.getLogger(__name__)


def simulation_rng(seed: int, index: int) -> np.random.Generator:
    """PCG64 generator for one simulation, derived from (seed, index).

    Pickup aggregation and route scoring draw simulation i from the same
    generator, so they see the same scenarios.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def new_seed() -> int:
    """Fresh 32-bit seed from OS entropy, for runs without an explicit seed."""
    return int(np.random.SeedSequence().entropy % (2 ** 32))


@dataclass(frozen=True)
class PassengerScenario:
    departure_time: float
    total_boardings: int
    assignment: Mapping[str, int]


@dataclass(frozen=True)
class PickupAggregate:
    departure_time: float
    n_simulations: int
    fractions: Mapping[str, float]
    rng_seed: int
    total_boardings: int

    def covered(self, stop_ids) -> float:
        return float(sum(self.fractions.get(s, 0.0) for s in stop_ids))

    def to_dict(self) -> dict:
        return {
            'departure_time': format_clock(self.departure_time, seconds=False),
            'n_simulations': self.n_simulations,
            'rng_seed': self.rng_seed,
            'total_boardings': self.total_boardings,
            'fractions': dict(self.fractions),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'stop_id': list(self.fractions), 'pickup_fraction': list(self.fractions.values())})


def station_probabilities(table: StopProbabilityTable, route: Route, departure_time: float) -> Dict[str, float]:
    """Stopping probability of every route station at the departure hour."""
    hour = hour_of(departure_time)
    return {s: table.resolved_probability(s, hour) for s in route.stop_ids}


def _tie_groups(probs: np.ndarray) -> List[np.ndarray]:
    groups = []
    seen = set()
    for i, value in enumerate(probs):
        if value <= 0 or value in seen:
            continue
        seen.add(value)
        members = np.flatnonzero(probs == value)
        if len(members) > 1:
            groups.append(members)
    return groups


def generate_scenario(total: int, probs_at_hour: Mapping[str, float], densities: Mapping[str, float],
                      rng: np.random.Generator, departure_time: float = 0.0) -> PassengerScenario:
    """Assign ``total`` passengers to stations.

    Each passenger draws a station weighted by P_s; a passenger landing on a
    station whose P_s is shared exactly with others is redrawn within that
    tied group, weighted by population density.
    """
    if total < 0:
        raise ValueError(f"total boardings must be >= 0, got {total}")
    stop_ids = list(probs_at_hour)
    probs = np.array([probs_at_hour[s] for s in stop_ids], dtype=float)
    if np.any(probs < 0):
        raise ValueError("stopping probabilities must be nonnegative")
    if not probs.sum() > 0:
        raise ValueError("degenerate probability vector")
    if total == 0:
        return PassengerScenario(departure_time=departure_time, total_boardings=0, assignment={})
    try:
        weights = np.array([densities[s] for s in stop_ids], dtype=float)
    except KeyError as e:
        raise ValueError(f"no population density for station {e.args[0]!r}") from None

    counts = rng.multinomial(total, probs / probs.sum())
    for group in _tie_groups(probs):
        landed = int(counts[group].sum())
        if landed == 0:
            continue
        group_weights = weights[group]
        if group_weights.sum() > 0:
            group_weights = group_weights / group_weights.sum()
        else:
            group_weights = np.full(len(group), 1.0 / len(group))
        counts[group] = rng.multinomial(landed, group_weights)

    assignment = {s: int(c) for s, c in zip(stop_ids, counts) if c > 0}
    return PassengerScenario(departure_time=departure_time, total_boardings=int(total), assignment=assignment)


def aggregate_pickup(departure_time: float, total: int, probs: Mapping[str, float],
                     densities: Mapping[str, float], n_simulations: int, seed: int) -> PickupAggregate:
    """Mean per-station fraction of passengers over independent simulations."""
    if n_simulations < 1:
        raise ValueError(f"n_simulations must be >= 1, got {n_simulations}")
    if total < 1:
        raise ValueError("at least one boarding is needed to compute pickup fractions")

    stop_ids = list(probs)
    sums = np.zeros(len(stop_ids))
    for index in range(n_simulations):
        scenario = generate_scenario(total, probs, densities, simulation_rng(seed, index), departure_time)
        sums += np.array([scenario.assignment.get(s, 0) for s in stop_ids], dtype=float) / total
    fractions = sums / n_simulations
    logger.info("Aggregated %d simulations of %d boardings at %s", n_simulations, total,
                format_clock(departure_time, seconds=False))
    return PickupAggregate(departure_time=departure_time, n_simulations=n_simulations,
                           fractions={s: float(f) for s, f in zip(stop_ids, fractions)},
                           rng_seed=seed, total_boardings=int(total))


def infer_total_boardings(departure_time: float,
                          boarding_averages: Union[str, os.PathLike, Mapping[float, float]]) -> int:
    """Average boardings of the nearest scheduled departure, rounded."""
    if isinstance(boarding_averages, (str, os.PathLike)):
        boarding_averages = parse_boarding_averages(os.fspath(boarding_averages))
    if not boarding_averages:
        raise ValueError("boarding averages are empty")
    nearest = min(boarding_averages, key=lambda t: (abs(t - departure_time), t))
    return round_half_up(boarding_averages[nearest])
