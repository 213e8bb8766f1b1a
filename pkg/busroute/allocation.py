"""
Bus allocation module.
Finds the latest start of a follow-up trip that keeps passenger waiting time
at every shared station within a limit.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional

from .config import DEFAULT_SEARCH_CAP_MINUTES
from .routing import RouteProposal
from .utils import format_clock

logger = logging.getLogger(__name__)

# Routes the follow-up trip semi-dynamically for a given start (minutes after midnight).
RoutingContext = Callable[[float], RouteProposal]


@dataclass(frozen=True)
class AllocationResult:
    trip_a_start: float
    trip_b_start: float
    max_median_wait: float
    wait_model: str
    station_proxies: Mapping[str, float]
    violated_at: Optional[float]
    capped: bool = False
    infeasible: bool = False

    def table_row(self) -> str:
        return (f"{format_clock(self.trip_a_start, seconds=False)} → "
                f"{format_clock(self.trip_b_start, seconds=False)}, {self.max_median_wait:g}")

    def to_dict(self) -> dict:
        return {
            'trip_a_start': format_clock(self.trip_a_start, seconds=False),
            'trip_b_start': format_clock(self.trip_b_start, seconds=False),
            'max_median_wait': self.max_median_wait,
            'wait_model': self.wait_model,
            'station_proxies': dict(self.station_proxies),
            'violated_at': None if self.violated_at is None else format_clock(self.violated_at, seconds=False),
            'capped': self.capped,
            'infeasible': self.infeasible,
        }


def wait_proxy(trip_b_arrival: float, trip_a_departure: float, worst_case: bool = False) -> float:
    """Half the gap between the first bus leaving and the second arriving (full gap for worst case)."""
    gap = trip_b_arrival - trip_a_departure
    if gap <= 0:
        logger.warning("Degenerate wait gap of %.3f min: second bus does not arrive after the first departs",
                       gap)
        return 0.0
    return gap if worst_case else gap / 2.0


def station_wait_proxies(trip_a: RouteProposal, trip_b: RouteProposal,
                         worst_case: bool = False) -> Dict[str, float]:
    """Wait proxies at the stations both trips stop at."""
    times_a = trip_a.timeline_for()
    times_b = trip_b.timeline_for()
    shared = [s for s in times_a if s in times_b]
    if not shared:
        raise ValueError("no shared stations between trips")
    return {s: wait_proxy(times_b[s].arrival, times_a[s].departure, worst_case) for s in shared}


def optimal_second_departure(trip_a: RouteProposal, max_median_wait: float, routing_context: RoutingContext,
                             worst_case: bool = False,
                             search_cap: int = DEFAULT_SEARCH_CAP_MINUTES) -> AllocationResult:
    """Step trip B's start in 1-minute increments until a wait proxy exceeds the limit.

    The result is one minute before the first violating start. Without a
    violation inside ``search_cap`` minutes, the cap is returned and flagged.
    """
    if not trip_a.timeline:
        raise ValueError("trip A needs a computed timeline")
    if max_median_wait < 0:
        raise ValueError(f"max_median_wait must be >= 0, got {max_median_wait}")
    if search_cap < 1:
        raise ValueError(f"search_cap must be >= 1 minute, got {search_cap}")

    model = 'worst_case' if worst_case else 'median'
    start_a = trip_a.departure_time
    previous: Optional[Dict[str, float]] = None
    for delta in range(1, search_cap + 1):
        start_b = start_a + delta
        proxies = station_wait_proxies(trip_a, routing_context(start_b), worst_case)
        if any(value > max_median_wait for value in proxies.values()):
            if previous is None:
                # trip B starting with trip A is trip A itself
                previous = station_wait_proxies(trip_a, trip_a, worst_case)
                logger.warning("Wait limit %.3g violated one minute after trip A; infeasible", max_median_wait)
            return AllocationResult(trip_a_start=start_a, trip_b_start=start_b - 1,
                                    max_median_wait=max_median_wait, wait_model=model,
                                    station_proxies=previous, violated_at=start_b,
                                    infeasible=delta == 1)
        previous = proxies

    logger.warning("No wait violation within %d minutes of %s; returning the search cap",
                   search_cap, format_clock(start_a, seconds=False))
    return AllocationResult(trip_a_start=start_a, trip_b_start=start_a + search_cap,
                            max_median_wait=max_median_wait, wait_model=model,
                            station_proxies=previous, violated_at=None, capped=True)
