"""
Routing module.
Builds semi-dynamic route proposals: threshold-based stop/skip decisions,
shortcut substitution, minimum-pickup revision and timeline computation.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .config import DEFAULT_PA_MIN, DEFAULT_SIMULATIONS, DEFAULT_TP
from .data_loader import Route, ShortcutEdge
from .passenger import PickupAggregate, aggregate_pickup, station_probabilities
from .probability import NoProbabilityData, StopProbabilityTable, station_threshold, threshold_for_hour
from .utils import format_clock, hour_of
from .wrangle import IdleTimeTable, TripTimeMatrix

logger = logging.getLogger(__name__)

STOP = 'stop'
SKIP = 'skip'
DIRECT = 'direct'
SHORTCUT = 'shortcut'

# Coverage comparisons tolerate float error in summed fractions.
_COVERAGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RoutingTables:
    """Everything a proposal reads: route, hourly tables and validated shortcuts."""

    route: Route
    idle: IdleTimeTable
    trip_times: TripTimeMatrix
    probabilities: StopProbabilityTable
    shortcuts: Tuple[ShortcutEdge, ...] = ()

    def shortcut_for(self, from_stop: str, to_stop: str) -> Optional[ShortcutEdge]:
        bypassed = tuple(self.route.stations_between(from_stop, to_stop))
        for edge in self.shortcuts:
            if edge.from_stop == from_stop and edge.to_stop == to_stop and tuple(edge.bypassed_stops) == bypassed:
                return edge
        return None


@dataclass(frozen=True)
class RoutingState:
    """Elapsed minutes ``g`` since departure at station index ``n``."""

    start: float
    g: float = 0.0
    n: int = 0

    @property
    def clock(self) -> float:
        return self.start + self.g

    @property
    def hour(self) -> int:
        return hour_of(self.clock)

    def advance(self, minutes: float, n: Optional[int] = None) -> 'RoutingState':
        if minutes < 0:
            raise ValueError("routing clock cannot run backwards")
        return RoutingState(start=self.start, g=self.g + minutes, n=self.n if n is None else n)


@dataclass(frozen=True)
class Decision:
    stop_id: str
    action: str
    reason: str  # mandatory | threshold | pickup | static
    probability: Optional[float] = None
    threshold: Optional[float] = None
    hour: Optional[int] = None

    def to_dict(self) -> dict:
        return {'stop_id': self.stop_id, 'action': self.action, 'reason': self.reason,
                'probability': self.probability, 'threshold': self.threshold, 'hour': self.hour}


@dataclass(frozen=True)
class Segment:
    from_stop: str
    to_stop: str
    kind: str
    minutes: Optional[float] = None

    def to_dict(self) -> dict:
        return {'from_stop': self.from_stop, 'to_stop': self.to_stop, 'kind': self.kind, 'minutes': self.minutes}


@dataclass(frozen=True)
class TimelineEntry:
    stop_id: str
    arrival: float
    departure: float

    def to_dict(self) -> dict:
        return {'stop_id': self.stop_id,
                'arrival': format_clock(self.arrival), 'departure': format_clock(self.departure),
                'arrival_minutes': self.arrival, 'departure_minutes': self.departure}


@dataclass(frozen=True)
class RouteProposal:
    departure_time: float
    parameters: Mapping[str, Any]
    decisions: Tuple[Decision, ...]
    segments: Tuple[Segment, ...]
    timeline: Tuple[TimelineEntry, ...] = ()
    total_minutes: Optional[float] = None
    pickup_coverage: Optional[float] = None

    @property
    def stopped_ids(self) -> List[str]:
        return [d.stop_id for d in self.decisions if d.action == STOP]

    @property
    def skipped_ids(self) -> List[str]:
        return [d.stop_id for d in self.decisions if d.action == SKIP]

    @property
    def num_stops(self) -> int:
        """Stopped stations excluding origin and terminus."""
        return max(len(self.stopped_ids) - 2, 0)

    def timeline_for(self) -> Dict[str, TimelineEntry]:
        return {entry.stop_id: entry for entry in self.timeline}

    def to_dict(self) -> dict:
        return {
            'departure_time': format_clock(self.departure_time, seconds=False),
            'parameters': dict(self.parameters),
            'decisions': [d.to_dict() for d in self.decisions],
            'segments': [s.to_dict() for s in self.segments],
            'timeline': [t.to_dict() for t in self.timeline],
            'total_minutes': self.total_minutes,
            'num_stops': self.num_stops,
            'pickup_coverage': self.pickup_coverage,
        }


def direct_chain_minutes(chain: Sequence[str], tables: RoutingTables, clock: float) -> float:
    """Minutes along adjacent segments, re-resolving the hour as the clock advances."""
    start = clock
    for a, b in zip(chain[:-1], chain[1:]):
        clock += tables.trip_times.minutes(a, b, hour_of(clock))
    return clock - start


def _segment_timing(from_stop: str, to_stop: str, tables: RoutingTables, clock: float,
                    prefer_shortcut: bool) -> Tuple[str, float]:
    chain = [from_stop] + tables.route.stations_between(from_stop, to_stop) + [to_stop]
    direct = direct_chain_minutes(chain, tables, clock)
    if prefer_shortcut and len(chain) > 2:
        edge = tables.shortcut_for(from_stop, to_stop)
        estimate = edge.minutes_at(hour_of(clock)) if edge is not None else None
        if estimate is not None and estimate < direct:
            return SHORTCUT, estimate
        if edge is not None:
            logger.debug("Shortcut %s not faster at %s; using direct segments", edge.key, format_clock(clock))
    return DIRECT, direct


def _check_segments(route: RouteProposal) -> None:
    stopped = route.stopped_ids
    pairs = [(s.from_stop, s.to_stop) for s in route.segments]
    if pairs != list(zip(stopped[:-1], stopped[1:])):
        raise ValueError("segments must connect consecutive stopped stations exactly once")


def compute_timeline(route: RouteProposal, tables: RoutingTables) -> RouteProposal:
    """Fill arrival/departure times, segment minutes and total trip minutes.

    A shortcut segment that is not faster than the direct chain at its
    lookup hour (or has no estimate for that hour) becomes direct.
    """
    _check_segments(route)
    terminus = tables.route.terminus.stop_id
    clock = route.departure_time
    timeline = [TimelineEntry(stop_id=tables.route.origin.stop_id, arrival=clock, departure=clock)]
    segments = []
    for segment in route.segments:
        kind, minutes = _segment_timing(segment.from_stop, segment.to_stop, tables, clock,
                                        prefer_shortcut=segment.kind == SHORTCUT)
        arrival = clock + minutes
        if segment.to_stop == terminus:
            departure = arrival
        else:
            departure = arrival + tables.idle.minutes(segment.to_stop, hour_of(arrival))
        segments.append(Segment(segment.from_stop, segment.to_stop, kind, minutes))
        timeline.append(TimelineEntry(stop_id=segment.to_stop, arrival=arrival, departure=departure))
        clock = departure
    total = timeline[-1].arrival - route.departure_time
    return replace(route, segments=tuple(segments), timeline=tuple(timeline), total_minutes=total)


def _threshold(tables: RoutingTables, hour: int, t_p: float) -> float:
    intermediates = tables.route.intermediate_ids
    try:
        return threshold_for_hour(tables.probabilities, hour, t_p, stop_ids=intermediates).t
    except NoProbabilityData:
        logger.debug("No probability data at hour %d; using all-hours station probabilities", hour)
        return station_threshold(tables.probabilities, t_p, stop_ids=intermediates)


def propose_route(departure_time: float, t_p: float, tables: RoutingTables,
                  shortcuts: Optional[Sequence[ShortcutEdge]] = None) -> RouteProposal:
    """Walk the route deciding stop (P_s >= t) or skip at each station's pass hour.

    Origin and terminus always stop. Each run of skipped stations is covered
    by a validated shortcut when one matches it exactly and is faster.
    """
    if not 0.0 <= t_p <= 100.0:
        raise ValueError(f"t_p must be within [0, 100], got {t_p}")
    if shortcuts is not None:
        tables = replace(tables, shortcuts=tuple(shortcuts))
    route = tables.route
    terminus = route.terminus.stop_id

    state = RoutingState(start=departure_time)
    decisions = [Decision(route.origin.stop_id, STOP, 'mandatory', hour=state.hour)]
    segments = []
    last_stop = route.origin.stop_id
    last_departure = departure_time

    for n, (prev, stop_id) in enumerate(zip(route.stop_ids[:-1], route.stop_ids[1:]), start=1):
        state = state.advance(tables.trip_times.minutes(prev, stop_id, state.hour), n)
        hour = state.hour
        if stop_id == terminus:
            decision = Decision(stop_id, STOP, 'mandatory', hour=hour)
        else:
            k = tables.probabilities.resolved_probability(stop_id, hour)
            p = _threshold(tables, hour, t_p)
            decision = Decision(stop_id, STOP if k >= p else SKIP, 'threshold',
                                probability=k, threshold=p, hour=hour)
        decisions.append(decision)
        if decision.action == SKIP:
            continue

        kind, minutes = _segment_timing(last_stop, stop_id, tables, last_departure, prefer_shortcut=True)
        arrival = last_departure + minutes
        departure = arrival if stop_id == terminus else arrival + tables.idle.minutes(stop_id, hour_of(arrival))
        segments.append(Segment(last_stop, stop_id, kind))
        state = RoutingState(start=departure_time, g=departure - departure_time, n=n)
        last_stop, last_departure = stop_id, departure

    proposal = RouteProposal(departure_time=departure_time, parameters={'t_p': t_p},
                             decisions=tuple(decisions), segments=tuple(segments))
    return compute_timeline(proposal, tables)


def _rebuild_segments(old: Sequence[Segment], stopped: Sequence[str]) -> Tuple[Segment, ...]:
    kinds = {(s.from_stop, s.to_stop): s.kind for s in old}
    return tuple(Segment(a, b, kinds.get((a, b), DIRECT)) for a, b in zip(stopped[:-1], stopped[1:]))


def revise_for_pickup(route: RouteProposal, pickup_aggregate: PickupAggregate, pa_min: float,
                      tables: RoutingTables) -> RouteProposal:
    """Add skipped stations, highest pickup fraction first, until coverage reaches PA_min.

    Stations are never removed. Segments around added stations become direct.
    """
    if not 0.0 <= pa_min <= 1.0:
        raise ValueError(f"PA_min must be within [0, 1] (total achievable fraction is 1.0), got {pa_min}")
    missing = [s for s in tables.route.stop_ids if s not in pickup_aggregate.fractions]
    if missing:
        raise ValueError(f"pickup aggregate does not cover station(s): {', '.join(missing)}")

    fractions = pickup_aggregate.fractions
    covered = pickup_aggregate.covered(route.stopped_ids)
    candidates = sorted((s for s in route.skipped_ids if fractions[s] > 0),
                        key=lambda s: (-fractions[s], tables.route.position(s)))
    added = set()
    for stop_id in candidates:
        if covered >= pa_min - _COVERAGE_TOLERANCE:
            break
        added.add(stop_id)
        covered += fractions[stop_id]

    parameters = dict(route.parameters, pa_min=pa_min)
    if not added:
        return replace(route, parameters=parameters, pickup_coverage=covered)

    logger.info("PA_min %.3f: added %d station(s) to reach coverage %.3f", pa_min, len(added), covered)
    decisions = tuple(replace(d, action=STOP, reason='pickup') if d.stop_id in added else d
                      for d in route.decisions)
    stopped = [d.stop_id for d in decisions if d.action == STOP]
    revised = replace(route, parameters=parameters, decisions=decisions,
                      segments=_rebuild_segments(route.segments, stopped), pickup_coverage=covered)
    return compute_timeline(revised, tables)


def static_route(departure_time: float, tables: RoutingTables) -> RouteProposal:
    """The fixed route: every station stopped, direct segments only."""
    ids = tables.route.stop_ids
    decisions = tuple(Decision(s, STOP, 'static') for s in ids)
    segments = tuple(Segment(a, b, DIRECT) for a, b in zip(ids[:-1], ids[1:]))
    proposal = RouteProposal(departure_time=departure_time, parameters={'system': 'static'},
                             decisions=decisions, segments=segments)
    return compute_timeline(proposal, tables)


def plan_route(departure_time: float, tables: RoutingTables, total_boardings: int,
               t_p: float = DEFAULT_TP, pa_min: float = DEFAULT_PA_MIN,
               n_simulations: int = DEFAULT_SIMULATIONS, seed: int = 0
               ) -> Tuple[RouteProposal, PickupAggregate]:
    """Propose on t_p, simulate pickup, revise on PA_min and re-time."""
    proposal = propose_route(departure_time, t_p, tables)
    probs = station_probabilities(tables.probabilities, tables.route, departure_time)
    aggregate = aggregate_pickup(departure_time, total_boardings, probs, tables.route.densities,
                                 n_simulations, seed)
    revised = revise_for_pickup(proposal, aggregate, pa_min, tables)
    parameters = {'t_p': t_p, 'pa_min': pa_min, 'n_simulations': n_simulations, 'seed': seed,
                  'total_boardings': total_boardings}
    return replace(revised, parameters=parameters), aggregate
