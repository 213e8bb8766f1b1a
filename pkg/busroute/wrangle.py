"""
Event wrangling module.
Links arrival/departure events, then derives lateness records and the hourly
idle-time and trip-time tables (with imputation of missing cells).
"""

import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .config import DEFAULT_LINK_THRESHOLD_MINUTES, HOURS_PER_DAY
from .data_loader import RawEvent, Route, ScheduleEntry, group_schedule
from .utils import day_kind_for, median, minutes_between

logger = logging.getLogger(__name__)


class Provenance(str, Enum):
    OBSERVED = 'observed'
    IMPUTED_HOUR = 'imputed_hour'
    IMPUTED_PAIR = 'imputed_pair'
    IMPUTED_GLOBAL = 'imputed_global'


@dataclass(frozen=True)
class LinkedVisit:
    trip_id: str
    stop_id: str
    arrival: dt.datetime
    departure: dt.datetime
    idle_minutes: float
    service_date: dt.date


@dataclass(frozen=True)
class LatenessRecord:
    stop_id: str
    service_date: dt.date
    trip_id: str
    scheduled_departure: float  # minutes after midnight of the service date
    actual_departure: dt.datetime
    lateness_minutes: float


@dataclass(frozen=True)
class TripStop:
    stop_id: str
    route_position: int
    arrival: Optional[dt.datetime]
    departure: Optional[dt.datetime]

    @property
    def stop_time(self) -> dt.datetime:
        return self.arrival if self.arrival is not None else self.departure


@dataclass(frozen=True)
class TripRecord:
    """One trip's stopped stations in route order."""

    service_date: dt.date
    trip_id: str
    direction_id: str
    stops: Tuple[TripStop, ...]

    @property
    def stop_times(self) -> Dict[str, dt.datetime]:
        return {s.stop_id: s.stop_time for s in self.stops}


@dataclass(frozen=True)
class TableCell:
    value: float
    provenance: Provenance


@dataclass(frozen=True)
class IdleTimeTable:
    """Median idle minutes per (stop_id, hour)."""

    cells: Mapping[Tuple[str, int], TableCell]

    def minutes(self, stop_id: str, hour: int) -> float:
        try:
            return self.cells[(stop_id, hour)].value
        except KeyError:
            raise LookupError(f"idle time missing for station {stop_id!r} at hour {hour}") from None

    def provenance(self, stop_id: str, hour: int) -> Provenance:
        return self.cells[(stop_id, hour)].provenance

    def to_frame(self) -> pd.DataFrame:
        rows = [{'stop_id': s, 'hour': h, 'idle_minutes': c.value, 'provenance': c.provenance.value}
                for (s, h), c in self.cells.items()]
        return pd.DataFrame(rows, columns=['stop_id', 'hour', 'idle_minutes', 'provenance'])

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> 'IdleTimeTable':
        return cls({(r['stop_id'], int(r['hour'])): TableCell(float(r['idle_minutes']), Provenance(r['provenance']))
                    for r in records})


@dataclass(frozen=True)
class TripTimeMatrix:
    """Median trip minutes per (from_stop, to_stop, hour) over adjacent pairs."""

    cells: Mapping[Tuple[str, str, int], TableCell]

    def minutes(self, from_stop: str, to_stop: str, hour: int) -> float:
        try:
            return self.cells[(from_stop, to_stop, hour)].value
        except KeyError:
            raise LookupError(f"trip time missing for {from_stop}->{to_stop} at hour {hour}") from None

    def provenance(self, from_stop: str, to_stop: str, hour: int) -> Provenance:
        return self.cells[(from_stop, to_stop, hour)].provenance

    def to_frame(self) -> pd.DataFrame:
        rows = [{'from_stop': a, 'to_stop': b, 'hour': h, 'trip_minutes': c.value,
                 'provenance': c.provenance.value}
                for (a, b, h), c in self.cells.items()]
        return pd.DataFrame(rows, columns=['from_stop', 'to_stop', 'hour', 'trip_minutes', 'provenance'])

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> 'TripTimeMatrix':
        return cls({(r['from_stop'], r['to_stop'], int(r['hour'])):
                    TableCell(float(r['trip_minutes']), Provenance(r['provenance']))
                    for r in records})


def _event_key(event: RawEvent) -> Tuple:
    return (event.timestamp, event.service_date, event.trip_id, event.stop_id, event.direction_id)


def link_events(departures: Sequence[RawEvent], arrivals: Sequence[RawEvent],
                threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES) -> List[LinkedVisit]:
    """Pair each departure with the latest earlier arrival of the same trip and stop.

    Pairs with a zero gap or a gap of at least ``threshold_minutes`` are
    discarded. Each arrival is consumed at most once; departures are
    processed in time order.
    """
    if threshold_minutes <= 0:
        raise ValueError(f"threshold_minutes must be positive, got {threshold_minutes}")

    pool: Dict[Tuple, List[RawEvent]] = defaultdict(list)
    for arrival in sorted(arrivals, key=_event_key):
        pool[(arrival.service_date, arrival.trip_id, arrival.stop_id)].append(arrival)

    visits = []
    discarded = 0
    for departure in sorted(departures, key=_event_key):
        candidates = pool.get((departure.service_date, departure.trip_id, departure.stop_id), [])
        best = None
        for idx, arrival in enumerate(candidates):
            if arrival.timestamp < departure.timestamp:
                best = idx  # sorted, so the last earlier arrival minimises the gap
            else:
                break
        if best is None:
            discarded += 1
            continue
        arrival = candidates[best]
        gap = minutes_between(arrival.timestamp, departure.timestamp)
        if gap >= threshold_minutes:
            discarded += 1
            continue
        del candidates[best]
        visits.append(LinkedVisit(trip_id=departure.trip_id, stop_id=departure.stop_id,
                                  arrival=arrival.timestamp, departure=departure.timestamp,
                                  idle_minutes=gap, service_date=departure.service_date))

    if discarded:
        logger.info("Event linking discarded %d of %d departures", discarded, len(departures))
    visits.sort(key=lambda v: (v.service_date, v.trip_id, v.arrival, v.stop_id))
    return visits


def split_events(events: Iterable[RawEvent]) -> Tuple[List[RawEvent], List[RawEvent]]:
    """Split events into (departures, arrivals)."""
    departures, arrivals = [], []
    for event in events:
        (arrivals if event.is_arrival else departures).append(event)
    return departures, arrivals


def compute_lateness(departures: Sequence[RawEvent], schedule: Sequence[ScheduleEntry],
                     threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES) -> List[LatenessRecord]:
    """Match each actual departure to the nearest unused scheduled departure.

    Matches with ``|lateness| >= threshold_minutes`` are discarded. Stations
    without schedule entries for the event's day kind are reported and skipped.
    """
    timetable = group_schedule(schedule)

    used = set()
    missing = set()
    records = []
    for event in sorted((e for e in departures if not e.is_arrival), key=_event_key):
        times = timetable[day_kind_for(event.service_date)].get(event.stop_id)
        if not times:
            missing.add(event.stop_id)
            continue
        day_start = dt.datetime.combine(event.service_date, dt.time())
        actual = minutes_between(day_start, event.timestamp)
        candidates = [(abs(actual - s), s) for s in times if (event.service_date, event.stop_id, s) not in used]
        if not candidates:
            continue
        distance, scheduled = min(candidates)
        if distance >= threshold_minutes:
            continue
        used.add((event.service_date, event.stop_id, scheduled))
        records.append(LatenessRecord(stop_id=event.stop_id, service_date=event.service_date,
                                      trip_id=event.trip_id, scheduled_departure=scheduled,
                                      actual_departure=event.timestamp,
                                      lateness_minutes=actual - scheduled))

    if missing:
        logger.warning("No schedule entries for station(s) %s; lateness skipped there", ', '.join(sorted(missing)))
    return records


def lateness_frame(records: Sequence[LatenessRecord]) -> pd.DataFrame:
    """Lateness records as a frame, one row per matched departure."""
    rows = [{'service_date': r.service_date.isoformat(), 'trip_id': r.trip_id, 'stop_id': r.stop_id,
             'scheduled_departure': r.scheduled_departure,
             'actual_departure': r.actual_departure.isoformat(),
             'hour': r.actual_departure.hour, 'lateness_minutes': r.lateness_minutes}
            for r in records]
    columns = ['service_date', 'trip_id', 'stop_id', 'scheduled_departure', 'actual_departure',
               'hour', 'lateness_minutes']
    return pd.DataFrame(rows, columns=columns)


def extract_trips(events: Sequence[RawEvent], route: Route,
                  threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES) -> List[TripRecord]:
    """Group a direction's events into route-ordered trips of stopped stations."""
    on_route = [e for e in events if e.direction_id == route.direction_id and e.stop_id in route]
    if len(on_route) < len(events):
        logger.info("Ignored %d events outside route direction %s", len(events) - len(on_route), route.direction_id)

    departures, arrivals = split_events(on_route)
    linked = {}
    for visit in link_events(departures, arrivals, threshold_minutes):
        linked.setdefault((visit.service_date, visit.trip_id, visit.stop_id), visit)

    by_trip: Dict[Tuple[dt.date, str], Dict[str, List[RawEvent]]] = defaultdict(lambda: defaultdict(list))
    for event in on_route:
        by_trip[event.trip_key][event.stop_id].append(event)

    trips = []
    for (service_date, trip_id), stops in sorted(by_trip.items()):
        trip_stops = []
        for stop_id, stop_events in stops.items():
            visit = linked.get((service_date, trip_id, stop_id))
            if visit is not None:
                arrival, departure = visit.arrival, visit.departure
            else:
                arr = [e.timestamp for e in stop_events if e.is_arrival]
                dep = [e.timestamp for e in stop_events if not e.is_arrival]
                arrival = min(arr) if arr else None
                departure = max(dep) if dep else None
            trip_stops.append(TripStop(stop_id=stop_id, route_position=route.position(stop_id),
                                       arrival=arrival, departure=departure))
        trip_stops.sort(key=lambda s: s.route_position)
        trips.append(TripRecord(service_date=service_date, trip_id=trip_id,
                                direction_id=route.direction_id, stops=tuple(trip_stops)))
    logger.info("Extracted %d trips for direction %s", len(trips), route.direction_id)
    return trips


def build_idle_table(visits: Sequence[LinkedVisit], stop_ids: Optional[Sequence[str]] = None) -> IdleTimeTable:
    """Median idle minutes per station and arrival hour, imputed to a total table.

    Missing hours take the station's all-hours median; stations without any
    visit take the global median.
    """
    if not visits:
        raise ValueError("no linked visits")

    samples: Dict[Tuple[str, int], List[float]] = defaultdict(list)
    by_station: Dict[str, List[float]] = defaultdict(list)
    for visit in visits:
        samples[(visit.stop_id, visit.arrival.hour)].append(visit.idle_minutes)
        by_station[visit.stop_id].append(visit.idle_minutes)

    global_median = median([v.idle_minutes for v in visits])
    stations = list(stop_ids) if stop_ids is not None else sorted(by_station)
    cells = {}
    for stop_id in stations:
        station_values = by_station.get(stop_id)
        station_median = median(station_values) if station_values else None
        for hour in range(HOURS_PER_DAY):
            observed = samples.get((stop_id, hour))
            if observed:
                cells[(stop_id, hour)] = TableCell(median(observed), Provenance.OBSERVED)
            elif station_median is not None:
                cells[(stop_id, hour)] = TableCell(station_median, Provenance.IMPUTED_HOUR)
            else:
                cells[(stop_id, hour)] = TableCell(global_median, Provenance.IMPUTED_GLOBAL)
    return IdleTimeTable(cells)


def trip_time_samples(trips: Sequence[TripRecord],
                      threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES
                      ) -> Dict[Tuple[str, str, int], List[float]]:
    """Adjacent-station trip times keyed by (from, to, hour of arrival)."""
    samples: Dict[Tuple[str, str, int], List[float]] = defaultdict(list)
    for trip in trips:
        for prev, nxt in zip(trip.stops[:-1], trip.stops[1:]):
            if nxt.route_position - prev.route_position != 1:
                continue
            if prev.departure is None or nxt.arrival is None:
                continue
            gap = minutes_between(prev.departure, nxt.arrival)
            if not 0 < gap < threshold_minutes:
                continue
            samples[(prev.stop_id, nxt.stop_id, nxt.arrival.hour)].append(gap)
    return samples


def build_trip_time_matrix(trips: Sequence[TripRecord], route: Route,
                           threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES) -> TripTimeMatrix:
    """Median trip minutes per adjacent pair and hour, imputed to a total matrix.

    Hours without data take the pair's overall median; pairs without any data
    take the overall median of the nearest observed pair in route order
    (preceding pair first on ties).
    """
    samples = trip_time_samples(trips, threshold_minutes)
    pairs = route.adjacent_pairs()
    by_pair: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    for (a, b, _), values in samples.items():
        by_pair[(a, b)].extend(values)

    observed = [i for i, pair in enumerate(pairs) if by_pair.get(pair)]
    if not observed:
        raise ValueError("no trip-time data for station pair(s): "
                         + ', '.join(f"{a}->{b}" for a, b in pairs))

    cells = {}
    for i, (a, b) in enumerate(pairs):
        if by_pair.get((a, b)):
            overall = median(by_pair[(a, b)])
            for hour in range(HOURS_PER_DAY):
                values = samples.get((a, b, hour))
                if values:
                    cells[(a, b, hour)] = TableCell(median(values), Provenance.OBSERVED)
                else:
                    cells[(a, b, hour)] = TableCell(overall, Provenance.IMPUTED_HOUR)
        else:
            donor = min(observed, key=lambda j: (abs(j - i), j))
            value = median(by_pair[pairs[donor]])
            logger.warning("No trip-time data for %s->%s; imputed %.3f min from %s->%s",
                           a, b, value, *pairs[donor])
            for hour in range(HOURS_PER_DAY):
                cells[(a, b, hour)] = TableCell(value, Provenance.IMPUTED_PAIR)
    return TripTimeMatrix(cells)
