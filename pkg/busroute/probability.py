"""
Stopping probability module.
Counts, per station and hour, how often passing buses actually stopped, and
turns the t_p percentile parameter into per-hour skip thresholds.
"""

import datetime as dt
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .config import DEFAULT_TP, HOURS_PER_DAY, NO_DATA_PROBABILITY
from .data_loader import Route
from .utils import percentile
from .wrangle import TripRecord

logger = logging.getLogger(__name__)


class NoProbabilityData(LookupError):
    """Raised when an hour has no station with observed passes."""


@dataclass(frozen=True)
class ProbabilityCell:
    stopped_count: int
    passed_count: int

    @property
    def has_data(self) -> bool:
        return self.passed_count > 0

    @property
    def probability(self) -> Optional[float]:
        if self.passed_count == 0:
            return None
        return self.stopped_count / self.passed_count


_EMPTY = ProbabilityCell(0, 0)


@dataclass(frozen=True)
class StopProbabilityTable:
    stop_ids: Tuple[str, ...]
    cells: Mapping[Tuple[str, int], ProbabilityCell]

    def cell(self, stop_id: str, hour: int) -> ProbabilityCell:
        if stop_id not in self.stop_ids:
            raise LookupError(f"no stopping probability for unknown station {stop_id!r}")
        return self.cells.get((stop_id, hour), _EMPTY)

    def probability(self, stop_id: str, hour: int) -> Optional[float]:
        return self.cell(stop_id, hour).probability

    def station_probability(self, stop_id: str) -> Optional[float]:
        """All-hours stopping probability of a station, None without data."""
        stopped = passed = 0
        for hour in range(HOURS_PER_DAY):
            cell = self.cell(stop_id, hour)
            stopped += cell.stopped_count
            passed += cell.passed_count
        return stopped / passed if passed else None

    def resolved_probability(self, stop_id: str, hour: int) -> float:
        """Cell probability, else the station's all-hours value, else always-stop."""
        value = self.probability(stop_id, hour)
        if value is None:
            value = self.station_probability(stop_id)
        return NO_DATA_PROBABILITY if value is None else value

    def hour_probabilities(self, hour: int, stop_ids: Optional[Iterable[str]] = None) -> Dict[str, float]:
        """Probabilities of the data cells at an hour."""
        ids = self.stop_ids if stop_ids is None else stop_ids
        values = {}
        for stop_id in ids:
            p = self.probability(stop_id, hour)
            if p is not None:
                values[stop_id] = p
        return values

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for stop_id in self.stop_ids:
            for hour in range(HOURS_PER_DAY):
                cell = self.cell(stop_id, hour)
                rows.append({'stop_id': stop_id, 'hour': hour, 'stopped_count': cell.stopped_count,
                             'passed_count': cell.passed_count, 'probability': cell.probability})
        return pd.DataFrame(rows, columns=['stop_id', 'hour', 'stopped_count', 'passed_count', 'probability'])

    @classmethod
    def from_records(cls, stop_ids: Sequence[str], records: Iterable[Mapping]) -> 'StopProbabilityTable':
        cells = {}
        for r in records:
            cell = ProbabilityCell(int(r['stopped_count']), int(r['passed_count']))
            if cell.has_data:
                cells[(r['stop_id'], int(r['hour']))] = cell
        return cls(stop_ids=tuple(stop_ids), cells=cells)


@dataclass(frozen=True)
class SkipThreshold:
    hour: int
    t: float
    t_p: float


def skipped_station_time(trip_visits: Mapping[str, dt.datetime], stop_id: str, route: Route) -> dt.datetime:
    """Time attributed to a skipped station.

    The latest stop time among preceding stopped stations; when none
    precedes, the earliest among succeeding ones.
    """
    if stop_id in trip_visits:
        raise ValueError(f"station {stop_id!r} was not skipped by this trip")
    if not trip_visits:
        raise ValueError("degenerate trip without stopped stations")
    position = route.position(stop_id)
    preceding = [t for s, t in trip_visits.items() if route.position(s) < position]
    if preceding:
        return max(preceding)
    return min(t for s, t in trip_visits.items() if route.position(s) > position)


def build_probability_table(trips: Sequence[TripRecord], route: Route) -> StopProbabilityTable:
    """Count stops and passes per (station, hour).

    A trip passes every station between its first and last stopped positions;
    skipped passes are attributed to the hour from skipped_station_time.
    """
    stopped: Counter = Counter()
    passed: Counter = Counter()
    for trip in trips:
        visits = {s: t for s, t in trip.stop_times.items() if s in route and t is not None}
        if not visits:
            continue
        positions = [route.position(s) for s in visits]
        for station in route.stations[min(positions):max(positions) + 1]:
            stop_id = station.stop_id
            if stop_id in visits:
                hour = visits[stop_id].hour
                stopped[(stop_id, hour)] += 1
            else:
                hour = skipped_station_time(visits, stop_id, route).hour
            passed[(stop_id, hour)] += 1

    cells = {key: ProbabilityCell(stopped[key], count) for key, count in passed.items()}
    logger.info("Built stopping probabilities over %d trips (%d data cells)", len(trips), len(cells))
    return StopProbabilityTable(stop_ids=tuple(route.stop_ids), cells=cells)


def threshold_for_hour(table: StopProbabilityTable, hour: int, t_p: float = DEFAULT_TP,
                       stop_ids: Optional[Iterable[str]] = None) -> SkipThreshold:
    """The t_p-th percentile of the hour's station probabilities."""
    if not 0.0 <= t_p <= 100.0:
        raise ValueError(f"t_p must be within [0, 100], got {t_p}")
    values = list(table.hour_probabilities(hour, stop_ids).values())
    if not values:
        raise NoProbabilityData(f"no probability data for hour {hour}")
    return SkipThreshold(hour=hour, t=percentile(values, t_p), t_p=t_p)


def station_threshold(table: StopProbabilityTable, t_p: float = DEFAULT_TP,
                      stop_ids: Optional[Iterable[str]] = None) -> float:
    """Percentile over all-hours station probabilities, for hours without data."""
    ids = table.stop_ids if stop_ids is None else stop_ids
    values = [p for p in (table.station_probability(s) for s in ids) if p is not None]
    if not values:
        return NO_DATA_PROBABILITY
    return percentile(values, t_p)
