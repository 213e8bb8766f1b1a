"""
Data loading and validation module.
Parses the events, stations, schedule, shortcuts and boarding-average files
into the canonical data model used by the rest of the package.
"""

import csv
import datetime as dt
import gzip
import logging
import os
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from .config import (
    DAY_KINDS, DIRECTIONS, EVENT_TYPES, HOURS_PER_DAY, SERVICE_DAY_ROLLOVER_HOURS,
)
from .utils import format_clock, parse_clock

if TYPE_CHECKING:
    from .wrangle import TripTimeMatrix

logger = logging.getLogger(__name__)

# Suppress pandas warnings
warnings.filterwarnings('ignore', category=pd.errors.PerformanceWarning)

EVENT_COLUMNS = ['service_date', 'timestamp', 'direction_id', 'event_type', 'stop_id', 'trip_id']
STATION_COLUMNS = ['stop_id', 'name', 'route_position', 'population_density',
                   'is_origin', 'is_terminus', 'direction_id']
SCHEDULE_COLUMNS = ['stop_id', 'scheduled_departure', 'day_kind']
SHORTCUT_COLUMNS = ['from_stop', 'to_stop', 'bypassed_stops', 'hour', 'estimated_minutes']
BOARDING_COLUMNS = ['scheduled_departure', 'average_boardings']

# cell marker for rows with too many fields, see load_table
MALFORMED_ROW = '\x00malformed:'

_TRUE = {'true', 't', 'yes', 'y', '1'}
_FALSE = {'false', 'f', 'no', 'n', '0', ''}


@dataclass(frozen=True)
class RawEvent:
    """One arrival or departure record from the bus feed."""

    service_date: dt.date
    timestamp: dt.datetime
    direction_id: str
    event_type: str
    stop_id: str
    trip_id: str

    @property
    def trip_key(self) -> Tuple[dt.date, str]:
        return (self.service_date, self.trip_id)

    @property
    def is_arrival(self) -> bool:
        return self.event_type == 'arriving'

    def to_row(self) -> Dict[str, str]:
        return {
            'service_date': self.service_date.isoformat(),
            'timestamp': self.timestamp.isoformat(),
            'direction_id': self.direction_id,
            'event_type': self.event_type,
            'stop_id': self.stop_id,
            'trip_id': self.trip_id,
        }


@dataclass(frozen=True)
class Station:
    stop_id: str
    name: str
    route_position: int
    population_density: float
    is_origin: bool
    is_terminus: bool
    direction_id: str


@dataclass(frozen=True)
class ScheduleEntry:
    stop_id: str
    scheduled_departure: float  # minutes after midnight of the service date
    day_kind: str

    @property
    def clock(self) -> str:
        return format_clock(self.scheduled_departure, seconds=False)


@dataclass(frozen=True)
class ShortcutEdge:
    """Alternate road segment bypassing consecutive stations."""

    from_stop: str
    to_stop: str
    bypassed_stops: Tuple[str, ...]
    estimated_minutes_per_hour: Mapping[int, float]

    @property
    def key(self) -> str:
        return f"{self.from_stop}>{self.to_stop}"

    @property
    def chain(self) -> Tuple[str, ...]:
        return (self.from_stop,) + tuple(self.bypassed_stops) + (self.to_stop,)

    def minutes_at(self, hour: int) -> Optional[float]:
        return self.estimated_minutes_per_hour.get(hour)

    def to_dict(self) -> dict:
        return {
            'from_stop': self.from_stop,
            'to_stop': self.to_stop,
            'bypassed_stops': list(self.bypassed_stops),
            'estimated_minutes_per_hour': {str(h): m for h, m in sorted(self.estimated_minutes_per_hour.items())},
        }


@dataclass(frozen=True)
class Rejection:
    line: Optional[int]
    ref: str
    reason: str

    def to_dict(self) -> dict:
        return {'line': self.line, 'ref': self.ref, 'reason': self.reason}


@dataclass(frozen=True)
class ValidationReport:
    """Accepted/rejected counts with one rejection record per rejected item."""

    source: str
    total: int
    accepted: int
    rejections: Tuple[Rejection, ...] = ()

    def __post_init__(self):
        if self.accepted + self.rejected != self.total:
            raise ValueError(
                f"inconsistent report for {self.source}: "
                f"{self.accepted} accepted + {self.rejected} rejected != {self.total}"
            )

    @property
    def rejected(self) -> int:
        return len(self.rejections)

    @property
    def rejected_refs(self) -> List[str]:
        return [r.ref for r in self.rejections]

    def to_dict(self) -> dict:
        return {
            'source': self.source,
            'total': self.total,
            'accepted': self.accepted,
            'rejected': self.rejected,
            'rejections': [r.to_dict() for r in self.rejections],
        }


@dataclass(frozen=True)
class Route:
    """Canonical ordered station registry for one direction."""

    direction_id: str
    stations: Tuple[Station, ...]

    @classmethod
    def from_stations(cls, stations: Sequence[Station], direction_id: Optional[str] = None) -> 'Route':
        directions = sorted({s.direction_id for s in stations})
        if direction_id is None:
            if len(directions) != 1:
                raise ValueError(f"Stations cover directions {directions}; choose one with --direction")
            direction_id = directions[0]
        selected = sorted((s for s in stations if s.direction_id == direction_id),
                          key=lambda s: s.route_position)
        if not selected:
            raise ValueError(f"No stations for direction {direction_id!r}")
        return cls(direction_id=direction_id, stations=tuple(selected))

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {s.stop_id: i for i, s in enumerate(self.stations)}

    @property
    def stop_ids(self) -> List[str]:
        return [s.stop_id for s in self.stations]

    @property
    def origin(self) -> Station:
        return self.stations[0]

    @property
    def terminus(self) -> Station:
        return self.stations[-1]

    @property
    def intermediate_ids(self) -> List[str]:
        return [s.stop_id for s in self.stations[1:-1]]

    @property
    def densities(self) -> Dict[str, float]:
        return {s.stop_id: s.population_density for s in self.stations}

    def __contains__(self, stop_id: str) -> bool:
        return stop_id in self._index

    def __len__(self) -> int:
        return len(self.stations)

    def position(self, stop_id: str) -> int:
        try:
            return self._index[stop_id]
        except KeyError:
            raise LookupError(f"Unknown stop_id {stop_id!r} for direction {self.direction_id}") from None

    def is_mandatory(self, stop_id: str) -> bool:
        return stop_id in (self.origin.stop_id, self.terminus.stop_id)

    def adjacent_pairs(self) -> List[Tuple[str, str]]:
        ids = self.stop_ids
        return list(zip(ids[:-1], ids[1:]))

    def stations_between(self, from_stop: str, to_stop: str) -> List[str]:
        """Stations strictly between two stations, in route order."""
        a, b = self.position(from_stop), self.position(to_stop)
        return self.stop_ids[a + 1:b]


def _open_text(path: str, lenient: bool):
    errors = 'replace' if lenient else 'strict'
    if path.endswith('.gz'):
        return gzip.open(path, 'rt', encoding='utf-8', errors=errors, newline='')
    return open(path, 'r', encoding='utf-8', errors=errors, newline='')


def _read_delimited(path: str, lenient: bool) -> pd.DataFrame:
    with _open_text(path, lenient) as f:
        # Auto-detect delimiter
        sample = f.read(1024)
        f.seek(0)
        try:
            delimiter = csv.Sniffer().sniff(sample, delimiters=',;\t|').delimiter
        except csv.Error:
            delimiter = ','
        if not lenient:
            return pd.read_csv(f, delimiter=delimiter, dtype=str, keep_default_na=False)

        header = next(csv.reader(sample.splitlines()[:1], delimiter=delimiter), [])
        width = len(header)

        def keep_position(fields: List[str]) -> List[str]:
            return [f"{MALFORMED_ROW}{len(fields)}"] * width

        return pd.read_csv(f, delimiter=delimiter, dtype=str, keep_default_na=False, index_col=False,
                           engine='python', on_bad_lines=keep_position)


def load_table(path: str, sheet=None, lenient: bool = False) -> pd.DataFrame:
    """Load a CSV or Excel file with every cell kept as text.

    In lenient mode a CSV row with too many fields stays in place with every
    cell set to ``MALFORMED_ROW`` plus its field count, and undecodable bytes
    become U+FFFD, so row-level validation can reject them.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")

    try:
        if path.endswith(('.csv', '.csv.gz')):
            df = _read_delimited(path, lenient)
        elif path.endswith(('.xlsx', '.xls')):
            df = pd.read_excel(path, sheet_name=0 if sheet is None else sheet,
                               dtype=str, keep_default_na=False)
        else:
            raise ValueError(f"Unsupported file format: {path}")
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: file is empty (a header row is required)") from None

    df.columns = [str(c).strip() for c in df.columns]
    for col in df.columns:
        # short rows are padded with NaN
        df[col] = df[col].fillna('').astype(str).str.strip()
    return df


def _require_columns(df: pd.DataFrame, required: Sequence[str], path: str) -> None:
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing required column(s): {', '.join(missing)}")


def _parse_bool(value: str, column: str, line: int) -> bool:
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"line {line}: {column} must be a boolean, got {value!r}")


def _parse_event_row(row: Mapping[str, str]) -> RawEvent:
    try:
        service_date = dt.date.fromisoformat(row['service_date'])
    except ValueError:
        raise ValueError(f"unparseable service_date {row['service_date']!r}") from None
    try:
        timestamp = dt.datetime.fromisoformat(row['timestamp'])
    except ValueError:
        raise ValueError(f"unparseable timestamp {row['timestamp']!r}") from None
    if timestamp.tzinfo is not None:
        raise ValueError(f"timestamp {row['timestamp']!r} must be local time without UTC offset")
    if row['direction_id'] not in DIRECTIONS:
        raise ValueError(f"direction_id must be one of {DIRECTIONS}, got {row['direction_id']!r}")
    if row['event_type'] not in EVENT_TYPES:
        raise ValueError(f"event_type must be one of {EVENT_TYPES}, got {row['event_type']!r}")
    if not row['stop_id']:
        raise ValueError("empty stop_id")
    if not row['trip_id']:
        raise ValueError("empty trip_id")
    day_start = dt.datetime.combine(service_date, dt.time())
    day_end = day_start + dt.timedelta(days=1, hours=SERVICE_DAY_ROLLOVER_HOURS)
    if not day_start <= timestamp < day_end:
        raise ValueError(f"timestamp {row['timestamp']} does not fall on service_date {service_date}")
    return RawEvent(service_date=service_date, timestamp=timestamp,
                    direction_id=row['direction_id'], event_type=row['event_type'],
                    stop_id=row['stop_id'], trip_id=row['trip_id'])


def _row_defect(row: Mapping[str, str]) -> Optional[str]:
    """Reason a raw row cannot be read at all, or None."""
    first = row['service_date']
    if first.startswith(MALFORMED_ROW):
        return f"row has {first[len(MALFORMED_ROW):]} fields, header has {len(row)}"
    if any('\ufffd' in value for value in row.values()):
        return "row contains bytes that are not valid UTF-8"
    return None


def parse_events(path: str) -> Tuple[List[RawEvent], ValidationReport]:
    """Parse the events file; malformed rows go to the report, not the output."""
    df = load_table(path, lenient=True)
    _require_columns(df, EVENT_COLUMNS, path)

    events: List[RawEvent] = []
    rejections: List[Rejection] = []
    for idx, row in enumerate(df.to_dict('records')):
        line = idx + 2  # header is line 1
        defect = _row_defect(row)
        if defect:
            rejections.append(Rejection(line=line, ref='?', reason=defect))
            continue
        try:
            events.append(_parse_event_row(row))
        except ValueError as e:
            rejections.append(Rejection(line=line, ref=f"{row['trip_id']}@{row['stop_id']}", reason=str(e)))

    report = ValidationReport(source=os.path.basename(path), total=len(df),
                              accepted=len(events), rejections=tuple(rejections))
    if rejections:
        logger.warning("%s: rejected %d of %d rows", path, report.rejected, report.total)
    if report.total > 0 and not events:
        raise ValueError(f"{path}: no row could be parsed ({report.rejected} rejected)")
    logger.info("Parsed %d events from %s", len(events), path)
    return events, report


def parse_stations(path: str) -> List[Station]:
    """Parse and validate the stations file, ordered by direction then position."""
    df = load_table(path)
    _require_columns(df, STATION_COLUMNS, path)

    stations = []
    for idx, row in enumerate(df[STATION_COLUMNS].to_dict('records')):
        line = idx + 2
        if row['direction_id'] not in DIRECTIONS:
            raise ValueError(f"{path} line {line}: direction_id must be one of {DIRECTIONS}")
        if not row['stop_id']:
            raise ValueError(f"{path} line {line}: empty stop_id")
        try:
            position = int(row['route_position'])
            density = float(row['population_density'])
        except ValueError:
            raise ValueError(f"{path} line {line}: route_position must be an integer "
                             f"and population_density a number") from None
        if position < 0:
            raise ValueError(f"{path} line {line}: route_position must be >= 0")
        if not density >= 0:
            raise ValueError(f"{path} line {line}: population_density must be nonnegative")
        stations.append(Station(
            stop_id=row['stop_id'], name=row['name'], route_position=position,
            population_density=density,
            is_origin=_parse_bool(row['is_origin'], 'is_origin', line),
            is_terminus=_parse_bool(row['is_terminus'], 'is_terminus', line),
            direction_id=row['direction_id'],
        ))

    for direction in sorted({s.direction_id for s in stations}):
        _check_direction(path, direction, [s for s in stations if s.direction_id == direction])

    stations.sort(key=lambda s: (DIRECTIONS.index(s.direction_id), s.route_position))
    logger.info("Parsed %d stations from %s", len(stations), path)
    return stations


def _check_direction(path: str, direction: str, stations: List[Station]) -> None:
    ids = [s.stop_id for s in stations]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise ValueError(f"{path}: duplicate stop_id in direction {direction}: {', '.join(duplicates)}")
    positions = sorted(s.route_position for s in stations)
    if positions != list(range(len(stations))):
        raise ValueError(f"{path}: non-contiguous route_position in direction {direction}: {positions}")
    if len(stations) < 2:
        raise ValueError(f"{path}: direction {direction} needs at least an origin and a terminus")
    origins = [s for s in stations if s.is_origin]
    termini = [s for s in stations if s.is_terminus]
    if len(origins) != 1 or len(termini) != 1:
        raise ValueError(f"{path}: direction {direction} needs exactly one origin and one terminus "
                         f"(found {len(origins)} and {len(termini)})")
    if origins[0].route_position != 0 or termini[0].route_position != len(stations) - 1:
        raise ValueError(f"{path}: origin must hold route_position 0 and terminus the last position "
                         f"in direction {direction}")


def parse_schedule(path: str, stations: Sequence[Station]) -> List[ScheduleEntry]:
    """Parse the static schedule, ordered by day kind, stop and time."""
    df = load_table(path)
    _require_columns(df, SCHEDULE_COLUMNS, path)
    known = {s.stop_id for s in stations}

    entries = []
    for idx, row in enumerate(df[SCHEDULE_COLUMNS].to_dict('records')):
        line = idx + 2
        if row['stop_id'] not in known:
            raise ValueError(f"{path} line {line}: schedule references unknown stop_id {row['stop_id']!r}")
        if row['day_kind'] not in DAY_KINDS:
            raise ValueError(f"{path} line {line}: day_kind must be one of {DAY_KINDS}")
        try:
            minutes = parse_clock(row['scheduled_departure'], max_hour=27)
        except ValueError as e:
            raise ValueError(f"{path} line {line}: {e}") from None
        entries.append(ScheduleEntry(stop_id=row['stop_id'], scheduled_departure=minutes,
                                     day_kind=row['day_kind']))

    entries.sort(key=lambda e: (DAY_KINDS.index(e.day_kind), e.stop_id, e.scheduled_departure))
    logger.info("Parsed %d schedule entries from %s", len(entries), path)
    return entries


def group_schedule(entries: Sequence[ScheduleEntry]) -> Dict[str, Dict[str, List[float]]]:
    """Scheduled departures by day kind, then station, in time order.

    Every day kind is present as a key, possibly with no stations.
    """
    grouped: Dict[str, Dict[str, List[float]]] = {kind: {} for kind in DAY_KINDS}
    for entry in sorted(entries, key=lambda e: e.scheduled_departure):
        grouped[entry.day_kind].setdefault(entry.stop_id, []).append(entry.scheduled_departure)
    return grouped


def parse_shortcuts(path: str, stations: Sequence[Station]) -> List[ShortcutEdge]:
    """Parse one-row-per-hour shortcut estimates into edges; time validity is checked later."""
    df = load_table(path)
    _require_columns(df, SHORTCUT_COLUMNS, path)
    by_id = {(s.direction_id, s.stop_id): s for s in stations}
    directions = {s.stop_id: s.direction_id for s in stations}

    grouped: Dict[Tuple[str, str], dict] = {}
    for idx, row in enumerate(df[SHORTCUT_COLUMNS].to_dict('records')):
        line = idx + 2
        from_stop, to_stop = row['from_stop'], row['to_stop']
        if from_stop not in directions or to_stop not in directions:
            raise ValueError(f"{path} line {line}: shortcut references unknown stop")
        direction = directions[from_stop]
        if (direction, to_stop) not in by_id:
            raise ValueError(f"{path} line {line}: {from_stop} and {to_stop} are not in the same direction")
        bypassed = tuple(s.strip() for s in row['bypassed_stops'].split(';') if s.strip())
        try:
            hour = int(row['hour'])
            minutes = float(row['estimated_minutes'])
        except ValueError:
            raise ValueError(f"{path} line {line}: hour must be an integer and estimated_minutes a number") from None
        if not 0 <= hour < HOURS_PER_DAY:
            raise ValueError(f"{path} line {line}: hour must be within 0-23")
        if not minutes > 0:
            raise ValueError(f"{path} line {line}: estimated_minutes must be positive")

        start = by_id[(direction, from_stop)].route_position
        end = by_id[(direction, to_stop)].route_position
        expected = tuple(s.stop_id for s in sorted(
            (s for s in stations if s.direction_id == direction and start < s.route_position < end),
            key=lambda s: s.route_position))
        if start >= end:
            raise ValueError(f"{path} line {line}: {from_stop} must precede {to_stop}")
        if not bypassed or bypassed != expected:
            raise ValueError(f"{path} line {line}: bypassed_stops must list exactly the stations "
                             f"between {from_stop} and {to_stop}: {';'.join(expected) or '(none)'}")

        edge = grouped.setdefault((from_stop, to_stop), {'bypassed': bypassed, 'minutes': {}, 'start': start})
        if hour in edge['minutes']:
            raise ValueError(f"{path} line {line}: duplicate hour {hour} for shortcut {from_stop}>{to_stop}")
        edge['minutes'][hour] = minutes

    shortcuts = [
        ShortcutEdge(from_stop=f, to_stop=t, bypassed_stops=v['bypassed'],
                     estimated_minutes_per_hour=dict(sorted(v['minutes'].items())))
        for (f, t), v in sorted(grouped.items(), key=lambda kv: (kv[1]['start'], kv[0]))
    ]
    logger.info("Parsed %d shortcuts from %s", len(shortcuts), path)
    return shortcuts


def direct_minutes(chain: Sequence[str], trip_time_matrix: 'TripTimeMatrix', hour: int) -> float:
    """Sum of adjacent-segment trip times along a station chain at a fixed hour."""
    return sum(trip_time_matrix.minutes(a, b, hour) for a, b in zip(chain[:-1], chain[1:]))


def validate_shortcuts(shortcuts: Sequence[ShortcutEdge],
                       trip_time_matrix: 'TripTimeMatrix') -> ValidationReport:
    """Flag every shortcut slower than the direct route at some hour."""
    rejections = []
    for edge in shortcuts:
        slower = [h for h, m in sorted(edge.estimated_minutes_per_hour.items())
                  if m > direct_minutes(edge.chain, trip_time_matrix, h)]
        if slower:
            rejections.append(Rejection(
                line=None, ref=edge.key,
                reason=f"estimated time exceeds the direct route at hour(s) {', '.join(map(str, slower))}",
            ))
            logger.warning("Shortcut %s excluded: slower than direct route at hours %s", edge.key, slower)
    return ValidationReport(source='shortcuts', total=len(shortcuts),
                            accepted=len(shortcuts) - len(rejections), rejections=tuple(rejections))


def usable_shortcuts(shortcuts: Sequence[ShortcutEdge], report: ValidationReport) -> List[ShortcutEdge]:
    """Shortcuts that passed validate_shortcuts."""
    flagged = set(report.rejected_refs)
    return [edge for edge in shortcuts if edge.key not in flagged]


def parse_boarding_averages(path: str) -> Dict[float, float]:
    """Map scheduled departure (minutes after midnight) to average boardings."""
    df = load_table(path)
    _require_columns(df, BOARDING_COLUMNS, path)
    if df.empty:
        raise ValueError(f"{path}: boarding averages file is empty")

    averages = {}
    for idx, row in enumerate(df[BOARDING_COLUMNS].to_dict('records')):
        line = idx + 2
        try:
            minutes = parse_clock(row['scheduled_departure'])
            value = float(row['average_boardings'])
        except ValueError as e:
            raise ValueError(f"{path} line {line}: {e}") from None
        if not value >= 0:
            raise ValueError(f"{path} line {line}: average_boardings must be nonnegative")
        averages[minutes] = value
    return dict(sorted(averages.items()))
