"""Shared synthetic fixtures: small routes, hand-made tables and events."""

import datetime as dt
from pathlib import Path

import pytest

from busroute.config import HOURS_PER_DAY
from busroute.data_loader import RawEvent, Route, Station
from busroute.probability import ProbabilityCell, StopProbabilityTable
from busroute.routing import RoutingTables
from busroute.wrangle import IdleTimeTable, Provenance, TableCell, TripTimeMatrix

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLE_DATA = Path(__file__).parent.parent / "sample_data"
SERVICE_DATE = dt.date(2019, 10, 7)  # a Monday


def build_route(ids=("A", "B", "C", "D", "E"), densities=None, direction_id="outgoing") -> Route:
    densities = densities or {}
    last = len(ids) - 1
    stations = [Station(stop_id=s, name=f"Station {s}", route_position=i,
                        population_density=float(densities.get(s, 100.0)),
                        is_origin=i == 0, is_terminus=i == last, direction_id=direction_id)
                for i, s in enumerate(ids)]
    return Route.from_stations(stations)


def _value(spec, *key):
    return spec(*key) if callable(spec) else spec


def build_tables(route: Route, trip_minutes=5.0, idle_minutes=1.0, stop_counts=None, shortcuts=()) -> RoutingTables:
    """Tables for every station and hour.

    ``trip_minutes`` and ``idle_minutes`` are constants or callables of
    (from, to, hour) and (stop, hour). ``stop_counts`` maps a station to a
    (stopped, passed) pair or a callable of the hour; stations left out stop
    on every pass.
    """
    stop_counts = stop_counts or {}
    idle = IdleTimeTable({(s, h): TableCell(float(_value(idle_minutes, s, h)), Provenance.OBSERVED)
                          for s in route.stop_ids for h in range(HOURS_PER_DAY)})
    trips = TripTimeMatrix({(a, b, h): TableCell(float(_value(trip_minutes, a, b, h)), Provenance.OBSERVED)
                            for a, b in route.adjacent_pairs() for h in range(HOURS_PER_DAY)})
    cells = {}
    for s in route.stop_ids:
        for h in range(HOURS_PER_DAY):
            stopped, passed = _value(stop_counts.get(s, (10, 10)), h)
            if passed:
                cells[(s, h)] = ProbabilityCell(stopped, passed)
    probabilities = StopProbabilityTable(stop_ids=tuple(route.stop_ids), cells=cells)
    return RoutingTables(route=route, idle=idle, trip_times=trips, probabilities=probabilities,
                         shortcuts=tuple(shortcuts))


def make_event(clock: str, event_type: str, stop_id: str, trip_id: str = "T1",
               service_date: dt.date = SERVICE_DATE, direction_id: str = "outgoing") -> RawEvent:
    timestamp = dt.datetime.combine(service_date, dt.time.fromisoformat(clock))
    return RawEvent(service_date=service_date, timestamp=timestamp, direction_id=direction_id,
                    event_type=event_type, stop_id=stop_id, trip_id=trip_id)


@pytest.fixture
def route5():
    return build_route()


@pytest.fixture
def tables_factory():
    return build_tables


@pytest.fixture
def route_factory():
    return build_route


@pytest.fixture
def event_factory():
    return make_event


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def sample_dir():
    return SAMPLE_DATA


@pytest.fixture
def write_csv(tmp_path):
    """Write text to a CSV file under tmp_path and return its path as a string."""
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text.strip() + "\n", encoding="utf-8")
        return str(path)
    return _write
