import datetime as dt

import pytest

from busroute.filters import apply_filters

MONDAY = dt.date(2019, 10, 7)
SATURDAY = dt.date(2019, 10, 12)
SUNDAY = dt.date(2019, 10, 13)


@pytest.fixture
def events(event_factory):
    return [
        event_factory("09:00:00", "departing", "S1", service_date=MONDAY),
        event_factory("09:05:00", "arriving", "S2", service_date=MONDAY, direction_id="incoming"),
        event_factory("10:00:00", "departing", "S1", service_date=SATURDAY),
        event_factory("11:00:00", "departing", "S1", service_date=SUNDAY),
    ]


def test_no_filters_keeps_everything(events):
    assert apply_filters(events) == events


def test_direction_filter(events):
    kept = apply_filters(events, direction_id="incoming")
    assert [e.stop_id for e in kept] == ["S2"]


def test_day_kind_filter(events):
    kept = apply_filters(events, day_kinds=["saturday", "sunday"])
    assert [e.service_date for e in kept] == [SATURDAY, SUNDAY]


def test_date_range_is_inclusive(events):
    kept = apply_filters(events, start_date=SATURDAY, end_date=SATURDAY)
    assert [e.service_date for e in kept] == [SATURDAY]


def test_filters_combine(events):
    kept = apply_filters(events, direction_id="outgoing", day_kinds=["weekday"], end_date=SUNDAY)
    assert len(kept) == 1 and kept[0].service_date == MONDAY


@pytest.mark.parametrize("kwargs", [
    {"direction_id": "sideways"},
    {"day_kinds": ["holiday"]},
    {"start_date": SUNDAY, "end_date": MONDAY},
])
def test_invalid_filters_raise(events, kwargs):
    with pytest.raises(ValueError):
        apply_filters(events, **kwargs)
