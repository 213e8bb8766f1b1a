import pytest

from busroute.allocation import optimal_second_departure, station_wait_proxies, wait_proxy
from busroute.routing import RouteProposal, plan_route, static_route

HALF_PAST_NINE = 9 * 60 + 30


@pytest.fixture
def constant_tables(route5, tables_factory):
    return tables_factory(route5, trip_minutes=4.0, idle_minutes=1.0)


@pytest.fixture
def context(constant_tables):
    return lambda start: static_route(start, constant_tables)


@pytest.fixture
def graded_context(route5, tables_factory):
    tables = tables_factory(route5, trip_minutes=lambda a, b, h: 3.0 + h % 4, idle_minutes=lambda s, h: 0.5 + h % 3,
                            stop_counts={"B": (5, 10), "C": (7, 10), "D": (9, 10)})
    return lambda start: plan_route(start, tables, 20, t_p=50, pa_min=0.5, n_simulations=10, seed=1)[0]


def test_wait_proxy_median_model():
    assert wait_proxy(9 * 60 + 20, 9 * 60) == 10.0


def test_wait_proxy_worst_case():
    assert wait_proxy(9 * 60 + 20, 9 * 60, worst_case=True) == 20.0


def test_wait_proxy_degenerate_gap():
    assert wait_proxy(9 * 60, 9 * 60) == 0.0
    assert wait_proxy(9 * 60, 9 * 60 + 3) == 0.0


def test_constant_gap_closed_form(context):
    trip_a = context(HALF_PAST_NINE)
    result = optimal_second_departure(trip_a, 10, context)
    # each minute of delay adds half a minute to the wait at the origin, the largest proxy
    assert result.trip_b_start == HALF_PAST_NINE + 20
    assert result.violated_at == HALF_PAST_NINE + 21
    assert not result.capped and not result.infeasible
    assert max(result.station_proxies.values()) <= 10
    chosen = station_wait_proxies(trip_a, context(result.trip_b_start))
    later = station_wait_proxies(trip_a, context(result.trip_b_start + 1))
    assert all(v <= 10 for v in chosen.values())
    assert any(v > 10 for v in later.values())


def test_table_row_shape(context):
    result = optimal_second_departure(context(HALF_PAST_NINE), 10, context)
    assert result.table_row() == "09:30 → 09:50, 10"
    assert result.to_dict()["trip_b_start"] == "09:50"


def test_start_is_monotone_in_wait_limit(context):
    trip_a = context(HALF_PAST_NINE)
    starts = [optimal_second_departure(trip_a, w, context).trip_b_start for w in (0, 1, 2.5, 5, 10, 15, 30)]
    assert starts == sorted(starts)


def test_zero_wait_is_infeasible(context):
    result = optimal_second_departure(context(HALF_PAST_NINE), 0, context)
    assert result.infeasible
    assert result.trip_b_start == HALF_PAST_NINE
    assert result.violated_at == HALF_PAST_NINE + 1


def test_search_cap(context):
    result = optimal_second_departure(context(HALF_PAST_NINE), 100, context, search_cap=30)
    assert result.capped
    assert result.trip_b_start == HALF_PAST_NINE + 30
    assert result.violated_at is None


def test_worst_case_halves_the_headway(context):
    result = optimal_second_departure(context(HALF_PAST_NINE), 10, context, worst_case=True)
    assert result.trip_b_start == HALF_PAST_NINE + 10
    assert result.wait_model == "worst_case"


def test_worst_case_proxies_double_the_median_ones(context, graded_context):
    for make_trip in (context, graded_context):
        trip_a, trip_b = make_trip(HALF_PAST_NINE), make_trip(HALF_PAST_NINE + 17)
        median = station_wait_proxies(trip_a, trip_b)
        worst = station_wait_proxies(trip_a, trip_b, worst_case=True)
        assert set(worst) == set(median)
        assert all(v > 0 for v in median.values())
        for stop_id, value in median.items():
            assert worst[stop_id] == pytest.approx(2 * value)


def test_trips_without_shared_stations(context, route_factory, tables_factory):
    other = tables_factory(route_factory(ids=("X", "Y")))
    with pytest.raises(ValueError, match="no shared stations between trips"):
        station_wait_proxies(context(HALF_PAST_NINE), static_route(HALF_PAST_NINE + 5, other))


def test_trip_a_needs_a_timeline(context):
    trip_a = context(HALF_PAST_NINE)
    bare = RouteProposal(departure_time=HALF_PAST_NINE, parameters={}, decisions=trip_a.decisions,
                         segments=trip_a.segments)
    with pytest.raises(ValueError, match="timeline"):
        optimal_second_departure(bare, 10, context)


def test_negative_wait_limit(context):
    with pytest.raises(ValueError):
        optimal_second_departure(context(HALF_PAST_NINE), -1, context)
