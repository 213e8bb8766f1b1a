import pytest

from busroute.evaluation import dry_run, parameter_sweep, pickup_fraction, score_routes
from busroute.routing import plan_route, propose_route, static_route

SEVEN_THIRTY = 7 * 60 + 30
T_P_VALUES = [0, 25, 50, 75, 100]
PA_MIN_VALUES = [0.0, 0.5, 0.8, 0.9, 1.0]


@pytest.fixture
def tables(route5, tables_factory):
    return tables_factory(route5, trip_minutes=5.0, idle_minutes=1.0,
                          stop_counts={"B": (5, 10), "C": (7, 10), "D": (9, 10)})


def test_pickup_fraction_counts_stopped_stations():
    assert pickup_fraction({"A": 3, "B": 5, "C": 2}, ["A", "C"], 10) == 0.5


def test_pickup_fraction_capacity_boards_earlier_stations_first():
    assert pickup_fraction({"A": 30, "B": 20}, ["A", "B"], 50, capacity=36) == 36 / 50
    assert pickup_fraction({"A": 10, "B": 20}, ["A", "B"], 30, capacity=15) == 0.5


def test_identical_routes_score_identically(tables):
    route = propose_route(SEVEN_THIRTY, 50, tables)
    scores = score_routes({"one": route, "two": route}, tables, 40, 30, seed=3)
    assert scores["one"] == scores["two"]


def test_static_route_picks_up_everyone(tables):
    scores = score_routes({"static": static_route(SEVEN_THIRTY, tables)}, tables, 40, 30, seed=3)
    assert scores["static"].pickup_fraction_mean == 1.0
    assert scores["static"].num_stops == 3


def test_capacity_caps_the_static_route(tables):
    scores = score_routes({"static": static_route(SEVEN_THIRTY, tables)}, tables, 100, 20, seed=3, capacity=36)
    assert scores["static"].per_simulation == (0.36,) * 20


def test_full_pickup_matches_static(tables):
    report = dry_run(SEVEN_THIRTY, static_route(SEVEN_THIRTY, tables), {"t_p": 100, "pa_min": 1.0},
                     50, 11, tables, 40)
    assert report.systems["semi_dynamic"].pickup_fraction_mean == pytest.approx(
        report.systems["static"].pickup_fraction_mean)


@pytest.mark.parametrize("capacity", [None, 5])
def test_full_pickup_matches_static_with_a_rare_station(route5, tables_factory, capacity):
    tables = tables_factory(route5, trip_minutes=5.0, idle_minutes=1.0, stop_counts={"C": (1, 100)})
    static = static_route(SEVEN_THIRTY, tables)
    for seed in range(40):
        report = dry_run(SEVEN_THIRTY, static, {"t_p": 50, "pa_min": 1.0}, 5, seed, tables, 8, capacity)
        assert report.systems["semi_dynamic"].per_simulation == report.systems["static"].per_simulation


def test_dry_run_is_reproducible(tables):
    args = (SEVEN_THIRTY, static_route(SEVEN_THIRTY, tables), {"t_p": 100, "pa_min": 0.5}, 40, 5, tables, 30)
    first, second = dry_run(*args), dry_run(*args)
    assert first == second
    assert first.to_dict() == second.to_dict()


def test_dry_run_report_shape(tables):
    report = dry_run(SEVEN_THIRTY, static_route(SEVEN_THIRTY, tables), {"t_p": 100, "pa_min": 0.5},
                     10, 5, tables, 30)
    rows = report.table_rows()
    assert rows[0].startswith("Static") and rows[0].endswith("  3")
    assert rows[1].startswith("Semi-Dynamic")
    assert list(report.to_frame().columns) == ["simulation", "static", "semi_dynamic"]
    assert report.to_dict()["parameters"] == {"t_p": 100, "pa_min": 0.5}
    assert report.systems["static"].pickup_fraction_mean >= report.systems["semi_dynamic"].pickup_fraction_mean


def test_sweep_single_point_matches_plan(tables):
    sweep = parameter_sweep(SEVEN_THIRTY, [25], [0.8], 30, 7, tables, 40)
    proposal, _ = plan_route(SEVEN_THIRTY, tables, 40, t_p=25, pa_min=0.8, n_simulations=30, seed=7)
    (point,) = sweep.points
    assert point.num_stops == proposal.num_stops
    assert point.total_minutes == proposal.total_minutes


def test_sweep_monotonicity(tables):
    sweep = parameter_sweep(SEVEN_THIRTY, T_P_VALUES, PA_MIN_VALUES, 30, 7, tables, 40)
    stops = sweep.matrix("num_stops")
    assert stops.shape == (5, 5)
    for t_p in T_P_VALUES:
        row = list(stops.loc[float(t_p)])
        assert row == sorted(row)
    column = list(stops[0.0])
    assert column == sorted(column, reverse=True)
    minutes = sweep.matrix("total_minutes")
    for t_p in T_P_VALUES:
        row = list(minutes.loc[float(t_p)])
        assert row == sorted(row)
    assert len(sweep.to_frame()) == 25


def test_sweep_needs_values(tables):
    with pytest.raises(ValueError):
        parameter_sweep(SEVEN_THIRTY, [], [0.5], 10, 1, tables, 40)
    with pytest.raises(ValueError):
        parameter_sweep(SEVEN_THIRTY, [25], [], 10, 1, tables, 40)
