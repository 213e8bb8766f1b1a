import json
import os

import pytest

from busroute.cli import main
from busroute.config import WORKSPACE_ENV_VAR

RUN = ["--sims", "20", "--seed", "7"]
SMALL_SWEEP = ["--tp-values", "0,50,100", "--pa-min-values", "0,0.8,1"]


@pytest.fixture
def workspace(tmp_path):
    return tmp_path / "ws"


def _run(workspace, *args):
    return main(["--workspace", str(workspace), *args])


def _ingest(workspace, sample_dir):
    args = []
    for name in ("events", "stations", "schedule", "shortcuts", "boardings"):
        args += [f"--{name}", str(sample_dir / f"{name}.csv")]
    return _run(workspace, "ingest", *args)


def _read(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _snapshot(root):
    files = {}
    for sub in ("tables", "reports"):
        for dirpath, _, names in os.walk(root / sub):
            for name in names:
                path = os.path.join(dirpath, name)
                with open(path, "rb") as f:
                    files[os.path.relpath(path, root)] = f.read()
    return files


def test_pipeline_on_sample_data(workspace, sample_dir, capsys):
    assert _ingest(workspace, sample_dir) == 0
    assert _run(workspace, "metrics") == 0
    assert _run(workspace, "propose", "--depart", "07:30", "--tp", "25", "--pa-min", "0.8", *RUN) == 0

    document = _read(workspace / "reports" / "propose-0730.json")
    parameters = document["parameters"]
    assert (parameters["t_p"], parameters["pa_min"], parameters["n_simulations"], parameters["seed"]) == (
        25.0, 0.8, 20, 7)
    assert parameters["total_boardings"] > 0
    assert document["departure_time"] == "07:30"
    assert [d["stop_id"] for d in document["decisions"]] == ["S1", "S2", "S3", "S4", "S5", "S6"]
    assert document["dataset_hash"] == _read(workspace / "manifest.json")["dataset_hash"]
    assert document["pickup_coverage"] >= 0.8 - 1e-9
    assert "Stops: S1" in capsys.readouterr().out


def test_metrics_tables_and_flags(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    assert _run(workspace, "metrics") == 0
    for name in ("idle_times.csv", "trip_times.csv", "stop_probabilities.csv", "lateness.csv", "metrics.json"):
        assert (workspace / "tables" / name).exists()
    document = _read(workspace / "tables" / "metrics.json")
    assert document["shortcuts"] == {"usable": ["S2>S4"], "flagged": ["S4>S6"]}
    assert document["route"] == ["S1", "S2", "S3", "S4", "S5", "S6"]
    assert len(document["trip_times"]) == 5 * 24
    assert _read(workspace / "manifest.json")["tables"]["dataset_hash"] == document["dataset_hash"]


def test_metrics_rerun_is_byte_identical(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    assert _run(workspace, "metrics") == 0
    first = _snapshot(workspace)
    assert _run(workspace, "metrics") == 0
    assert _snapshot(workspace) == first


def test_dry_run_needs_tables(workspace, sample_dir, capsys):
    _ingest(workspace, sample_dir)
    capsys.readouterr()
    assert _run(workspace, "dry-run", "--depart", "07:30", *RUN) == 1
    assert "tables not built" in capsys.readouterr().out


def test_changed_inputs_make_tables_stale(workspace, sample_dir, capsys):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    events = workspace / "inputs" / "events.csv"
    events.write_text(events.read_text(encoding="utf-8").rstrip("\n")
                      + "\n2019-10-11,2019-10-11 12:00:00,outgoing,departing,S1,T1200\n", encoding="utf-8")
    capsys.readouterr()
    assert _run(workspace, "propose", "--depart", "07:30", *RUN) == 1
    assert "stale" in capsys.readouterr().out


def test_reingest_keeps_current_tables(workspace, sample_dir, capsys):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    assert _ingest(workspace, sample_dir) == 0
    assert "tables" in _read(workspace / "manifest.json")  # same content
    assert _run(workspace, "ingest", "--events", str(sample_dir / "events.csv"),
                "--boardings", str(sample_dir / "schedule.csv")) == 1
    capsys.readouterr()
    assert _run(workspace, "propose", "--depart", "07:30", *RUN) == 0


def test_uninitialized_workspace(tmp_path, capsys):
    assert _run(tmp_path, "propose", "--depart", "07:30", *RUN) == 1
    assert "workspace not initialized" in capsys.readouterr().out


def test_full_runs_are_reproducible(tmp_path, sample_dir):
    snapshots = []
    for name in ("first", "second"):
        workspace = tmp_path / name
        assert _ingest(workspace, sample_dir) == 0
        assert _run(workspace, "metrics") == 0
        assert _run(workspace, "propose", "--depart", "07:30", *RUN) == 0
        assert _run(workspace, "simulate", "--depart", "07:30", *RUN) == 0
        assert _run(workspace, "dry-run", "--depart", "07:30", "--capacity", *RUN) == 0
        assert _run(workspace, "sweep", "--depart", "08:00", *SMALL_SWEEP, *RUN) == 0
        snapshots.append(_snapshot(workspace))
    assert snapshots[0] == snapshots[1]
    assert "reports/dry-run-0730.csv" in {k.replace(os.sep, "/") for k in snapshots[0]}


def test_dry_run_report(workspace, sample_dir, capsys):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    capsys.readouterr()
    assert _run(workspace, "dry-run", "--depart", "07:30", "--capacity", "30", *RUN) == 0
    out = capsys.readouterr().out
    assert "Static" in out and "Semi-Dynamic" in out
    document = _read(workspace / "reports" / "dry-run-0730.json")
    assert document["capacity"] == 30
    assert set(document["systems"]) == {"static", "semi_dynamic"}
    assert document["seed"] == 7


def test_generated_seed_is_recorded(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    assert _run(workspace, "simulate", "--depart", "07:30", "--sims", "5") == 0
    seed = _read(workspace / "reports" / "simulate-0730.json")["rng_seed"]
    assert isinstance(seed, int)
    log = (workspace / "log.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(log[-1])["arguments"]["seed"] == seed


def test_allocate(workspace, sample_dir, capsys):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    capsys.readouterr()
    assert _run(workspace, "allocate", "--trip-a", "09:30", "--max-wait", "10", "--total", "20", *RUN) == 0
    assert capsys.readouterr().out.startswith("09:30 → ")
    document = _read(workspace / "reports" / "allocate-0930.json")
    assert document["trip_a_start"] == "09:30"
    assert document["trip_b_start"] >= "09:30"
    assert document["wait_model"] == "median"
    assert document["parameters"]["search_cap"] == 120
    assert document["parameters"]["total_boardings"] == document["parameters"]["trip_b_total_boardings"] == 20


def test_allocate_records_inferred_totals(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    assert _run(workspace, "allocate", "--trip-a", "07:30", "--max-wait", "10", *RUN) == 0
    parameters = _read(workspace / "reports" / "allocate-0730.json")["parameters"]
    assert isinstance(parameters["total_boardings"], int) and parameters["total_boardings"] >= 1
    assert isinstance(parameters["trip_b_total_boardings"], int)


def test_report_writes_plot_data_and_html(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    assert _run(workspace, "report", "--depart", "07:30", "--html", *SMALL_SWEEP, *RUN) == 0
    plots = workspace / "reports" / "plots"
    for name in ("lateness", "stop_probabilities", "pickup_fractions", "sweep_num_stops"):
        assert (plots / f"{name}.csv").exists()
    page = (workspace / "reports" / "report.html").read_text(encoding="utf-8")
    assert "Semi-dynamic routing report" in page
    assert page.count("<script") >= 1


def test_log_has_one_line_per_command(workspace, sample_dir):
    _ingest(workspace, sample_dir)
    _run(workspace, "metrics")
    _run(workspace, "propose", "--depart", "07:30", *RUN)
    _run(workspace, "propose", "--depart", "07:30", "--pa-min", "1.5", *RUN)
    entries = [json.loads(line) for line in (workspace / "log.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [e["command"] for e in entries] == ["ingest", "metrics", "propose", "propose"]
    assert [e["status"] for e in entries] == ["ok", "ok", "ok", "error"]
    assert "PA_min" in entries[-1]["diagnostic"]
    assert entries[2]["artifacts"] and entries[3]["artifacts"] == []


def test_workspace_from_environment(workspace, sample_dir, monkeypatch):
    monkeypatch.setenv(WORKSPACE_ENV_VAR, str(workspace))
    args = []
    for name in ("events", "stations", "schedule"):
        args += [f"--{name}", str(sample_dir / f"{name}.csv")]
    assert main(["ingest", *args]) == 0
    assert (workspace / "manifest.json").exists()


def test_missing_required_input(workspace, sample_dir, capsys):
    assert _run(workspace, "ingest", "--events", str(sample_dir / "events.csv")) == 1
    assert "missing required input" in capsys.readouterr().out


def test_propose_without_boardings_needs_total(workspace, sample_dir, capsys):
    args = []
    for name in ("events", "stations", "schedule"):
        args += [f"--{name}", str(sample_dir / f"{name}.csv")]
    _run(workspace, "ingest", *args)
    _run(workspace, "metrics")
    capsys.readouterr()
    assert _run(workspace, "propose", "--depart", "07:30", *RUN) == 1
    assert "--total" in capsys.readouterr().out
    assert _run(workspace, "propose", "--depart", "07:30", "--total", "25", *RUN) == 0


def test_bad_departure_is_a_usage_error(workspace):
    with pytest.raises(SystemExit) as excinfo:
        _run(workspace, "propose", "--depart", "7h30")
    assert excinfo.value.code == 2
