"""
Workspace module.
Holds the ingested input files, the built tables (with provenance flags) and
the run reports, together with a manifest recording the dataset hash.
"""

import datetime as dt
import json
import logging
import os
import shutil
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import pandas as pd

from . import __version__
from .config import (
    DEFAULT_LINK_THRESHOLD_MINUTES, DEFAULT_WORKSPACE, INPUT_FILES, LOG_FILE, MANIFEST_FILE,
    METRICS_FILE, OPTIONAL_INPUTS, SUPPORTED_EXTENSIONS, WORKSPACE_ENV_VAR,
)
from .data_loader import (
    Route, ValidationReport, parse_boarding_averages, parse_events, parse_schedule, parse_shortcuts,
    parse_stations, usable_shortcuts, validate_shortcuts,
)
from .filters import apply_filters
from .probability import StopProbabilityTable, build_probability_table
from .routing import RoutingTables
from .utils import atomic_write_text, dataset_hash, file_sha256, to_json
from .wrangle import (
    IdleTimeTable, TripTimeMatrix, build_idle_table, build_trip_time_matrix, compute_lateness,
    extract_trips, lateness_frame, link_events, split_events,
)

logger = logging.getLogger(__name__)

REQUIRED_INPUTS = tuple(name for name in INPUT_FILES if name not in OPTIONAL_INPUTS)
TABLE_FILES = {
    'idle_times': 'idle_times.csv',
    'trip_times': 'trip_times.csv',
    'stop_probabilities': 'stop_probabilities.csv',
    'lateness': 'lateness.csv',
}


class WorkspaceError(RuntimeError):
    """Raised when the workspace is missing, incomplete or out of date."""


def _extension(path: str) -> str:
    lowered = path.lower()
    for ext in sorted(SUPPORTED_EXTENSIONS, key=len, reverse=True):
        if lowered.endswith(ext):
            return ext
    raise ValueError(f"Unsupported file format: {path} (expected one of {', '.join(SUPPORTED_EXTENSIONS)})")


def _frame_records(frame: pd.DataFrame) -> List[dict]:
    # pandas' JSON writer maps NaN to null and numpy scalars to plain numbers
    return json.loads(frame.to_json(orient='records', double_precision=15))


def _frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator='\n')


@dataclass(frozen=True)
class MetricsBuild:
    document: dict
    tables: Mapping[str, pd.DataFrame]


@dataclass(frozen=True)
class Workspace:
    root: str

    @classmethod
    def resolve(cls, path: Optional[str] = None) -> 'Workspace':
        """Workspace from an explicit path, else the environment, else the default directory."""
        return cls(path or os.environ.get(WORKSPACE_ENV_VAR) or DEFAULT_WORKSPACE)

    @property
    def inputs_dir(self) -> str:
        return os.path.join(self.root, 'inputs')

    @property
    def tables_dir(self) -> str:
        return os.path.join(self.root, 'tables')

    @property
    def reports_dir(self) -> str:
        return os.path.join(self.root, 'reports')

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.root, MANIFEST_FILE)

    @property
    def log_path(self) -> str:
        return os.path.join(self.root, LOG_FILE)

    @property
    def metrics_path(self) -> str:
        return os.path.join(self.tables_dir, METRICS_FILE)

    # Manifest

    def read_manifest(self) -> dict:
        if not os.path.exists(self.manifest_path):
            raise WorkspaceError(f"workspace not initialized at {self.root}: run `busroute ingest` first")
        with open(self.manifest_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def write_manifest(self, manifest: dict) -> None:
        atomic_write_text(self.manifest_path, to_json(manifest))

    def input_path(self, name: str, manifest: Optional[dict] = None) -> Optional[str]:
        """Path of an ingested input, None for an absent optional one."""
        manifest = manifest if manifest is not None else self.read_manifest()
        filename = manifest['inputs'].get(name)
        return os.path.join(self.inputs_dir, filename) if filename else None

    def _input_paths(self, manifest: dict) -> List[str]:
        return [os.path.join(self.inputs_dir, f) for f in manifest['inputs'].values()]

    def current_dataset_hash(self, manifest: Optional[dict] = None) -> str:
        manifest = manifest if manifest is not None else self.read_manifest()
        paths = self._input_paths(manifest)
        missing = [p for p in paths if not os.path.exists(p)]
        if missing:
            raise WorkspaceError(f"workspace inputs missing: {', '.join(missing)}; re-run `busroute ingest`")
        return dataset_hash(paths)

    # Ingest

    def ingest(self, sources: Mapping[str, str]) -> dict:
        """Validate and copy input files into the workspace.

        Files not given keep their previously ingested copy. Any change to
        the inputs marks the built tables as stale.
        """
        unknown = sorted(set(sources) - set(INPUT_FILES))
        if unknown:
            raise ValueError(f"unknown input(s): {', '.join(unknown)}")
        manifest = self.read_manifest() if os.path.exists(self.manifest_path) else {'inputs': {}}

        resolved: Dict[str, str] = {}
        for name in INPUT_FILES:
            if sources.get(name):
                if not os.path.exists(sources[name]):
                    raise FileNotFoundError(f"File not found: {sources[name]}")
                resolved[name] = sources[name]
            elif manifest['inputs'].get(name):
                resolved[name] = os.path.join(self.inputs_dir, manifest['inputs'][name])
        missing = [name for name in REQUIRED_INPUTS if name not in resolved]
        if missing:
            raise ValueError(f"missing required input(s): {', '.join(missing)}")

        validation = validate_inputs(resolved)

        os.makedirs(self.inputs_dir, exist_ok=True)
        inputs = dict(manifest['inputs'])
        for name, source in sources.items():
            if not source:
                continue
            filename = os.path.splitext(INPUT_FILES[name])[0] + _extension(source)
            target = os.path.join(self.inputs_dir, filename)
            if os.path.abspath(source) != os.path.abspath(target):
                tmp = target + '.tmp'
                shutil.copyfile(source, tmp)
                os.replace(tmp, target)
            old = inputs.get(name)
            if old and old != filename and os.path.exists(os.path.join(self.inputs_dir, old)):
                os.remove(os.path.join(self.inputs_dir, old))
            inputs[name] = filename
            logger.info("Ingested %s from %s", name, source)

        updated = {
            'version': __version__,
            'inputs': dict(sorted(inputs.items())),
            'ingested_at': dt.datetime.now().isoformat(timespec='seconds'),
        }
        updated['dataset_hash'] = self.current_dataset_hash(updated)
        tables = manifest.get('tables')
        if tables and tables.get('dataset_hash') == updated['dataset_hash']:
            updated['tables'] = tables
        self.write_manifest(updated)
        return {'dataset_hash': updated['dataset_hash'], 'inputs': updated['inputs'], 'validation': validation}

    # Tables

    def check_tables(self) -> dict:
        """Manifest entry of the built tables, after checking they are current."""
        manifest = self.read_manifest()
        tables = manifest.get('tables')
        if not tables or not os.path.exists(self.metrics_path):
            raise WorkspaceError("tables not built: run `busroute metrics` first")
        if tables['dataset_hash'] != self.current_dataset_hash(manifest):
            raise WorkspaceError("tables are stale (input data changed since they were built): "
                                 "re-run `busroute metrics`")
        if tables['tables_hash'] != file_sha256(self.metrics_path):
            raise WorkspaceError("tables were modified after they were built: re-run `busroute metrics`")
        return tables

    def build_metrics(self, threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES,
                      direction_id: Optional[str] = None, day_kinds: Optional[Iterable[str]] = None,
                      start_date: Optional[dt.date] = None, end_date: Optional[dt.date] = None) -> List[str]:
        """Build the tables from the ingested inputs and record them in the manifest."""
        manifest = self.read_manifest()
        digest = self.current_dataset_hash(manifest)
        build = build_metrics(
            {name: self.input_path(name, manifest) for name in manifest['inputs']},
            threshold_minutes=threshold_minutes, direction_id=direction_id, day_kinds=day_kinds,
            start_date=start_date, end_date=end_date,
        )
        build.document['dataset_hash'] = digest

        artifacts = []
        for name, frame in build.tables.items():
            path = os.path.join(self.tables_dir, TABLE_FILES[name])
            atomic_write_text(path, _frame_csv(frame))
            artifacts.append(path)
        atomic_write_text(self.metrics_path, to_json(build.document))
        artifacts.append(self.metrics_path)

        manifest['tables'] = {
            'dataset_hash': digest,
            'tables_hash': file_sha256(self.metrics_path),
            'built_at': dt.datetime.now().isoformat(timespec='seconds'),
            'version': __version__,
            'parameters': build.document['parameters'],
        }
        self.write_manifest(manifest)
        return artifacts

    def read_metrics(self) -> dict:
        self.check_tables()
        with open(self.metrics_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def load_tables(self) -> Tuple[RoutingTables, dict]:
        """Routing tables rebuilt from the metrics document."""
        document = self.read_metrics()
        manifest = self.read_manifest()
        stations = parse_stations(self.input_path('stations', manifest))
        route = Route.from_stations(stations, document['parameters']['direction_id'])

        shortcuts = ()
        shortcut_path = self.input_path('shortcuts', manifest)
        usable = set(document['shortcuts']['usable'])
        if shortcut_path and usable:
            shortcuts = tuple(e for e in parse_shortcuts(shortcut_path, stations) if e.key in usable)

        tables = RoutingTables(
            route=route,
            idle=IdleTimeTable.from_records(document['idle_times']),
            trip_times=TripTimeMatrix.from_records(document['trip_times']),
            probabilities=StopProbabilityTable.from_records(route.stop_ids, document['stop_probabilities']),
            shortcuts=shortcuts,
        )
        return tables, document

    def boarding_averages_path(self) -> Optional[str]:
        return self.input_path('boardings')

    # Reports

    def write_report(self, name: str, document: dict) -> str:
        path = os.path.join(self.reports_dir, f"{name}.json")
        atomic_write_text(path, to_json(document))
        return path

    def write_table(self, name: str, frame: pd.DataFrame, subdir: Optional[str] = None) -> str:
        directory = self.reports_dir if subdir is None else os.path.join(self.reports_dir, subdir)
        path = os.path.join(directory, f"{name}.csv")
        atomic_write_text(path, _frame_csv(frame))
        return path

    def append_log(self, entry: dict) -> None:
        """Append one JSON line to the workspace log."""
        existing = ''
        if os.path.exists(self.log_path):
            with open(self.log_path, 'r', encoding='utf-8') as f:
                existing = f.read()
        atomic_write_text(self.log_path, existing + json.dumps(entry, sort_keys=True) + "\n")


def validate_inputs(paths: Mapping[str, str]) -> Dict[str, dict]:
    """Parse every input once; structural errors raise, row rejections are reported."""
    stations = parse_stations(paths['stations'])
    schedule = parse_schedule(paths['schedule'], stations)
    _, event_report = parse_events(paths['events'])
    validation = {
        'events': event_report.to_dict(),
        'stations': {'count': len(stations)},
        'schedule': {'count': len(schedule)},
    }
    if paths.get('shortcuts'):
        validation['shortcuts'] = {'count': len(parse_shortcuts(paths['shortcuts'], stations))}
    if paths.get('boardings'):
        validation['boardings'] = {'count': len(parse_boarding_averages(paths['boardings']))}
    return validation


def lateness_summary(lateness: pd.DataFrame) -> pd.DataFrame:
    """Median lateness and record count per station and hour."""
    columns = ['stop_id', 'hour', 'median_lateness_minutes', 'count']
    if lateness.empty:
        return pd.DataFrame(columns=columns)
    summary = (lateness.groupby(['stop_id', 'hour'])['lateness_minutes']
               .agg(['median', 'count']).reset_index())
    summary.columns = columns
    return summary.sort_values(['stop_id', 'hour']).reset_index(drop=True)


def build_metrics(paths: Mapping[str, Optional[str]],
                  threshold_minutes: float = DEFAULT_LINK_THRESHOLD_MINUTES,
                  direction_id: Optional[str] = None, day_kinds: Optional[Iterable[str]] = None,
                  start_date: Optional[dt.date] = None, end_date: Optional[dt.date] = None) -> MetricsBuild:
    """Run ingest, filtering and wrangling over input files and collect the tables."""
    stations = parse_stations(paths['stations'])
    route = Route.from_stations(stations, direction_id)
    schedule = parse_schedule(paths['schedule'], stations)
    events, event_report = parse_events(paths['events'])
    kinds = sorted(day_kinds) if day_kinds else None

    filtered = apply_filters(events, route.direction_id, kinds, start_date, end_date)
    if not filtered:
        raise ValueError(f"no events left for direction {route.direction_id} after filtering")
    departures, arrivals = split_events(filtered)
    visits = [v for v in link_events(departures, arrivals, threshold_minutes) if v.stop_id in route]
    lateness = compute_lateness(departures, schedule, threshold_minutes)
    trips = extract_trips(filtered, route, threshold_minutes)

    idle = build_idle_table(visits, route.stop_ids)
    trip_times = build_trip_time_matrix(trips, route, threshold_minutes)
    probabilities = build_probability_table(trips, route)

    shortcut_report = ValidationReport(source='shortcuts', total=0, accepted=0)
    usable: List[str] = []
    if paths.get('shortcuts'):
        edges = [e for e in parse_shortcuts(paths['shortcuts'], stations)
                 if e.from_stop in route and e.to_stop in route]
        shortcut_report = validate_shortcuts(edges, trip_times)
        usable = [e.key for e in usable_shortcuts(edges, shortcut_report)]

    frames = {
        'idle_times': idle.to_frame().sort_values(['stop_id', 'hour']).reset_index(drop=True),
        'trip_times': trip_times.to_frame().sort_values(['from_stop', 'to_stop', 'hour']).reset_index(drop=True),
        'stop_probabilities': probabilities.to_frame(),
        'lateness': lateness_frame(lateness),
    }
    document = {
        'version': __version__,
        'parameters': {
            'threshold_minutes': threshold_minutes,
            'direction_id': route.direction_id,
            'day_kinds': kinds,
            'start_date': start_date.isoformat() if start_date else None,
            'end_date': end_date.isoformat() if end_date else None,
        },
        'route': route.stop_ids,
        'counts': {
            'events': len(events),
            'events_after_filters': len(filtered),
            'linked_visits': len(visits),
            'trips': len(trips),
            'lateness_records': len(lateness),
        },
        'validation': {'events': event_report.to_dict(), 'shortcuts': shortcut_report.to_dict()},
        'idle_times': _frame_records(frames['idle_times']),
        'trip_times': _frame_records(frames['trip_times']),
        'stop_probabilities': _frame_records(frames['stop_probabilities']),
        'lateness_summary': _frame_records(lateness_summary(frames['lateness'])),
        'shortcuts': {'usable': usable, 'flagged': shortcut_report.rejected_refs},
    }
    logger.info("Built tables for %d stations from %d trips", len(route), len(trips))
    return MetricsBuild(document=document, tables=frames)
