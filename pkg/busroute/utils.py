"""
Utility functions for busroute.
"""

import datetime as dt
import hashlib
import json
import math
import os
import tempfile
from typing import Any, Iterable, Sequence

import numpy as np

from .config import HOURS_PER_DAY


def parse_clock(value: str, max_hour: int = 27) -> float:
    """Parse ``HH:MM`` (or ``HH:MM:SS``) into minutes after midnight."""
    parts = str(value).strip().split(':')
    if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
        raise ValueError(f"Invalid clock time: {value!r} (expected HH:MM)")
    hours, minutes = int(parts[0]), int(parts[1])
    seconds = int(parts[2]) if len(parts) == 3 else 0
    if hours > max_hour or minutes > 59 or seconds > 59:
        raise ValueError(f"Clock time out of range: {value!r} (allowed 00:00-{max_hour:02d}:59)")
    return hours * 60 + minutes + seconds / 60.0


def format_clock(minutes: float, seconds: bool = True) -> str:
    """Format minutes after midnight as ``HH:MM:SS`` (hours may exceed 23)."""
    total = int(round(minutes * 60))
    hours, rest = divmod(total, 3600)
    mins, secs = divmod(rest, 60)
    if seconds:
        return f"{hours:02d}:{mins:02d}:{secs:02d}"
    return f"{hours:02d}:{mins:02d}"


def hour_of(minutes: float) -> int:
    """Hour of day (0-23) for a simulated clock in minutes after midnight."""
    return int(math.floor(minutes / 60.0 + 1e-9)) % HOURS_PER_DAY


def minutes_between(start: dt.datetime, end: dt.datetime) -> float:
    """Signed difference ``end - start`` in minutes."""
    return (end - start).total_seconds() / 60.0


def day_kind_for(service_date: dt.date) -> str:
    """Map a service date to the schedule day kind."""
    weekday = service_date.weekday()
    if weekday == 5:
        return 'saturday'
    if weekday == 6:
        return 'sunday'
    return 'weekday'


def median(values: Sequence[float]) -> float:
    """Median; an even count averages the two middle order statistics."""
    if len(values) == 0:
        raise ValueError("median of empty sequence")
    return float(np.median(np.asarray(values, dtype=float)))


def percentile(values: Sequence[float], q: float) -> float:
    """Percentile with linear interpolation between order statistics."""
    if len(values) == 0:
        raise ValueError("percentile of empty sequence")
    if not 0.0 <= q <= 100.0:
        raise ValueError(f"percentile must be within [0, 100], got {q}")
    return float(np.percentile(np.asarray(values, dtype=float), q, method='linear'))


def file_sha256(path: str) -> str:
    """Hex digest of a file's content."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_hash(paths: Iterable[str]) -> str:
    """Combined digest over files (name + content), order-insensitive."""
    digest = hashlib.sha256()
    for path in sorted(paths, key=os.path.basename):
        digest.update(os.path.basename(path).encode('utf-8'))
        digest.update(file_sha256(path).encode('ascii'))
    return digest.hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write text via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def to_json(document: Any) -> str:
    """Deterministic JSON text for artifacts."""
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def round_half_up(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    return int(math.floor(value + 0.5)) if value >= 0 else -int(math.floor(-value + 0.5))
