"""
Event filtering module.
Restricts the historical event log to one direction, selected day kinds and a
service-date range before the analytic tables are built.
"""

import datetime as dt
import logging
from typing import Iterable, List, Optional, Sequence

from .config import DAY_KINDS, DIRECTIONS
from .data_loader import RawEvent
from .utils import day_kind_for

logger = logging.getLogger(__name__)


def apply_filters(events: Sequence[RawEvent],
                  direction_id: Optional[str] = None,
                  day_kinds: Optional[Iterable[str]] = None,
                  start_date: Optional[dt.date] = None,
                  end_date: Optional[dt.date] = None) -> List[RawEvent]:
    """Apply all filters to the event list; bounds are inclusive."""
    if direction_id is not None and direction_id not in DIRECTIONS:
        raise ValueError(f"direction_id must be one of {DIRECTIONS}, got {direction_id!r}")
    kinds = set(day_kinds) if day_kinds else None
    if kinds is not None and not kinds <= set(DAY_KINDS):
        raise ValueError(f"day kinds must be among {DAY_KINDS}, got {sorted(kinds)}")
    if start_date and end_date and start_date > end_date:
        raise ValueError(f"start date {start_date} is after end date {end_date}")

    filtered = list(events)

    # Direction
    if direction_id is not None:
        filtered = [e for e in filtered if e.direction_id == direction_id]

    # Day kinds
    if kinds is not None:
        filtered = [e for e in filtered if day_kind_for(e.service_date) in kinds]

    # Service date range
    if start_date is not None:
        filtered = [e for e in filtered if e.service_date >= start_date]
    if end_date is not None:
        filtered = [e for e in filtered if e.service_date <= end_date]

    logger.info("Kept %d of %d events after filtering", len(filtered), len(events))
    return filtered
