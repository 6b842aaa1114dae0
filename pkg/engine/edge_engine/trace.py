"""
Record-level operations on a parsed trace: per-operator partitioning and the
dataset summary (records, users, cells, traffic, covered area, time span).
"""

import logging
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, TextIO

from pydantic import BaseModel

from .geo import Projection, bounding_box_km
from .models import TraceRecord
from .parsers import get_writer

logger = logging.getLogger(__name__)

BYTES_PER_TB = 1e12


def partition_by_operator(records: Sequence[TraceRecord]) -> Dict[str, List[TraceRecord]]:
    """Group records by operator, preserving relative order within each group."""
    groups: Dict[str, List[TraceRecord]] = {}
    for record in records:
        groups.setdefault(record.operator, []).append(record)
    logger.debug(f"Partitioned {len(records)} records into {len(groups)} operators")
    return groups


def trace_projection(records: Sequence[TraceRecord]) -> Projection:
    """Projection centered on the mean position of all records."""
    return Projection.centered_on([r.lat for r in records], [r.lon for r in records])


class TraceSummary(BaseModel):
    """Dataset-table row for one operator (or the whole trace)."""
    operator: Optional[str] = None
    records: int
    unique_users: int
    unique_cells: int
    total_bytes: int
    total_traffic_tb: float
    area_km: List[float]
    first_timestamp: Optional[str] = None
    last_timestamp: Optional[str] = None


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat().replace("+00:00", "Z")


def summarize(records: Sequence[TraceRecord], projection: Projection, operator: Optional[str] = None) -> TraceSummary:
    total = sum(r.total_bytes for r in records)
    points = projection.forward_many([r.lat for r in records], [r.lon for r in records])
    width, height = bounding_box_km(points)
    return TraceSummary(
        operator=operator,
        records=len(records),
        unique_users=len({r.user_id for r in records}),
        unique_cells=len({r.cell_key for r in records}),
        total_bytes=total,
        total_traffic_tb=total / BYTES_PER_TB,
        area_km=[round(width, 3), round(height, 3)],
        first_timestamp=_iso(min(r.timestamp for r in records)) if records else None,
        last_timestamp=_iso(max(r.timestamp for r in records)) if records else None,
    )


def write_records(records: Sequence[TraceRecord], stream: TextIO, trace_format: str = "csv") -> int:
    """Serialize records in a format ``parse_records`` reads back unchanged."""
    count = get_writer(trace_format)(records, stream)
    logger.debug(f"Serialized {count} records as {trace_format}")
    return count
