"""
Base-station reconstruction and hourly load aggregation.

A cell's coverage is the convex hull of every position reported by users it
served; its station sits at the traffic-weighted centroid of those positions.
Loads are dense hourly byte series over one hour range shared by all stations
so cluster series can be summed bin-wise.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from .categories import CategoryRegistry, get_default_registry
from .errors import GeometryError
from .geo import PlanePoint, Projection, convex_hull, weighted_centroid
from .models import TOTAL, AppCategory, CellId, Diagnostic, LoadSeries, Station, StationLoads, TraceRecord
from .trace import trace_projection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HourRange:
    """Half-open range of epoch hour indices [origin_hour, origin_hour + length)."""
    origin_hour: int
    length: int

    @classmethod
    def spanning(cls, records: Iterable[TraceRecord]) -> "HourRange":
        hours = [r.hour for r in records]
        if not hours:
            return cls(0, 0)
        return cls(min(hours), max(hours) - min(hours) + 1)

    def contains(self, hour: int) -> bool:
        return self.origin_hour <= hour < self.origin_hour + self.length


def _station_geometry(cell_records: List[TraceRecord], projection: Projection):
    # Canonical order keeps the centroid bit-identical under any record permutation.
    ordered = sorted(cell_records, key=lambda r: (r.lat, r.lon, r.total_bytes))
    xy = projection.forward_many([r.lat for r in ordered], [r.lon for r in ordered])
    points = [PlanePoint(float(x), float(y)) for x, y in xy]
    weights = [float(r.total_bytes) for r in ordered]
    try:
        position = weighted_centroid(points, weights)
    except GeometryError:
        # No traffic at all on this cell: plain average of the observations.
        position = weighted_centroid(points, [1.0] * len(points))
    return position, convex_hull(points)


def build_load_series(
    records: Sequence[TraceRecord],
    stations: Union[Sequence[Station], Iterable[CellId]],
    category_filter: AppCategory = TOTAL,
    hour_range: Optional[HourRange] = None,
    registry: Optional[CategoryRegistry] = None,
    diagnostics: Optional[List[Diagnostic]] = None,
) -> StationLoads:
    """Hourly byte series per station for one category (or ``total``).

    Records whose cell is not among ``stations`` or whose hour falls outside
    ``hour_range`` are skipped and reported in ``diagnostics``.
    """
    registry = registry or get_default_registry()
    ids = [s.id if isinstance(s, Station) else s for s in stations]
    index = {cell: i for i, cell in enumerate(ids)}
    hour_range = hour_range or HourRange.spanning(records)
    matrix = np.zeros((len(ids), hour_range.length))

    rows, cols, values = [], [], []
    for n, record in enumerate(records, start=1):
        if category_filter.name != TOTAL.name and registry.classify(record.app).name != category_filter.name:
            continue
        row = index.get(record.cell_key)
        if row is None:
            _report(diagnostics, n, f"unknown cell {record.cell_key.label()}")
            continue
        if not hour_range.contains(record.hour):
            _report(diagnostics, n, f"hour {record.hour} outside aggregation range")
            continue
        rows.append(row)
        cols.append(record.hour - hour_range.origin_hour)
        values.append(float(record.total_bytes))

    if rows:
        np.add.at(matrix, (np.asarray(rows), np.asarray(cols)), np.asarray(values))

    return {cell: LoadSeries(hour_range.origin_hour, matrix[i]) for i, cell in enumerate(ids)}


def _report(diagnostics: Optional[List[Diagnostic]], n: int, message: str) -> None:
    logger.warning(f"Skipping record {n}: {message}")
    if diagnostics is not None:
        diagnostics.append(Diagnostic(n, message))


def reconstruct_stations(
    records: Sequence[TraceRecord],
    projection: Optional[Projection] = None,
    hour_range: Optional[HourRange] = None,
    registry: Optional[CategoryRegistry] = None,
    categories: Optional[Sequence[AppCategory]] = None,
) -> List[Station]:
    """One Station per distinct (cell_id, lac) of a single operator, sorted by id.

    Each station carries the ``total`` series plus one series per category
    (all registry categories unless ``categories`` narrows them).
    """
    operators = {r.operator for r in records}
    if len(operators) > 1:
        raise ValueError(f"reconstruct_stations expects one operator, got {sorted(operators)}")

    registry = registry or get_default_registry()
    projection = projection or trace_projection(records)
    hour_range = hour_range or HourRange.spanning(records)
    categories = list(categories) if categories is not None else registry.all_categories()

    by_cell: Dict[CellId, List[TraceRecord]] = {}
    for record in records:
        by_cell.setdefault(record.cell_key, []).append(record)
    ids = sorted(by_cell)

    per_category: Dict[str, StationLoads] = {
        TOTAL.name: build_load_series(records, ids, TOTAL, hour_range, registry)
    }
    for category in categories:
        per_category[category.name] = build_load_series(records, ids, category, hour_range, registry)

    stations = []
    for cell in ids:
        position, coverage = _station_geometry(by_cell[cell], projection)
        loads = {name: series[cell] for name, series in per_category.items()}
        stations.append(Station(cell, position, coverage, loads, len(by_cell[cell])))

    logger.info(f"Reconstructed {len(stations)} stations from {len(records)} records")
    return stations


def station_loads(stations: Sequence[Station], category: str = TOTAL.name) -> StationLoads:
    """Pick one category's series out of reconstructed stations."""
    loads = {}
    for station in stations:
        series = station.load(category)
        if series is None:
            raise KeyError(f"station {station.id.label()} has no '{category}' series")
        loads[station.id] = series
    return loads


def with_loads(stations: Sequence[Station], loads: Mapping[CellId, LoadSeries], category: str = TOTAL.name) -> List[Station]:
    """Copies of ``stations`` whose ``category`` series is replaced by ``loads``."""
    return [
        Station(s.id, s.position, s.coverage, {**s.loads, category: loads[s.id]}, s.observation_count)
        for s in stations
    ]
