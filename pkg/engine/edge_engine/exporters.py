"""
Plot-ready artifacts: station and cluster GeoJSON, sweep and CDF CSV files,
JSON summaries. Coordinates go back to lon/lat through the projection the
stations were built with.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from .clustering import Partition
from .geo import Hull, PlanePoint, Projection, convex_hull
from .metrics import DistributionSummary, EfficiencyReport, SweepRow
from .models import TOTAL, Station
from .utils import atomic_write, write_json_atomic

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "d_max", "n_clusters", "mean_bs_per_cluster",
    "mean_efficiency", "weighted_efficiency", "zero_peak_clusters",
)


def _number(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value)) if isinstance(value, float) else str(value)


def _lonlat(projection: Projection, point: PlanePoint) -> List[float]:
    lat, lon = projection.inverse(point)
    return [lon, lat]


def hull_geometry(hull: Hull, projection: Projection) -> Dict[str, Any]:
    """GeoJSON geometry of a hull: Point, LineString or closed Polygon ring."""
    coords = [_lonlat(projection, v) for v in hull.vertices]
    if hull.kind == "point":
        return {"type": "Point", "coordinates": coords[0]}
    if hull.kind == "segment":
        return {"type": "LineString", "coordinates": coords}
    return {"type": "Polygon", "coordinates": [coords + [coords[0]]]}


def stations_geojson(stations: Sequence[Station], projection: Projection) -> Dict[str, Any]:
    """
    Two features per station: a ``position`` Point carrying the load
    properties, then its ``coverage`` hull. Both share the ``station`` label.
    """
    features = []
    for station in stations:
        label = station.id.label()
        total = station.total_load
        properties: Dict[str, Any] = {
            "role": "position",
            "station": label,
            "operator": station.id.operator,
            "cell_id": station.id.cell_id,
            "lac": station.id.lac,
            "observations": station.observation_count,
            "total_bytes": total.total,
            "peak_load": total.peak,
            "avg_load": total.average,
        }
        for name, series in sorted(station.loads.items()):
            if name != TOTAL.name:
                properties[f"peak_{name}"] = series.peak
        features.append({
            "type": "Feature",
            "id": label,
            "geometry": {"type": "Point", "coordinates": _lonlat(projection, station.position)},
            "properties": properties,
        })
        features.append({
            "type": "Feature",
            "id": f"{label}#coverage",
            "geometry": hull_geometry(station.coverage, projection),
            "properties": {
                "role": "coverage",
                "station": label,
                "coverage_kind": station.coverage.kind,
                "coverage_area_m2": station.coverage.area(),
            },
        })
    return {"type": "FeatureCollection", "features": features}


def partition_json(partition: Partition, report: EfficiencyReport = None) -> Dict[str, Any]:
    clusters = []
    for k, members in enumerate(partition.clusters):
        entry: Dict[str, Any] = {"cluster": k, "size": len(members), "stations": [m.label() for m in members]}
        if report is not None:
            row = report.per_cluster[k]
            entry.update(avg_load=row.avg_load, peak_load=row.peak_load, efficiency=row.efficiency)
        clusters.append(entry)
    return {
        "d_max": partition.d_max,
        "n_clusters": partition.n_clusters,
        "max_applied_distance": partition.max_applied_distance,
        "clusters": clusters,
    }


def cluster_hulls_geojson(
    partition: Partition, stations: Sequence[Station], projection: Projection
) -> Dict[str, Any]:
    """One feature per cluster: the convex hull of its member station positions."""
    by_id = {s.id: s for s in stations}
    features = []
    for k, members in enumerate(partition.clusters):
        hull = convex_hull([by_id[m].position for m in members])
        features.append({
            "type": "Feature",
            "id": k,
            "geometry": hull_geometry(hull, projection),
            "properties": {"cluster": k, "size": len(members), "d_max": partition.d_max},
        })
    return {"type": "FeatureCollection", "features": features}


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_number(getattr(row, c)) for c in SWEEP_COLUMNS])
    logger.debug(f"Wrote {len(rows)} sweep rows to {path}")


def write_distribution_csv(summary: DistributionSummary, path: Union[str, Path], value_column: str = "value") -> None:
    """(value, CDF) at every distinct sample; header only for an empty distribution."""
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([value_column, "cdf"])
        for value, cdf in summary.steps():
            writer.writerow([_number(value), _number(cdf)])


def write_geojson(collection: Dict[str, Any], path: Union[str, Path]) -> None:
    write_json_atomic(collection, path)
    logger.debug(f"Wrote {len(collection['features'])} features to {path}")


def write_json(data: Any, path: Union[str, Path]) -> None:
    write_json_atomic(data, path)
