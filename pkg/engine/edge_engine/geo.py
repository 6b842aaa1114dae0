"""
Planar geometry for station reconstruction.

GPS positions are mapped onto a local equirectangular plane (meters) around a
reference point; every other routine here works on that plane.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Literal, Sequence, Tuple

import numpy as np

from .errors import GeometryError

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0

# Incidence tolerance for hull intersection tests (meters).
INCIDENCE_TOLERANCE_M = 1e-6


@dataclass(frozen=True)
class PlanePoint:
    """A point on the local plane: meters east (x) and north (y) of the reference."""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite plane coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "PlanePoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


HullKind = Literal["point", "segment", "polygon"]


@dataclass(frozen=True)
class Hull:
    """Convex hull of a point set.

    ``point`` hulls carry one vertex, ``segment`` hulls two (the extremes),
    ``polygon`` hulls three or more strictly convex vertices in
    counter-clockwise order starting from the lexicographically smallest.
    """
    kind: HullKind
    vertices: Tuple[PlanePoint, ...]

    def __post_init__(self):
        expected = {"point": 1, "segment": 2}
        if self.kind in expected and len(self.vertices) != expected[self.kind]:
            raise GeometryError(f"{self.kind} hull needs {expected[self.kind]} vertices, got {len(self.vertices)}")
        if self.kind == "polygon" and len(self.vertices) < 3:
            raise GeometryError(f"polygon hull needs at least 3 vertices, got {len(self.vertices)}")

    @classmethod
    def of_point(cls, point: PlanePoint) -> "Hull":
        return cls("point", (point,))

    def edges(self) -> List[Tuple[PlanePoint, PlanePoint]]:
        if self.kind == "point":
            return []
        if self.kind == "segment":
            return [(self.vertices[0], self.vertices[1])]
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def area(self) -> float:
        if self.kind != "polygon":
            return 0.0
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return 0.5 * abs(sum(xs[i] * ys[i - 1] - xs[i - 1] * ys[i] for i in range(len(xs))))


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection on a sphere around a fixed reference."""
    ref_lat: float
    ref_lon: float

    @classmethod
    def centered_on(cls, lats: Sequence[float], lons: Sequence[float]) -> "Projection":
        """Reference at the mean latitude/longitude of the given coordinates."""
        if len(lats) == 0:
            return cls(0.0, 0.0)
        return cls(float(np.mean(lats)), float(np.mean(lons)))

    def forward(self, lat: float, lon: float) -> PlanePoint:
        return project_to_plane(lat, lon, self.ref_lat, self.ref_lon)

    def forward_many(self, lats: Sequence[float], lons: Sequence[float]) -> np.ndarray:
        """Vectorized forward projection; returns an (n, 2) array of x, y in meters."""
        lat = np.asarray(lats, dtype=float)
        lon = np.asarray(lons, dtype=float)
        x = EARTH_RADIUS_M * math.cos(math.radians(self.ref_lat)) * np.radians(lon - self.ref_lon)
        y = EARTH_RADIUS_M * np.radians(lat - self.ref_lat)
        return np.column_stack([x, y])

    def inverse(self, point: PlanePoint) -> Tuple[float, float]:
        """Map a plane point back to (lat, lon) degrees."""
        lat = self.ref_lat + math.degrees(point.y / EARTH_RADIUS_M)
        cos_ref = math.cos(math.radians(self.ref_lat))
        lon = self.ref_lon + (math.degrees(point.x / (EARTH_RADIUS_M * cos_ref)) if cos_ref > 0 else 0.0)
        return lat, lon


def project_to_plane(lat: float, lon: float, ref_lat: float, ref_lon: float) -> PlanePoint:
    """Project (lat, lon) onto the plane tangent-ish at (ref_lat, ref_lon).

    x = R·cos(ref_lat)·Δlon, y = R·Δlat with angles in radians.
    """
    x = EARTH_RADIUS_M * math.cos(math.radians(ref_lat)) * math.radians(lon - ref_lon)
    y = EARTH_RADIUS_M * math.radians(lat - ref_lat)
    return PlanePoint(x, y)


def _cross(o: PlanePoint, a: PlanePoint, b: PlanePoint) -> float:
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


def convex_hull(points: Iterable[PlanePoint]) -> Hull:
    """Monotone-chain convex hull; collinear boundary points are dropped."""
    unique = sorted(set(points), key=lambda p: (p.x, p.y))
    if not unique:
        raise GeometryError("no points")
    if len(unique) == 1:
        return Hull("point", (unique[0],))

    lower: List[PlanePoint] = []
    for p in unique:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)

    upper: List[PlanePoint] = []
    for p in reversed(unique):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)

    ring = lower[:-1] + upper[:-1]
    if len(ring) == 2:
        return Hull("segment", (ring[0], ring[1]))
    return Hull("polygon", tuple(ring))


def weighted_centroid(points: Sequence[PlanePoint], weights: Sequence[float]) -> PlanePoint:
    """(Σ wᵢ·pᵢ) / Σ wᵢ."""
    if len(points) != len(weights):
        raise GeometryError(f"points/weights length mismatch: {len(points)} vs {len(weights)}")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise GeometryError("negative weight")
    total = w.sum()
    if total <= 0:
        raise GeometryError("zero total weight")
    xy = np.array([(p.x, p.y) for p in points], dtype=float)
    cx, cy = (w[:, None] * xy).sum(axis=0) / total
    return PlanePoint(float(cx), float(cy))


def _candidate_axes(a: Hull, b: Hull) -> List[Tuple[float, float]]:
    axes = []
    for hull in (a, b):
        for p, q in hull.edges():
            dx, dy = q.x - p.x, q.y - p.y
            axes.append((dx, dy))      # edge direction, separates collinear degenerate pairs
            axes.append((-dy, dx))     # edge normal
    pa, pb = a.vertices[0], b.vertices[0]
    axes.append((pb.x - pa.x, pb.y - pa.y))
    return axes


def _project_extent(hull: Hull, ux: float, uy: float) -> Tuple[float, float]:
    values = [v.x * ux + v.y * uy for v in hull.vertices]
    return min(values), max(values)


def hulls_intersect(a: Hull, b: Hull, tolerance: float = INCIDENCE_TOLERANCE_M) -> bool:
    """True iff the closed convex sets intersect; touching boundaries count.

    Separating-axis test over edge normals and edge directions of both hulls
    plus the vertex-to-vertex axis, which covers every point/segment/polygon
    pairing.
    """
    for dx, dy in _candidate_axes(a, b):
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            continue
        ux, uy = dx / norm, dy / norm
        a_min, a_max = _project_extent(a, ux, uy)
        b_min, b_max = _project_extent(b, ux, uy)
        if a_max < b_min - tolerance or b_max < a_min - tolerance:
            return False
    return True


def hull_contains(hull: Hull, point: PlanePoint, tolerance: float = INCIDENCE_TOLERANCE_M) -> bool:
    return hulls_intersect(hull, Hull.of_point(point), tolerance)


def bounding_box_km(points: np.ndarray) -> Tuple[float, float]:
    """Width × height (km) of the axis-aligned box around an (n, 2) array of plane points."""
    if len(points) == 0:
        return 0.0, 0.0
    span = points.max(axis=0) - points.min(axis=0)
    return float(span[0]) / 1000.0, float(span[1]) / 1000.0
