from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .geo import Hull, PlanePoint

SECONDS_PER_HOUR = 3600

# Ordered record fields; also the exact CSV column order.
RECORD_FIELDS = (
    "timestamp", "user_id", "lat", "lon", "operator",
    "cell_id", "lac", "app", "bytes_up", "bytes_down",
)


class TraceRecord(BaseModel):
    """One user observation from a crowd-sourced trace."""
    timestamp: int
    user_id: str
    lat: float
    lon: float
    operator: str
    cell_id: str
    lac: str
    app: str
    bytes_up: int
    bytes_down: int

    model_config = ConfigDict(frozen=True)

    @field_validator("timestamp")
    @classmethod
    def _positive_timestamp(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("timestamp must be positive")
        return v

    @field_validator("lat")
    @classmethod
    def _lat_range(cls, v: float) -> float:
        if not -90.0 <= v <= 90.0:
            raise ValueError("latitude out of range")
        return v

    @field_validator("lon")
    @classmethod
    def _lon_range(cls, v: float) -> float:
        if not -180.0 <= v <= 180.0:
            raise ValueError("longitude out of range")
        return v

    @field_validator("bytes_up", "bytes_down")
    @classmethod
    def _non_negative_bytes(cls, v: int) -> int:
        if v < 0:
            raise ValueError("byte counts must be non-negative")
        return v

    @property
    def total_bytes(self) -> int:
        return self.bytes_up + self.bytes_down

    @property
    def hour(self) -> int:
        """Epoch hour index the record's bytes are attributed to."""
        return self.timestamp // SECONDS_PER_HOUR

    @property
    def cell_key(self) -> "CellId":
        return CellId(self.operator, self.cell_id, self.lac)


class CellId(NamedTuple):
    """(operator, cell_id, lac) jointly identify a cell."""
    operator: str
    cell_id: str
    lac: str

    def label(self) -> str:
        return f"{self.operator}/{self.cell_id}/{self.lac}"


class AppCategory(BaseModel):
    """An application category identified by exact client package names.

    A category with no matchers is a fallback (``other``) or the aggregate
    pseudo-category (``total``).
    """
    name: str
    matchers: Tuple[str, ...] = ()
    fallback: bool = False

    model_config = ConfigDict(frozen=True)

    @field_validator("name")
    @classmethod
    def _lowercase_name(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("category name must not be empty")
        return v.strip().lower()

    @field_validator("matchers")
    @classmethod
    def _normalize_matchers(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        return tuple(m.strip().upper() for m in v if m.strip())

    def matches(self, app: str) -> bool:
        return app.strip().upper() in self.matchers


FACEBOOK = AppCategory(name="facebook", matchers=("COM.FACEBOOK.KATANA",))
YOUTUBE = AppCategory(name="youtube", matchers=("COM.GOOGLE.ANDROID.YOUTUBE",))
MAPS = AppCategory(name="maps", matchers=("COM.GOOGLE.ANDROID.APPS.MAPS",))
OTHER = AppCategory(name="other", fallback=True)
TOTAL = AppCategory(name="total")

BUILTIN_CATEGORIES = (FACEBOOK, YOUTUBE, MAPS, OTHER)


@dataclass(frozen=True)
class Diagnostic:
    """A per-line problem found while reading or aggregating a trace."""
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class ParseResult:
    records: List[TraceRecord] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    @property
    def malformed_count(self) -> int:
        return len(self.diagnostics)


@dataclass(frozen=True)
class LoadSeries:
    """Dense hourly byte counts starting at ``origin_hour`` (epoch hour index)."""
    origin_hour: int
    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=float)
        if bins.ndim != 1:
            raise ValueError("load series bins must be one-dimensional")
        if np.any(bins < 0):
            raise ValueError("load series bins must be non-negative")
        bins = bins.copy()
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    def __len__(self) -> int:
        return len(self.bins)

    @property
    def peak(self) -> float:
        return float(self.bins.max()) if len(self.bins) else 0.0

    @property
    def average(self) -> float:
        return float(self.bins.mean()) if len(self.bins) else 0.0

    @property
    def total(self) -> float:
        return float(self.bins.sum())

    def aligned_with(self, other: "LoadSeries") -> bool:
        return self.origin_hour == other.origin_hour and len(self) == len(other)

    def __add__(self, other: "LoadSeries") -> "LoadSeries":
        if not self.aligned_with(other):
            raise ValueError("cannot add load series over different hour ranges")
        return LoadSeries(self.origin_hour, self.bins + other.bins)

    def scaled(self, factor: float) -> "LoadSeries":
        return LoadSeries(self.origin_hour, self.bins * factor)

    @classmethod
    def zeros(cls, origin_hour: int, length: int) -> "LoadSeries":
        return cls(origin_hour, np.zeros(length))


@dataclass(frozen=True)
class Station:
    """A reconstructed base station.

    ``loads`` maps category name to its hourly series and always holds the
    ``total`` series.
    """
    id: CellId
    position: PlanePoint
    coverage: Hull
    loads: Mapping[str, LoadSeries]
    observation_count: int

    def load(self, category: str = TOTAL.name) -> Optional[LoadSeries]:
        return self.loads.get(category)

    @property
    def total_load(self) -> LoadSeries:
        return self.loads[TOTAL.name]


StationLoads = Dict[CellId, LoadSeries]
