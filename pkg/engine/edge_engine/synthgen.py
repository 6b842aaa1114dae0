"""
Synthetic trace generator.

Stations are laid out on the local plane around a configured center. Every
station gets a log-normal busy-hour peak, a diurnal shape shifted to its own
peak hour, a daily burst near that hour, and a homogeneous background load
that follows the global diurnal profile. Hourly bytes are split over the app
categories and emitted as record pairs placed symmetrically around the
station, so the traffic-weighted centroid of a cell is the planted position.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel

from .config import SynthConfig
from .geo import EARTH_RADIUS_M, PlanePoint, Projection
from .models import BUILTIN_CATEGORIES, OTHER, SECONDS_PER_HOUR, TraceRecord
from .trace import write_records
from .utils import atomic_write, write_json_atomic

logger = logging.getLogger(__name__)

# Client packages drawn for records of the fallback category.
OTHER_PACKAGES = ("COM.WHATSAPP", "COM.SPOTIFY.MUSIC", "COM.ANDROID.CHROME")

_PACKAGES = {c.name: c.matchers[0] for c in BUILTIN_CATEGORIES if c.matchers}


class StationTruth(BaseModel):
    operator: str
    cell_id: str
    lac: str
    lat: float
    lon: float
    x: float
    y: float
    peak_scale: float
    peak_hour: int
    aligned: bool
    total_bytes: int


class GroundTruth(BaseModel):
    """Planted parameters written next to a generated trace."""
    seed: int
    reference: Tuple[float, float]
    stations: List[StationTruth]


def _layout(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    half_w, half_h = config.area_km[0] * 500.0, config.area_km[1] * 500.0
    n = config.n_stations
    if config.layout == "uniform":
        return np.column_stack([rng.uniform(-half_w, half_w, n), rng.uniform(-half_h, half_h, n)])

    centers = np.column_stack([
        rng.uniform(-half_w, half_w, config.hotspots),
        rng.uniform(-half_h, half_h, config.hotspots),
    ])
    picks = rng.integers(0, config.hotspots, n)
    offsets = rng.normal(0.0, config.hotspot_spread_km * 1000.0, (n, 2))
    xy = centers[picks] + offsets
    xy[:, 0] = np.clip(xy[:, 0], -half_w, half_w)
    xy[:, 1] = np.clip(xy[:, 1], -half_h, half_h)
    return xy


def _hourly_load(
    config: SynthConfig, rng: np.random.Generator, peak_scale: float, peak_hour: int, start_hour: int
) -> np.ndarray:
    hours = start_hour + np.arange(config.duration_hours)
    hours_of_day = hours % 24
    profile = np.asarray(config.diurnal_profile, dtype=float)
    shape = profile / profile.max()
    shifted = shape[(hours_of_day - peak_hour + config.busy_hour) % 24]

    burst = np.zeros(len(hours))
    jitter = config.burst_jitter_hours
    for day in range(hours[0] // 24, hours[-1] // 24 + 1):
        index = day * 24 + peak_hour + int(rng.integers(-jitter, jitter + 1)) - start_hour
        if 0 <= index < len(burst):
            burst[index] = 1.0

    b = config.burstiness
    load = peak_scale * ((1.0 - b) * shifted + b * burst)
    load += config.effective_background_load * shape[hours_of_day]
    if config.noise_sigma > 0:
        load *= np.exp(rng.normal(-0.5 * config.noise_sigma ** 2, config.noise_sigma, len(load)))
    # Even byte counts split evenly over a record pair.
    return 2.0 * np.round(load / 2.0)


def _disc_offset(rng: np.random.Generator, radius: float, ref_lat: float) -> Tuple[float, float]:
    r = radius * math.sqrt(rng.random())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    dx, dy = r * math.cos(theta), r * math.sin(theta)
    dlat = math.degrees(dy / EARTH_RADIUS_M)
    dlon = math.degrees(dx / (EARTH_RADIUS_M * math.cos(math.radians(ref_lat))))
    return dlat, dlon


def _record_pair(
    rng: np.random.Generator,
    config: SynthConfig,
    station: StationTruth,
    users: List[str],
    timestamp: int,
    app: str,
    pair_bytes: int,
) -> List[TraceRecord]:
    dlat, dlon = _disc_offset(rng, config.coverage_radius_m, config.center_lat)
    each = pair_bytes // 2
    up = int(each * config.upload_fraction)
    records = []
    for sign in (1.0, -1.0):
        records.append(TraceRecord(
            timestamp=timestamp + int(rng.integers(0, SECONDS_PER_HOUR)),
            user_id=users[int(rng.integers(0, len(users)))],
            lat=station.lat + sign * dlat,
            lon=station.lon + sign * dlon,
            operator=station.operator,
            cell_id=station.cell_id,
            lac=station.lac,
            app=app,
            bytes_up=up,
            bytes_down=each - up,
        ))
    return records


def _split_bytes(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer split of an even byte count; every part stays even."""
    halves = np.floor(shares * (total // 2)).astype(np.int64)
    halves[int(np.argmax(shares))] += total // 2 - int(halves.sum())
    return 2 * halves


def generate_trace(config: SynthConfig) -> Tuple[List[TraceRecord], GroundTruth]:
    """Generate a trace and its ground truth; identical configs give identical output."""
    children = np.random.SeedSequence(config.seed).spawn(config.n_stations + 1)
    layout_rng = np.random.default_rng(children[0])
    projection = Projection(config.center_lat, config.center_lon)
    xy = _layout(config, layout_rng)

    start_hour = config.start_timestamp // SECONDS_PER_HOUR
    categories = list(config.app_mix)
    mix = np.array([config.app_mix[c] for c in categories], dtype=float)

    records: List[TraceRecord] = []
    truths: List[StationTruth] = []
    for i in range(config.n_stations):
        rng = np.random.default_rng(children[i + 1])
        peak_scale = float(np.exp(config.peak_scale.mu + config.peak_scale.sigma * rng.standard_normal()))
        aligned = bool(rng.random() < config.peak_alignment)
        peak_hour = config.busy_hour if aligned else int(rng.integers(0, 24))
        lat, lon = projection.inverse(PlanePoint(float(xy[i, 0]), float(xy[i, 1])))

        truth = StationTruth(
            operator=config.operators[i % len(config.operators)],
            cell_id=str(10000 + i),
            lac=str(100 + i // 50),
            lat=lat,
            lon=lon,
            x=float(xy[i, 0]),
            y=float(xy[i, 1]),
            peak_scale=peak_scale,
            peak_hour=peak_hour,
            aligned=aligned,
            total_bytes=0,
        )
        users = [f"user-{i:05d}-{k:03d}" for k in range(config.users_per_station)]
        shares = rng.dirichlet(np.maximum(mix, 1e-9) * config.app_mix_concentration)
        load = _hourly_load(config, rng, peak_scale, peak_hour, start_hour)

        station_records: List[TraceRecord] = []
        for h in range(config.duration_hours):
            total = int(load[h])
            if total == 0:
                continue
            timestamp = int((start_hour + h) * SECONDS_PER_HOUR)
            for category, part in zip(categories, _split_bytes(total, shares)):
                if part == 0:
                    continue
                app = (OTHER_PACKAGES[int(rng.integers(0, len(OTHER_PACKAGES)))]
                       if category == OTHER.name else _PACKAGES[category])
                station_records.extend(_record_pair(rng, config, truth, users, timestamp, app, int(part)))

        if not station_records:
            station_records = _record_pair(rng, config, truth, users, config.start_timestamp, OTHER_PACKAGES[0], 0)

        truth = truth.model_copy(update={"total_bytes": sum(r.total_bytes for r in station_records)})
        truths.append(truth)
        records.extend(station_records)

    records.sort(key=lambda r: (r.timestamp, r.operator, r.cell_id, r.user_id))
    logger.info(f"Generated {len(records)} records for {config.n_stations} stations (seed={config.seed})")
    return records, GroundTruth(seed=config.seed, reference=(config.center_lat, config.center_lon), stations=truths)


def write_trace(records: List[TraceRecord], path: Union[str, Path], trace_format: str = "csv") -> int:
    with atomic_write(path) as f:
        count = write_records(records, f, trace_format)
    logger.info(f"Wrote {count} records to {path}")
    return count


def ground_truth_path(trace_path: Union[str, Path]) -> Path:
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.stem + ".truth.json")


def write_ground_truth(truth: GroundTruth, path: Union[str, Path]) -> None:
    write_json_atomic(truth.model_dump(mode="json"), path)


def read_ground_truth(path: Union[str, Path]) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as f:
        return GroundTruth.model_validate_json(f.read())


def station_table(truth: GroundTruth) -> Dict[Tuple[str, str, str], StationTruth]:
    return {(s.operator, s.cell_id, s.lac): s for s in truth.stations}
