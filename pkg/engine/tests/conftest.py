import pytest
import numpy as np

from engine.edge_engine.config import SynthConfig
from engine.edge_engine.geo import Hull, PlanePoint
from engine.edge_engine.models import TOTAL, CellId, LoadSeries, Station, TraceRecord

# 2014-10-01T00:00:00Z, hour aligned.
T0 = 1_412_121_600


def make_record(**overrides) -> TraceRecord:
    fields = dict(
        timestamp=T0, user_id="u1", lat=37.7749, lon=-122.4194, operator="OP-A",
        cell_id="1", lac="10", app="COM.FACEBOOK.KATANA", bytes_up=100, bytes_down=900,
    )
    fields.update(overrides)
    return TraceRecord(**fields)


def make_station(cell_id: str, x: float, y: float, bins, operator: str = "OP-A", radius: float = 0.0) -> Station:
    """Station at (x, y) with a square coverage hull of half-width ``radius``."""
    position = PlanePoint(x, y)
    if radius > 0:
        coverage = Hull("polygon", (
            PlanePoint(x - radius, y - radius), PlanePoint(x + radius, y - radius),
            PlanePoint(x + radius, y + radius), PlanePoint(x - radius, y + radius),
        ))
    else:
        coverage = Hull.of_point(position)
    series = LoadSeries(0, np.asarray(bins, dtype=float))
    return Station(CellId(operator, cell_id, "10"), position, coverage, {TOTAL.name: series}, 1)


# One busy-hour spike next to two flatter neighbors: 5% alone, 29% each, 15% merged.
SPIKE_BINS = [58.0] + [0.0] * 19
FLAT_BINS = [0.0, 10.0, 10.0, 10.0, 10.0, 10.0, 8.0] + [0.0] * 13


@pytest.fixture
def record_factory():
    """Factory for valid trace records with overridable fields"""
    return make_record


@pytest.fixture
def spike_and_flat_stations():
    """Three stations 100 m apart whose merged efficiency is 0.15 and separate mean 0.21"""
    return [
        make_station("1", 0.0, 0.0, SPIKE_BINS),
        make_station("2", 100.0, 0.0, FLAT_BINS),
        make_station("3", 0.0, 100.0, FLAT_BINS),
    ]


@pytest.fixture
def small_synth_config():
    """Small, fast synthetic scenario"""
    return SynthConfig(n_stations=12, duration_hours=48, users_per_station=5, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    """Configure pytest markers"""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "slow: Slow running tests")
