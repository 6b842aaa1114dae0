"""
Tests for the synthetic trace generator.
"""

import io

import numpy as np
import pytest

from engine.edge_engine.config import SynthConfig
from engine.edge_engine.geo import Projection
from engine.edge_engine.metrics import peak_load_distribution
from engine.edge_engine.network_recon import reconstruct_stations
from engine.edge_engine.parsers import parse_csv
from engine.edge_engine.synthgen import (
    OTHER_PACKAGES, generate_trace, ground_truth_path, read_ground_truth, station_table,
    write_ground_truth, write_trace,
)
from engine.edge_engine.trace import partition_by_operator, write_records


def test_deterministic_for_seed(small_synth_config):
    a, truth_a = generate_trace(small_synth_config)
    b, truth_b = generate_trace(small_synth_config)
    assert a == b
    assert truth_a == truth_b
    c, _ = generate_trace(small_synth_config.model_copy(update={"seed": 8}))
    assert a != c


def test_one_cell_per_station(small_synth_config):
    records, truth = generate_trace(small_synth_config)
    assert len({r.cell_key for r in records}) == small_synth_config.n_stations
    assert len(truth.stations) == small_synth_config.n_stations
    assert {r.timestamp // 3600 for r in records} <= set(
        range(small_synth_config.start_timestamp // 3600, small_synth_config.start_timestamp // 3600 + 48)
    )


def test_positions_and_bytes_recovered(small_synth_config):
    records, truth = generate_trace(small_synth_config)
    table = station_table(truth)
    stations = reconstruct_stations(records, Projection(*truth.reference))
    for station in stations:
        planted = table[tuple(station.id)]
        assert station.position.x == pytest.approx(planted.x, abs=1e-3)
        assert station.position.y == pytest.approx(planted.y, abs=1e-3)
        assert station.total_load.total == planted.total_bytes


def test_records_stay_within_coverage_radius(small_synth_config):
    records, truth = generate_trace(small_synth_config)
    projection = Projection(*truth.reference)
    table = station_table(truth)
    for record in records[:500]:
        planted = table[tuple(record.cell_key)]
        point = projection.forward(record.lat, record.lon)
        assert np.hypot(point.x - planted.x, point.y - planted.y) <= small_synth_config.coverage_radius_m + 1e-6


def test_app_mix_and_operators():
    config = SynthConfig(n_stations=6, duration_hours=24, operators=["A", "B"], seed=3)
    records, truth = generate_trace(config)
    assert set(partition_by_operator(records)) == {"A", "B"}
    assert [s.operator for s in truth.stations] == ["A", "B"] * 3
    apps = {r.app for r in records}
    assert "COM.FACEBOOK.KATANA" in apps
    assert apps <= {"COM.FACEBOOK.KATANA", "COM.GOOGLE.ANDROID.YOUTUBE", "COM.GOOGLE.ANDROID.APPS.MAPS", *OTHER_PACKAGES}


def test_aligned_stations_peak_at_busy_hour():
    config = SynthConfig(n_stations=40, duration_hours=24, peak_alignment=1.0, seed=5)
    _, truth = generate_trace(config)
    assert all(s.aligned and s.peak_hour == config.busy_hour for s in truth.stations)


def test_sigma_controls_peak_spread():
    narrow = SynthConfig(n_stations=60, duration_hours=48, peak_scale={"sigma": 0.0}, seed=9)
    wide = narrow.model_copy(update={"peak_scale": narrow.peak_scale.model_copy(update={"sigma": 2.5})})
    spans = []
    for config in (narrow, wide):
        records, truth = generate_trace(config)
        spans.append(peak_load_distribution(reconstruct_stations(records, Projection(*truth.reference))).log10_span)
    assert spans[0] < 1.0
    assert spans[1] > spans[0] + 1.0


def test_clustered_layout_stays_in_area():
    config = SynthConfig(n_stations=50, duration_hours=24, layout="clustered", hotspots=3, area_km=(4.0, 2.0), seed=1)
    _, truth = generate_trace(config)
    assert all(abs(s.x) <= 2000.0 and abs(s.y) <= 1000.0 for s in truth.stations)


def test_written_files(tmp_path, small_synth_config):
    records, truth = generate_trace(small_synth_config)
    path = tmp_path / "run" / "trace.csv"
    assert write_trace(records, path) == len(records)
    write_ground_truth(truth, ground_truth_path(path))

    assert ground_truth_path(path).name == "trace.truth.json"
    assert read_ground_truth(ground_truth_path(path)) == truth
    with open(path, "rb") as f:
        assert parse_csv(f).records == records
    text = io.StringIO()
    write_records(records, text)
    assert path.read_text(encoding="utf-8") == text.getvalue()
