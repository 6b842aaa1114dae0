import csv
import json
from pathlib import Path
from typing import List
from unittest.mock import patch

import pytest
from typer.testing import CliRunner

from cli.cli import app
from engine.edge_engine.geo import PlanePoint, Projection
from engine.edge_engine.models import RECORD_FIELDS, TraceRecord
from engine.edge_engine.trace import write_records
from engine.tests.conftest import FLAT_BINS, SPIKE_BINS, T0, make_record

runner = CliRunner()
REF = Projection(37.7749, -122.4194)

SYNTH_CONFIG = """
# small scenario
seed = 21
n_stations = 50
duration_hours = 24
users_per_station = 4
"""


def _write_trace(path: Path, records: List[TraceRecord]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_records(records, f)
    return path


def _at(x: float, y: float, **overrides) -> TraceRecord:
    lat, lon = REF.inverse(PlanePoint(x, y))
    return make_record(lat=lat, lon=lon, **overrides)


def _hourly(cell_id: str, x: float, y: float, bins) -> List[TraceRecord]:
    return [
        _at(x, y, cell_id=cell_id, timestamp=T0 + h * 3600, bytes_up=0, bytes_down=int(b))
        for h, b in enumerate(bins)
    ]


def _read_csv(path: Path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def synth_trace(tmp_path):
    config = tmp_path / "scenario.cfg"
    config.write_text(SYNTH_CONFIG)
    result = runner.invoke(app, ["synth", "-c", str(config), "-o", str(tmp_path / "synth")])
    assert result.exit_code == 0, result.output
    return tmp_path / "synth" / "trace.csv"


@pytest.fixture
def spike_and_flat_trace(tmp_path):
    records = _hourly("1", 0, 0, SPIKE_BINS) + _hourly("2", 100, 0, FLAT_BINS) + _hourly("3", 0, 100, FLAT_BINS)
    return _write_trace(tmp_path / "spike_and_flat.csv", records)


class TestSynth:

    def test_files_written(self, synth_trace):
        assert synth_trace.exists()
        truth = json.loads(synth_trace.with_name("trace.truth.json").read_text())
        assert truth["seed"] == 21
        assert len(truth["stations"]) == 50

    def test_same_config_twice_is_identical(self, tmp_path, synth_trace):
        config = tmp_path / "scenario.cfg"
        result = runner.invoke(app, ["synth", "-c", str(config), "-o", str(tmp_path / "again")])
        assert result.exit_code == 0
        assert (tmp_path / "again" / "trace.csv").read_bytes() == synth_trace.read_bytes()

    def test_missing_seed(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("n_stations = 5\n")
        result = runner.invoke(app, ["synth", "-c", str(config), "-o", str(tmp_path)])
        assert result.exit_code == 2
        assert "seed" in result.output

    def test_missing_config_file(self, tmp_path):
        result = runner.invoke(app, ["synth", "-c", str(tmp_path / "nope.cfg"), "-o", str(tmp_path)])
        assert result.exit_code == 2


class TestReconstruct:

    def test_summary_reports_planted_cells(self, tmp_path, synth_trace):
        out = tmp_path / "rec"
        result = runner.invoke(app, ["reconstruct", "-i", str(synth_trace), "-o", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads((out / "summary.json").read_text())
        assert summary["overall"]["unique_cells"] == 50
        stations = json.loads((out / "stations_SYNTH-MOBILE.geojson").read_text())
        positions = [f for f in stations["features"] if f["properties"]["role"] == "position"]
        assert len(positions) == 50
        assert len(stations["features"]) == 100

    def test_empty_trace(self, tmp_path):
        trace = tmp_path / "empty.csv"
        trace.write_text(",".join(RECORD_FIELDS) + "\n")
        result = runner.invoke(app, ["reconstruct", "-i", str(trace), "-o", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "no records" in result.output

    def test_two_operators(self, tmp_path):
        trace = _write_trace(tmp_path / "ops.csv", [make_record(operator="Alpha"), make_record(operator="Beta Mobile")])
        out = tmp_path / "out"
        result = runner.invoke(app, ["reconstruct", "-i", str(trace), "-o", str(out), "-w", "2"])
        assert result.exit_code == 0, result.output
        assert sorted(p.name for p in out.glob("stations_*.geojson")) == [
            "stations_Alpha.geojson", "stations_Beta_Mobile.geojson",
        ]

    def test_operator_filter(self, tmp_path):
        trace = _write_trace(tmp_path / "ops.csv", [make_record(operator="Alpha"), make_record(operator="Beta")])
        out = tmp_path / "out"
        result = runner.invoke(app, ["reconstruct", "-i", str(trace), "-o", str(out), "--operator", "Beta"])
        assert result.exit_code == 0
        assert [p.name for p in out.glob("stations_*.geojson")] == ["stations_Beta.geojson"]

    def test_bad_header_is_invalid_input(self, tmp_path):
        trace = tmp_path / "bad.csv"
        trace.write_text("a,b,c\n1,2,3\n")
        result = runner.invoke(app, ["reconstruct", "-i", str(trace), "-o", str(tmp_path / "out")])
        assert result.exit_code == 2

    def test_rerun_is_byte_identical(self, tmp_path, synth_trace):
        for name in ("a", "b"):
            assert runner.invoke(app, ["reconstruct", "-i", str(synth_trace), "-o", str(tmp_path / name)]).exit_code == 0
        for path in (tmp_path / "a").iterdir():
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    def test_unexpected_error_exits_with_one(self, tmp_path, synth_trace):
        with patch("cli.cli.reconstruct_stations", side_effect=RuntimeError("boom")):
            result = runner.invoke(app, ["reconstruct", "-i", str(synth_trace), "-o", str(tmp_path / "out")])
        assert result.exit_code == 1
        assert "boom" in result.output


class TestSweep:

    def test_zero_threshold_keeps_every_cell(self, tmp_path, synth_trace):
        out = tmp_path / "sweep"
        result = runner.invoke(app, ["sweep", "-i", str(synth_trace), "-o", str(out), "--dmax-grid", "0"])
        assert result.exit_code == 0, result.output
        rows = _read_csv(out / "sweep_SYNTH-MOBILE_total.csv")
        assert len(rows) == 1
        assert int(rows[0]["n_clusters"]) == 50

    def test_spike_and_flat_values(self, tmp_path, spike_and_flat_trace):
        out = tmp_path / "sweep"
        result = runner.invoke(app, ["sweep", "-i", str(spike_and_flat_trace), "-o", str(out), "--dmax-grid", "0,150"])
        assert result.exit_code == 0, result.output
        values = [float(r["mean_efficiency"]) for r in _read_csv(out / "sweep_OP-A_total.csv")]
        assert abs(values[0] - 0.21) < 1e-9
        assert abs(values[1] - 0.15) < 1e-9

    def test_randomized_reruns_are_identical(self, tmp_path, synth_trace):
        args = ["sweep", "-i", str(synth_trace), "--dmax-grid", "0,500,5000", "--randomize", "--seed", "4"]
        for name in ("a", "b"):
            result = runner.invoke(app, args + ["-o", str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        random_csv = "sweep_SYNTH-MOBILE_total_random.csv"
        assert (tmp_path / "a" / random_csv).read_bytes() == (tmp_path / "b" / random_csv).read_bytes()

    def test_all_apps_and_map_export(self, tmp_path, synth_trace):
        out = tmp_path / "sweep"
        result = runner.invoke(app, [
            "sweep", "-i", str(synth_trace), "-o", str(out), "--dmax-grid", "0,1000",
            "--app", "all", "--map-dmax", "1000", "--method", "nn_chain",
        ])
        assert result.exit_code == 0, result.output
        for name in ("facebook", "youtube", "maps", "other", "total"):
            assert (out / f"sweep_SYNTH-MOBILE_{name}.csv").exists()
        partition = json.loads((out / "partition_SYNTH-MOBILE.json").read_text())
        clusters = json.loads((out / "clusters_SYNTH-MOBILE.geojson").read_text())
        assert partition["d_max"] == 1000.0
        assert len(clusters["features"]) == partition["n_clusters"]
        assert sum(c["size"] for c in partition["clusters"]) == 50

    def test_unknown_app(self, tmp_path, spike_and_flat_trace):
        result = runner.invoke(app, ["sweep", "-i", str(spike_and_flat_trace), "-o", str(tmp_path), "--app", "tiktok"])
        assert result.exit_code == 2
        assert "apps" in result.output

    def test_bad_grid(self, tmp_path, spike_and_flat_trace):
        result = runner.invoke(app, ["sweep", "-i", str(spike_and_flat_trace), "-o", str(tmp_path), "--dmax-grid", "100,50"])
        assert result.exit_code == 2
        assert "dmax_grid" in result.output

    def test_run_config_file(self, tmp_path, spike_and_flat_trace):
        config = tmp_path / "run.yaml"
        config.write_text(f"inputs: [{spike_and_flat_trace}]\ndmax_grid: [0, 150]\napps: [total]\n")
        out = tmp_path / "from-config"
        result = runner.invoke(app, ["sweep", "-c", str(config), "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert len(_read_csv(out / "sweep_OP-A_total.csv")) == 2


class TestStats:

    def _square(self, cell_id: str, cx: float, peak: int) -> List[TraceRecord]:
        corners = [(-100, -100), (100, -100), (100, 100), (-100, 100)]
        return [
            _at(cx + dx, dy, cell_id=cell_id, bytes_up=0, bytes_down=peak if k == 0 else 0)
            for k, (dx, dy) in enumerate(corners)
        ]

    def test_overlapping_pair(self, tmp_path):
        trace = _write_trace(tmp_path / "pair.csv", self._square("1", 0, 1) + self._square("2", 150, 100))
        out = tmp_path / "stats"
        result = runner.invoke(app, ["stats", "-i", str(trace), "-o", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "stats.json").read_text())
        assert report["OP-A"]["disparity_fraction"] == 1.0
        assert report["OP-A"]["log10_span"] == pytest.approx(2.0)
        assert _read_csv(out / "peaks_OP-A_total.csv")[-1]["cdf"] == "1.0"

    def test_uniform_peak_scale_has_no_disparity(self, tmp_path):
        config = tmp_path / "flat.cfg"
        config.write_text("seed = 5\nn_stations = 40\nduration_hours = 24\narea_km = 3, 3\npeak_scale.sigma = 0\n")
        assert runner.invoke(app, ["synth", "-c", str(config), "-o", str(tmp_path / "synth")]).exit_code == 0
        out = tmp_path / "stats"
        result = runner.invoke(app, ["stats", "-i", str(tmp_path / "synth" / "trace.csv"), "-o", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "stats.json").read_text())["SYNTH-MOBILE"]
        assert report["stations"] == 40
        assert report["neighbor_pairs"] > 0
        assert report["log10_span"] < 1.0
        assert report["disparity_fraction"] == 0.0
        assert len(_read_csv(out / "peaks_SYNTH-MOBILE_total.csv")) == 40

    def test_no_overlap(self, tmp_path):
        trace = _write_trace(tmp_path / "apart.csv", self._square("1", 0, 1) + self._square("2", 5000, 100))
        out = tmp_path / "stats"
        result = runner.invoke(app, ["stats", "-i", str(trace), "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "neighbor_ratios_OP-A_total.csv").read_text() == "ratio,cdf\n"
        assert json.loads((out / "stats.json").read_text())["OP-A"]["disparity_fraction"] == 0.0


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "Edge Placement" in result.output
