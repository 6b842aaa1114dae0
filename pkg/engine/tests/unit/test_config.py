"""
Tests for run/synth configuration models and the config file loaders.
"""

import math
from pathlib import Path
from unittest.mock import mock_open, patch

import pytest
import yaml

from engine.edge_engine.config import (
    DEFAULT_DIURNAL_PROFILE, RunConfig, SynthConfig, build_run_config, build_synth_config,
    default_dmax_grid, get_config_parser, load_run_config, load_synth_config,
    parse_json5, parse_key_value, parse_yaml,
)
from engine.edge_engine.errors import ConfigError

KEY_VALUE = """
# synthetic scenario
seed = 11
n_stations = 30          # stations
layout = clustered
peak_scale.sigma = 2.5
operators = OP-A, OP-B
app_mix.facebook = 0.4
app_mix.youtube = 0.2
app_mix.maps = 0.1
app_mix.other = 0.3
"""


def test_parse_key_value():
    with patch("builtins.open", mock_open(read_data=KEY_VALUE)):
        data = parse_key_value("scenario.cfg")

    assert data["seed"] == 11
    assert data["layout"] == "clustered"
    assert data["peak_scale"] == {"sigma": 2.5}
    assert data["operators"] == ["OP-A", "OP-B"]
    assert data["app_mix"]["facebook"] == 0.4


def test_key_value_syntax_error():
    with patch("builtins.open", mock_open(read_data="seed 11\n")):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_key_value("broken.cfg")


def test_parse_yaml():
    with patch("builtins.open", mock_open(read_data=yaml.dump({"seed": 3, "n_stations": 5}))):
        assert parse_yaml("scenario.yaml") == {"seed": 3, "n_stations": 5}


def test_parse_json5():
    with patch("builtins.open", mock_open(read_data="{seed: 3, // comment\n n_stations: 5,}")):
        assert parse_json5("scenario.json5") == {"seed": 3, "n_stations": 5}


@pytest.mark.parametrize("name,parser", [
    ("a.yaml", parse_yaml), ("a.yml", parse_yaml), ("a.json", parse_json5),
    ("a.json5", parse_json5), ("a.cfg", parse_key_value), ("a", parse_key_value),
])
def test_get_config_parser(name, parser):
    assert get_config_parser(name) is parser


def test_load_synth_config_from_key_value(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(KEY_VALUE)
    config = load_synth_config(path)
    assert config.seed == 11
    assert config.n_stations == 30
    assert config.peak_scale.sigma == 2.5
    assert config.peak_scale.mu == pytest.approx(math.log(1e8))
    assert config.operators == ["OP-A", "OP-B"]


def test_missing_seed_names_the_field():
    with pytest.raises(ConfigError) as excinfo:
        build_synth_config({"n_stations": 10})
    assert "seed" in excinfo.value.fields
    assert "seed: missing required field" in str(excinfo.value)


@pytest.mark.parametrize("data,field", [
    ({"seed": 1, "n_stations": 0}, "n_stations"),
    ({"seed": 1, "peak_alignment": 1.5}, "peak_alignment"),
    ({"seed": 1, "diurnal_profile": [1.0] * 23}, "diurnal_profile"),
    ({"seed": 1, "app_mix": {"facebook": 0.5, "tiktok": 0.5}}, "app_mix"),
    ({"seed": 1, "app_mix": {"facebook": 0.5, "other": 0.2}}, "app_mix"),
    ({"seed": 1, "unknown_key": 2}, "unknown_key"),
])
def test_invalid_synth_config(data, field):
    with pytest.raises(ConfigError) as excinfo:
        build_synth_config(data)
    assert field in excinfo.value.fields


def test_synth_defaults():
    config = SynthConfig(seed=1)
    assert sum(config.diurnal_profile) == pytest.approx(1.0)
    assert config.busy_hour == DEFAULT_DIURNAL_PROFILE.index(max(DEFAULT_DIURNAL_PROFILE))
    assert config.effective_background_load == pytest.approx(1e8)
    assert SynthConfig(seed=1, operators="ONE").operators == ["ONE"]


def test_default_dmax_grid():
    grid = default_dmax_grid()
    assert len(grid) == 41
    assert grid[0] == 0.0
    assert grid[1] == pytest.approx(50.0)
    assert grid[-1] == pytest.approx(50_000.0)
    assert all(b > a for a, b in zip(grid, grid[1:]))


class TestRunConfig:

    def test_defaults(self):
        config = RunConfig()
        assert config.apps == ["total"]
        assert config.method == "generic"
        assert config.dmax_grid == default_dmax_grid()

    def test_scalars_become_lists(self):
        config = build_run_config({"inputs": "trace.csv", "apps": "Facebook", "dmax_grid": 100})
        assert [str(p) for p in config.inputs] == ["trace.csv"]
        assert config.apps == ["facebook"]
        assert config.dmax_grid == [100.0]

    @pytest.mark.parametrize("grid", [[0, 100, 100], [100, 50], [-1, 10], []])
    def test_grid_must_be_increasing_and_non_negative(self, grid):
        with pytest.raises(ConfigError) as excinfo:
            build_run_config({"dmax_grid": grid})
        assert "dmax_grid" in excinfo.value.fields

    def test_overrides_win_over_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.dump({"seed": 1, "apps": ["maps"], "randomize": True}))
        config = load_run_config(path, {"seed": 9, "apps": None})
        assert config.seed == 9
        assert config.apps == ["maps"]
        assert config.randomize

    def test_custom_categories(self):
        config = build_run_config({"categories": {"chat": ["COM.WHATSAPP"]}})
        assert config.categories == {"chat": ["COM.WHATSAPP"]}


def test_shipped_example_configs_load():
    data_dir = Path(__file__).resolve().parents[2] / "data"
    synth = load_synth_config(data_dir / "synth_city.cfg")
    assert synth.n_stations == 300
    assert synth.area_km == (12.0, 12.0)
    assert synth.operators == ["SYNTH-MOBILE", "SYNTH-TEL"]
    run = load_run_config(data_dir / "run.yaml")
    assert run.apps == ["all"]
    assert run.categories == {"chat": ["COM.WHATSAPP"]}
