"""
Configuration models and config-file loaders.

Config files come in three flavors, picked from the file extension:

* ``.yaml`` / ``.yml``: YAML mapping
* ``.json`` / ``.json5``: JSON5 object
* anything else: key-value text::

      # comment
      seed = 7
      n_stations = 200
      peak_scale.sigma = 2.5          # dotted keys nest
      app_mix.facebook = 0.3
      diurnal_profile = 0.02, 0.01, ... # commas make a list
"""

import logging
import math
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import json5
import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .models import BUILTIN_CATEGORIES, TOTAL

logger = logging.getLogger(__name__)

# Relative mobile traffic by UTC hour of day; evening busy hour.
DEFAULT_DIURNAL_PROFILE = (
    0.030, 0.020, 0.014, 0.011, 0.010, 0.012, 0.018, 0.028,
    0.038, 0.044, 0.047, 0.049, 0.051, 0.050, 0.049, 0.050,
    0.055, 0.058, 0.060, 0.062, 0.065, 0.066, 0.061, 0.052,
)

DEFAULT_APP_MIX = {"facebook": 0.30, "youtube": 0.25, "maps": 0.10, "other": 0.35}

_PROBABILITY_TOLERANCE = 1e-6


def _as_list(value: Any) -> Any:
    if isinstance(value, (str, int, float, Path)) and not isinstance(value, bool):
        return [value]
    return value


def default_dmax_grid() -> List[float]:
    """0 m followed by 40 log-spaced thresholds from 50 m to 50 km."""
    return [0.0] + [float(v) for v in np.logspace(math.log10(50.0), math.log10(50_000.0), 40)]


class LogNormalSpec(BaseModel):
    """Log-normal distribution of per-station busy-hour peaks, bytes/hour: exp(mu + sigma·Z)."""
    mu: float = math.log(1e8)
    sigma: float = Field(default=1.5, ge=0.0)

    model_config = ConfigDict(extra="forbid")


class SynthConfig(BaseModel):
    """Parameters of the synthetic trace generator."""
    n_stations: int = Field(default=50, ge=1)
    area_km: Tuple[float, float] = (10.0, 10.0)
    layout: Literal["uniform", "clustered"] = "uniform"
    hotspots: int = Field(default=5, ge=1)
    hotspot_spread_km: float = Field(default=1.0, gt=0.0)
    duration_hours: int = Field(default=168, ge=24)
    start_timestamp: int = Field(default=1_412_121_600, gt=0)
    peak_scale: LogNormalSpec = Field(default_factory=LogNormalSpec)
    background_load: Optional[float] = Field(default=None, ge=0.0)
    burstiness: float = Field(default=0.6, ge=0.0, le=1.0)
    burst_jitter_hours: int = Field(default=1, ge=0, le=11)
    noise_sigma: float = Field(default=0.25, ge=0.0)
    diurnal_profile: Tuple[float, ...] = DEFAULT_DIURNAL_PROFILE
    peak_alignment: float = Field(default=0.8, ge=0.0, le=1.0)
    app_mix: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_APP_MIX))
    app_mix_concentration: float = Field(default=50.0, gt=0.0)
    users_per_station: int = Field(default=20, ge=1)
    coverage_radius_m: float = Field(default=400.0, gt=0.0)
    upload_fraction: float = Field(default=0.15, ge=0.0, le=1.0)
    center_lat: float = Field(default=37.7749, ge=-80.0, le=80.0)
    center_lon: float = Field(default=-122.4194, ge=-180.0, le=180.0)
    operators: List[str] = Field(default_factory=lambda: ["SYNTH-MOBILE"], min_length=1)
    trace_format: Literal["csv", "jsonl"] = "csv"
    seed: int

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("operators", mode="before")
    @classmethod
    def _single_operator(cls, v: Any) -> Any:
        return _as_list(v)

    @field_validator("area_km")
    @classmethod
    def _positive_area(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("area dimensions must be positive")
        return v

    @field_validator("diurnal_profile")
    @classmethod
    def _profile_is_distribution(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) != 24:
            raise ValueError(f"diurnal profile needs 24 weights, got {len(v)}")
        if any(w < 0 for w in v):
            raise ValueError("diurnal weights must be non-negative")
        if abs(sum(v) - 1.0) > _PROBABILITY_TOLERANCE:
            raise ValueError(f"diurnal weights must sum to 1 (got {sum(v):.6f})")
        return v

    @field_validator("app_mix")
    @classmethod
    def _mix_is_distribution(cls, v: Dict[str, float]) -> Dict[str, float]:
        known = {c.name for c in BUILTIN_CATEGORIES}
        normalized = {k.strip().lower(): p for k, p in v.items()}
        unknown = sorted(set(normalized) - known)
        if unknown:
            raise ValueError(f"unknown app categories in mix: {', '.join(unknown)}")
        if any(not 0.0 <= p <= 1.0 for p in normalized.values()):
            raise ValueError("app mix probabilities must lie in [0, 1]")
        if abs(sum(normalized.values()) - 1.0) > _PROBABILITY_TOLERANCE:
            raise ValueError(f"app mix must sum to 1 (got {sum(normalized.values()):.6f})")
        return normalized

    @property
    def busy_hour(self) -> int:
        return int(np.argmax(self.diurnal_profile))

    @property
    def effective_background_load(self) -> float:
        return math.exp(self.peak_scale.mu) if self.background_load is None else self.background_load


class RunConfig(BaseModel):
    """Options shared by the analysis commands."""
    inputs: List[Path] = Field(default_factory=list)
    out: Path = Path("out")
    operators: Optional[List[str]] = None
    apps: List[str] = Field(default_factory=lambda: [TOTAL.name])
    dmax_grid: List[float] = Field(default_factory=default_dmax_grid)
    seed: int = 0
    randomize: bool = False
    weighted: bool = False
    per_cell_max: bool = False
    map_dmax: Optional[float] = Field(default=None, ge=0.0)
    method: Literal["generic", "nn_chain"] = "generic"
    dense_limit: int = Field(default=8_000, ge=2)
    categories: Dict[str, List[str]] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

    @field_validator("inputs", "operators", "apps", "dmax_grid", mode="before")
    @classmethod
    def _scalar_to_list(cls, v: Any) -> Any:
        return _as_list(v)

    @field_validator("dmax_grid")
    @classmethod
    def _grid_increasing(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("d_max grid must not be empty")
        if any(d < 0 or math.isnan(d) for d in v):
            raise ValueError("d_max values must be >= 0")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("d_max grid must be strictly increasing")
        return v

    @field_validator("apps")
    @classmethod
    def _lowercase_apps(cls, v: List[str]) -> List[str]:
        return [a.strip().lower() for a in v]

    @model_validator(mode="after")
    def _check_output(self) -> "RunConfig":
        probe = self.out
        while not probe.exists() and probe != probe.parent:
            probe = probe.parent
        if probe.exists() and not os.access(probe, os.W_OK):
            raise ValueError(f"output directory {self.out} is not writable")
        return self


def _split_list(text: str) -> List[str]:
    items, depth, current = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    items.append("".join(current).strip())
    return items


def _scalar(text: str) -> Any:
    try:
        return json5.loads(text)
    except ValueError:
        return text


def parse_key_value(config_file: Union[str, Path]) -> Dict[str, Any]:
    """Read the key-value config format into a nested dictionary."""
    data: Dict[str, Any] = {}
    with open(config_file, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{config_file}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{config_file}:{line_no}: empty key")
            parts = _split_list(value)
            parsed = [_scalar(p) for p in parts] if len(parts) > 1 else _scalar(value)

            target = data
            path = key.split(".")
            for segment in path[:-1]:
                target = target.setdefault(segment, {})
                if not isinstance(target, dict):
                    raise ConfigError(f"{config_file}:{line_no}: '{segment}' is not a section")
            target[path[-1]] = parsed
    return data


def parse_yaml(config_file: Union[str, Path]) -> Dict[str, Any]:
    with open(config_file, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    return data or {}


def parse_json5(config_file: Union[str, Path]) -> Dict[str, Any]:
    with open(config_file, "r", encoding="utf-8") as f:
        return json5.load(f)


def get_config_parser(config_file: Union[str, Path]) -> Callable[[Union[str, Path]], Dict[str, Any]]:
    suffix = Path(config_file).suffix.lower()
    if suffix in (".yaml", ".yml"):
        return parse_yaml
    elif suffix in (".json", ".json5"):
        return parse_json5
    else:
        return parse_key_value


def _validation_error(kind: str, error: ValidationError) -> ConfigError:
    fields, parts = [], []
    for err in error.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        fields.append(loc)
        msg = "missing required field" if err.get("type") == "missing" else err.get("msg", "invalid value")
        parts.append(f"{loc}: {msg}")
    return ConfigError(f"invalid {kind} config: " + "; ".join(parts), fields)


def build_synth_config(data: Dict[str, Any]) -> SynthConfig:
    try:
        return SynthConfig(**data)
    except ValidationError as e:
        raise _validation_error("synth", e) from e


def build_run_config(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise _validation_error("run", e) from e


def load_synth_config(config_file: Union[str, Path]) -> SynthConfig:
    data = get_config_parser(config_file)(config_file)
    if not isinstance(data, dict):
        raise ConfigError(f"{config_file}: config must be a mapping")
    logger.debug(f"Loaded synth config keys: {sorted(data)}")
    return build_synth_config(data)


def load_run_config(config_file: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    data = get_config_parser(config_file)(config_file)
    if not isinstance(data, dict):
        raise ConfigError(f"{config_file}: config must be a mapping")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_run_config(data)
