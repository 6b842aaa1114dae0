import typer
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

# Fix typer Parameter.make_metavar compatibility issue
import click.core
_original_make_metavar = click.core.Parameter.make_metavar

def _patched_make_metavar(self, ctx=None):
    if ctx is None:
        return _original_make_metavar(self, None)  # Provide default context
    return _original_make_metavar(self, ctx)

click.core.Parameter.make_metavar = _patched_make_metavar
from rich.console import Console
from rich.table import Table

from engine.edge_engine.categories import CategoryRegistry
from engine.edge_engine.clustering import build_merge_tree, cut_at_threshold
from engine.edge_engine.config import RunConfig, build_run_config, load_run_config, load_synth_config
from engine.edge_engine.errors import ConfigError, NoNonzeroPeaksError, TraceFormatError, UndefinedMaximumError
from engine.edge_engine.exporters import (
    cluster_hulls_geojson, partition_json, stations_geojson, write_distribution_csv,
    write_geojson, write_json, write_sweep_csv,
)
from engine.edge_engine.metrics import evaluate_partition, neighbor_peak_ratios, peak_load_distribution, randomize_loads, sweep
from engine.edge_engine.models import AppCategory, Station, TraceRecord
from engine.edge_engine.network_recon import HourRange, reconstruct_stations, station_loads
from engine.edge_engine.parsers import read_trace
from engine.edge_engine.synthgen import generate_trace, ground_truth_path, write_ground_truth, write_trace
from engine.edge_engine.trace import partition_by_operator, summarize, trace_projection

console = Console()
logger = logging.getLogger(__name__)

ALL_APPS = "all"


def setup_logging(log_level: str, log_file: str = None):
    """Configure logging based on the specified level and output file."""
    log_levels = {
        "error": logging.ERROR,
        "warning": logging.WARNING,
        "info": logging.INFO,
        "debug": logging.DEBUG
    }
    handlers = [logging.StreamHandler()]  # Default to stream logging

    if log_file:
        handlers.append(logging.FileHandler(str(log_file)))

    logging.basicConfig(
        level=log_levels.get(log_level, logging.ERROR),
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


app = typer.Typer(help="Edge Placement - MEC server placement analyzer for cellular traces")


class InputError(Exception):
    """Unusable command input (exit code 2)."""
    pass


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "operator"


def _run_command(log_level: str, log_file: Optional[str], body: Callable[[], None]) -> None:
    setup_logging(log_level, log_file)
    try:
        body()
    except typer.Exit:
        raise
    except ConfigError as e:
        typer.secho(f"❌ Invalid configuration: {e}", fg=typer.colors.RED, err=True)
        if e.fields:
            typer.secho(f"💡 Check field(s): {', '.join(e.fields)}", fg=typer.colors.YELLOW)
        raise typer.Exit(2)
    except (TraceFormatError, InputError) as e:
        typer.secho(f"❌ {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(2)
    except FileNotFoundError as e:
        typer.secho(f"❌ File not found: {e}", fg=typer.colors.RED, err=True)
        raise typer.Exit(2)
    except Exception as e:
        if log_level == "debug":
            logging.error(f"Unexpected error: {e}", exc_info=True)
        else:
            typer.secho(f"❌ Error: {e}", fg=typer.colors.RED, err=True)
            typer.secho("💡 Use --log-level debug for more details", fg=typer.colors.YELLOW)
        raise typer.Exit(1)


def _parse_grid(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"invalid d_max grid '{text}': expected comma-separated meters", ["dmax_grid"])


def _run_config(config: Optional[Path], **overrides: Any) -> RunConfig:
    # Unset flags and empty repeatable options leave config-file values alone.
    overrides = {
        k: list(v) if isinstance(v, tuple) else v
        for k, v in overrides.items()
        if v is not None and v is not False and not (isinstance(v, (list, tuple)) and not v)
    }
    if config is not None:
        return load_run_config(config, overrides)
    return build_run_config(overrides)


def _registry(run: RunConfig) -> CategoryRegistry:
    registry = CategoryRegistry()
    for priority, (name, packages) in enumerate(sorted(run.categories.items())):
        try:
            registry.register(AppCategory(name=name, matchers=tuple(packages)), priority=priority)
        except ValueError as e:
            raise ConfigError(f"category '{name}': {e}", [f"categories.{name}"])
    return registry


def _app_categories(run: RunConfig, registry: CategoryRegistry) -> List[str]:
    if ALL_APPS in run.apps:
        return registry.names(include_total=True)
    known = registry.names(include_total=True)
    unknown = [a for a in run.apps if a not in known]
    if unknown:
        raise ConfigError(f"unknown app category: {', '.join(unknown)} (known: {', '.join(known)})", ["apps"])
    return list(dict.fromkeys(run.apps))


def _load_records(run: RunConfig) -> List[TraceRecord]:
    if not run.inputs:
        raise ConfigError("no input trace given", ["inputs"])
    records: List[TraceRecord] = []
    for path in run.inputs:
        typer.secho(f"🔄 Reading trace '{path}'...", fg=typer.colors.CYAN)
        result = read_trace(path)
        if result.malformed_count:
            typer.secho(f"⚠️  {result.malformed_count} malformed line(s) skipped in '{path}'", fg=typer.colors.YELLOW)
        records.extend(result.records)
    if not records:
        raise InputError("no records")
    return records


def _operator_groups(records: Sequence[TraceRecord], run: RunConfig) -> Dict[str, List[TraceRecord]]:
    groups = partition_by_operator(records)
    if run.operators:
        missing = [op for op in run.operators if op not in groups]
        for op in missing:
            logger.warning(f"Operator {op} does not occur in the trace")
        groups = {op: groups[op] for op in run.operators if op in groups}
        if not groups:
            raise InputError(f"no records for operator(s) {', '.join(run.operators)}")
    return {op: groups[op] for op in sorted(groups)}


def _per_operator(groups: Dict[str, List[TraceRecord]], work: Callable[[str, List[TraceRecord]], Any], workers: int) -> List[Any]:
    """Run ``work`` for every operator; results come back in sorted operator order."""
    items = list(groups.items())
    if workers <= 1 or len(items) <= 1:
        return [work(op, recs) for op, recs in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(lambda item: work(*item), items))


def _reconstruct(records: List[TraceRecord], run: RunConfig):
    registry = _registry(run)
    projection = trace_projection(records)
    hour_range = HourRange.spanning(records)

    def build(op: str, op_records: List[TraceRecord]) -> List[Station]:
        return reconstruct_stations(op_records, projection, hour_range, registry)

    return registry, projection, build


def _format(value: Optional[float]) -> str:
    return "-" if value is None or value != value else f"{value:.4f}"


# Shared options
_INPUT = typer.Option(None, "-i", "--input", help="Trace file (CSV or JSONL); repeatable")
_OUT = typer.Option(None, "-o", "--out", help="Output directory (default: out)")
_OPERATOR = typer.Option(None, "--operator", help="Only analyze this operator; repeatable")
_CONFIG = typer.Option(None, "-c", "--config", help="Run config file (key-value, YAML or JSON5)")
_WORKERS = typer.Option(1, "-w", "--workers", help="Operators processed in parallel")
_LOG_LEVEL = typer.Option("error", "-l", "--log-level", help="Logging level (default: error)")
_LOG_FILE = typer.Option(None, "--log-file", help="Path to the log file (default: stdout)")


@app.command()
def reconstruct(
    inputs: Optional[List[Path]] = _INPUT,
    out: Optional[Path] = _OUT,
    operator: Optional[List[str]] = _OPERATOR,
    config: Optional[Path] = _CONFIG,
    workers: int = _WORKERS,
    log_level: str = _LOG_LEVEL,
    log_file: Optional[str] = _LOG_FILE,
):
    """Reconstruct base stations; write station GeoJSON per operator and a trace summary."""

    def body():
        run = _run_config(config, inputs=inputs, out=out, operators=operator)
        records = _load_records(run)
        groups = _operator_groups(records, run)
        _, projection, build = _reconstruct(records, run)
        all_stations = _per_operator(groups, build, workers)

        summaries = []
        for (op, op_records), stations in zip(groups.items(), all_stations):
            target = run.out / f"stations_{_slug(op)}.geojson"
            write_geojson(stations_geojson(stations, projection), target)
            summaries.append(summarize(op_records, projection, op))
            typer.secho(f"✅ {len(stations)} stations for {op} saved to '{target}'", fg=typer.colors.GREEN)

        selected = [r for recs in groups.values() for r in recs]
        overall = summarize(selected, projection)
        write_json({
            "operators": [s.model_dump() for s in summaries],
            "overall": overall.model_dump(),
        }, run.out / "summary.json")

        table = Table(title="Trace summary")
        table.add_column("Operator", style="cyan", no_wrap=True)
        for column in ("Records", "Users", "Cells", "Traffic [TB]", "Area [km]"):
            table.add_column(column, justify="right", style="magenta")
        for s in summaries + [overall]:
            table.add_row(
                s.operator or "all", str(s.records), str(s.unique_users), str(s.unique_cells),
                f"{s.total_traffic_tb:.6f}", f"{s.area_km[0]:.1f} x {s.area_km[1]:.1f}",
            )
        console.print(table)

    _run_command(log_level, log_file, body)


@app.command("sweep")
def sweep_command(
    inputs: Optional[List[Path]] = _INPUT,
    out: Optional[Path] = _OUT,
    operator: Optional[List[str]] = _OPERATOR,
    apps: Optional[List[str]] = typer.Option(
        None, "-a", "--app", help="facebook|youtube|maps|other|total|all; repeatable (default: total)"),
    dmax_grid: Optional[str] = typer.Option(None, "--dmax-grid", help="Comma-separated thresholds in meters"),
    randomize: bool = typer.Option(False, "--randomize", help="Also sweep uniformly randomized loads"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the randomized baseline"),
    per_cell_max: bool = typer.Option(False, "--per-cell-max", help="Randomize up to each cell's own maximum"),
    weighted: bool = typer.Option(False, "--weighted", help="Report traffic-weighted efficiency in the summary"),
    map_dmax: Optional[float] = typer.Option(None, "--map-dmax", help="Export the partition and cluster hulls at this threshold"),
    method: Optional[str] = typer.Option(None, "--method", help="Clustering strategy: generic|nn_chain"),
    config: Optional[Path] = _CONFIG,
    workers: int = _WORKERS,
    log_level: str = _LOG_LEVEL,
    log_file: Optional[str] = _LOG_FILE,
):
    """Cluster stations over a d_max grid; write one efficiency CSV per operator and app."""

    def body():
        run = _run_config(
            config, inputs=inputs, out=out, operators=operator, apps=apps, dmax_grid=_parse_grid(dmax_grid),
            randomize=randomize, seed=seed, per_cell_max=per_cell_max, weighted=weighted,
            map_dmax=map_dmax, method=method,
        )
        records = _load_records(run)
        groups = _operator_groups(records, run)
        registry, projection, build = _reconstruct(records, run)
        app_names = _app_categories(run, registry)

        def analyze(op: str, op_records: List[TraceRecord]):
            stations = build(op, op_records)
            tree = build_merge_tree(stations, method=run.method, dense_limit=run.dense_limit)
            results = []
            for name in app_names:
                loads = station_loads(stations, name)
                rows = sweep(tree, loads, run.dmax_grid, name)
                random_rows = None
                if run.randomize:
                    try:
                        random_loads = randomize_loads(loads, run.seed, run.per_cell_max)
                        random_rows = sweep(tree, random_loads, run.dmax_grid, name)
                    except UndefinedMaximumError:
                        logger.warning(f"No {name} traffic for {op}; randomized baseline skipped")
                results.append((name, rows, random_rows))
            return stations, tree, results

        outputs = _per_operator(groups, analyze, workers)

        table = Table(title="Efficiency sweep")
        table.add_column("Operator", style="cyan", no_wrap=True)
        table.add_column("App", style="yellow")
        table.add_column("Stations", justify="right", style="magenta")
        for column in ("d_max=min", "minimum", "d_max=max", "random min"):
            table.add_column(column, justify="right", style="green")
        metric = "weighted_efficiency" if run.weighted else "mean_efficiency"

        for op, (stations, tree, results) in zip(groups, outputs):
            for name, rows, random_rows in results:
                write_sweep_csv(rows, run.out / f"sweep_{_slug(op)}_{name}.csv")
                if random_rows is not None:
                    write_sweep_csv(random_rows, run.out / f"sweep_{_slug(op)}_{name}_random.csv")
                values = [getattr(r, metric) for r in rows]
                finite = [v for v in values if v == v]
                random_values = [getattr(r, metric) for r in random_rows or [] if getattr(r, metric) == getattr(r, metric)]
                table.add_row(
                    op, name, str(len(stations)), _format(values[0]), _format(min(finite) if finite else None),
                    _format(values[-1]), _format(min(random_values) if random_values else None),
                )

            if run.map_dmax is not None:
                partition = cut_at_threshold(tree, run.map_dmax)
                report = evaluate_partition(partition, station_loads(stations, app_names[0]), app_names[0])
                write_json(partition_json(partition, report), run.out / f"partition_{_slug(op)}.json")
                write_geojson(cluster_hulls_geojson(partition, stations, projection), run.out / f"clusters_{_slug(op)}.geojson")

        console.print(table)
        typer.secho(f"✅ Sweep results saved to '{run.out}'", fg=typer.colors.GREEN)

    _run_command(log_level, log_file, body)


@app.command()
def stats(
    inputs: Optional[List[Path]] = _INPUT,
    out: Optional[Path] = _OUT,
    operator: Optional[List[str]] = _OPERATOR,
    apps: Optional[List[str]] = typer.Option(None, "-a", "--app", help="App category for the peak statistics"),
    config: Optional[Path] = _CONFIG,
    workers: int = _WORKERS,
    log_level: str = _LOG_LEVEL,
    log_file: Optional[str] = _LOG_FILE,
):
    """Peak-load CDF and neighbor peak-ratio statistics per operator."""

    def body():
        run = _run_config(config, inputs=inputs, out=out, operators=operator, apps=apps)
        records = _load_records(run)
        groups = _operator_groups(records, run)
        registry, _, build = _reconstruct(records, run)
        app_name = _app_categories(run, registry)[0]

        def analyze(op: str, op_records: List[TraceRecord]):
            stations = build(op, op_records)
            try:
                peaks = peak_load_distribution(stations, app_name)
            except NoNonzeroPeaksError:
                logger.warning(f"No station of {op} carries {app_name} traffic")
                peaks = None
            return stations, peaks, neighbor_peak_ratios(stations, app_name)

        report: Dict[str, Any] = {}
        table = Table(title=f"Peak statistics ({app_name})")
        table.add_column("Operator", style="cyan", no_wrap=True)
        for column in ("Stations", "log10 span", "Neighbor pairs", "Disparity"):
            table.add_column(column, justify="right", style="magenta")

        for op, (stations, peaks, ratios) in zip(groups, _per_operator(groups, analyze, workers)):
            if peaks is not None:
                write_distribution_csv(peaks, run.out / f"peaks_{_slug(op)}_{app_name}.csv", "peak_load")
            write_distribution_csv(ratios.pairwise, run.out / f"neighbor_ratios_{_slug(op)}_{app_name}.csv", "ratio")
            span = peaks.log10_span if peaks is not None else None
            report[op] = {
                "app": app_name,
                "stations": len(stations),
                "zero_peak_stations": peaks.excluded if peaks is not None else len(stations),
                "log10_span": span,
                "neighbor_pairs": ratios.neighbor_pairs,
                "disparity_fraction": ratios.per_cell_disparity,
            }
            table.add_row(op, str(len(stations)), _format(span), str(ratios.neighbor_pairs), _format(ratios.per_cell_disparity))

        write_json(report, run.out / "stats.json")
        console.print(table)
        typer.secho(f"✅ Statistics saved to '{run.out}'", fg=typer.colors.GREEN)

    _run_command(log_level, log_file, body)


@app.command()
def synth(
    config: Path = typer.Option(..., "-c", "--config", help="Synth config file (key-value, YAML or JSON5)"),
    out: Path = typer.Option(Path("out"), "-o", "--out", help="Output directory"),
    name: str = typer.Option("trace", "--name", help="Base name of the generated files"),
    log_level: str = _LOG_LEVEL,
    log_file: Optional[str] = _LOG_FILE,
):
    """Generate a synthetic trace and its ground truth from a config file."""

    def body():
        if not config.exists():
            raise FileNotFoundError(str(config))
        synth_config = load_synth_config(config)
        typer.secho(f"🔄 Generating {synth_config.n_stations} stations (seed {synth_config.seed})...", fg=typer.colors.CYAN)
        records, truth = generate_trace(synth_config)
        suffix = "jsonl" if synth_config.trace_format == "jsonl" else "csv"
        trace_path = out / f"{name}.{suffix}"
        count = write_trace(records, trace_path, synth_config.trace_format)
        write_ground_truth(truth, ground_truth_path(trace_path))
        typer.secho(f"✅ {count} records saved to '{trace_path}'", fg=typer.colors.GREEN)

    _run_command(log_level, log_file, body)


# Version command
@app.command()
def version():
    """Show version information"""
    from importlib.metadata import PackageNotFoundError, version as get_version
    try:
        pkg_version = get_version("edge-placement")
    except PackageNotFoundError:
        pkg_version = "0.3.0"

    typer.secho(f"Edge Placement v{pkg_version}", fg=typer.colors.GREEN, bold=True)
    typer.secho("Trace-driven MEC server placement analysis", fg=typer.colors.CYAN)


if __name__ == "__main__":
    app()
