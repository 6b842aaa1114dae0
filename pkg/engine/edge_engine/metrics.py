"""
Utilization proxy metrics.

Efficiency of a server is the average of the load it processes divided by
its peak. Cluster loads are bin-wise sums of member station series.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .clustering import MergeTree, Partition, cut_at_threshold
from .errors import NoNonzeroPeaksError, UndefinedMaximumError, ZeroPeakError
from .geo import hulls_intersect
from .models import TOTAL, CellId, LoadSeries, Station

logger = logging.getLogger(__name__)

# Neighbor peak ratio at or above which two cells count as disparate.
DISPARITY_RATIO = 100.0


@dataclass(frozen=True)
class ClusterEfficiency:
    cluster_id: int
    size: int
    avg_load: float
    peak_load: float
    efficiency: Optional[float]


@dataclass(frozen=True)
class EfficiencyReport:
    """Per-cluster and aggregate avg/peak statistics for one (d_max, app) point.

    ``mean_efficiency`` is the unweighted mean over clusters with nonzero
    peak; ``weighted_efficiency`` is Σavg/Σpeak over the same clusters.
    Both are NaN when every cluster has zero peak.
    """
    d_max: float
    app_filter: str
    per_cluster: Tuple[ClusterEfficiency, ...]
    mean_efficiency: float
    weighted_efficiency: float
    zero_peak_clusters: int

    @property
    def n_clusters(self) -> int:
        return len(self.per_cluster)


@dataclass(frozen=True)
class SweepRow:
    d_max: float
    n_clusters: int
    mean_bs_per_cluster: float
    mean_efficiency: float
    weighted_efficiency: float
    zero_peak_clusters: int


@dataclass(frozen=True)
class DistributionSummary:
    """Empirical distribution: sorted samples and their CDF values."""
    values: np.ndarray
    cdf: np.ndarray
    excluded: int = 0

    @classmethod
    def of(cls, samples: Iterable[float], excluded: int = 0) -> "DistributionSummary":
        values = np.sort(np.asarray(list(samples), dtype=float))
        n = len(values)
        # Fraction of samples <= each value; ties share the top of their step.
        cdf = np.searchsorted(values, values, side="right") / n if n else np.array([])
        return cls(values, cdf, excluded)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def log10_span(self) -> Optional[float]:
        positive = self.values[self.values > 0]
        if positive.size == 0:
            return None
        return float(math.log10(positive[-1] / positive[0]))

    def evaluate(self, x: float) -> float:
        if self.count == 0:
            return 0.0
        return float(np.searchsorted(self.values, x, side="right") / self.count)

    def quantile(self, q: float) -> float:
        if self.count == 0:
            raise ValueError("empty distribution")
        return float(np.quantile(self.values, q))

    def steps(self) -> List[Tuple[float, float]]:
        """(value, CDF) at every distinct sample value."""
        unique, last = np.unique(self.values[::-1], return_index=True)
        positions = self.count - 1 - last
        return [(float(v), float(self.cdf[p])) for v, p in zip(unique, positions)]


@dataclass(frozen=True)
class NeighborRatios:
    pairwise: DistributionSummary
    per_cell_disparity: float
    neighbor_pairs: int
    stations_considered: int


def efficiency(series: LoadSeries) -> float:
    """mean(bins) / max(bins)."""
    if len(series) == 0:
        raise ValueError("empty load series")
    peak = series.peak
    if peak <= 0:
        raise ZeroPeakError()
    return series.average / peak


def _station_matrix(ids: Sequence[CellId], loads: Mapping[CellId, LoadSeries]) -> np.ndarray:
    if not ids:
        return np.zeros((0, 0))
    first = loads[ids[0]]
    rows = []
    for cell in ids:
        series = loads[cell]
        if not series.aligned_with(first):
            raise ValueError(f"load series of {cell.label()} is not aligned with the others")
        rows.append(series.bins)
    return np.vstack(rows)


def _report_from_matrix(
    matrix: np.ndarray, labels: np.ndarray, d_max: float, app_filter: str
) -> EfficiencyReport:
    n_clusters = int(labels.max()) + 1 if len(labels) else 0
    order = np.argsort(labels, kind="stable")
    starts = np.searchsorted(labels[order], np.arange(n_clusters))
    sizes = np.diff(np.append(starts, len(labels)))
    cluster_loads = np.add.reduceat(matrix[order], starts, axis=0) if n_clusters else np.zeros((0, 1))

    avg = cluster_loads.mean(axis=1)
    peak = cluster_loads.max(axis=1)
    live = peak > 0
    ratios = np.divide(avg, peak, out=np.zeros_like(avg), where=live)

    per_cluster = tuple(
        ClusterEfficiency(k, int(sizes[k]), float(avg[k]), float(peak[k]), float(ratios[k]) if live[k] else None)
        for k in range(n_clusters)
    )
    mean_eff = float(ratios[live].mean()) if live.any() else math.nan
    weighted_eff = float(avg[live].sum() / peak[live].sum()) if live.any() else math.nan
    return EfficiencyReport(float(d_max), app_filter, per_cluster, mean_eff, weighted_eff, int((~live).sum()))


def evaluate_partition(
    partition: Partition, loads: Mapping[CellId, LoadSeries], app_filter: str = TOTAL.name
) -> EfficiencyReport:
    """Efficiency of every cluster of ``partition`` under the given station loads."""
    ids = [cell for cluster in partition.clusters for cell in cluster]
    labels = np.repeat(np.arange(partition.n_clusters), [len(c) for c in partition.clusters])
    report = _report_from_matrix(_station_matrix(ids, loads), labels, partition.d_max, app_filter)
    logger.debug(
        f"d_max={partition.d_max:.1f} app={app_filter}: {report.n_clusters} clusters, "
        f"mean efficiency {report.mean_efficiency:.4f}"
    )
    return report


def sweep(
    tree: MergeTree,
    loads: Mapping[CellId, LoadSeries],
    d_max_values: Sequence[float],
    app_filter: str = TOTAL.name,
) -> List[SweepRow]:
    """Cut the tree at every threshold and evaluate the resulting partition."""
    matrix = _station_matrix(list(tree.leaves), loads)
    rows = []
    for d_max in sorted(d_max_values):
        partition = cut_at_threshold(tree, d_max)
        report = _report_from_matrix(matrix, partition.labels, d_max, app_filter)
        rows.append(SweepRow(
            d_max=float(d_max),
            n_clusters=partition.n_clusters,
            mean_bs_per_cluster=partition.mean_cluster_size,
            mean_efficiency=report.mean_efficiency,
            weighted_efficiency=report.weighted_efficiency,
            zero_peak_clusters=report.zero_peak_clusters,
        ))
    logger.info(f"Swept {len(rows)} thresholds over {len(tree)} stations (app={app_filter})")
    return rows


def _peaks(stations: Sequence[Station], app_filter: str) -> np.ndarray:
    return np.array([s.loads[app_filter].peak for s in stations], dtype=float)


def peak_load_distribution(stations: Sequence[Station], app_filter: str = TOTAL.name) -> DistributionSummary:
    """CDF of per-station peak loads; zero-peak stations are excluded and counted."""
    peaks = _peaks(stations, app_filter)
    nonzero = peaks[peaks > 0]
    if nonzero.size == 0:
        raise NoNonzeroPeaksError()
    return DistributionSummary.of(nonzero, excluded=int((peaks <= 0).sum()))


def _bbox(station: Station) -> Tuple[float, float, float, float]:
    xs = [v.x for v in station.coverage.vertices]
    ys = [v.y for v in station.coverage.vertices]
    return min(xs), min(ys), max(xs), max(ys)


def neighbor_pairs(stations: Sequence[Station], tolerance: float = 1e-6) -> List[Tuple[int, int]]:
    """Index pairs (i < j) of stations whose coverage hulls intersect.

    Bounding boxes are swept along x to prune candidates before the exact test.
    """
    boxes = [_bbox(s) for s in stations]
    order = sorted(range(len(stations)), key=lambda i: boxes[i][0])
    pairs = []
    active: List[int] = []
    for i in order:
        min_x = boxes[i][0]
        active = [j for j in active if boxes[j][2] >= min_x - tolerance]
        for j in active:
            if boxes[j][1] > boxes[i][3] + tolerance or boxes[i][1] > boxes[j][3] + tolerance:
                continue
            if hulls_intersect(stations[i].coverage, stations[j].coverage, tolerance):
                pairs.append((min(i, j), max(i, j)))
        active.append(i)
    return sorted(pairs)


def neighbor_peak_ratios(
    stations: Sequence[Station], app_filter: str = TOTAL.name, threshold: float = DISPARITY_RATIO
) -> NeighborRatios:
    """Peak ratios over neighboring cells and the share of cells with a disparate neighbor."""
    peaks = _peaks(stations, app_filter)
    live = np.nonzero(peaks > 0)[0]
    considered = [stations[i] for i in live]
    live_peaks = peaks[live]

    samples = []
    disparate = np.zeros(len(considered), dtype=bool)
    pairs = neighbor_pairs(considered)
    for i, j in pairs:
        hi, lo = max(live_peaks[i], live_peaks[j]), min(live_peaks[i], live_peaks[j])
        ratio = hi / lo
        samples.append(ratio)
        if ratio >= threshold:
            disparate[i] = disparate[j] = True

    fraction = float(disparate.mean()) if len(considered) else 0.0
    logger.info(f"{len(pairs)} neighbor pairs among {len(considered)} stations; disparity {fraction:.3f}")
    return NeighborRatios(DistributionSummary.of(samples), fraction, len(pairs), len(considered))


def randomize_loads(
    loads: Mapping[CellId, LoadSeries], seed: int, per_cell_max: bool = False
) -> Dict[CellId, LoadSeries]:
    """Replace every bin by an independent uniform draw on [0, M].

    M is the maximum hourly bin over all stations, or each station's own
    maximum with ``per_cell_max``. Stations are drawn in sorted id order so
    the output depends only on the seed.
    """
    if not loads:
        raise UndefinedMaximumError()
    global_max = max(series.peak for series in loads.values())
    if global_max <= 0:
        raise UndefinedMaximumError()

    rng = np.random.default_rng(seed)
    randomized = {}
    for cell in sorted(loads):
        series = loads[cell]
        upper = series.peak if per_cell_max else global_max
        randomized[cell] = LoadSeries(series.origin_hour, rng.uniform(0.0, upper, size=len(series)))
    return randomized
