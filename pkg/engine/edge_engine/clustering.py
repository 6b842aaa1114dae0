"""
Complete-linkage agglomerative clustering of station positions.

The full merge tree is built once; a partition for any d_max is a cut of that
tree. Leaves are stations in sorted id order, so "smallest leaf id" and
"smallest leaf index" coincide. Every working cluster lives in the slot of its
smallest leaf, which makes the tie-break (distance, min leaf of a, min leaf of
b) a plain lexicographic comparison on (distance, slot_a, slot_b).
"""

import heapq
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Literal, Sequence, Tuple

import numpy as np

from .models import CellId, Station

logger = logging.getLogger(__name__)

DEFAULT_DENSE_LIMIT = 8_000

# Upper bound on pairwise distances evaluated at once by the blocked backend.
BLOCK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class Merge:
    """One agglomeration step.

    ``a`` and ``b`` are cluster ids: leaves are ``0..n-1``; the cluster formed
    by merge ``k`` gets id ``n + k``. ``a`` holds the smaller leaf.
    """
    a: int
    b: int
    distance: float
    size: int


@dataclass(frozen=True)
class MergeTree:
    """Complete-linkage dendrogram over one operator's stations."""
    leaves: Tuple[CellId, ...]
    positions: np.ndarray
    merges: Tuple[Merge, ...]

    def __post_init__(self):
        n = len(self.leaves)
        expected = max(n - 1, 0)
        if len(self.merges) != expected:
            raise AssertionError(f"merge tree over {n} leaves needs {expected} merges, got {len(self.merges)}")
        distances = [m.distance for m in self.merges]
        if any(b < a for a, b in zip(distances, distances[1:])):
            raise AssertionError("merge distances must be non-decreasing")

    def __len__(self) -> int:
        return len(self.leaves)

    @property
    def merge_distances(self) -> np.ndarray:
        return np.array([m.distance for m in self.merges], dtype=float)

    def cut(self, d_max: float) -> "Partition":
        return cut_at_threshold(self, d_max)


@dataclass(frozen=True)
class Partition:
    """Disjoint clusters of station ids covering every leaf of a tree.

    Clusters are ordered by their smallest leaf; ``labels[i]`` is the cluster
    index of leaf ``i``.
    """
    d_max: float
    clusters: Tuple[Tuple[CellId, ...], ...]
    labels: np.ndarray
    max_applied_distance: float = 0.0

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def mean_cluster_size(self) -> float:
        return len(self.labels) / len(self.clusters) if self.clusters else 0.0

    def members(self) -> List[np.ndarray]:
        """Leaf indices per cluster."""
        count = int(self.labels.max()) + 1 if len(self.labels) else 0
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(count + 1))
        return [order[bounds[k]:bounds[k + 1]] for k in range(count)]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        lo, hi = min(ra, rb), max(ra, rb)
        self.parent[hi] = lo
        return lo


def _pairwise(xs: np.ndarray, ys: np.ndarray, xt: np.ndarray, yt: np.ndarray) -> np.ndarray:
    # Both backends go through this so their distances are bit-identical.
    return np.hypot(xs[:, None] - xt[None, :], ys[:, None] - yt[None, :])


class LinkageDistances(ABC):
    """Complete-linkage distances between the active clusters, addressed by slot."""

    def __init__(self, positions: np.ndarray):
        self.n = len(positions)
        self.x = np.ascontiguousarray(positions[:, 0], dtype=float)
        self.y = np.ascontiguousarray(positions[:, 1], dtype=float)
        self.active = np.ones(self.n, dtype=bool)

    @abstractmethod
    def nearest_above(self, i: int) -> Tuple[int, float]:
        """Nearest active slot j > i (smallest j among ties), or (-1, inf)."""

    @abstractmethod
    def nearest_any(self, i: int, prefer: int = -1) -> Tuple[int, float]:
        """Nearest active slot j != i; ``prefer`` wins ties, then smallest j."""

    @abstractmethod
    def distance(self, i: int, j: int) -> float:
        pass

    @abstractmethod
    def merge(self, a: int, b: int) -> None:
        """Fold slot ``b`` into slot ``a`` (a < b)."""


class DenseDistances(LinkageDistances):
    """Full n×n matrix with Lance–Williams complete-linkage updates (max)."""

    def __init__(self, positions: np.ndarray):
        super().__init__(positions)
        self.matrix = _pairwise(self.x, self.y, self.x, self.y)
        np.fill_diagonal(self.matrix, np.inf)

    def nearest_above(self, i: int) -> Tuple[int, float]:
        row = self.matrix[i, i + 1:]
        if row.size == 0:
            return -1, math.inf
        k = int(np.argmin(row))
        d = float(row[k])
        return (i + 1 + k, d) if math.isfinite(d) else (-1, math.inf)

    def nearest_any(self, i: int, prefer: int = -1) -> Tuple[int, float]:
        row = self.matrix[i]
        k = int(np.argmin(row))
        d = float(row[k])
        if not math.isfinite(d):
            return -1, math.inf
        if prefer >= 0 and row[prefer] == d:
            return prefer, d
        return k, d

    def distance(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def merge(self, a: int, b: int) -> None:
        merged = np.maximum(self.matrix[a], self.matrix[b])
        self.matrix[a, :] = merged
        self.matrix[:, a] = merged
        self.matrix[a, a] = np.inf
        self.matrix[b, :] = np.inf
        self.matrix[:, b] = np.inf
        self.active[b] = False


class BlockedDistances(LinkageDistances):
    """O(n) memory: cluster distances recomputed from member positions in blocks."""

    def __init__(self, positions: np.ndarray, block_elements: int = BLOCK_ELEMENTS):
        super().__init__(positions)
        self.block_elements = block_elements
        self.labels = np.arange(self.n)
        self.members: Dict[int, np.ndarray] = {i: np.array([i]) for i in range(self.n)}

    def _slot_maxima(self, i: int, candidates: np.ndarray) -> np.ndarray:
        """Complete-linkage distance from slot i to every slot owning a candidate leaf."""
        point_max = np.full(len(candidates), -np.inf)
        members = self.members[i]
        cx, cy = self.x[candidates], self.y[candidates]
        # Chunk members so a block never exceeds block_elements distances.
        step = max(1, self.block_elements // max(len(candidates), 1))
        for start in range(0, len(members), step):
            chunk = members[start:start + step]
            block = _pairwise(self.x[chunk], self.y[chunk], cx, cy)
            np.maximum(point_max, block.max(axis=0), out=point_max)
        slot_max = np.full(self.n, np.inf)
        seen = np.full(self.n, -np.inf)
        np.maximum.at(seen, self.labels[candidates], point_max)
        owned = np.isfinite(seen)
        slot_max[owned] = seen[owned]
        return slot_max

    def nearest_above(self, i: int) -> Tuple[int, float]:
        candidates = np.nonzero(self.labels > i)[0]
        if candidates.size == 0:
            return -1, math.inf
        slot_max = self._slot_maxima(i, candidates)
        k = int(np.argmin(slot_max))
        return k, float(slot_max[k])

    def nearest_any(self, i: int, prefer: int = -1) -> Tuple[int, float]:
        candidates = np.nonzero(self.labels != i)[0]
        if candidates.size == 0:
            return -1, math.inf
        slot_max = self._slot_maxima(i, candidates)
        k = int(np.argmin(slot_max))
        d = float(slot_max[k])
        if prefer >= 0 and slot_max[prefer] == d:
            return prefer, d
        return k, d

    def distance(self, i: int, j: int) -> float:
        if not (self.active[i] and self.active[j]):
            return math.inf
        return float(self._slot_maxima(i, self.members[j])[j])

    def merge(self, a: int, b: int) -> None:
        moved = self.members.pop(b)
        self.labels[moved] = a
        self.members[a] = np.sort(np.concatenate([self.members[a], moved]))
        self.active[b] = False


def _generic_linkage(distances: LinkageDistances) -> List[Tuple[int, int, float]]:
    """Greedy merging of the globally closest pair with a lazy nearest-neighbor cache.

    Complete-linkage distances only grow as clusters merge, so a cached
    nearest distance is always a lower bound; stale heap entries are
    re-validated when popped.
    """
    n = distances.n
    nn = np.full(n, -1)
    nd = np.full(n, np.inf)
    heap: List[Tuple[float, int]] = []
    for i in range(n - 1):
        nn[i], nd[i] = distances.nearest_above(i)
        if nn[i] >= 0:
            heap.append((nd[i], i))
    heapq.heapify(heap)

    steps: List[Tuple[int, int, float]] = []
    while len(steps) < n - 1:
        d, i = heapq.heappop(heap)
        if not distances.active[i] or d != nd[i]:
            continue
        j = int(nn[i])
        if j < 0 or not distances.active[j] or distances.distance(i, j) != d:
            nn[i], nd[i] = distances.nearest_above(i)
            if nn[i] >= 0:
                heapq.heappush(heap, (nd[i], i))
            continue

        steps.append((i, j, d))
        distances.merge(i, j)
        nn[j], nd[j] = -1, np.inf
        nn[i], nd[i] = distances.nearest_above(i)
        if nn[i] >= 0:
            heapq.heappush(heap, (nd[i], i))
    return steps


def _nn_chain_linkage(distances: LinkageDistances) -> List[Tuple[int, int, float]]:
    """Nearest-neighbor chain; merges come out of order and are sorted afterwards."""
    steps: List[Tuple[int, int, float]] = []
    chain: List[int] = []
    while len(steps) < distances.n - 1:
        if not chain:
            chain.append(int(np.argmax(distances.active)))
        top = chain[-1]
        previous = chain[-2] if len(chain) >= 2 else -1
        nearest, d = distances.nearest_any(top, prefer=previous)
        if nearest == previous:
            chain.pop()
            chain.pop()
            a, b = min(top, nearest), max(top, nearest)
            steps.append((a, b, d))
            distances.merge(a, b)
        else:
            chain.append(nearest)
    steps.sort(key=lambda s: (s[2], s[0], s[1]))
    return steps


def _label_merges(n: int, steps: List[Tuple[int, int, float]]) -> Tuple[Merge, ...]:
    """Turn slot-level steps into merges over cluster ids, applied as union-find."""
    uf = _UnionFind(n)
    cluster_of = {i: i for i in range(n)}
    size = {i: 1 for i in range(n)}
    merges = []
    for k, (slot_a, slot_b, d) in enumerate(steps):
        ra, rb = uf.find(slot_a), uf.find(slot_b)
        root = uf.union(ra, rb)
        total = size[ra] + size[rb]
        merges.append(Merge(cluster_of[min(ra, rb)], cluster_of[max(ra, rb)], d, total))
        cluster_of[root] = n + k
        size[root] = total
    return tuple(merges)


def build_merge_tree(
    stations: Sequence[Station],
    method: Literal["generic", "nn_chain"] = "generic",
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> MergeTree:
    """Complete-linkage merge tree over station positions.

    ``generic`` reproduces the closest-pair loop exactly, ties included.
    ``nn_chain`` agrees with it whenever pairwise distances are distinct.
    Above ``dense_limit`` stations the blocked, O(n)-memory backend is used.
    """
    ordered = sorted(stations, key=lambda s: s.id)
    leaves = tuple(s.id for s in ordered)
    positions = np.array([(s.position.x, s.position.y) for s in ordered], dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(positions)):
        raise ValueError("station positions must be finite")

    n = len(leaves)
    if n <= 1:
        return MergeTree(leaves, positions, ())

    if n > dense_limit:
        logger.info(f"{n} stations exceed dense limit {dense_limit}; using blocked distances")
        backend: LinkageDistances = BlockedDistances(positions)
    else:
        backend = DenseDistances(positions)

    if method == "generic":
        steps = _generic_linkage(backend)
    elif method == "nn_chain":
        steps = _nn_chain_linkage(backend)
    else:
        raise ValueError(f"Unsupported linkage method: {method}")

    tree = MergeTree(leaves, positions, _label_merges(n, steps))
    logger.info(f"Built merge tree over {n} stations ({method}); max merge distance {tree.merges[-1].distance:.1f} m")
    return tree


def cut_at_threshold(tree: MergeTree, d_max: float) -> Partition:
    """Apply, in order, every merge with distance <= d_max."""
    if d_max < 0 or math.isnan(d_max):
        raise ValueError(f"d_max must be >= 0, got {d_max}")
    n = len(tree.leaves)
    uf = _UnionFind(n)
    # Representative leaf of every cluster id, leaves first then merges.
    representative = list(range(n))
    applied = 0.0
    for merge in tree.merges:
        if merge.distance > d_max:
            break
        root = uf.union(representative[merge.a], representative[merge.b])
        representative.append(root)
        applied = merge.distance

    roots = np.array([uf.find(i) for i in range(n)], dtype=int)
    labels = np.searchsorted(np.unique(roots), roots)
    partition = Partition(float(d_max), (), labels, applied)
    clusters = tuple(tuple(tree.leaves[i] for i in members) for members in partition.members())
    return Partition(float(d_max), clusters, labels, applied)
