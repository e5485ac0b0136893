"""Instance model, TSPLIB parsing, exact integer distances and sparse k-NN graphs.

Distances follow the TSPLIB conventions (round-half-up for EUC_2D, ceiling
for CEIL_2D) so that computed tour lengths are comparable with published
best-known values. Node ids are dense 0-based integers regardless of the
ids used in the input file.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidPermutation, MalformedFile, UnsupportedMetric

# Brute-force k-NN below this size; kd-tree with an exact-contender check above.
_BRUTE_FORCE_LIMIT = 2048


class Metric(enum.Enum):
    EUC_2D = "EUC_2D"
    CEIL_2D = "CEIL_2D"


@dataclass(frozen=True)
class TspInstance:
    """Immutable set of 2-D nodes; the single source of all distances."""

    name: str
    coords: np.ndarray  # (n, 2) float64
    metric: Metric

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise MalformedFile("coords must be an (n, 2) array")
        if coords.shape[0] < 3:
            raise MalformedFile(f"need at least 3 nodes, got {coords.shape[0]}")
        if not np.all(np.isfinite(coords)):
            raise MalformedFile("non-finite coordinate")
        object.__setattr__(self, "coords", coords)
        coords.setflags(write=False)

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def _round_metric(raw: np.ndarray, metric: Metric) -> np.ndarray:
    if metric is Metric.EUC_2D:
        return np.floor(raw + 0.5).astype(np.int64)
    return np.ceil(raw).astype(np.int64)


def distance(inst: TspInstance, i: int, j: int) -> int:
    """Exact integer distance between two distinct nodes."""
    dx = inst.coords[i, 0] - inst.coords[j, 0]
    dy = inst.coords[i, 1] - inst.coords[j, 1]
    raw = math.hypot(dx, dy)
    if inst.metric is Metric.EUC_2D:
        return int(raw + 0.5)
    return math.ceil(raw)


def distances_from(inst: TspInstance, i: int, js: np.ndarray) -> np.ndarray:
    """Vectorized integer distances from node i to each node in js."""
    diff = inst.coords[js] - inst.coords[i]
    return _round_metric(np.hypot(diff[:, 0], diff[:, 1]), inst.metric)


def pair_distances(inst: TspInstance, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized integer distances between paired node arrays a[k], b[k]."""
    diff = inst.coords[a] - inst.coords[b]
    return _round_metric(np.hypot(diff[..., 0], diff[..., 1]), inst.metric)


def tour_length(inst: TspInstance, order: np.ndarray) -> int:
    """Total integer length of the closed tour visiting `order` in sequence."""
    order = np.asarray(order)
    n = inst.n
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise InvalidPermutation("order is not a permutation of 0..n-1")
    return int(pair_distances(inst, order, np.roll(order, -1)).sum())


@dataclass
class Tour:
    """Hamiltonian cycle with its cached exact length."""

    order: np.ndarray
    length: int

    @classmethod
    def from_order(cls, inst: TspInstance, order) -> "Tour":
        order = np.asarray(order, dtype=np.int32)
        return cls(order=order, length=tour_length(inst, order))

    def copy(self) -> "Tour":
        return Tour(order=self.order.copy(), length=self.length)

    def edge_set(self) -> set[tuple[int, int]]:
        """Undirected edges as sorted pairs."""
        nxt = np.roll(self.order, -1)
        return {(int(min(u, v)), int(max(u, v))) for u, v in zip(self.order, nxt)}


@dataclass
class SparseGraph:
    """Directed graph of each node's gamma nearest neighbors.

    neighbors[i] is sorted ascending by integer distance, ties broken by
    smaller node id; edge_dist holds the matching distances.
    """

    gamma: int
    neighbors: np.ndarray  # (n, k) int32
    edge_dist: np.ndarray  # (n, k) int64
    _edge_pos: dict = field(default=None, repr=False, compare=False)
    _reverse_index: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    def edge_position(self, i: int, j: int) -> int:
        """Index of j in neighbors[i], or -1 when (i, j) is not in the graph."""
        if self._edge_pos is None:
            pos = {}
            nbrs = self.neighbors
            for u in range(self.n):
                for slot in range(self.k):
                    pos[(u, int(nbrs[u, slot]))] = slot
            self._edge_pos = pos
        return self._edge_pos.get((i, j), -1)

    def reverse_index(self) -> np.ndarray:
        """(n, k) array: slot of edge (j, i) in j's list for each edge (i, j), -1 if absent."""
        if self._reverse_index is None:
            n, k = self.neighbors.shape
            rev = np.full((n, k), -1, dtype=np.int32)
            slot_of = {}
            for u in range(n):
                for slot in range(k):
                    slot_of[(u, int(self.neighbors[u, slot]))] = slot
            for u in range(n):
                for slot in range(k):
                    j = int(self.neighbors[u, slot])
                    r = slot_of.get((j, u))
                    if r is not None:
                        rev[u, slot] = r
            self._reverse_index = rev
        return self._reverse_index


def _knn_row(inst: TspInstance, i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors of node i by (integer distance, id)."""
    others = np.concatenate([np.arange(i), np.arange(i + 1, inst.n)])
    d = distances_from(inst, i, others)
    sel = np.lexsort((others, d))[:k]
    return others[sel], d[sel]

def build_sparse_graph(inst: TspInstance, gamma: int) -> SparseGraph:
    """Each node's min(gamma, n-1) nearest others; ties broken by smaller id."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    n = inst.n
    k = min(gamma, n - 1)
    neighbors = np.empty((n, k), dtype=np.int32)
    edge_dist = np.empty((n, k), dtype=np.int64)

    if n <= _BRUTE_FORCE_LIMIT:
        for i in range(n):
            nb, d = _knn_row(inst, i, k)
            neighbors[i] = nb
            edge_dist[i] = d
        return SparseGraph(gamma=gamma, neighbors=neighbors, edge_dist=edge_dist)

    tree = cKDTree(inst.coords)
    # Query a few extra, then widen to every contender within the integer
    # distance threshold so rounding ties are resolved exactly by node id.
    query_k = min(n, k + 5)
    _, idx = tree.query(inst.coords, k=query_k)
    for i in range(n):
        cand = idx[i][idx[i] != i]
        d = distances_from(inst, i, cand)
        sel = np.lexsort((cand, d))
        threshold = int(d[sel[k - 1]])
        # Integer distance <= threshold implies raw distance < threshold + 1.
        ball = tree.query_ball_point(inst.coords[i], r=float(threshold) + 1.0)
        cand = np.array([j for j in ball if j != i], dtype=np.int64)
        d = distances_from(inst, i, cand)
        sel = np.lexsort((cand, d))[:k]
        neighbors[i] = cand[sel]
        edge_dist[i] = d[sel]
    return SparseGraph(gamma=gamma, neighbors=neighbors, edge_dist=edge_dist)


def parse_tsplib(text: str) -> TspInstance:
    """Parse a NODE_COORD_SECTION TSPLIB file into an instance.

    Node ids are remapped to 0-based in file order.
    """
    name = ""
    dimension = None
    metric = None
    lines = text.splitlines()
    coord_start = None
    for ln, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == "NODE_COORD_SECTION":
            coord_start = ln + 1
            break
        if stripped == "EOF":
            break
        if ":" in stripped:
            key, _, value = stripped.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "NAME":
                name = value
            elif key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError as exc:
                    raise MalformedFile(f"bad DIMENSION: {value!r}") from exc
            elif key == "EDGE_WEIGHT_TYPE":
                if value not in (m.value for m in Metric):
                    raise UnsupportedMetric(f"EDGE_WEIGHT_TYPE {value!r}")
                metric = Metric(value)
    if coord_start is None:
        raise MalformedFile("missing NODE_COORD_SECTION")
    if dimension is None:
        raise MalformedFile("missing DIMENSION")
    if metric is None:
        raise MalformedFile("missing EDGE_WEIGHT_TYPE")

    coords = []
    for line in lines[coord_start:]:
        stripped = line.strip()
        if not stripped or stripped == "EOF":
            break
        parts = stripped.split()
        if len(parts) < 3:
            raise MalformedFile(f"bad coordinate line: {stripped!r}")
        try:
            coords.append((float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise MalformedFile(f"bad coordinate line: {stripped!r}") from exc
    if len(coords) != dimension:
        raise MalformedFile(
            f"DIMENSION {dimension} but {len(coords)} coordinate lines"
        )
    return TspInstance(name=name, coords=np.array(coords), metric=metric)


def serialize_tsplib(inst: TspInstance) -> str:
    """Write an instance back out in TSPLIB format (1-based node ids)."""

    def fmt(x: float) -> str:
        return str(int(x)) if float(x).is_integer() else repr(float(x))

    lines = [
        f"NAME : {inst.name}",
        "TYPE : TSP",
        f"DIMENSION : {inst.n}",
        f"EDGE_WEIGHT_TYPE : {inst.metric.value}",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(inst.coords, start=1):
        lines.append(f"{i} {fmt(x)} {fmt(y)}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


@dataclass
class BksRegistry:
    """Best-known solution lengths keyed by instance name."""

    lengths: dict[str, int]

    @classmethod
    def parse(cls, text: str) -> "BksRegistry":
        lengths = {}
        for line in text.splitlines():
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise MalformedFile(f"bad BKS line: {line!r}")
            value = int(parts[1])
            if value <= 0:
                raise MalformedFile(f"non-positive BKS: {line!r}")
            lengths[parts[0]] = value
        return cls(lengths=lengths)

    def get(self, name: str) -> int | None:
        return self.lengths.get(name)
