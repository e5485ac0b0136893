"""Neural guidance: edge scores, node penalties, weight I/O and a fallback scorer.

The scoring network embeds the sparse directed graph with L graph-convolution
layers and decodes a per-node softmax over each node's outgoing edges, plus a
bounded additive penalty per node. A weight-free fallback scorer lets the
solver run without a trained model.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import SparseGraph, TspInstance
from .errors import BadMagic, DimensionMismatch, TruncatedFile, VersionMismatch

_MAGIC = b"UNGW"
_VERSION = 1
_BN_EPS = 1e-5
_DEFAULT_PENALTY_BOUND = 10.0


@dataclass
class LayerWeights:
    """One graph-convolution layer: seven DxD matrices, padding vector, BN stats."""

    w_att: np.ndarray
    w_self: np.ndarray
    w_neigh: np.ndarray
    w_rev: np.ndarray
    w_from: np.ndarray
    w_to: np.ndarray
    w_edge: np.ndarray
    pad: np.ndarray
    bn_node: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]  # mean, var, scale, shift
    bn_edge: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass
class SgnWeights:
    """Full parameter set of the scoring network."""

    layer_count: int
    dim: int
    gamma: int
    node_in_w: np.ndarray  # (D, 2)
    node_in_b: np.ndarray  # (D,)
    edge_in_w: np.ndarray  # (D,)
    edge_in_b: np.ndarray  # (D,)
    layers: list[LayerWeights]
    dec1_w: np.ndarray  # (D, D)
    dec1_b: np.ndarray
    dec2_w: np.ndarray  # (D, D)
    dec2_b: np.ndarray
    w_beta: np.ndarray  # (D,)
    w_pi: np.ndarray  # (D,)
    penalty_bound: float = _DEFAULT_PENALTY_BOUND

    def validate(self) -> None:
        d = self.dim
        if len(self.layers) != self.layer_count:
            raise DimensionMismatch("layer list length != layer_count")
        checks = [
            (self.node_in_w, (d, 2)),
            (self.node_in_b, (d,)),
            (self.edge_in_w, (d,)),
            (self.edge_in_b, (d,)),
            (self.dec1_w, (d, d)),
            (self.dec1_b, (d,)),
            (self.dec2_w, (d, d)),
            (self.dec2_b, (d,)),
            (self.w_beta, (d,)),
            (self.w_pi, (d,)),
        ]
        for layer in self.layers:
            for m in (layer.w_att, layer.w_self, layer.w_neigh, layer.w_rev,
                      layer.w_from, layer.w_to, layer.w_edge):
                checks.append((m, (d, d)))
            checks.append((layer.pad, (d,)))
            for stats in (layer.bn_node, layer.bn_edge):
                for v in stats:
                    checks.append((v, (d,)))
        for arr, shape in checks:
            if arr.shape != shape:
                raise DimensionMismatch(f"tensor shape {arr.shape} != {shape}")
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch("non-finite weight tensor")

    def tensors(self) -> list[np.ndarray]:
        """All tensors in the fixed serialization order."""
        out = [self.node_in_w, self.node_in_b, self.edge_in_w, self.edge_in_b]
        for layer in self.layers:
            out += [layer.w_att, layer.w_self, layer.w_neigh, layer.w_rev,
                    layer.w_from, layer.w_to, layer.w_edge, layer.pad,
                    *layer.bn_node, *layer.bn_edge]
        out += [self.dec1_w, self.dec1_b, self.dec2_w, self.dec2_b,
                self.w_beta, self.w_pi,
                np.array([self.penalty_bound], dtype=np.float32)]
        return out


def random_weights(layer_count: int, dim: int, gamma: int,
                   rng: np.random.Generator, scale: float = 0.1) -> SgnWeights:
    """Random dimension-consistent weights with identity-like BN statistics."""

    def mat(*shape):
        return (rng.standard_normal(shape) * scale).astype(np.float32)

    def bn():
        return (np.zeros(dim, np.float32), np.ones(dim, np.float32),
                np.ones(dim, np.float32), np.zeros(dim, np.float32))

    layers = [
        LayerWeights(
            w_att=mat(dim, dim), w_self=mat(dim, dim), w_neigh=mat(dim, dim),
            w_rev=mat(dim, dim), w_from=mat(dim, dim), w_to=mat(dim, dim),
            w_edge=mat(dim, dim), pad=mat(dim), bn_node=bn(), bn_edge=bn(),
        )
        for _ in range(layer_count)
    ]
    return SgnWeights(
        layer_count=layer_count, dim=dim, gamma=gamma,
        node_in_w=mat(dim, 2), node_in_b=mat(dim),
        edge_in_w=mat(dim), edge_in_b=mat(dim),
        layers=layers,
        dec1_w=mat(dim, dim), dec1_b=mat(dim),
        dec2_w=mat(dim, dim), dec2_b=mat(dim),
        w_beta=mat(dim), w_pi=mat(dim),
    )


def save_weights(w: SgnWeights) -> bytes:
    """Serialize to the UNGW binary format (little-endian f32, trailing CRC32)."""
    w.validate()
    parts = [_MAGIC, struct.pack("<III I", _VERSION, w.layer_count, w.dim, w.gamma)]
    for arr in w.tensors():
        parts.append(np.ascontiguousarray(arr, dtype=np.float32).tobytes())
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def load_weights(data: bytes) -> SgnWeights:
    """Parse UNGW bytes; lossless round-trip at f32 precision."""
    if len(data) < 4 or data[:4] != _MAGIC:
        raise BadMagic("not a UNGW weight file")
    if len(data) < 24:
        raise TruncatedFile("header incomplete")
    version, layer_count, dim, gamma = struct.unpack_from("<IIII", data, 4)
    if version != _VERSION:
        raise VersionMismatch(f"version {version}, expected {_VERSION}")

    body = data[:-4]
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(body) != crc:
        raise TruncatedFile("checksum mismatch")

    offset = 20

    def take(*shape) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(body):
            raise TruncatedFile("file ends mid-tensor")
        arr = np.frombuffer(body, dtype="<f4", count=count, offset=offset)
        offset = end
        return arr.reshape(shape).copy()

    node_in_w = take(dim, 2)
    node_in_b = take(dim)
    edge_in_w = take(dim)
    edge_in_b = take(dim)
    layers = []
    for _ in range(layer_count):
        mats = [take(dim, dim) for _ in range(7)]
        pad = take(dim)
        bn_node = tuple(take(dim) for _ in range(4))
        bn_edge = tuple(take(dim) for _ in range(4))
        layers.append(LayerWeights(*mats, pad, bn_node, bn_edge))
    dec1_w = take(dim, dim)
    dec1_b = take(dim)
    dec2_w = take(dim, dim)
    dec2_b = take(dim)
    w_beta = take(dim)
    w_pi = take(dim)
    bound = float(take(1)[0])
    if offset != len(body):
        raise TruncatedFile("trailing bytes after tensors")
    w = SgnWeights(
        layer_count=layer_count, dim=dim, gamma=gamma,
        node_in_w=node_in_w, node_in_b=node_in_b,
        edge_in_w=edge_in_w, edge_in_b=edge_in_b, layers=layers,
        dec1_w=dec1_w, dec1_b=dec1_b, dec2_w=dec2_w, dec2_b=dec2_b,
        w_beta=w_beta, w_pi=w_pi, penalty_bound=bound,
    )
    w.validate()
    return w


@dataclass
class EdgeScores:
    """Per-directed-edge scores, row-stochastic over each node's out-edges."""

    graph: SparseGraph
    beta: np.ndarray  # (n, k) float

    def directed(self, i: int, j: int) -> float:
        slot = self.graph.edge_position(i, j)
        return float(self.beta[i, slot]) if slot >= 0 else 0.0

    def undirected(self, i: int, j: int) -> float:
        """Score of an undirected tour edge: max of the two directions, 0 if absent."""
        return max(self.directed(i, j), self.directed(j, i))


@dataclass
class NodePenalties:
    """Per-node additive distance adjustments, bounded by the penalty head."""

    pi: np.ndarray  # (n,) float

    @classmethod
    def zeros(cls, n: int) -> "NodePenalties":
        return cls(pi=np.zeros(n))


@dataclass
class CandidateLists:
    """Per node, up to k neighbors ordered by descending score."""

    lists: np.ndarray  # (n, k) int32


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Softmax over the second axis (each node's out-edges)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def node_features(inst: TspInstance) -> np.ndarray:
    """Coordinates mapped into the unit square (aspect preserved)."""
    mn = inst.coords.min(axis=0)
    span = float(max(np.ptp(inst.coords, axis=0).max(), 1e-12))
    return ((inst.coords - mn) / span).astype(np.float32)


def edge_features(inst: TspInstance, graph: SparseGraph) -> np.ndarray:
    """Edge distances divided by the bounding-box diagonal."""
    ext = np.ptp(inst.coords, axis=0)
    diag = float(max(np.hypot(ext[0], ext[1]), 1e-12))
    return (graph.edge_dist / diag).astype(np.float32)


def _batch_norm(x: np.ndarray, stats) -> np.ndarray:
    mean, var, scale, shift = stats
    return (x - mean) / np.sqrt(var + _BN_EPS) * scale + shift


def sgn_forward(graph: SparseGraph, inst: TspInstance,
                w: SgnWeights) -> tuple[EdgeScores, NodePenalties]:
    """Deterministic inference pass producing edge scores and node penalties."""
    w.validate()
    if graph.n != inst.n:
        raise DimensionMismatch("graph/instance node count mismatch")

    nbrs = graph.neighbors
    v = node_features(inst) @ w.node_in_w.T + w.node_in_b  # (n, D)
    e = edge_features(inst, graph)[:, :, None] * w.edge_in_w + w.edge_in_b  # (n, k, D)
    v = v.astype(np.float32)
    e = e.astype(np.float32)

    if w.layers:
        rev = graph.reverse_index()
        rev_present = rev >= 0
        rev_clamped = np.where(rev_present, rev, 0)
    for layer in w.layers:
        att_logits = e @ layer.w_att.T
        shifted = att_logits - att_logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        a = expd / expd.sum(axis=1, keepdims=True)  # (n, k, D)

        neigh = (v @ layer.w_neigh.T)[nbrs]  # (n, k, D)
        v_pre = v @ layer.w_self.T + (a * neigh).sum(axis=1)
        v_new = _batch_norm(np.maximum(v_pre, 0.0), layer.bn_node) + v

        e_rev = e[nbrs, rev_clamped]  # (n, k, D): e[j, slot of (j, i)]
        e_rev = np.where(rev_present[:, :, None], e_rev, layer.pad)
        r = e_rev @ layer.w_rev.T
        e_pre = (v @ layer.w_from.T)[:, None, :] + (v @ layer.w_to.T)[nbrs] \
            + e @ layer.w_edge.T + r
        e_new = _batch_norm(np.maximum(e_pre, 0.0), layer.bn_edge) + e

        v = v_new.astype(np.float32)
        e = e_new.astype(np.float32)

    h = np.maximum(e @ w.dec1_w.T + w.dec1_b, 0.0)
    h = np.maximum(h @ w.dec2_w.T + w.dec2_b, 0.0)
    beta = _softmax_rows((h @ w.w_beta).astype(np.float64))
    pi = w.penalty_bound * np.tanh((v @ w.w_pi).astype(np.float64))
    return EdgeScores(graph=graph, beta=beta), NodePenalties(pi=pi)


def heuristic_scores(inst: TspInstance, graph: SparseGraph) -> EdgeScores:
    """Weight-free fallback: softmax of -d/tau per node, tau = mean out-distance.

    Distances enter only through the ratio of squared lengths to their per-node
    sum, which keeps the scores bit-identical under translation and uniform
    scaling of the coordinates.
    """
    diff = inst.coords[graph.neighbors] - inst.coords[:, None, :]
    sq = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2  # (n, k)
    total = sq.sum(axis=1, keepdims=True)
    total = np.where(total > 0, total, 1.0)
    d_hat = np.sqrt(sq / total)
    tau = d_hat.mean(axis=1, keepdims=True)
    tau = np.where(tau > 0, tau, 1.0)
    return EdgeScores(graph=graph, beta=_softmax_rows(-d_hat / tau))


def candidate_lists(scores: EdgeScores, graph: SparseGraph, k: int) -> CandidateLists:
    """Top-k out-edges per node by descending score, ties by smaller node id."""
    if not 1 <= k <= graph.k:
        raise ValueError(f"k must be in [1, {graph.k}]")
    order = np.lexsort((graph.neighbors, -scores.beta), axis=1)[:, :k]
    return CandidateLists(lists=np.take_along_axis(graph.neighbors, order, axis=1))


def score_ab_cycle(cycle, scores: EdgeScores) -> float:
    """Score of an alternating parent cycle: sum of B-edge scores minus A-edge scores."""
    total = 0.0
    for u, v, origin in cycle.edges:
        b = scores.undirected(u, v)
        total += b if origin == "B" else -b
    return total
