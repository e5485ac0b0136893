"""Labeled training data: uniform instances with reference-tour edge labels.

Reference tours come from exact dynamic programming for small instances and
from the cascade solver with a generous deterministic budget otherwise. The
label tensor marks, for every directed sparse-graph edge, whether its
undirected counterpart belongs to the reference tour.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tspcascade import (CascadeConfig, EaxConfig, Metric, SparseGraph,
                        TspInstance, build_sparse_graph, solve)

_EXACT_LIMIT = 18


@dataclass
class TrainingExample:
    """One instance with its sparse graph, labels and reference tour."""

    inst: TspInstance
    graph: SparseGraph
    labels: np.ndarray  # (n, k) float32, 1 iff undirected edge is in the tour
    tour: np.ndarray  # reference tour order, (n,) int32

    def __post_init__(self):
        n = self.inst.n
        assert self.labels.shape == self.graph.neighbors.shape
        # each tour edge can appear in at most two directions of the graph
        assert self.labels.sum() <= 2 * n


def held_karp(inst: TspInstance) -> tuple[int, np.ndarray]:
    """Exact optimum and one optimal tour by bitmask dynamic programming."""
    n = inst.n
    if n > _EXACT_LIMIT:
        raise ValueError(f"exact labeling limited to n <= {_EXACT_LIMIT}")
    diff = inst.coords[:, None, :] - inst.coords[None, :, :]
    raw = np.hypot(diff[..., 0], diff[..., 1])
    if inst.metric == Metric.CEIL_2D:
        d = np.ceil(raw).astype(np.int64)
    else:
        d = (raw + 0.5).astype(np.int64)
    full = 1 << (n - 1)  # subsets of nodes 1..n-1, node 0 fixed as start
    inf = np.iinfo(np.int64).max // 4
    cost = np.full((full, n - 1), inf, dtype=np.int64)
    parent = np.full((full, n - 1), -1, dtype=np.int32)
    for j in range(n - 1):
        cost[1 << j, j] = d[0, j + 1]
    for mask in range(1, full):
        for j in range(n - 1):
            if not mask & (1 << j) or cost[mask, j] >= inf:
                continue
            base = cost[mask, j]
            for m in range(n - 1):
                if mask & (1 << m):
                    continue
                nxt = mask | (1 << m)
                cand = base + d[j + 1, m + 1]
                if cand < cost[nxt, m]:
                    cost[nxt, m] = cand
                    parent[nxt, m] = j
    closing = cost[full - 1] + d[1:, 0]
    j = int(np.argmin(closing))
    best = int(closing[j])
    order = [j + 1]
    mask = full - 1
    while parent[mask, j] >= 0:
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj
        order.append(j + 1)
    order.append(0)
    return best, np.array(order[::-1], dtype=np.int32)


def _reference_tour(inst: TspInstance, iter_budget: int,
                    seed: int) -> np.ndarray:
    if inst.n <= _EXACT_LIMIT:
        return held_karp(inst)[1]
    cfg = CascadeConfig(t_max=60.0, iter_budget=iter_budget, seed=seed,
                        eax=EaxConfig(population_size=12, n_children=10))
    tour, _, _ = solve(inst, cfg)
    return tour.order.astype(np.int32)


def _edge_labels(graph: SparseGraph, tour: np.ndarray) -> np.ndarray:
    n = len(tour)
    in_tour = set()
    for i in range(n):
        u, v = int(tour[i]), int(tour[(i + 1) % n])
        in_tour.add((min(u, v), max(u, v)))
    labels = np.zeros(graph.neighbors.shape, dtype=np.float32)
    for i in range(n):
        for s, j in enumerate(graph.neighbors[i]):
            if (min(i, int(j)), max(i, int(j))) in in_tour:
                labels[i, s] = 1.0
    return labels


def gen_dataset(sizes: list[int], count_per_size: int, seed: int,
                gamma: int = 10, iter_budget: int = 40_000) -> list[TrainingExample]:
    """Uniform random instances of the requested sizes with edge labels."""
    if any(n < 5 for n in sizes):
        raise ValueError("all sizes must be >= 5")
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        for idx in range(count_per_size):
            coords = np.floor(rng.random((n, 2)) * 1_000_000.0)
            inst = TspInstance(name=f"train{n}_{idx}", coords=coords,
                               metric=Metric.EUC_2D)
            graph = build_sparse_graph(inst, min(gamma, n - 1))
            tour = _reference_tour(inst, iter_budget,
                                   seed=int(rng.integers(2**31)))
            out.append(TrainingExample(inst=inst, graph=graph,
                                       labels=_edge_labels(graph, tour),
                                       tour=tour))
    return out


def save_dataset(examples: list[TrainingExample], directory: str | Path) -> None:
    """Per-example binary blobs plus a JSON index."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for i, ex in enumerate(examples):
        blob = directory / f"example_{i:05d}.npz"
        np.savez(blob, coords=ex.inst.coords, labels=ex.labels, tour=ex.tour,
                 gamma=np.array([ex.graph.gamma]))
        index.append({"file": blob.name, "name": ex.inst.name,
                      "n": ex.inst.n, "metric": ex.inst.metric.name})
    (directory / "index.json").write_text(json.dumps(index, indent=2))


def load_dataset(directory: str | Path) -> list[TrainingExample]:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    out = []
    for entry in index:
        blob = np.load(directory / entry["file"])
        inst = TspInstance(name=entry["name"], coords=blob["coords"],
                           metric=Metric[entry["metric"]])
        graph = build_sparse_graph(inst, int(blob["gamma"][0]))
        out.append(TrainingExample(inst=inst, graph=graph,
                                   labels=blob["labels"], tour=blob["tour"]))
    return out
