"""Training objectives: supervised edge loss and penalty (1-tree) loss."""
from __future__ import annotations

import numpy as np
import torch
from scipy.sparse.csgraph import minimum_spanning_tree

from tspcascade import TspInstance

_CLAMP = 1e-12


def loss_beta(beta: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy over all gamma * |V| directed edges.

    beta, labels: (n, k). Logs are clamped at 1e-12 so exact 0/1 scores stay
    finite.
    """
    if beta.shape != labels.shape:
        raise ValueError("shape mismatch between scores and labels")
    log_b = torch.log(beta.clamp(min=_CLAMP))
    log_nb = torch.log((1.0 - beta).clamp(min=_CLAMP))
    return -(labels * log_b + (1.0 - labels) * log_nb).mean()


def adjusted_distance_matrix(inst: TspInstance, pi: np.ndarray) -> np.ndarray:
    """Integer metric distances shifted additively: d(i,j) + pi_i + pi_j."""
    diff = inst.coords[:, None, :] - inst.coords[None, :, :]
    raw = np.hypot(diff[..., 0], diff[..., 1])
    from tspcascade import Metric
    if inst.metric == Metric.CEIL_2D:
        base = np.ceil(raw)
    else:
        base = np.floor(raw + 0.5)
    return base + pi[:, None] + pi[None, :]


def min_one_tree(inst: TspInstance, pi: np.ndarray):
    """Minimum 1-tree under pi-adjusted distances.

    Spanning tree over nodes 1..n-1 plus node 0 joined by its two cheapest
    adjusted edges. Returns (degrees, total adjusted weight).
    """
    n = inst.n
    if n < 3:
        raise ValueError("need at least 3 nodes")
    d = adjusted_distance_matrix(inst, pi)
    # shift to strictly positive weights: every spanning tree gains the same
    # constant, so the minimizer is unchanged, and no weight is dropped as an
    # implicit missing edge
    sub = d[1:, 1:] - d[1:, 1:].min() + 1.0
    np.fill_diagonal(sub, 0.0)
    mst = minimum_spanning_tree(sub)
    degrees = np.zeros(n, dtype=np.int64)
    total = 0.0
    rows, cols = mst.nonzero()
    for r, c in zip(rows, cols):
        degrees[r + 1] += 1
        degrees[c + 1] += 1
        total += d[r + 1, c + 1]
    two = np.argsort(d[0, 1:], kind="stable")[:2] + 1
    for j in two:
        degrees[0] += 1
        degrees[j] += 1
        total += d[0, j]
    return degrees, float(total)


def loss_pi(pi: torch.Tensor, inst: TspInstance,
            degrees: np.ndarray | None = None) -> torch.Tensor:
    """Penalty loss: -(1/|V|) sum (d_i - 2) * pi_i with d_i the node degrees
    of the minimum 1-tree built from the current (detached) penalties."""
    if degrees is None:
        degrees, _ = min_one_tree(inst, pi.detach().cpu().numpy())
    dev = torch.as_tensor(degrees - 2, dtype=pi.dtype)
    return -(dev * pi).mean()
