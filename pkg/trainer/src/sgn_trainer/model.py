"""Torch implementation of the edge-scoring network.

Mirrors the solver's inference pass operation for operation so that exported
weights reproduce its scores: per-node attention over the k out-edges, node
and edge updates with ReLU, batch norm and residuals, a reverse-edge feature
with a learned padding vector for missing reverse edges, a two-layer ReLU
decoder with a per-node softmax head for edge scores, and a bounded tanh head
for node penalties.
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from tspcascade import LayerWeights, SgnWeights, TspInstance, SparseGraph, save_weights

_BN_EPS = 1e-5
_PENALTY_BOUND = 10.0


class ConvLayer(nn.Module):
    def __init__(self, dim: int, dtype=torch.float32):
        super().__init__()

        def mat():
            return nn.Parameter(torch.randn(dim, dim, dtype=dtype) * 0.1)

        self.w_att = mat()
        self.w_self = mat()
        self.w_neigh = mat()
        self.w_rev = mat()
        self.w_from = mat()
        self.w_to = mat()
        self.w_edge = mat()
        self.pad = nn.Parameter(torch.randn(dim, dtype=dtype) * 0.1)
        self.bn_node = nn.BatchNorm1d(dim, eps=_BN_EPS, dtype=dtype)
        self.bn_edge = nn.BatchNorm1d(dim, eps=_BN_EPS, dtype=dtype)

    def forward(self, v, e, nbrs, rev_present, rev_clamped):
        n, k, d = e.shape
        att = torch.softmax(e @ self.w_att.T, dim=1)
        neigh = (v @ self.w_neigh.T)[nbrs]
        v_pre = v @ self.w_self.T + (att * neigh).sum(dim=1)
        v_new = self.bn_node(torch.relu(v_pre)) + v

        e_rev = e[nbrs, rev_clamped]
        e_rev = torch.where(rev_present[:, :, None], e_rev, self.pad)
        e_pre = ((v @ self.w_from.T)[:, None, :] + (v @ self.w_to.T)[nbrs]
                 + e @ self.w_edge.T + e_rev @ self.w_rev.T)
        e_new = self.bn_edge(torch.relu(e_pre).reshape(n * k, d)).reshape(n, k, d) + e
        return v_new, e_new


class ScoringNet(nn.Module):
    """Stack of graph-conv layers plus the score and penalty decoders."""

    def __init__(self, layers: int, dim: int, gamma: int,
                 penalty_bound: float = _PENALTY_BOUND, dtype=torch.float32):
        super().__init__()
        self.layer_count = layers
        self.dim = dim
        self.gamma = gamma
        self.penalty_bound = penalty_bound
        self.node_in = nn.Linear(2, dim, dtype=dtype)
        self.edge_in_w = nn.Parameter(torch.randn(dim, dtype=dtype) * 0.1)
        self.edge_in_b = nn.Parameter(torch.randn(dim, dtype=dtype) * 0.1)
        self.layers = nn.ModuleList(ConvLayer(dim, dtype) for _ in range(layers))
        self.dec1 = nn.Linear(dim, dim, dtype=dtype)
        self.dec2 = nn.Linear(dim, dim, dtype=dtype)
        self.w_beta = nn.Parameter(torch.randn(dim, dtype=dtype) * 0.1)
        self.w_pi = nn.Parameter(torch.randn(dim, dtype=dtype) * 0.1)

    def forward(self, node_feat: torch.Tensor, edge_feat: torch.Tensor,
                nbrs: torch.Tensor, rev: torch.Tensor):
        """node_feat (n, 2), edge_feat (n, k), nbrs (n, k) long, rev (n, k)
        long with -1 where the reverse edge is absent. Returns beta (n, k)
        and pi (n,)."""
        v = self.node_in(node_feat)
        e = edge_feat[:, :, None] * self.edge_in_w + self.edge_in_b
        rev_present = rev >= 0
        rev_clamped = rev.clamp(min=0)
        for layer in self.layers:
            v, e = layer(v, e, nbrs, rev_present, rev_clamped)
        h = torch.relu(self.dec1(e))
        h = torch.relu(self.dec2(h))
        beta = torch.softmax(h @ self.w_beta, dim=1)
        pi = self.penalty_bound * torch.tanh(v @ self.w_pi)
        return beta, pi


def example_tensors(inst: TspInstance, graph: SparseGraph, dtype=torch.float32):
    """Feature and index tensors for one instance, matching the solver's
    feature scaling (unit-square nodes, diagonal-normalized edge lengths)."""
    mn = inst.coords.min(axis=0)
    span = float(max(np.ptp(inst.coords, axis=0).max(), 1e-12))
    node = torch.as_tensor((inst.coords - mn) / span, dtype=dtype)
    ext = np.ptp(inst.coords, axis=0)
    diag = float(max(np.hypot(ext[0], ext[1]), 1e-12))
    edge = torch.as_tensor(graph.edge_dist / diag, dtype=dtype)
    nbrs = torch.as_tensor(graph.neighbors, dtype=torch.long)
    rev = torch.as_tensor(graph.reverse_index(), dtype=torch.long)
    return node, edge, nbrs, rev


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def _bn_tuple(bn: nn.BatchNorm1d):
    return (_np(bn.running_mean), _np(bn.running_var),
            _np(bn.weight), _np(bn.bias))


def to_weights(model: ScoringNet) -> SgnWeights:
    """Snapshot as the solver's weight struct (inference BN statistics)."""
    layers = [
        LayerWeights(
            w_att=_np(l.w_att), w_self=_np(l.w_self), w_neigh=_np(l.w_neigh),
            w_rev=_np(l.w_rev), w_from=_np(l.w_from), w_to=_np(l.w_to),
            w_edge=_np(l.w_edge), pad=_np(l.pad),
            bn_node=_bn_tuple(l.bn_node), bn_edge=_bn_tuple(l.bn_edge),
        )
        for l in model.layers
    ]
    return SgnWeights(
        layer_count=model.layer_count, dim=model.dim, gamma=model.gamma,
        node_in_w=_np(model.node_in.weight), node_in_b=_np(model.node_in.bias),
        edge_in_w=_np(model.edge_in_w), edge_in_b=_np(model.edge_in_b),
        layers=layers,
        dec1_w=_np(model.dec1.weight), dec1_b=_np(model.dec1.bias),
        dec2_w=_np(model.dec2.weight), dec2_b=_np(model.dec2.bias),
        w_beta=_np(model.w_beta), w_pi=_np(model.w_pi),
        penalty_bound=float(model.penalty_bound),
    )


def from_weights(w: SgnWeights, dtype=torch.float32) -> ScoringNet:
    """Rebuild a torch model from a solver weight struct."""
    w.validate()
    model = ScoringNet(w.layer_count, w.dim, w.gamma,
                       penalty_bound=w.penalty_bound, dtype=dtype)
    with torch.no_grad():
        model.node_in.weight.copy_(torch.as_tensor(w.node_in_w, dtype=dtype))
        model.node_in.bias.copy_(torch.as_tensor(w.node_in_b, dtype=dtype))
        model.edge_in_w.copy_(torch.as_tensor(w.edge_in_w, dtype=dtype))
        model.edge_in_b.copy_(torch.as_tensor(w.edge_in_b, dtype=dtype))
        for layer, lw in zip(model.layers, w.layers):
            for name in ("w_att", "w_self", "w_neigh", "w_rev", "w_from",
                         "w_to", "w_edge", "pad"):
                getattr(layer, name).copy_(
                    torch.as_tensor(getattr(lw, name), dtype=dtype))
            for bn, stats in ((layer.bn_node, lw.bn_node),
                              (layer.bn_edge, lw.bn_edge)):
                bn.running_mean.copy_(torch.as_tensor(stats[0], dtype=dtype))
                bn.running_var.copy_(torch.as_tensor(stats[1], dtype=dtype))
                bn.weight.copy_(torch.as_tensor(stats[2], dtype=dtype))
                bn.bias.copy_(torch.as_tensor(stats[3], dtype=dtype))
        model.dec1.weight.copy_(torch.as_tensor(w.dec1_w, dtype=dtype))
        model.dec1.bias.copy_(torch.as_tensor(w.dec1_b, dtype=dtype))
        model.dec2.weight.copy_(torch.as_tensor(w.dec2_w, dtype=dtype))
        model.dec2.bias.copy_(torch.as_tensor(w.dec2_b, dtype=dtype))
        model.w_beta.copy_(torch.as_tensor(w.w_beta, dtype=dtype))
        model.w_pi.copy_(torch.as_tensor(w.w_pi, dtype=dtype))
    return model


def export_weights(model: ScoringNet) -> bytes:
    """Binary weight blob in the solver's file format."""
    return save_weights(to_weights(model))


def reference_forward(inst: TspInstance, graph: SparseGraph,
                      w: SgnWeights) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode forward pass from a weight struct; the independent
    check target for the solver's own implementation."""
    model = from_weights(w)
    model.eval()
    with torch.no_grad():
        beta, pi = model(*example_tensors(inst, graph))
    return (beta.numpy().astype(np.float64), pi.numpy().astype(np.float64))
