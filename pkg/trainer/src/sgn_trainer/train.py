"""Optimization loop: Adam over the combined edge and penalty loss."""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from tspcascade import SgnWeights

from .dataset import TrainingExample
from .errors import NonFiniteLoss
from .losses import loss_beta, loss_pi
from .model import ScoringNet, example_tensors, to_weights


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 1e-4
    eta_pi: float = 1.0  # penalty-loss weight in the combined objective
    layers: int = 2
    dim: int = 16
    gamma: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.lr < 0 or self.eta_pi < 0:
            raise ValueError("epochs must be >= 1, lr and eta_pi >= 0")
        if self.layers < 0 or self.dim < 1 or self.gamma < 1:
            raise ValueError("layers must be >= 0, dim and gamma >= 1")


def example_loss(model: ScoringNet, ex: TrainingExample,
                 eta_pi: float) -> torch.Tensor:
    beta, pi = model(*example_tensors(ex.inst, ex.graph))
    labels = torch.as_tensor(ex.labels, dtype=beta.dtype)
    loss = loss_beta(beta, labels)
    if eta_pi > 0:
        loss = loss + eta_pi * loss_pi(pi, ex.inst)
    return loss


def train(dataset: list[TrainingExample], cfg: TrainConfig,
          model: ScoringNet | None = None) -> tuple[SgnWeights, list[float]]:
    """Train on the dataset; returns exported weights and per-epoch mean loss."""
    if not dataset:
        raise ValueError("empty dataset")
    torch.manual_seed(cfg.seed)
    if model is None:
        model = ScoringNet(cfg.layers, cfg.dim, cfg.gamma)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(dataset), generator=gen).tolist()
        total = 0.0
        for idx in order:
            opt.zero_grad()
            loss = example_loss(model, dataset[idx], cfg.eta_pi)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise NonFiniteLoss(
                    f"epoch {epoch}, example {idx}: loss {value}")
            loss.backward()
            opt.step()
            total += value
        history.append(total / len(dataset))
    return to_weights(model), history
