"""Training pipeline for the sparse-graph edge-scoring network."""

from .dataset import (TrainingExample, gen_dataset, held_karp, load_dataset,
                      save_dataset)
from .errors import NonFiniteLoss
from .losses import (adjusted_distance_matrix, loss_beta, loss_pi,
                     min_one_tree)
from .model import (ScoringNet, example_tensors, export_weights, from_weights,
                    reference_forward, to_weights)
from .train import TrainConfig, train

__all__ = [
    "NonFiniteLoss", "ScoringNet", "TrainConfig", "TrainingExample",
    "adjusted_distance_matrix", "example_tensors", "export_weights",
    "from_weights", "gen_dataset", "held_karp", "load_dataset", "loss_beta",
    "loss_pi", "min_one_tree", "reference_forward", "save_dataset",
    "to_weights", "train",
]
