"""Cascaded TSP solver: guided local search into a guided population phase."""

from .cascade import CascadeConfig, solve
from .core import (BksRegistry, Metric, SparseGraph, Tour, TspInstance,
                   build_sparse_graph, distance, parse_tsplib,
                   serialize_tsplib, tour_length)
from .eax import EaxConfig
from .guidance import (CandidateLists, EdgeScores, LayerWeights, NodePenalties,
                       SgnWeights, candidate_lists, heuristic_scores,
                       load_weights, save_weights, score_ab_cycle, sgn_forward)
from .ls import Budget, LsConfig, initial_tour, local_search
from .trace import ConvergenceTrace
from .transition import (LinearPolicy, fit_policy, gap_curve, gap_sum,
                         predict_t_trans)

__all__ = [
    "BksRegistry", "Budget", "CandidateLists", "CascadeConfig",
    "ConvergenceTrace", "EaxConfig", "EdgeScores", "LayerWeights",
    "LinearPolicy", "LsConfig",
    "Metric", "NodePenalties", "SgnWeights", "SparseGraph", "Tour",
    "TspInstance", "build_sparse_graph", "candidate_lists", "distance",
    "fit_policy", "gap_curve", "gap_sum", "heuristic_scores", "initial_tour",
    "load_weights", "local_search", "parse_tsplib", "predict_t_trans",
    "save_weights", "score_ab_cycle", "serialize_tsplib", "sgn_forward",
    "solve", "tour_length",
]
