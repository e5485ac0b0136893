"""Two-phase orchestration: guided local search until the transition time,
then the population phase seeded with the local-search best, under one budget.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SparseGraph, Tour, TspInstance, build_sparse_graph
from .eax import EaxConfig, EaxState, eax_generation, init_population
from .guidance import (EdgeScores, NodePenalties, candidate_lists,
                       heuristic_scores, load_weights, sgn_forward)
from .ls import Budget, LsConfig, initial_tour, local_search
from .trace import ConvergenceTrace
from .transition import LinearPolicy, predict_t_trans

DEFAULT_GAMMA = 20


@dataclass
class CascadeConfig:
    t_max: float = 60.0
    t_trans_override: float | None = None
    ls: LsConfig = field(default_factory=LsConfig)
    eax: EaxConfig = field(default_factory=EaxConfig)
    gamma: int = DEFAULT_GAMMA
    weights_path: str | None = None  # None selects the fallback scorer
    policy: LinearPolicy | None = None
    seed: int = 42
    iter_budget: int | None = None  # deterministic move-evaluation budget

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.t_trans_override is not None and not (
                0 <= self.t_trans_override <= self.t_max):
            raise ValueError("t_trans_override must lie in [0, t_max]")


def _score(inst: TspInstance, graph: SparseGraph,
           cfg: CascadeConfig) -> tuple[EdgeScores, NodePenalties | None]:
    if cfg.weights_path is not None:
        weights = load_weights(Path(cfg.weights_path).read_bytes())
        return sgn_forward(graph, inst, weights)
    return heuristic_scores(inst, graph), None


def _resolve_t_trans(cfg: CascadeConfig, n: int) -> float:
    if cfg.t_trans_override is not None:
        return float(cfg.t_trans_override)
    if cfg.policy is not None:
        return predict_t_trans(cfg.policy, n, cfg.t_max)
    # No policy: split the budget evenly between the phases.
    return cfg.t_max / 2.0


def solve(inst: TspInstance, cfg: CascadeConfig,
          graph: SparseGraph | None = None) -> tuple[Tour, ConvergenceTrace, dict]:
    """Run the full cascade and return the best tour, its trace and a report."""
    t0 = time.monotonic()
    rng_ls = np.random.default_rng(cfg.seed)
    rng_pbs = np.random.default_rng(cfg.seed ^ 1)

    if graph is None:
        graph = build_sparse_graph(inst, cfg.gamma)
    scores, penalties = _score(inst, graph, cfg)
    t_trans = _resolve_t_trans(cfg, inst.n)
    k = min(cfg.ls.candidates_k, graph.k)
    cands = candidate_lists(scores, graph, k)

    trace = ConvergenceTrace()
    ls_fraction = t_trans / cfg.t_max

    # Local-search phase.
    start = initial_tour(inst, graph)
    if cfg.iter_budget is not None:
        ls_budget = Budget(evaluations=int(round(cfg.iter_budget * ls_fraction)))
    else:
        ls_budget = Budget(seconds=t_trans)
    use_pi = cfg.ls.use_penalties and penalties is not None
    ls_cfg = LsConfig(lambda_depth=cfg.ls.lambda_depth, candidates_k=k,
                      use_penalties=use_pi,
                      restart_perturbation=cfg.ls.restart_perturbation)
    ls_best, ls_trace = local_search(inst, cands, penalties, start, ls_budget,
                                     rng_ls, ls_cfg)
    trace.extend(ls_trace)
    ls_elapsed = time.monotonic() - t0

    # Population phase, seeded with the local-search best. Unused time from an
    # early-finishing LS phase is donated to this phase via the shared clock.
    if cfg.iter_budget is not None:
        pbs_budget = Budget(evaluations=max(0, cfg.iter_budget - ls_budget.used))
    else:
        pbs_budget = Budget(seconds=max(0.0, cfg.t_max - ls_elapsed))

    best = ls_best.copy()
    generations = 0
    state = EaxState()
    if not pbs_budget.expired() and (cfg.iter_budget is not None
                                     or cfg.t_max - ls_elapsed > 0):
        pop = init_population(inst, graph, cfg.eax.population_size,
                              ls_best if t_trans > 0 else None, rng_pbs)
        pop_best = min(pop, key=lambda t: t.length)
        if pop_best.length < best.length:
            best = pop_best.copy()
        trace.record(time.monotonic() - t0, pop_best.length, phase="pbs")
        while not pbs_budget.expired():
            pop, gen_best = eax_generation(pop, inst, graph, scores, cfg.eax,
                                           rng_pbs, state=state, budget=pbs_budget)
            generations += 1
            if gen_best.length < best.length:
                best = gen_best.copy()
                trace.record(time.monotonic() - t0, best.length, phase="pbs")
        trace.t_end = max(trace.t_end, time.monotonic() - t0)

    report = {
        "name": inst.name,
        "n": inst.n,
        "length": best.length,
        "t_trans": t_trans,
        "ls_length": ls_best.length,
        "generations": generations,
        "stage": state.stage,
        "seed": cfg.seed,
        "wall_s": time.monotonic() - t0,
    }
    return best, trace, report
