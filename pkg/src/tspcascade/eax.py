"""Edge assembly crossover with score-guided cycle selection.

Offspring are built by partitioning the two parents' edge union into
alternating cycles, swapping the edges of one selected cycle, and repairing
the resulting subtours by greedy minimum-cost reconnection.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .core import SparseGraph, Tour, TspInstance, _round_metric, pair_distances
from .guidance import EdgeScores, score_ab_cycle

# Exhaustive reconnection scan below this size; sparse-graph-restricted above.
_EXACT_MERGE_LIMIT = 2000


@dataclass
class ABCycle:
    """Closed walk whose edges alternate between the two parents."""

    edges: list[tuple[int, int, str]]  # (u, v, origin in {"A", "B"})

    def __len__(self) -> int:
        return len(self.edges)


@dataclass
class IntermediateSolution:
    """Degree-2 edge set that may consist of several disjoint subtours."""

    subtours: list[np.ndarray]  # node sequences, each a closed cycle

    def node_count(self) -> int:
        return sum(len(s) for s in self.subtours)


@dataclass
class EaxConfig:
    population_size: int = 100
    n_children: int = 30
    eta: float = 0.5
    stage2_no_improve_generations: int = 50

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.n_children < 1:
            raise ValueError("n_children must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")


def _tour_edge_pairs(tour: Tour) -> list[tuple[int, int]]:
    nxt = np.roll(tour.order, -1)
    return [(int(u), int(v)) for u, v in zip(tour.order, nxt)]


def init_population(inst: TspInstance, graph: SparseGraph, size: int,
                    seed_tour: Tour | None, rng: np.random.Generator,
                    two_opt_passes: int = 1) -> list[Tour]:
    """Randomized nearest-neighbor tours, each polished by a capped 2-opt pass.

    A seed tour, when given, joins the population unchanged; the remaining
    diverse members keep crossover productive.
    """
    from .guidance import heuristic_scores, candidate_lists
    from .ls import Budget, LsConfig, local_search

    if size < 2:
        raise ValueError("population size must be >= 2")
    scores = heuristic_scores(inst, graph)
    k = min(5, graph.k)
    cands = candidate_lists(scores, graph, k)
    cfg = LsConfig(lambda_depth=2, candidates_k=k)
    pop = []
    if seed_tour is not None:
        pop.append(seed_tour.copy())
    while len(pop) < size:
        start = int(rng.integers(inst.n))
        tour = Tour.from_order(inst, _randomized_nn(inst, graph, start, rng))
        budget = Budget(evaluations=two_opt_passes * inst.n * k)
        tour, _ = local_search(inst, cands, None, tour, budget, rng, cfg)
        pop.append(tour)
    return pop


def _randomized_nn(inst: TspInstance, graph: SparseGraph, start: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Nearest-neighbor construction choosing randomly among the closest candidates."""
    from .core import distances_from

    n = inst.n
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int32)
    order[0] = start
    visited[start] = True
    for step in range(1, n):
        u = int(order[step - 1])
        options = [int(j) for j in graph.neighbors[u] if not visited[j]]
        if options:
            pick = options[int(rng.integers(min(3, len(options))))]
        else:
            rest = np.flatnonzero(~visited)
            pick = int(rest[np.argmin(distances_from(inst, u, rest))])
        order[step] = pick
        visited[pick] = True
    return order


def generate_ab_cycles(p_a: Tour, p_b: Tour,
                       rng: np.random.Generator) -> list[ABCycle]:
    """Partition the symmetric difference of the parents' edges into AB-cycles.

    Edges present in both parents are cancelled in pairs up front; the random
    walk then alternates parent origins, excising a closed cycle whenever it
    revisits a node in the same origin phase.
    """
    edges_a = {}
    for u, v in _tour_edge_pairs(p_a):
        key = (min(u, v), max(u, v))
        edges_a[key] = edges_a.get(key, 0) + 1
    adj = {}  # node -> {origin -> list of neighbor nodes}

    def add(u, v, origin):
        adj.setdefault(u, {"A": [], "B": []})[origin].append(v)
        adj.setdefault(v, {"A": [], "B": []})[origin].append(u)

    edges_b_kept = []
    for u, v in _tour_edge_pairs(p_b):
        key = (min(u, v), max(u, v))
        if edges_a.get(key, 0) > 0:
            edges_a[key] -= 1  # common edge: cancel the A/B pair
        else:
            edges_b_kept.append((u, v))
    for (u, v), count in edges_a.items():
        for _ in range(count):
            add(u, v, "A")
    for u, v in edges_b_kept:
        add(u, v, "B")

    remaining = {v for v, per in adj.items() if per["A"] or per["B"]}
    py_rng = random.Random(int(rng.integers(2**63)))
    cycles: list[ABCycle] = []

    while remaining:
        start = min(remaining)
        # Walk stack of (node, origin of the next edge to traverse).
        phase = "A" if adj[start]["A"] else "B"
        stack: list[tuple[int, str]] = [(start, phase)]
        path_edges: list[tuple[int, int, str]] = []
        seen = {(start, phase): 0}
        while stack:
            node, origin = stack[-1]
            bucket = adj[node][origin]
            if not bucket:
                # Dead end can only happen at the walk start with no edges left.
                stack.pop()
                if stack:
                    raise AssertionError("alternating walk stalled mid-path")
                break
            pick = py_rng.randrange(len(bucket))
            nxt = bucket.pop(pick)
            adj[nxt][origin].remove(node)
            path_edges.append((node, nxt, origin))
            nxt_phase = "B" if origin == "A" else "A"
            key = (nxt, nxt_phase)
            if key in seen:
                cut = seen[key]
                cycle_edges = path_edges[cut:]
                cycles.append(ABCycle(edges=cycle_edges))
                del path_edges[cut:]
                # Rewind the stack to the excision point and drop stale marks.
                while len(stack) > cut + 1:
                    seen.pop(stack.pop(), None)
                if cut == 0:
                    stack.pop()
                    seen.pop(key, None)
                    seen.pop((start, phase), None)
                    for v in list(remaining):
                        per = adj[v]
                        if not per["A"] and not per["B"]:
                            remaining.discard(v)
                    if remaining:
                        start = min(remaining)
                        phase = "A" if adj[start]["A"] else "B"
                        stack = [(start, phase)]
                        path_edges = []
                        seen = {(start, phase): 0}
            else:
                seen[key] = len(path_edges)
                stack.append(key)
        for v in list(remaining):
            per = adj[v]
            if not per["A"] and not per["B"]:
                remaining.discard(v)
    return cycles


def select_esets(cycles: list[ABCycle], scores: EdgeScores, cfg: EaxConfig,
                 rng: np.random.Generator,
                 eta: float | None = None) -> list[ABCycle]:
    """Up to n_children cycles without replacement: greedy by score, with
    probability eta a uniformly random unused cycle instead."""
    eta = cfg.eta if eta is None else eta
    scored = sorted(
        ((score_ab_cycle(c, scores), idx) for idx, c in enumerate(cycles)),
        key=lambda pair: (-pair[0], pair[1]),
    )
    ranked = [idx for _, idx in scored]
    used = set()
    picked = []
    while len(picked) < cfg.n_children and len(used) < len(cycles):
        if eta > 0 and rng.random() < eta:
            free = [i for i in range(len(cycles)) if i not in used]
            choice = free[int(rng.integers(len(free)))]
        else:
            choice = next(i for i in ranked if i not in used)
        used.add(choice)
        picked.append(cycles[choice])
    return picked


def apply_eset(p_a: Tour, eset: ABCycle, p_b: Tour,
               inst: TspInstance | None = None) -> IntermediateSolution:
    """Swap the selected cycle's edges into parent A and split into subtours."""
    order = p_a.order
    n = len(order)
    nb = np.empty((n, 2), dtype=np.int64)
    nb[order, 0] = np.roll(order, 1)
    nb[order, 1] = np.roll(order, -1)

    # Only E-set endpoints change neighbors; edit those as small lists.
    touched: dict[int, list[int]] = {}

    def slots(u: int) -> list[int]:
        return touched.setdefault(u, [int(nb[u, 0]), int(nb[u, 1])])

    for u, v, origin in eset.edges:
        if origin == "A":
            lu, lv = slots(u), slots(v)
            if v in lu:
                lu.remove(v)
            if u in lv:
                lv.remove(u)
    for u, v, origin in eset.edges:
        if origin == "B":
            slots(u).append(v)
            slots(v).append(u)
    for u, lst in touched.items():
        if len(lst) != 2:
            raise AssertionError(f"node {u} has degree {len(lst)} after crossover")
        nb[u, 0], nb[u, 1] = lst

    visited = np.zeros(n, dtype=bool)
    subtours = []
    for v in range(n):
        if visited[v]:
            continue
        seq = [v]
        visited[v] = True
        prev, cur = -1, v
        while True:
            a, b = int(nb[cur, 0]), int(nb[cur, 1])
            nxt = a if a != prev else b
            if nxt == v:
                break
            seq.append(nxt)
            visited[nxt] = True
            prev, cur = cur, nxt
        subtours.append(np.array(seq, dtype=np.int32))
    return IntermediateSolution(subtours=subtours)


def _cross_distances(inst: TspInstance, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer distance matrix between node index arrays a (rows) and b (cols)."""
    diff = inst.coords[a][:, None, :] - inst.coords[b][None, :, :]
    return _round_metric(np.hypot(diff[..., 0], diff[..., 1]), inst.metric)


def _min_merge_delta(inst: TspInstance, small: np.ndarray,
                     o_u: np.ndarray, o_v: np.ndarray, d_other: np.ndarray,
                     col_v: np.ndarray, restrict: SparseGraph | None):
    """Cheapest 2-edge reconnection between the smallest subtour and any other.

    Other-subtour edges arrive concatenated as (o_u, o_v, d_other); col_v maps
    each edge to the column holding its second endpoint, so all four endpoint
    pairings index one distance matrix. Returns (delta, edge index in small,
    column index into o_u, flip) where flip selects the splice orientation.
    """
    s = len(small)
    d_small = pair_distances(inst, small, np.roll(small, -1))

    cols = np.arange(len(o_u))
    if restrict is not None:
        allowed = np.zeros(restrict.n, dtype=bool)
        allowed[np.unique(restrict.neighbors[small])] = True
        allowed[small] = True
        mask = allowed[o_u] | allowed[o_v]
        if mask.any():
            cols = np.flatnonzero(mask)

    dist = _cross_distances(inst, small, o_u)  # rows follow small, cols o_u
    rows_v = (np.arange(s) + 1) % s
    d_uc = dist[:, cols]
    d_ud = dist[:, col_v[cols]]
    d_vc = dist[rows_v][:, cols]
    d_vd = dist[rows_v][:, col_v[cols]]

    base = d_small[:, None] + d_other[cols][None, :]
    # Orientation 1 connects a-c and b-d; orientation 2 connects a-d and b-c.
    delta1 = d_uc + d_vd - base
    delta2 = d_ud + d_vc - base
    i1 = int(np.argmin(delta1))
    i2 = int(np.argmin(delta2))
    best1 = (int(delta1.flat[i1]), i1 // len(cols), int(cols[i1 % len(cols)]), False)
    best2 = (int(delta2.flat[i2]), i2 // len(cols), int(cols[i2 % len(cols)]), True)
    return min(best1, best2)


def _splice(small: np.ndarray, other: np.ndarray, e_idx: int, f_idx: int,
            flip: bool) -> np.ndarray:
    """Merge two cycles by removing edge e from small and f from other."""
    s = np.roll(small, -(e_idx + 1))   # starts at b = s_v[e_idx], ends at a
    o = np.roll(other, -(f_idx + 1))   # starts at d = o_v[f_idx], ends at c
    if flip:
        # New edges a-d and c-b.
        return np.concatenate([s, o])
    # New edges a-c and d-b.
    return np.concatenate([s, o[::-1]])


def merge_subtours(im: IntermediateSolution, inst: TspInstance,
                   rng: np.random.Generator,
                   graph: SparseGraph | None = None) -> Tour:
    """Repeatedly splice the smallest subtour into another at minimum cost."""
    subtours = [s.copy() for s in im.subtours]
    restrict = graph if (graph is not None and inst.n > _EXACT_MERGE_LIMIT) else None
    while len(subtours) > 1:
        sizes = [(len(s), int(s.min()), i) for i, s in enumerate(subtours)]
        sizes.sort()
        small_i = sizes[0][2]
        small = subtours[small_i]
        others = [(j, s) for j, s in enumerate(subtours) if j != small_i]
        o_u = np.concatenate([s for _, s in others])
        o_v = np.concatenate([np.roll(s, -1) for _, s in others])
        d_other = pair_distances(inst, o_u, o_v)
        offsets = np.cumsum([0] + [len(s) for _, s in others])
        col_v = np.concatenate([off + (np.arange(len(s)) + 1) % len(s)
                                for (_, s), off in zip(others, offsets)])
        _, e_idx, col, flip = _min_merge_delta(inst, small, o_u, o_v, d_other,
                                               col_v, restrict)
        which = int(np.searchsorted(offsets, col, side="right")) - 1
        j = others[which][0]
        f_idx = col - int(offsets[which])
        merged = _splice(small, subtours[j], e_idx, f_idx, flip)
        keep = [s for i, s in enumerate(subtours) if i not in (small_i, j)]
        subtours = keep + [merged]
    order = subtours[0]
    return Tour.from_order(inst, order)


@dataclass
class EaxState:
    """Generation counter and stagnation tracking for the stage switch."""

    generation: int = 0
    no_improve: int = 0
    stage: int = 1


def eax_generation(pop: list[Tour], inst: TspInstance, graph: SparseGraph,
                   scores: EdgeScores, cfg: EaxConfig, rng: np.random.Generator,
                   state: EaxState | None = None,
                   budget=None) -> tuple[list[Tour], Tour]:
    """One generational step: each member is parent A once, its cyclic successor
    is parent B; the best strictly improving offspring replaces parent A."""
    if len(pop) < 2:
        raise ValueError("population must have at least 2 members")
    state = state or EaxState()
    eta = cfg.eta if state.stage == 1 else cfg.eta / 2.0
    perm = rng.permutation(len(pop))
    prev_best = min(t.length for t in pop)
    for i in range(len(pop)):
        a_idx = int(perm[i])
        b_idx = int(perm[(i + 1) % len(pop)])
        p_a, p_b = pop[a_idx], pop[b_idx]
        if budget is not None:
            budget.consume()  # pair overhead, so converged populations still drain the budget
            if budget.expired():
                break
        cycles = generate_ab_cycles(p_a, p_b, rng)
        if not cycles:
            continue
        esets = select_esets(cycles, scores, cfg, rng, eta=eta)
        best_child = None
        for eset in esets:
            im = apply_eset(p_a, eset, p_b)
            child = merge_subtours(im, inst, rng, graph=graph)
            if best_child is None or child.length < best_child.length:
                best_child = child
            if budget is not None:
                budget.consume(len(eset.edges) + len(im.subtours))
                if budget.expired():
                    break
        if best_child is not None and best_child.length < p_a.length:
            pop[a_idx] = best_child
        if budget is not None and budget.expired():
            break
    state.generation += 1
    best = min(pop, key=lambda t: t.length)
    if best.length < prev_best:
        state.no_improve = 0
    else:
        state.no_improve += 1
        if state.stage == 1 and state.no_improve >= cfg.stage2_no_improve_generations:
            state.stage = 2
            state.no_improve = 0
    return pop, best
