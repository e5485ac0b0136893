"""Candidate-guided local search: 2-opt / Or-opt with don't-look bits and
double-bridge restarts, driven by a wall-clock or move-evaluation budget.

Move gains may be evaluated on penalty-adjusted distances, but reported tour
lengths always use raw distances.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import SparseGraph, Tour, TspInstance, distance, distances_from, tour_length
from .guidance import CandidateLists, NodePenalties
from .trace import ConvergenceTrace


@dataclass
class LsConfig:
    lambda_depth: int = 3
    candidates_k: int = 5
    use_penalties: bool = False
    restart_perturbation: int = 4  # edges cut by the double bridge

    def __post_init__(self):
        if self.lambda_depth not in (2, 3):
            raise ValueError("lambda_depth must be 2 or 3")
        if self.candidates_k < 1:
            raise ValueError("candidates_k must be >= 1")


@dataclass
class Budget:
    """Either a wall-clock deadline or a deterministic move-evaluation budget."""

    seconds: float | None = None
    evaluations: int | None = None
    _t0: float = field(default_factory=time.monotonic)
    used: int = 0

    def consume(self, k: int = 1) -> None:
        self.used += k

    def expired(self) -> bool:
        if self.evaluations is not None and self.used >= self.evaluations:
            return True
        if self.seconds is not None and time.monotonic() - self._t0 >= self.seconds:
            return True
        return False

    def elapsed(self) -> float:
        return time.monotonic() - self._t0

    def remaining_fraction(self) -> float:
        if self.evaluations is not None:
            return max(0.0, 1.0 - self.used / max(self.evaluations, 1))
        if self.seconds is not None:
            return max(0.0, 1.0 - self.elapsed() / max(self.seconds, 1e-9))
        return 1.0


def pi_distance(inst: TspInstance, penalties: NodePenalties, i: int, j: int) -> float:
    """Penalty-adjusted distance d(i,j) + pi_i + pi_j, for move evaluation only."""
    return distance(inst, i, j) + penalties.pi[i] + penalties.pi[j]


def initial_tour(inst: TspInstance, graph: SparseGraph) -> Tour:
    """Greedy nearest-neighbor over candidate edges, exact fallback when stuck."""
    n = inst.n
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int32)
    order[0] = 0
    visited[0] = True
    tree = cKDTree(inst.coords) if n > 256 else None
    for step in range(1, n):
        u = int(order[step - 1])
        nxt = -1
        for j in graph.neighbors[u]:
            if not visited[j]:
                nxt = int(j)
                break
        if nxt < 0:
            if tree is not None:
                k = min(graph.k * 2, n)
                while nxt < 0:
                    _, idx = tree.query(inst.coords[u], k=k)
                    for j in np.atleast_1d(idx):
                        if not visited[j]:
                            nxt = int(j)
                            break
                    if k >= n:
                        break
                    k = min(k * 2, n)
            if nxt < 0:
                rest = np.flatnonzero(~visited)
                nxt = int(rest[np.argmin(distances_from(inst, u, rest))])
        order[step] = nxt
        visited[nxt] = True
    return Tour.from_order(inst, order)


class _SearchState:
    """Array tour with position index, incremental length and a work queue."""

    def __init__(self, inst: TspInstance, tour: Tour, penalties: NodePenalties | None,
                 use_penalties: bool):
        self.inst = inst
        self.n = inst.n
        self.order = tour.order.astype(np.int32).copy()
        self.pos = np.empty(self.n, dtype=np.int32)
        self.pos[self.order] = np.arange(self.n, dtype=np.int32)
        self.length = tour.length
        self.pi = penalties.pi if (use_penalties and penalties is not None) else None
        self.queue = deque(range(self.n))
        self.queued = np.ones(self.n, dtype=bool)

    def succ(self, v: int) -> int:
        return int(self.order[(self.pos[v] + 1) % self.n])

    def pred(self, v: int) -> int:
        return int(self.order[(self.pos[v] - 1) % self.n])

    def move_cost(self, i: int, j: int) -> float:
        """Distance used for move evaluation (penalty-adjusted when enabled)."""
        d = distance(self.inst, i, j)
        if self.pi is None:
            return float(d)
        return d + self.pi[i] + self.pi[j]

    def push(self, v: int) -> None:
        if not self.queued[v]:
            self.queued[v] = True
            self.queue.append(v)

    def pop(self) -> int | None:
        while self.queue:
            v = self.queue.popleft()
            if self.queued[v]:
                self.queued[v] = False
                return int(v)
        return None

    def reverse_segment(self, a: int, b: int) -> None:
        """Reverse tour positions a..b (inclusive, circular), shorter side chosen."""
        n = self.n
        inner = (b - a) % n + 1
        if inner > n - inner:
            # Reverse the complement instead; the cycle is unchanged.
            a, b = (b + 1) % n, (a - 1) % n
            inner = (b - a) % n + 1
        for step in range(inner // 2):
            p = (a + step) % n
            q = (b - step) % n
            u, v = self.order[p], self.order[q]
            self.order[p], self.order[q] = v, u
            self.pos[u], self.pos[v] = q, p

    def rebuild_positions(self) -> None:
        self.pos[self.order] = np.arange(self.n, dtype=np.int32)


def _try_two_opt(state: _SearchState, cands: np.ndarray, a: int,
                 budget: Budget) -> bool:
    """First-improvement 2-opt around node a using its candidate list."""
    n = state.n
    for b in (state.succ(a), state.pred(a)):
        d_ab = state.move_cost(a, b)
        for c in cands[a]:
            c = int(c)
            if c == a or c == b:
                continue
            budget.consume()
            d_ac = state.move_cost(a, c)
            if d_ac >= d_ab:
                continue
            # Removing (a,b) and (c,d), adding (a,c) and (b,d), where d follows
            # c in the same direction b follows a.
            d_node = state.succ(c) if b == state.succ(a) else state.pred(c)
            if d_node == a:
                continue
            gain = d_ab + state.move_cost(c, d_node) - d_ac - state.move_cost(b, d_node)
            if gain <= 1e-9:
                continue
            # Penalty terms cancel pairwise in degree-preserving moves, so the
            # raw delta must agree; gate on it to keep lengths exactly monotone.
            raw_delta = (distance(state.inst, a, b) + distance(state.inst, c, d_node)
                         - distance(state.inst, a, c) - distance(state.inst, b, d_node))
            if raw_delta <= 0:
                continue
            if b == state.succ(a):
                state.reverse_segment(int(state.pos[b]), int(state.pos[c]))
            else:
                state.reverse_segment(int(state.pos[c]), int(state.pos[b]))
            state.length -= raw_delta
            for v in (a, b, c, d_node):
                state.push(int(v))
            return True
    return False


def _try_or_opt(state: _SearchState, cands: np.ndarray, a: int,
                budget: Budget) -> bool:
    """Relocate the 1..3-node segment starting at a next to a candidate node."""
    n = state.n
    inst = state.inst
    for seg_len in (1, 2, 3):
        if seg_len >= n - 2:
            break
        p0 = int(state.pos[a])
        seg = [int(state.order[(p0 + t) % n]) for t in range(seg_len)]
        first, last = seg[0], seg[-1]
        prv = int(state.order[(p0 - 1) % n])
        nxt = int(state.order[(p0 + seg_len) % n])
        if prv == last:
            break
        removed = (state.move_cost(prv, first) + state.move_cost(last, nxt)
                   - state.move_cost(prv, nxt))
        for c in cands[first]:
            c = int(c)
            if c in seg or c == prv:
                continue
            budget.consume()
            d = state.succ(c)
            if d in seg:
                continue
            base = state.move_cost(c, d)
            # Insert between c and d, trying both segment orientations.
            fwd = state.move_cost(c, first) + state.move_cost(last, d) - base
            rev = state.move_cost(c, last) + state.move_cost(first, d) - base
            flip = rev < fwd
            gain = removed - min(fwd, rev)
            if gain <= 1e-9:
                continue
            new_seg = seg[::-1] if flip else seg
            raw_removed = (distance(inst, prv, first) + distance(inst, last, nxt)
                           - distance(inst, prv, nxt))
            raw_added = (distance(inst, c, new_seg[0]) + distance(inst, new_seg[-1], d)
                         - distance(inst, c, d))
            if raw_removed - raw_added <= 0:
                continue
            order = state.order.tolist()
            piece = [order[(p0 + t) % n] for t in range(seg_len)]
            for t in sorted(((p0 + t) % n for t in range(seg_len)), reverse=True):
                order.pop(t)
            idx_c = order.index(c)
            insert_at = idx_c + 1
            for off, node in enumerate(new_seg):
                order.insert(insert_at + off, node)
            state.order = np.array(order, dtype=np.int32)
            state.rebuild_positions()
            state.length -= raw_removed - raw_added
            for v in (prv, nxt, c, d, first, last):
                state.push(int(v))
            return True
    return False


def double_bridge(order: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Classic 4-edge perturbation: splice three random cut segments."""
    n = len(order)
    if n < 8:
        cuts = sorted(rng.choice(np.arange(1, n), size=min(3, n - 1), replace=False))
        while len(cuts) < 3:
            cuts.append(cuts[-1])
    else:
        cuts = sorted(rng.choice(np.arange(1, n), size=3, replace=False))
    a, b, c = cuts
    return np.concatenate([order[:a], order[b:c], order[a:b], order[c:]])


def local_search(inst: TspInstance, cands: CandidateLists,
                 penalties: NodePenalties | None, start: Tour, budget: Budget,
                 rng: np.random.Generator,
                 cfg: LsConfig | None = None) -> tuple[Tour, ConvergenceTrace]:
    """Improve `start` until the budget expires; best raw length never worse."""
    cfg = cfg or LsConfig()
    best = start.copy()
    trace = ConvergenceTrace()
    trace.record(budget.elapsed(), best.length, phase="ls")
    if budget.expired():
        return best, trace

    lists = cands.lists
    state = _SearchState(inst, start, penalties, cfg.use_penalties)
    check_mask = 0x3F  # budget re-check cadence while draining the queue

    while not budget.expired():
        # Drain the don't-look queue to a local optimum.
        steps = 0
        while True:
            a = state.pop()
            if a is None:
                break
            improved = _try_two_opt(state, lists, a, budget)
            if not improved and cfg.lambda_depth >= 3:
                improved = _try_or_opt(state, lists, a, budget)
            if improved:
                state.push(a)
                if state.length < best.length:
                    best = Tour(order=state.order.copy(), length=state.length)
                    trace.record(budget.elapsed(), best.length, phase="ls")
            steps += 1
            if steps & check_mask == 0 and budget.expired():
                break
        if budget.expired():
            break
        # Local optimum: double-bridge kick from the best tour so far.
        kicked = double_bridge(best.order, rng)
        state.order = kicked.astype(np.int32)
        state.rebuild_positions()
        state.length = tour_length(inst, state.order)
        budget.consume(inst.n)
        state.queue = deque(range(state.n))
        state.queued[:] = True
    return best, trace
