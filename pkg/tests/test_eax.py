"""Crossover operator: cycle construction, E-set application, repair."""
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tspcascade.core import Tour, build_sparse_graph, tour_length
from tspcascade.eax import (ABCycle, EaxConfig, EaxState, apply_eset,
                            eax_generation, generate_ab_cycles,
                            init_population, merge_subtours, select_esets)
from tspcascade.guidance import EdgeScores, heuristic_scores
from tspcascade.ls import Budget

from oracles import rand_instance


def undirected(edges):
    return Counter((min(u, v), max(u, v)) for u, v in edges)


def tour_edges(order):
    n = len(order)
    return [(int(order[i]), int(order[(i + 1) % n])) for i in range(n)]


def random_parents(n, rng, inst):
    a = Tour.from_order(inst, rng.permutation(n))
    b = Tour.from_order(inst, rng.permutation(n))
    return a, b


class TestAbCycles:
    @given(st.integers(0, 400))
    @settings(max_examples=60, deadline=None)
    def test_alternation_and_symmetric_difference(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 50))
        inst = rand_instance(n, seed)
        p_a, p_b = random_parents(n, rng, inst)
        cycles = generate_ab_cycles(p_a, p_b, rng)

        e_a = undirected(tour_edges(p_a.order))
        e_b = undirected(tour_edges(p_b.order))
        sym_diff = (e_a - e_b) + (e_b - e_a)

        combined = Counter()
        for cyc in cycles:
            assert len(cyc.edges) % 2 == 0 and len(cyc.edges) >= 2
            # consecutive edges alternate origin and share an endpoint
            for i, (u, v, origin) in enumerate(cyc.edges):
                nu, nv, next_origin = cyc.edges[(i + 1) % len(cyc.edges)]
                assert origin != next_origin
                assert v == nu
                combined[(min(u, v), max(u, v))] += 1
        assert combined == sym_diff

    def test_identical_parents_give_no_cycles(self):
        rng = np.random.default_rng(0)
        inst = rand_instance(12, 0)
        t = Tour.from_order(inst, rng.permutation(12))
        assert generate_ab_cycles(t, t.copy(), rng) == []


class TestEsetApplication:
    @given(st.integers(0, 400))
    @settings(max_examples=60, deadline=None)
    def test_degree_two_and_composition_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 50))
        inst = rand_instance(n, seed)
        p_a, p_b = random_parents(n, rng, inst)
        cycles = generate_ab_cycles(p_a, p_b, rng)
        if not cycles:
            return
        eset = cycles[int(rng.integers(len(cycles)))]
        im = apply_eset(p_a, eset, p_b)

        # every node appears exactly once across the subtours
        flat = np.concatenate(im.subtours)
        assert np.array_equal(np.sort(flat), np.arange(n))

        # edge multiset identity: E_C = (E_A \ eset_A) + eset_B
        e_a = undirected(tour_edges(p_a.order))
        eset_a = undirected([(u, v) for u, v, o in eset.edges if o == "A"])
        eset_b = undirected([(u, v) for u, v, o in eset.edges if o == "B"])
        expect = (e_a - eset_a) + eset_b
        got = Counter()
        for sub in im.subtours:
            if len(sub) == 2:  # 2-node subtour has a single undirected edge
                got[(min(int(sub[0]), int(sub[1])),
                     max(int(sub[0]), int(sub[1])))] += 1
            else:
                got += undirected(tour_edges(sub))
        assert got == expect


class TestMerge:
    @given(st.integers(0, 400))
    @settings(max_examples=40, deadline=None)
    def test_merge_yields_valid_tour(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 50))
        inst = rand_instance(n, seed)
        g = build_sparse_graph(inst, min(10, n - 1))
        p_a, p_b = random_parents(n, rng, inst)
        cycles = generate_ab_cycles(p_a, p_b, rng)
        if not cycles:
            return
        im = apply_eset(p_a, cycles[0], p_b)
        t = merge_subtours(im, inst, rng, g)
        assert np.array_equal(np.sort(t.order), np.arange(n))
        assert t.length == tour_length(inst, t.order)


class TestSelection:
    def make_cycles_with_scores(self, scores_by_cycle):
        # one synthetic single-edge-pair cycle per requested score
        cycles, beta = [], np.zeros((2, 1))
        inst = rand_instance(4, 0)
        g = build_sparse_graph(inst, 3)
        b = np.zeros((4, 3))
        es = EdgeScores(graph=g, beta=b)
        out = []
        for s in scores_by_cycle:
            i = 0
            j = int(g.neighbors[0, 0])
            out.append(ABCycle(edges=[(i, j, "B"), (j, i, "A")]))
        return out, es

    def test_eta_zero_is_descending_by_score(self):
        rng = np.random.default_rng(0)
        inst = rand_instance(30, 1)
        g = build_sparse_graph(inst, 8)
        scores = heuristic_scores(inst, g)
        p_a, p_b = random_parents(30, rng, inst)
        cycles = generate_ab_cycles(p_a, p_b, rng)
        cfg = EaxConfig(population_size=2, n_children=len(cycles), eta=0.0)
        picked = select_esets(cycles, scores, cfg, rng)
        from tspcascade.guidance import score_ab_cycle
        vals = [score_ab_cycle(c, scores) for c in picked]
        assert vals == sorted(vals, reverse=True)
        assert len(picked) == len(cycles)

    def test_count_capped_at_n_children(self):
        rng = np.random.default_rng(1)
        inst = rand_instance(40, 2)
        g = build_sparse_graph(inst, 8)
        scores = heuristic_scores(inst, g)
        p_a, p_b = random_parents(40, rng, inst)
        cycles = generate_ab_cycles(p_a, p_b, rng)
        cfg = EaxConfig(population_size=2, n_children=2)
        assert len(select_esets(cycles, scores, cfg, rng)) <= 2


class TestGeneration:
    def test_population_best_never_worsens(self):
        rng = np.random.default_rng(0)
        inst = rand_instance(60, 3)
        g = build_sparse_graph(inst, 10)
        scores = heuristic_scores(inst, g)
        cfg = EaxConfig(population_size=8, n_children=5)
        pop = init_population(inst, g, 8, None, rng)
        state = EaxState()
        best = min(t.length for t in pop)
        for _ in range(15):
            pop, gen_best = eax_generation(pop, inst, g, scores, cfg, rng, state)
            assert len(pop) == 8
            assert gen_best.length <= best
            best = gen_best.length
            for t in pop:
                assert t.length == tour_length(inst, t.order)

    def test_stage_switch_after_stagnation(self):
        rng = np.random.default_rng(1)
        inst = rand_instance(10, 4)
        g = build_sparse_graph(inst, 9)
        scores = heuristic_scores(inst, g)
        cfg = EaxConfig(population_size=4, n_children=2,
                        stage2_no_improve_generations=3)
        pop = init_population(inst, g, 4, None, rng)
        state = EaxState()
        for _ in range(60):
            pop, _ = eax_generation(pop, inst, g, scores, cfg, rng, state)
            if state.stage == 2:
                break
        assert state.stage == 2

    def test_budget_drains_even_when_converged(self):
        rng = np.random.default_rng(2)
        inst = rand_instance(10, 5)
        g = build_sparse_graph(inst, 9)
        scores = heuristic_scores(inst, g)
        cfg = EaxConfig(population_size=4, n_children=2)
        t = Tour.from_order(inst, np.arange(10))
        pop = [t.copy() for _ in range(4)]  # identical members: no cycles
        budget = Budget(evaluations=3)
        eax_generation(pop, inst, g, scores, cfg, rng, budget=budget)
        assert budget.used >= 3

    def test_seed_tour_joins_population(self):
        rng = np.random.default_rng(3)
        inst = rand_instance(30, 6)
        g = build_sparse_graph(inst, 8)
        seed = Tour.from_order(inst, np.arange(30))
        pop = init_population(inst, g, 6, seed, rng)
        assert any(np.array_equal(t.order, seed.order) for t in pop)
        assert len(pop) == 6

    def test_rejects_tiny_population(self):
        with pytest.raises(ValueError):
            EaxConfig(population_size=1)
