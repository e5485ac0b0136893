"""Scoring network inference, weight serialization and fallback scores."""
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tspcascade.core import Metric, TspInstance, build_sparse_graph
from tspcascade.errors import BadMagic, TruncatedFile, VersionMismatch
from tspcascade.eax import ABCycle
from tspcascade.guidance import (EdgeScores, candidate_lists, heuristic_scores,
                                 load_weights, node_features, random_weights,
                                 save_weights, score_ab_cycle, sgn_forward)

from oracles import rand_instance


def forward(n=16, seed=0, layers=2, dim=8, gamma=6):
    rng = np.random.default_rng(seed)
    inst = rand_instance(n, seed)
    g = build_sparse_graph(inst, gamma)
    w = random_weights(layers, dim, g.k, rng)
    return sgn_forward(g, inst, w), g, inst, w


class TestWeightFile:
    @given(st.integers(0, 200))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_bit_identical(self, seed):
        rng = np.random.default_rng(seed)
        layers = int(rng.integers(0, 4))
        w = random_weights(layers, 8, 6, rng)
        again = load_weights(save_weights(w))
        assert (again.layer_count, again.dim, again.gamma) == (layers, 8, 6)
        for a, b in zip(w.tensors(), again.tensors()):
            assert a.dtype == b.dtype == np.float32
            assert np.array_equal(a, b)

    def test_bad_magic(self):
        blob = bytearray(save_weights(random_weights(1, 4, 3, np.random.default_rng(0))))
        blob[0] = ord("X")
        with pytest.raises(BadMagic):
            load_weights(bytes(blob))

    def test_version_mismatch(self):
        blob = bytearray(save_weights(random_weights(1, 4, 3, np.random.default_rng(0))))
        blob[4] = 9
        with pytest.raises(VersionMismatch):
            load_weights(bytes(blob))

    def test_truncation_detected(self):
        blob = save_weights(random_weights(1, 4, 3, np.random.default_rng(0)))
        with pytest.raises(TruncatedFile):
            load_weights(blob[:-5])

    def test_payload_corruption_detected(self):
        blob = bytearray(save_weights(random_weights(1, 4, 3, np.random.default_rng(0))))
        blob[40] ^= 0xFF
        with pytest.raises(TruncatedFile):
            load_weights(bytes(blob))

    def test_checksum_is_crc32_of_payload(self):
        blob = save_weights(random_weights(0, 4, 3, np.random.default_rng(1)))
        crc = int.from_bytes(blob[-4:], "little")
        assert crc == zlib.crc32(blob[:-4])


class TestForward:
    def test_beta_rows_sum_to_one(self):
        (scores, _), g, _, _ = forward()
        sums = scores.beta.sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-5)
        assert np.all(scores.beta >= 0)

    def test_deterministic_repeat_bit_identical(self):
        (s1, p1), g, inst, w = forward(seed=3)
        s2, p2 = sgn_forward(g, inst, w)
        assert np.array_equal(s1.beta, s2.beta)
        assert np.array_equal(p1.pi, p2.pi)

    def test_zero_decoder_gives_uniform_beta(self):
        # No conv layers and all-zero decoder: every edge logit is 0, so each
        # row is the uniform distribution over the k out-edges.
        (scores, pens), g, inst, w = forward(layers=0)
        for arr in (w.dec1_w, w.dec1_b, w.dec2_w, w.dec2_b, w.w_beta, w.w_pi):
            arr[...] = 0.0
        scores, pens = sgn_forward(g, inst, w)
        assert np.all(scores.beta == 1.0 / g.k)
        assert np.all(pens.pi == 0.0)

    def test_penalties_respect_bound(self):
        (_, pens), _, _, w = forward(seed=5)
        assert np.all(np.abs(pens.pi) <= w.penalty_bound)

    def test_node_features_fit_unit_square(self):
        inst = rand_instance(30, 7)
        f = node_features(inst)
        assert f.min() >= 0.0 and f.max() <= 1.0 + 1e-12


class TestEdgeScores:
    def test_undirected_is_max_of_directions_else_zero(self):
        inst = rand_instance(12, 8)
        g = build_sparse_graph(inst, 4)
        beta = np.random.default_rng(0).random((12, 4))
        s = EdgeScores(graph=g, beta=beta)
        i = 0
        j = int(g.neighbors[0, 1])
        expect = s.directed(i, j)
        if i in g.neighbors[j]:
            expect = max(expect, s.directed(j, i))
        assert s.undirected(i, j) == expect
        outside = next(v for v in range(12)
                       if v != i and v not in g.neighbors[i]
                       and i not in g.neighbors[v])
        assert s.undirected(i, outside) == 0.0


class TestHeuristicScores:
    def test_rows_sum_to_one_and_prefer_near(self):
        inst = rand_instance(40, 9)
        g = build_sparse_graph(inst, 10)
        s = heuristic_scores(inst, g)
        assert np.allclose(s.beta.sum(axis=1), 1.0)
        # neighbors sort by rounded distance, so scores must be non-increasing
        # wherever the rounded distance strictly increases
        strictly_farther = np.diff(g.edge_dist, axis=1) > 0
        assert np.all(np.diff(s.beta, axis=1)[strictly_farther] <= 1e-15)

    def test_translation_invariance_bit_exact(self):
        inst = rand_instance(25, 10)
        moved = TspInstance(name="m", coords=inst.coords + 1000.0,
                            metric=Metric.EUC_2D)
        g1 = build_sparse_graph(inst, 6)
        g2 = build_sparse_graph(moved, 6)
        assert np.array_equal(heuristic_scores(inst, g1).beta,
                              heuristic_scores(moved, g2).beta)

    def test_uniform_scaling_invariance_bit_exact(self):
        inst = rand_instance(25, 11)
        scaled = TspInstance(name="s", coords=inst.coords * 7.0,
                             metric=Metric.EUC_2D)
        g1 = build_sparse_graph(inst, 6)
        g2 = build_sparse_graph(scaled, 6)
        assert np.array_equal(heuristic_scores(inst, g1).beta,
                              heuristic_scores(scaled, g2).beta)


class TestCandidateLists:
    def test_sorted_descending_by_score(self):
        (scores, _), g, _, _ = forward(seed=12)
        c = candidate_lists(scores, g, 4)
        for i in range(g.n):
            vals = [scores.directed(i, int(j)) for j in c.lists[i]]
            assert vals == sorted(vals, reverse=True)
            assert len(set(int(j) for j in c.lists[i])) == 4


class TestCycleScore:
    def test_label_swap_negates_score(self):
        (scores, _), g, _, _ = forward(seed=13)
        rng = np.random.default_rng(0)
        for _ in range(50):
            m = int(rng.integers(1, 6))
            edges = []
            for _ in range(m):
                i = int(rng.integers(g.n))
                j = int(g.neighbors[i, rng.integers(g.k)])
                edges.append((i, j, "A"))
                edges.append((j, i, "B"))
            cyc = ABCycle(edges=edges)
            swapped = ABCycle(edges=[(u, v, "B" if o == "A" else "A")
                                     for u, v, o in edges])
            assert score_ab_cycle(cyc, scores) == pytest.approx(
                -score_ab_cycle(swapped, scores), abs=1e-12)
