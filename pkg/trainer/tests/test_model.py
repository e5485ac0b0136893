"""Model export round trips and the reference forward pass."""
import numpy as np
import torch

from tspcascade import build_sparse_graph, load_weights, save_weights

from sgn_trainer import (ScoringNet, export_weights, from_weights,
                         gen_dataset, reference_forward, to_weights)


def fixed_example(seed=0, n=12, gamma=6):
    return gen_dataset([n], 1, seed=seed, gamma=gamma)[0]


class TestExport:
    def test_round_trip_identical_tensors(self):
        torch.manual_seed(0)
        model = ScoringNet(2, 8, 6)
        w = to_weights(model)
        again = to_weights(from_weights(load_weights(export_weights(model))))
        for a, b in zip(w.tensors(), again.tensors()):
            assert np.array_equal(a, b)

    def test_export_matches_solver_serializer(self):
        torch.manual_seed(1)
        model = ScoringNet(1, 8, 6)
        assert export_weights(model) == save_weights(to_weights(model))


class TestReferenceForward:
    def test_score_rows_sum_to_one(self):
        torch.manual_seed(2)
        model = ScoringNet(2, 8, 6)
        ex = fixed_example()
        beta, pi = reference_forward(ex.inst, ex.graph, to_weights(model))
        assert np.allclose(beta.sum(axis=1), 1.0, atol=1e-5)
        assert np.all(np.abs(pi) <= model.penalty_bound)

    def test_deterministic(self):
        torch.manual_seed(3)
        model = ScoringNet(1, 8, 6)
        ex = fixed_example(seed=1)
        w = to_weights(model)
        b1, p1 = reference_forward(ex.inst, ex.graph, w)
        b2, p2 = reference_forward(ex.inst, ex.graph, w)
        assert np.array_equal(b1, b2) and np.array_equal(p1, p2)

    def test_node_relabeling_equivariance(self):
        # permuting the node labels of an example permutes the outputs the
        # same way and leaves per-node score rows intact
        torch.manual_seed(4)
        model = ScoringNet(2, 8, 6)
        w = to_weights(model)
        ex = fixed_example(seed=2)
        n = ex.inst.n
        perm = np.random.default_rng(0).permutation(n)
        from tspcascade import Metric, TspInstance
        relabeled = TspInstance(name="perm", coords=ex.inst.coords[perm],
                                metric=Metric.EUC_2D)
        g2 = build_sparse_graph(relabeled, ex.graph.gamma)
        b1, p1 = reference_forward(ex.inst, ex.graph, w)
        b2, p2 = reference_forward(relabeled, g2, w)
        # row of node perm[i] in the original appears as row i relabeled;
        # columns may reorder only among equal-distance ties
        inv = np.empty(n, dtype=int)
        inv[perm] = np.arange(n)
        assert np.allclose(np.sort(b2, axis=1), np.sort(b1[perm], axis=1),
                           atol=1e-6)
        assert np.allclose(p2, p1[perm], atol=1e-6)
