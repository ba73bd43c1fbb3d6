"""Balanced subsampling and mutual k-NN graph invariants."""

import numpy as np
import pytest

from topodistill.errors import DegenerateCloudError, EmptySideError
from topodistill.knngraph import (PointCloud, build_mutual_knn, subsample_balanced)


def random_cloud(rng, n, d=3):
    pts = rng.standard_normal((n, d))
    return PointCloud(points=pts, side_tags=["real"] * n)


class TestSubsample:
    def test_real_block_comes_first_and_sorted(self):
        rng = np.random.default_rng(0)
        real = rng.standard_normal((20, 3))
        syn = rng.standard_normal((7, 3))
        cloud = subsample_balanced(real, syn, n_c=5, seed=[4, 303, 0])
        assert cloud.side_tags[:5] == ["real"] * 5
        assert cloud.side_tags[5:] == ["synthetic"] * 5
        assert cloud.real_indices == sorted(cloud.real_indices)
        assert cloud.syn_indices == sorted(cloud.syn_indices)
        for pos, src in enumerate(cloud.real_indices):
            assert np.array_equal(cloud.points[pos], real[src])
        for pos, src in enumerate(cloud.syn_indices):
            assert np.array_equal(cloud.points[5 + pos], syn[src])

    def test_selection_ignores_feature_values(self):
        # same sizes + seed must select the same indices regardless of content
        rng = np.random.default_rng(1)
        for trial in range(10):
            n_real, n_syn = int(rng.integers(3, 30)), int(rng.integers(3, 30))
            a = subsample_balanced(rng.standard_normal((n_real, 4)),
                                   rng.standard_normal((n_syn, 4)),
                                   n_c=6, seed=[7, trial])
            b = subsample_balanced(rng.standard_normal((n_real, 4)) * 100,
                                   rng.standard_normal((n_syn, 4)) * 100,
                                   n_c=6, seed=[7, trial])
            assert a.real_indices == b.real_indices
            assert a.syn_indices == b.syn_indices

    def test_small_side_taken_whole(self):
        rng = np.random.default_rng(2)
        cloud = subsample_balanced(rng.standard_normal((3, 2)),
                                   rng.standard_normal((12, 2)), n_c=8, seed=0)
        assert cloud.real_indices == [0, 1, 2]
        assert len(cloud.syn_indices) == 8

    def test_empty_side_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(EmptySideError):
            subsample_balanced(np.zeros((0, 2)), rng.standard_normal((4, 2)),
                               n_c=2, seed=0)

    def test_side_view_splits_by_tag(self):
        rng = np.random.default_rng(4)
        cloud = subsample_balanced(rng.standard_normal((6, 2)),
                                   rng.standard_normal((6, 2)), n_c=4, seed=1)
        assert cloud.side_view("real").shape == (4, 2)
        assert cloud.side_view("synthetic").shape == (4, 2)


class TestMutualKnn:
    def test_edges_are_mutual_and_canonical(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            cloud = random_cloud(rng, int(rng.integers(4, 15)))
            graph = build_mutual_knn(cloud, k=3)
            pts = cloud.points
            seen = set()
            for u, v, w in graph.edges:
                assert u < v
                assert (u, v) not in seen
                seen.add((u, v))
                assert w == pytest.approx(np.linalg.norm(pts[u] - pts[v]), abs=1e-12)
            weights = [w for _, _, w in graph.edges]
            assert weights == sorted(weights)

    def test_mutuality_from_scratch(self):
        # an edge exists iff each endpoint is among the other's k nearest
        rng = np.random.default_rng(11)
        cloud = random_cloud(rng, 12)
        k = 3
        pts = cloud.points
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        knn = []
        for u in range(12):
            order = sorted((dist[u, v], v) for v in range(12) if v != u)
            knn.append({v for _, v in order[:k]})
        want = {(u, v) for u in range(12) for v in knn[u]
                if u < v and u in knn[v]}
        got = {(u, v) for u, v, _ in build_mutual_knn(cloud, k).edges}
        assert got == want

    def test_monotone_in_k(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            cloud = random_cloud(rng, int(rng.integers(5, 20)))
            for k in range(1, 6):
                small = {(u, v) for u, v, _ in build_mutual_knn(cloud, k).edges}
                large = {(u, v) for u, v, _ in build_mutual_knn(cloud, k + 1).edges}
                assert small <= large

    def test_scale_equivariance(self):
        rng = np.random.default_rng(13)
        for scale in (0.3, 2.0, 17.5):
            pts = rng.standard_normal((10, 3))
            base = build_mutual_knn(PointCloud(pts, ["real"] * 10), k=4)
            scaled = build_mutual_knn(PointCloud(pts * scale, ["real"] * 10), k=4)
            assert [(u, v) for u, v, _ in base.edges] == [(u, v) for u, v, _ in scaled.edges]
            for (_, _, w0), (_, _, w1) in zip(base.edges, scaled.edges):
                assert w1 == pytest.approx(scale * w0, rel=1e-12)

    def test_large_k_gives_complete_graph(self):
        rng = np.random.default_rng(14)
        cloud = random_cloud(rng, 6)
        graph = build_mutual_knn(cloud, k=5)
        assert len(graph.edges) == 15

    def test_single_point_rejected(self):
        cloud = PointCloud(np.zeros((1, 2)), ["real"])
        with pytest.raises(DegenerateCloudError):
            build_mutual_knn(cloud, k=1)

    def test_max_weight_of_edgeless_graph(self):
        # two tight pairs far apart with k=1: no cross-pair edges
        pts = np.array([[0.0, 0.0], [0.1, 0.0], [50.0, 0.0], [50.1, 0.0]])
        graph = build_mutual_knn(PointCloud(pts, ["real"] * 4), k=1)
        assert graph.max_weight() == pytest.approx(0.1)
        adj = graph.adjacency()
        assert adj[0] == {1} and adj[2] == {3}
