import numpy as np
import pytest

from nlcs import (build_graph, clustering_coefficient, enumerate_triangles,
                  normalized_adjacency, read_edge_file)
from nlcs.graph import TriangleSet

from conftest import brute_force_triangles, dense_adjacency, random_graph


class TestBuildGraph:
    def test_single_edge(self):
        g = build_graph([(0, 1, 1)])
        assert g.num_nodes == 2
        assert g.degrees.tolist() == [1.0, 1.0]

    def test_k4_degrees(self):
        g = build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)])
        assert g.degrees.tolist() == [3.0, 3.0, 3.0, 3.0]

    def test_duplicate_edges_summed(self):
        g = build_graph([(0, 1, 1.0), (1, 0, 2.0), (0, 1)])
        assert g.adjacency()[0, 1] == 4.0

    def test_self_loops_dropped_and_counted(self):
        g = build_graph([(0, 0), (0, 1), (1, 1, 3.0)])
        assert g.self_loops_dropped == 2
        assert g.num_edges == 1

    def test_errors(self):
        with pytest.raises(ValueError):
            build_graph([])
        with pytest.raises(ValueError):
            build_graph([(0, -1)])
        with pytest.raises(ValueError):
            build_graph([(0, 1, 0.0)])
        with pytest.raises(ValueError):
            build_graph([(0, 5)], n=3)

    def test_degrees_match_recomputation(self):
        rng = np.random.default_rng(3)
        g = random_graph(rng, 25, 0.3, weighted=True)
        g.validate()  # exact same-representation recomputation
        A = dense_adjacency(g)
        assert np.abs(A.sum(axis=1) - g.degrees).max() < 1e-12
        assert np.array_equal(A, A.T)

    def test_unit_weight_degrees_exact(self):
        rng = np.random.default_rng(13)
        g = random_graph(rng, 25, 0.3)
        assert np.array_equal(dense_adjacency(g).sum(axis=1), g.degrees)


class TestNormalizedAdjacency:
    def test_single_edge_unit_degrees(self):
        g = build_graph([(0, 1)])
        S = normalized_adjacency(g)
        assert np.allclose(S.toarray(), [[0, 1], [1, 0]])

    def test_k3_entries(self):
        g = build_graph([(0, 1), (1, 2), (0, 2)])
        S = normalized_adjacency(g).toarray()
        off = S[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.5)
        assert np.allclose(np.diag(S), 0.0)

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 10, 0.4, weighted=True)
        A = dense_adjacency(g)
        d = A.sum(axis=1)
        Dinv = np.diag(1.0 / np.sqrt(d))
        assert np.abs(normalized_adjacency(g).toarray() - Dinv @ A @ Dinv).max() < 1e-12

    def test_isolated_node_row_is_zero(self):
        g = build_graph([(0, 1)], n=3)
        S = normalized_adjacency(g).toarray()
        assert not S[2].any() and not S[:, 2].any()

    def test_spectral_radius_at_most_one(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 20, 0.3)
        vals = np.linalg.eigvalsh(normalized_adjacency(g).toarray())
        assert np.abs(vals).max() <= 1 + 1e-10

    def test_deterministic_construction(self):
        rng = np.random.default_rng(9)
        g = random_graph(rng, 15, 0.3, weighted=True)
        S1 = normalized_adjacency(g)
        S2 = normalized_adjacency(g)
        assert np.array_equal(S1.matrix.toarray(), S2.matrix.toarray())


class TestTriangles:
    def test_k4(self):
        g = build_graph([(i, j) for i in range(4) for j in range(i + 1, 4)])
        tri = enumerate_triangles(g)
        assert tri.num_triangles == 4
        assert tri.hyperdegrees.tolist() == [6.0] * 4

    def test_path_has_none(self):
        g = build_graph([(0, 1), (1, 2), (2, 3)])
        tri = enumerate_triangles(g)
        assert tri.num_triangles == 0
        assert not tri.hyperdegrees.any()
        assert tri.codegree.nnz == 0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        g = random_graph(rng, 30, 0.3)
        tri = enumerate_triangles(g)
        expected = brute_force_triangles(dense_adjacency(g))
        assert [tuple(r) for r in tri.triples] == expected

    @pytest.mark.parametrize("seed,n,p", [(0, 12, 0.5), (1, 25, 0.25), (2, 40, 0.12)])
    def test_brute_force_various_densities(self, seed, n, p):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, p)
        tri = enumerate_triangles(g)
        assert [tuple(r) for r in tri.triples] == brute_force_triangles(dense_adjacency(g))

    def test_mass_identities(self):
        rng = np.random.default_rng(4)
        g = random_graph(rng, 25, 0.3, weighted=True)
        tri = enumerate_triangles(g)
        total = tri.weights.sum()
        assert np.isclose(tri.hyperdegrees.sum(), 6 * total)
        assert np.isclose(tri.codegree.sum(), 6 * total)

    def test_codegree_counts_common_neighbors(self):
        rng = np.random.default_rng(6)
        g = random_graph(rng, 20, 0.35)
        tri = enumerate_triangles(g)
        A = dense_adjacency(g)
        B = tri.codegree.toarray()
        n = g.num_nodes
        for i in range(n):
            for j in range(n):
                if A[i, j] > 0:
                    common = sum(1 for k in range(n) if A[i, k] > 0 and A[j, k] > 0)
                    assert B[i, j] == common
                else:
                    assert B[i, j] == 0

    def test_weighted_geomean_rule(self):
        g = build_graph([(0, 1, 2.0), (1, 2, 4.0), (0, 2, 0.5)])
        tri = enumerate_triangles(g)
        assert np.isclose(tri.weights[0], (2.0 * 4.0 * 0.5) ** (1 / 3))

    def test_custom_weight_rule(self):
        g = build_graph([(0, 1, 2.0), (1, 2, 4.0), (0, 2, 0.5)])
        tri = enumerate_triangles(g, weight_rule=lambda a, b, c: np.minimum(np.minimum(a, b), c))
        assert tri.weights[0] == 0.5

    def test_triple_list_canonicalized(self):
        # a shuffled triple list yields the same stored order and operators
        g = build_graph([(i, j) for i in range(5) for j in range(i + 1, 5)])
        tri = enumerate_triangles(g)
        rng = np.random.default_rng(0)
        perm = rng.permutation(tri.num_triangles)
        shuffled = TriangleSet(n=tri.n, triples=tri.triples[perm], weights=tri.weights[perm])
        assert np.array_equal(shuffled.triples, tri.triples)
        assert np.array_equal(shuffled.weights, tri.weights)


class TestClusteringCoefficient:
    def test_triangle_node(self):
        g = build_graph([(0, 1), (1, 2), (0, 2)])
        c = clustering_coefficient(g, enumerate_triangles(g))
        assert np.allclose(c, 1.0)

    def test_star_center(self):
        g = build_graph([(0, i) for i in range(1, 5)])
        c = clustering_coefficient(g, enumerate_triangles(g))
        assert c[0] == 0.0          # degree 4, no closed pairs
        assert np.all(c[1:] == 0.0)  # leaves have degree 1

    def test_matches_pair_enumeration(self):
        rng = np.random.default_rng(8)
        g = random_graph(rng, 30, 0.25)
        c = clustering_coefficient(g, enumerate_triangles(g))
        A = dense_adjacency(g)
        n = g.num_nodes
        for i in range(n):
            nbrs = np.flatnonzero(A[i])
            if nbrs.size < 2:
                assert c[i] == 0.0
                continue
            closed = sum(1 for a in range(nbrs.size) for b in range(a + 1, nbrs.size)
                         if A[nbrs[a], nbrs[b]] > 0)
            possible = nbrs.size * (nbrs.size - 1) / 2
            assert np.isclose(c[i], closed / possible)


class TestEdgeFile:
    def test_parse_with_comments_and_weights(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("# header\n0 1\n1 2 2.5  # inline\n\n2\t0\n")
        recs = read_edge_file(path)
        assert recs == [(0, 1, 1.0), (1, 2, 2.5), (2, 0, 1.0)]

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "edges.txt"
        path.write_text("0 1\nbroken line here\n")
        with pytest.raises(ValueError, match=r":2:"):
            read_edge_file(path)
