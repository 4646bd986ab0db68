import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.transform import Rotation

from rankcal.errors import InsufficientPointsError, InvalidInputError
from rankcal.mst import (
    DistanceCache,
    mst_length,
    mst_length_all_removals,
    mst_length_kruskal,
    mst_removal_lengths,
    pairwise_distances,
)
from rankcal.reference import mst_length_bruteforce, prufer_to_edges

point_sets = st.tuples(st.integers(2, 6), st.integers(1, 3)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-100, 100, allow_nan=False))
)


class TestExamples:
    def test_collinear(self):
        assert mst_length([[0.0], [1.0], [10.0]]) == 10.0

    def test_unit_square(self):
        assert mst_length([[0, 0], [1, 0], [0, 1], [1, 1]]) == 3.0

    def test_coincident_pair(self):
        assert mst_length([[2.0, 3.0], [2.0, 3.0]]) == 0.0

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            mst_length([[1.0, 2.0]])
        with pytest.raises(InsufficientPointsError):
            mst_length_all_removals(DistanceCache([[0.0], [1.0]]))

    def test_removals_collinear(self):
        cache = DistanceCache([[0.0], [1.0], [10.0]])
        np.testing.assert_array_equal(mst_length_all_removals(cache), [9, 10, 1])

    def test_removals_coincident(self):
        cache = DistanceCache(np.ones((5, 2)))
        np.testing.assert_array_equal(mst_length_all_removals(cache), np.zeros(5))

    def test_removals_match_from_scratch(self, gen):
        P = gen.standard_normal((6, 3))
        got = mst_length_all_removals(DistanceCache(P))
        want = [mst_length(np.delete(P, i, axis=0)) for i in range(6)]
        np.testing.assert_array_equal(got, want)


class TestPrufer:
    def test_decodes_to_spanning_trees(self):
        m = 5
        seen = set()
        for code in np.ndindex(*(m,) * (m - 2)):
            edges = prufer_to_edges(code, m)
            assert len(edges) == m - 1
            parent = list(range(m))

            def find(i):
                while parent[i] != i:
                    i = parent[i]
                return i

            for a, b in edges:
                ra, rb = find(a), find(b)
                assert ra != rb
                parent[ra] = rb
            seen.add(frozenset(frozenset(e) for e in edges))
        assert len(seen) == m ** (m - 2)


class TestDistanceCache:
    def test_metric_properties(self, gen):
        P = gen.standard_normal((8, 3))
        D = DistanceCache(P).matrix
        np.testing.assert_array_equal(D, D.T)
        assert np.all(np.diag(D) == 0)
        lhs = D[:, :, None]
        rhs = D[:, None, :] + D[None, :, :].transpose(0, 2, 1)
        assert np.all(lhs <= rhs * (1 + 1e-9) + 1e-12)

    def test_backends_bit_identical(self, gen):
        X = np.round(gen.standard_normal((30, 7, 4)), 1)
        np.testing.assert_array_equal(pairwise_distances(X, True), pairwise_distances(X, False))
        np.testing.assert_array_equal(mst_removal_lengths(X, True), mst_removal_lengths(X, False))


class TestOracles:
    @given(point_sets)
    def test_exhaustive(self, P):
        want = mst_length_bruteforce(P)
        assert mst_length(P) == pytest.approx(want, rel=1e-12, abs=1e-12)

    @given(point_sets)
    def test_kruskal_agrees_with_prim(self, P):
        assert mst_length(P) == pytest.approx(mst_length_kruskal(P), rel=1e-12, abs=1e-12)


class TestInvariants:
    @given(point_sets, st.integers(0, 2 ** 32 - 1))
    def test_isometry(self, P, seed):
        d = P.shape[1]
        g = np.random.default_rng(seed)
        shift = g.uniform(-50, 50, d)
        if d == 3:
            R = Rotation.random(random_state=seed).as_matrix()
        elif d == 2:
            a = g.uniform(0, 2 * np.pi)
            R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        else:
            R = np.array([[-1.0]])
        L = mst_length(P)
        assert abs(mst_length(P @ R.T + shift) - L) < 1e-9 * (1 + L) * 100

    @given(point_sets, st.sampled_from([0.5, 2.0, 4.0, 0.125]))
    def test_scaling(self, P, s):
        L = mst_length(P)
        assert mst_length(s * P) == pytest.approx(s * L, rel=1e-12, abs=1e-300)

    def test_adding_point_bound(self, gen):
        for _ in range(200):
            m = int(gen.integers(3, 9))
            P = gen.standard_normal((m, 2))
            q = gen.standard_normal((1, 2)) * 2
            tree = minimum_spanning_tree(DistanceCache(P).matrix).toarray()
            L = mst_length(P)
            assert L == pytest.approx(tree.sum(), rel=1e-12)
            assert mst_length(np.vstack([P, q])) >= L - tree.max() - 1e-12
