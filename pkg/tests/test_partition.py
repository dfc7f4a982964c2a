"""Tests for block partitions and block views."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pifslp import partition as pt
from pifslp.ci_model import assemble_instance, generate_scenario


class TestMakePartition:
    def test_adjacent(self):
        p = pt.make_partition(8, 4, "adjacent")
        assert [list(s) for s in p.selectors] == [[0, 1], [2, 3], [4, 5], [6, 7]]

    def test_antenna_pair(self):
        p = pt.make_partition(8, 4, "antenna_pair")
        assert [list(s) for s in p.selectors] == [[0, 4], [1, 5], [2, 6], [3, 7]]

    def test_scalar(self):
        p = pt.make_partition(8, 8, "scalar")
        assert p.sizes == (1,) * 8

    def test_uneven_adjacent_front_loads(self):
        assert pt.make_partition(10, 4).sizes == (3, 3, 2, 2)

    @pytest.mark.parametrize("lists", [[[0, 1], [1, 2, 3]], [[0, 1], [2]], [[0, 1], [2, 3, 4]]])
    def test_explicit_rejects_bad_cover(self, lists):
        with pytest.raises(pt.PartitionError):
            pt.make_partition(4, 2, "explicit", lists)

    def test_explicit_ok(self):
        p = pt.make_partition(4, 2, "explicit", [[3, 0], [1, 2]])
        assert p.n_blocks == 2

    @pytest.mark.parametrize("args", [(8, 3, "antenna_pair"), (8, 4, "scalar"), (8, 9, "adjacent"),
                                      (8, 0, "adjacent"), (8, 2, "bogus")])
    def test_invalid(self, args):
        with pytest.raises(pt.PartitionError):
            pt.make_partition(*args)

    @given(dim=st.integers(1, 64), data=st.data())
    def test_cover_invariant(self, dim, data):
        n = data.draw(st.integers(1, dim))
        p = pt.make_partition(dim, n)
        allidx = np.sort(np.concatenate(p.selectors))
        np.testing.assert_array_equal(allidx, np.arange(dim))
        assert sum(p.sizes) == dim

    def test_dict_roundtrip(self):
        p = pt.make_partition(12, 3)
        assert pt.BlockPartition.from_dict(p.to_dict(), 12).selectors[1].tolist() == p.selectors[1].tolist()


class TestBlockViews:
    def test_identity_columns(self):
        p = pt.make_partition(4, 2)
        np.testing.assert_array_equal(pt.block_columns(np.eye(4), p, 0), np.eye(4)[:, :2])

    def test_out_of_range(self):
        p = pt.make_partition(4, 2)
        with pytest.raises(IndexError):
            pt.gather(np.zeros(4), p, 2)

    @settings(max_examples=30)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 12))
    def test_rearrangement(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((6, 12))
        p = pt.make_partition(12, n)
        for _ in range(5):
            x = rng.standard_normal(12)
            s = sum(pt.block_columns(A, p, i) @ pt.gather(x, p, i) for i in range(n))
            assert np.linalg.norm(s - A @ x) <= 1e-12 * np.linalg.norm(A, 2) * np.linalg.norm(x)

    def test_scatter_gather_roundtrip(self, rng):
        p = pt.make_partition(10, 3, "explicit", [[0, 5, 9], [1, 2, 3, 4], [6, 7, 8]])
        x = rng.standard_normal(10)
        y = np.zeros(10)
        for i in range(3):
            pt.scatter(y, p, i, pt.gather(x, p, i))
        np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(pt.join_blocks(pt.split_blocks(x, p), p), x)


class TestGram:
    def test_orthogonal_equal_norm(self):
        A = np.array([[np.sqrt(5), 0], [0, np.sqrt(5)]])
        assert pt.antenna_pair_gram(A) == pytest.approx(5.0)

    def test_instance_pairs_are_scaled_identity(self):
        inst = assemble_instance(generate_scenario(6, 4, 4, seed=2))
        p = pt.make_partition(12, 6, "antenna_pair")
        for i in range(6):
            A_i = pt.block_columns(inst.A, p, i)
            d = pt.antenna_pair_gram(A_i)
            np.testing.assert_allclose(A_i.T @ A_i, d * np.eye(2), rtol=1e-9, atol=1e-9 * d)

    def test_adjacent_violates(self, rng):
        with pytest.raises(pt.StructureError):
            pt.antenna_pair_gram(rng.standard_normal((6, 2)))


class TestSpectralNorm:
    def test_scaled_identity(self):
        assert pt.spectral_norm_sq(2.0 * np.eye(2)) == pytest.approx(4.0)

    def test_diag(self):
        assert pt.spectral_norm_sq(np.array([[3.0, 0.0], [0.0, 4.0]])) == pytest.approx(16.0)

    @pytest.mark.parametrize("cols", [1, 2, 3, 5])
    def test_matches_dense_eigensolver(self, rng, cols):
        for _ in range(20):
            A = rng.standard_normal((6, cols))
            ref = np.linalg.svd(A, compute_uv=False)[0] ** 2
            assert abs(pt.spectral_norm_sq(A) - ref) <= 1e-9 * ref
