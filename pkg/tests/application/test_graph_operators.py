"""测试图算子"""
import numpy as np
import pytest

from DrewLab.application.graph_operators import batch_operators, operators_for
from DrewLab.domain.errors import DrewValidationError


class TestOperators:
    """单图算子测试"""

    def test_gamma_one_is_normalized_adjacency(self, graph8):
        """测试 Γ¹ = D^{-1/2} A D^{-1/2}"""
        adj = graph8.adjacency().toarray()
        deg = adj.sum(axis=1)
        expected = adj / np.sqrt(np.outer(deg, deg))
        np.testing.assert_allclose(
            operators_for(graph8).gamma_at(1).toarray(), expected, rtol=1e-15
        )

    def test_indicator_shell(self, p4):
        """测试 2 跳壳层的 0/1 矩阵"""
        ind = operators_for(p4).indicator_at(2).toarray()
        expected = np.zeros((4, 4))
        for i, j in [(0, 2), (2, 0), (1, 3), (3, 1)]:
            expected[i, j] = 1.0
        assert np.array_equal(ind, expected)

    def test_pairs_sorted(self, c6):
        """测试索引对按 (i, j) 排序"""
        rows, cols = operators_for(c6).pairs_at(2)
        keys = list(zip(rows.tolist(), cols.tolist(), strict=True))
        assert keys == sorted(keys)
        assert len(keys) == 12

    def test_k_max_is_diameter(self, p4, c6, two_c3):
        """测试有效直径"""
        assert operators_for(p4).k_max == 3
        assert operators_for(c6).k_max == 3
        assert operators_for(two_c3).k_max == 1

    def test_missing_hop_is_empty(self, p4):
        """测试超出直径的跳数返回空矩阵"""
        ops = operators_for(p4)
        assert ops.gamma_at(5).shape == (4, 4)
        assert ops.gamma_at(5).nnz == 0
        assert len(ops.pairs_at(5)[0]) == 0

    def test_k_max_limit(self, p4):
        """测试 k_max 限制预计算的跳数"""
        assert operators_for(p4, k_max=1).k_max == 1


class TestBatching:
    """批量拼接测试"""

    def test_block_diagonal(self, p4, c6):
        """测试块对角拼接与成员编号"""
        a, b = operators_for(p4), operators_for(c6)
        batch = batch_operators([a, b])
        assert batch.n == 10
        assert batch.num_graphs == 2
        assert batch.graph_offsets.tolist() == [0, 4]
        assert batch.membership().tolist() == [0] * 4 + [1] * 6
        gamma = batch.gamma_at(2).toarray()
        np.testing.assert_array_equal(gamma[:4, :4], a.gamma_at(2).toarray())
        np.testing.assert_array_equal(gamma[4:, 4:], b.gamma_at(2).toarray())
        assert not gamma[:4, 4:].any()

    def test_shifted_pairs(self, p4):
        """测试索引对按偏移平移"""
        batch = batch_operators([operators_for(p4)] * 3)
        rows, cols = batch.pairs_at(3)
        assert rows.tolist() == [0, 3, 4, 7, 8, 11]
        assert cols.tolist() == [3, 0, 7, 4, 11, 8]

    def test_nested_batch_offsets(self, p4):
        """测试已批量的算子可以再次拼接"""
        inner = batch_operators([operators_for(p4)] * 2)
        outer = batch_operators([inner, operators_for(p4)])
        assert outer.graph_offsets.tolist() == [0, 4, 8]

    def test_empty_batch(self):
        """测试空批次"""
        with pytest.raises(DrewValidationError):
            batch_operators([])
