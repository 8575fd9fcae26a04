"""测试图实体"""
import numpy as np
import pytest

from DrewLab.domain.errors import DrewValidationError
from DrewLab.domain.graph import build_graph, disjoint_union


class TestBuildGraph:
    """build_graph 测试"""

    def test_duplicates_and_reverse_edges_collapse(self):
        """测试重复边与反向边去重"""
        g = build_graph([(0, 1), (1, 0), (1, 2), (1, 2)], 3)
        assert g.edges == ((0, 1), (1, 2))
        assert g.num_edges == 2
        assert g.degree.tolist() == [1, 2, 1]

    def test_neighbors_sorted(self):
        """测试邻居升序"""
        g = build_graph([(2, 0), (0, 3), (0, 1)], 4)
        assert g.neighbors(0).tolist() == [1, 2, 3]
        assert g.neighbors(3).tolist() == [0]

    def test_adjacency_symmetric(self, p4):
        """测试邻接矩阵对称"""
        adj = p4.adjacency().toarray()
        assert np.array_equal(adj, adj.T)
        assert adj.sum() == 2 * p4.num_edges

    def test_self_loop_raises_error(self):
        """测试自环引发错误"""
        with pytest.raises(DrewValidationError, match="不允许自环"):
            build_graph([(0, 1), (1, 1)], 2)

    def test_out_of_range_endpoint_raises_error(self):
        """测试端点越界引发错误"""
        with pytest.raises(DrewValidationError, match="边端点越界"):
            build_graph([(0, 3)], 3)

    def test_isolated_node_raises_error(self):
        """测试孤立节点引发错误"""
        with pytest.raises(DrewValidationError, match="孤立节点"):
            build_graph([(0, 1)], 3)

    def test_isolated_node_allowed_with_flag(self):
        """测试 allow_isolated 允许孤立节点"""
        g = build_graph([], 1, allow_isolated=True)
        assert g.n == 1
        assert g.degree.tolist() == [0]

    def test_zero_nodes_raises_error(self):
        """测试节点数为 0 引发错误"""
        with pytest.raises(DrewValidationError):
            build_graph([], 0)


class TestGraphOperations:
    """图变换测试"""

    def test_permute_relabels_edges(self, p4):
        """测试节点置换"""
        g = p4.permute([3, 2, 1, 0])
        assert g.edges == ((0, 1), (1, 2), (2, 3))

    def test_invalid_permutation_raises_error(self, p4):
        """测试非法置换引发错误"""
        with pytest.raises(DrewValidationError):
            p4.permute([0, 0, 1, 2])

    def test_disjoint_union_offsets(self, p4, c6):
        """测试不相交并图的节点偏移"""
        union, offsets = disjoint_union([p4, c6])
        assert union.n == 10
        assert offsets.tolist() == [0, 4]
        assert union.num_edges == p4.num_edges + c6.num_edges
        assert (4, 5) in union.edges
        assert (3, 4) not in union.edges
