"""测试图生成器"""
import pytest

from DrewLab.domain.errors import DrewValidationError
from DrewLab.infrastructure.graph_generators import (
    binary_tree,
    cycle_graph,
    disjoint_cycles,
    erdos_renyi,
    generate,
    to_networkx,
)


class TestGenerators:
    """生成器测试"""

    def test_cycle(self):
        """测试环"""
        g = cycle_graph(5)
        assert g.num_edges == 5
        assert set(g.degree.tolist()) == {2}

    def test_binary_tree_level_order(self):
        """测试完全二叉树按层序编号"""
        g = binary_tree(3)
        assert g.n == 15
        assert g.neighbors(0).tolist() == [1, 2]
        assert g.neighbors(1).tolist() == [0, 3, 4]

    def test_erdos_renyi_seeded(self):
        """测试随机图由种子决定"""
        assert erdos_renyi(20, 0.2, seed=1).edges == erdos_renyi(20, 0.2, seed=1).edges

    def test_disjoint_cycles(self):
        """测试不相交的环"""
        g = disjoint_cycles(3, 2)
        assert g.n == 6
        assert g.num_edges == 6
        assert (2, 3) not in g.edges

    def test_networkx_round_trip(self, c6):
        """测试与 networkx 互相转换"""
        assert sorted(to_networkx(c6).edges()) == list(c6.edges)

    @pytest.mark.parametrize(
        "kind,n",
        [
            ("cycle", 8),
            ("path", 8),
            ("star", 8),
            ("erdos_renyi", 8),
            ("disjoint_cycles", 8),
        ],
    )
    def test_generate_node_count(self, kind, n):
        """测试按名称生成"""
        assert generate(kind, n=n, p=0.3, depth=2, seed=0).n == n

    def test_generate_unknown_kind(self):
        """测试未知的图类型"""
        with pytest.raises(DrewValidationError, match="未知的图类型"):
            generate("grid", n=4, p=0.1, depth=1, seed=0)

    def test_short_cycle_rejected(self):
        """测试环长小于 3"""
        with pytest.raises(DrewValidationError):
            cycle_graph(2)
