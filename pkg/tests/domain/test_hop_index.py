"""测试跳数索引与跳数矩阵"""
import networkx as nx
import numpy as np
import pytest

from DrewLab.domain.errors import OutOfRangeError
from DrewLab.domain.graph import build_graph
from DrewLab.domain.hop_index import (
    compute_hop_index,
    eccentricity_cap,
    hop_matrix,
)
from DrewLab.infrastructure.graph_generators import cycle_graph, to_networkx


def _floyd_warshall(g) -> np.ndarray:
    dist = nx.floyd_warshall_numpy(to_networkx(g), nodelist=range(g.n))
    return np.where(np.isinf(dist), -1, dist).astype(np.int64)


class TestComputeHopIndex:
    """跳数索引测试"""

    def test_path_shells(self, p4):
        """测试 P4 的壳层"""
        hi = compute_hop_index(p4, 3)
        assert hi.shell(0, 1).tolist() == [1]
        assert hi.shell(0, 2).tolist() == [2]
        assert hi.shell(0, 3).tolist() == [3]
        assert hi.shell(1, 1).tolist() == [0, 2]
        assert hi.shell(1, 3).tolist() == []

    def test_ring_shells_have_two_nodes_until_antipode(self):
        """测试环上每个壳层 2 个节点，对径点处 1 个（偶数环）"""
        for length in (7, 8):
            g = cycle_graph(length)
            hi = compute_hop_index(g, length // 2)
            for k in range(1, length // 2):
                assert len(hi.shell(0, k)) == 2
            expected = 1 if length % 2 == 0 else 2
            assert len(hi.shell(0, length // 2)) == expected

    def test_k_max_truncates(self, p4):
        """测试 k_max 截断：更远的节点不可见"""
        hi = compute_hop_index(p4, 1)
        assert hi.distance(0, 3) is None
        with pytest.raises(OutOfRangeError):
            hi.shell(0, 2)

    def test_disconnected_pairs_unreachable(self, two_c3):
        """测试不连通的节点对不在任何壳层中"""
        hi = compute_hop_index(two_c3, 5)
        assert hi.distance(0, 4) is None
        assert eccentricity_cap(two_c3, hi) == 1

    @pytest.mark.parametrize("threads", [1, 4])
    def test_matches_floyd_warshall_on_random_graphs(self, threads):
        """测试与 Floyd-Warshall 的距离完全一致（50 个随机图）"""
        rng = np.random.default_rng(0)
        for trial in range(50):
            n = int(rng.integers(2, 51))
            p = float(rng.uniform(0.02, 0.3))
            nxg = nx.gnp_random_graph(n, p, seed=trial)
            g = build_graph(nxg.edges(), n, allow_isolated=True)
            hi = compute_hop_index(g, max(1, n - 1), threads=threads)
            assert hi.dist is not None
            assert np.array_equal(hi.dist, _floyd_warshall(g))

    def test_chunked_bfs_matches_single_chunk(self, monkeypatch):
        """测试源节点分块不影响结果"""
        import DrewLab.domain.hop_index as module

        edges = nx.gnp_random_graph(40, 0.08, seed=3).edges()
        g = build_graph(edges, 40, allow_isolated=True)
        whole = compute_hop_index(g, 39)
        monkeypatch.setattr(module, "BFS_CHUNK_SIZE", 7)
        chunked = compute_hop_index(g, 39, threads=3)
        for k in range(1, 40):
            assert (whole.shells[k] != chunked.shells[k]).nnz == 0


class TestHopMatrix:
    """Γ^k 测试"""

    def test_values_are_degree_normalized(self, p4):
        """测试 γ_ij = 1/sqrt(d_i d_j)"""
        hi = compute_hop_index(p4, 3)
        hm = hop_matrix(p4, hi, 2)
        dense = hm.to_csr().toarray()
        assert dense[0, 2] == pytest.approx(1 / np.sqrt(1 * 2))
        assert dense[1, 3] == pytest.approx(1 / np.sqrt(2 * 1))
        assert dense[0, 1] == 0.0
        assert np.array_equal(dense, dense.T)

    def test_triplets_sorted(self):
        """测试三元组按 (i, j) 排序"""
        g = cycle_graph(9)
        hm = hop_matrix(g, compute_hop_index(g, 4), 3)
        keys = list(zip(hm.rows.tolist(), hm.cols.tolist(), strict=True))
        assert keys == sorted(keys)
        assert len(hm) == 2 * 9

    def test_cycle_direct_term_is_half(self):
        """测试偶数环对径点的 Γ^r 为 1/2"""
        g = cycle_graph(10)
        hm = hop_matrix(g, compute_hop_index(g, 5), 5)
        assert hm.to_csr()[0, 5] == 0.5

    def test_k_out_of_range_raises_error(self, p4):
        """测试 k 超出 k_max 引发错误"""
        hi = compute_hop_index(p4, 2)
        with pytest.raises(OutOfRangeError):
            hop_matrix(p4, hi, 3)
        with pytest.raises(OutOfRangeError):
            hop_matrix(p4, hi, 0)
