"""跳数索引与跳数矩阵

对每个源节点做层级同步的广度优先搜索，按精确距离 k 把节点划分到壳层 N_k(i)，
并据此构造度数归一化的跳数矩阵 Γ^k。
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DrewValidationError, OutOfRangeError
from .graph import Graph

logger = logging.getLogger(__name__)

# 节点数不超过该阈值时额外保存稠密距离表
DENSE_DIST_THRESHOLD = 2048
BFS_CHUNK_SIZE = 256


@dataclass(frozen=True, eq=False)
class HopIndex:
    """精确距离壳层索引

    Attributes:
        n: 节点数量
        k_max: 计算到的最大距离
        shells: k -> n×n 0/1 CSR 矩阵，第 i 行为 N_k(i)，列索引升序
        dist: 稠密距离表，-1 表示不可达或超出 k_max；节点过多时为 None
    """

    n: int
    k_max: int
    shells: dict[int, sp.csr_matrix] = field(repr=False)
    dist: np.ndarray | None = field(default=None, repr=False)

    def shell(self, i: int, k: int) -> np.ndarray:
        """返回 N_k(i)（升序）"""
        if not 1 <= k <= self.k_max:
            raise OutOfRangeError(f"跳数 {k} 超出范围 [1, {self.k_max}]")
        m = self.shells[k]
        return m.indices[m.indptr[i] : m.indptr[i + 1]].astype(np.int64)

    def distance(self, i: int, j: int) -> int | None:
        """返回 d_G(i, j)；不可达或超过 k_max 时返回 None"""
        if i == j:
            return 0
        if self.dist is not None:
            d = int(self.dist[i, j])
            return None if d < 0 else d
        for k in range(1, self.k_max + 1):
            if j in self.shell(i, k):
                return k
        return None


@dataclass(frozen=True, eq=False)
class HopMatrix:
    """度数归一化的 k 跳矩阵 Γ^k，以 (i, j, γ) 三元组保存，按 (i, j) 排序"""

    k: int
    n: int
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.rows, self.cols)), shape=(self.n, self.n)
        )


def _bfs_levels(
    adj: sp.csr_matrix, sources: np.ndarray, k_max: int
) -> list[sp.csr_matrix]:
    """从一组源节点同时做广度优先搜索，返回每一层的前沿（即壳层）"""
    n = adj.shape[0]
    m = len(sources)
    ones = np.ones(m, dtype=np.float64)
    frontier = sp.csr_matrix((ones, (np.arange(m), sources)), shape=(m, n))
    visited = frontier.copy()
    levels: list[sp.csr_matrix] = []
    for _ in range(k_max):
        if frontier.nnz == 0:
            levels.append(sp.csr_matrix((m, n), dtype=np.float64))
            continue
        reached = (frontier @ adj).tocsr()
        reached.data[:] = 1.0
        nxt = (reached - reached.multiply(visited)).tocsr()
        nxt.eliminate_zeros()
        nxt.sort_indices()
        levels.append(nxt)
        visited = (visited + nxt).tocsr()
        frontier = nxt
    return levels


def distance_table(n: int, shells: dict[int, sp.csr_matrix]) -> np.ndarray:
    """由壳层还原稠密距离表，-1 表示不可达"""
    dist = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    for k, m in shells.items():
        rows, cols = m.nonzero()
        dist[rows, cols] = k
    return dist


def compute_hop_index(g: Graph, k_max: int, *, threads: int = 1) -> HopIndex:
    """计算精确距离壳层

    Args:
        g: 输入图
        k_max: 最大距离
        threads: 并行处理源节点分块的线程数

    Returns:
        HopIndex，不可达的节点对不出现在任何壳层中
    """
    if k_max < 1:
        raise DrewValidationError(f"k_max 必须至少为 1: {k_max}")

    adj = g.adjacency()
    chunks = [
        np.arange(start, min(start + BFS_CHUNK_SIZE, g.n), dtype=np.int64)
        for start in range(0, g.n, BFS_CHUNK_SIZE)
    ]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_chunk = list(pool.map(lambda s: _bfs_levels(adj, s, k_max), chunks))
    else:
        per_chunk = [_bfs_levels(adj, s, k_max) for s in chunks]

    shells: dict[int, sp.csr_matrix] = {}
    for k in range(1, k_max + 1):
        stacked = sp.vstack([levels[k - 1] for levels in per_chunk]).tocsr()
        stacked.sort_indices()
        shells[k] = stacked

    dist = distance_table(g.n, shells) if g.n <= DENSE_DIST_THRESHOLD else None
    logger.debug(f"跳数索引完成: n={g.n}, k_max={k_max}")
    return HopIndex(n=g.n, k_max=k_max, shells=shells, dist=dist)


def hop_matrix(g: Graph, hi: HopIndex, k: int) -> HopMatrix:
    """构造 Γ^k：γ_ij = 1/sqrt(d_i d_j)，当且仅当 d_G(i, j) = k"""
    if not 1 <= k <= hi.k_max:
        raise OutOfRangeError(f"跳数 {k} 超出范围 [1, {hi.k_max}]")
    if hi.n != g.n:
        raise DrewValidationError(f"跳数索引与图的节点数不一致: {hi.n} != {g.n}")

    coo = hi.shells[k].tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = coo.row[order].astype(np.int64)
    cols = coo.col[order].astype(np.int64)
    deg = g.degree.astype(np.float64)
    values = 1.0 / np.sqrt(deg[rows] * deg[cols])
    return HopMatrix(k=k, n=g.n, rows=rows, cols=cols, values=values)


def eccentricity_cap(g: Graph, hi: HopIndex) -> int:
    """返回 hi 中出现的最大非空壳层距离（k_max 范围内的有效直径）"""
    cap = 0
    for k in range(1, hi.k_max + 1):
        if hi.shells[k].nnz > 0:
            cap = k
    return cap
