"""无向简单图实体

以压缩稀疏行 (CSR) 形式保存邻接关系和节点度数。
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DrewValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """无向简单图

    Attributes:
        n: 节点数量
        edges: 去重后的无序边 (u, v)，满足 u < v，按字典序排列
        csr_offsets: CSR 行偏移，长度 n + 1
        csr_targets: CSR 列索引，每行升序
        degree: 每个节点的度数
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    csr_offsets: np.ndarray = field(repr=False)
    csr_targets: np.ndarray = field(repr=False)
    degree: np.ndarray = field(repr=False)

    def neighbors(self, i: int) -> np.ndarray:
        """获取节点 i 的邻居（升序）"""
        return self.csr_targets[self.csr_offsets[i] : self.csr_offsets[i + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """以 scipy CSR 矩阵返回 0/1 邻接矩阵"""
        data = np.ones(len(self.csr_targets), dtype=np.float64)
        return sp.csr_matrix(
            (data, self.csr_targets, self.csr_offsets), shape=(self.n, self.n)
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def permute(self, perm: Sequence[int]) -> Graph:
        """按置换 perm 重新编号节点：旧节点 i 变为 perm[i]"""
        mapping = np.asarray(perm, dtype=np.int64)
        if sorted(mapping.tolist()) != list(range(self.n)):
            raise DrewValidationError("perm 不是合法的节点置换")
        relabeled = [(int(mapping[u]), int(mapping[v])) for u, v in self.edges]
        return build_graph(relabeled, self.n, allow_isolated=True)


def build_graph(
    edges: Iterable[tuple[int, int]],
    n: int,
    *,
    allow_isolated: bool = False,
) -> Graph:
    """根据边列表构建图

    Args:
        edges: 无序节点对列表，允许重复和反向重复
        n: 节点数量
        allow_isolated: 是否允许度数为 0 的节点

    Returns:
        去重、对称化后的 Graph

    Raises:
        DrewValidationError: 端点越界、自环或出现孤立节点
    """
    if n < 1:
        raise DrewValidationError(f"节点数量必须为正: n={n}")

    pairs: set[tuple[int, int]] = set()
    for raw_u, raw_v in edges:
        u, v = int(raw_u), int(raw_v)
        if not (0 <= u < n and 0 <= v < n):
            raise DrewValidationError(f"边端点越界: ({u}, {v})，n={n}")
        if u == v:
            raise DrewValidationError(f"不允许自环: ({u}, {v})")
        pairs.add((min(u, v), max(u, v)))

    ordered = tuple(sorted(pairs))
    if ordered:
        arr = np.asarray(ordered, dtype=np.int64)
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
    else:
        rows = np.zeros(0, dtype=np.int64)
        cols = np.zeros(0, dtype=np.int64)

    adj = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.float64), (rows, cols)), shape=(n, n)
    )
    adj.sort_indices()
    offsets = adj.indptr.astype(np.int64)
    targets = adj.indices.astype(np.int64)
    degree = np.diff(offsets)

    if not allow_isolated and np.any(degree == 0):
        isolated = np.flatnonzero(degree == 0).tolist()
        raise DrewValidationError(f"存在度数为 0 的孤立节点: {isolated}")

    logger.debug(f"构建图: n={n}, m={len(ordered)}")
    return Graph(
        n=n,
        edges=ordered,
        csr_offsets=offsets,
        csr_targets=targets,
        degree=degree,
    )


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, np.ndarray]:
    """不相交并图

    Returns:
        (并图, 每个子图在并图中的节点偏移)
    """
    if not graphs:
        raise DrewValidationError("disjoint_union 需要至少一个图")
    offsets = np.zeros(len(graphs), dtype=np.int64)
    edges: list[tuple[int, int]] = []
    total = 0
    for idx, g in enumerate(graphs):
        offsets[idx] = total
        edges.extend((u + total, v + total) for u, v in g.edges)
        total += g.n
    return build_graph(edges, total, allow_isolated=True), offsets
