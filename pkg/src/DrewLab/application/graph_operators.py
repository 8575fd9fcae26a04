"""图算子

把图和跳数索引预计算成模型前向需要的稀疏算子：
度数归一化的 Γ^k（GCN / SP-GCN）、0/1 壳层指示矩阵（GIN）和 (i, j) 索引对（GatedGCN）。
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..domain.errors import DrewValidationError
from ..domain.graph import Graph
from ..domain.hop_index import (
    HopIndex,
    compute_hop_index,
    eccentricity_cap,
    hop_matrix,
)


@dataclass(frozen=True, eq=False)
class GraphOperators:
    """预计算的图算子

    Attributes:
        n: 节点数量
        k_max: 有效直径（k_max 范围内最大的非空壳层）
        gamma: k -> Γ^k
        indicator: k -> 壳层 0/1 矩阵
        pairs: k -> (i, j)，按 (i, j) 排序
        graph_offsets: 批量图中每个子图的起始节点
    """

    n: int
    k_max: int
    gamma: dict[int, sp.csr_matrix] = field(repr=False)
    indicator: dict[int, sp.csr_matrix] = field(repr=False)
    pairs: dict[int, tuple[np.ndarray, np.ndarray]] = field(repr=False)
    graph_offsets: np.ndarray = field(repr=False)

    def gamma_at(self, k: int) -> sp.csr_matrix:
        return self.gamma.get(k, sp.csr_matrix((self.n, self.n)))

    def indicator_at(self, k: int) -> sp.csr_matrix:
        return self.indicator.get(k, sp.csr_matrix((self.n, self.n)))

    def pairs_at(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        empty = np.zeros(0, dtype=np.int64)
        return self.pairs.get(k, (empty, empty))

    @property
    def num_graphs(self) -> int:
        return len(self.graph_offsets)

    def membership(self) -> np.ndarray:
        """每个节点所属的子图编号"""
        sizes = np.diff(np.append(self.graph_offsets, self.n))
        return np.repeat(np.arange(self.num_graphs), sizes)


def build_operators(g: Graph, hi: HopIndex) -> GraphOperators:
    """从图和跳数索引构造算子，跳数上限取有效直径"""
    cap = eccentricity_cap(g, hi)
    gamma: dict[int, sp.csr_matrix] = {}
    indicator: dict[int, sp.csr_matrix] = {}
    pairs: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k in range(1, cap + 1):
        hm = hop_matrix(g, hi, k)
        gamma[k] = hm.to_csr()
        indicator[k] = sp.csr_matrix(
            (np.ones(len(hm)), (hm.rows, hm.cols)), shape=(g.n, g.n)
        )
        pairs[k] = (hm.rows, hm.cols)
    return GraphOperators(
        n=g.n,
        k_max=cap,
        gamma=gamma,
        indicator=indicator,
        pairs=pairs,
        graph_offsets=np.zeros(1, dtype=np.int64),
    )


def operators_for(
    g: Graph, k_max: int | None = None, threads: int = 1
) -> GraphOperators:
    """一步完成跳数索引和算子构造；k_max 缺省为 n - 1"""
    limit = k_max if k_max is not None else max(1, g.n - 1)
    return build_operators(g, compute_hop_index(g, limit, threads=threads))


def batch_operators(items: Sequence[GraphOperators]) -> GraphOperators:
    """按不相交并图批量拼接算子（块对角）"""
    if not items:
        raise DrewValidationError("batch_operators 需要至少一个图")
    cap = max(op.k_max for op in items)
    sizes = np.asarray([op.n for op in items], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    n = int(sizes.sum())

    gamma: dict[int, sp.csr_matrix] = {}
    indicator: dict[int, sp.csr_matrix] = {}
    pairs: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k in range(1, cap + 1):
        gamma[k] = sp.block_diag([op.gamma_at(k) for op in items], format="csr")
        indicator[k] = sp.block_diag(
            [op.indicator_at(k) for op in items], format="csr"
        )
        shifted = [
            (op.pairs_at(k)[0] + off, op.pairs_at(k)[1] + off)
            for op, off in zip(items, offsets, strict=True)
        ]
        pairs[k] = (
            np.concatenate([r for r, _ in shifted]),
            np.concatenate([c for _, c in shifted]),
        )
    return GraphOperators(
        n=n,
        k_max=cap,
        gamma=gamma,
        indicator=indicator,
        pairs=pairs,
        graph_offsets=np.concatenate(
            [op.graph_offsets + off for op, off in zip(items, offsets, strict=True)]
        ),
    )
