"""图生成器

用 networkx 生成常见图族并转换为 Graph。
"""
from __future__ import annotations

import logging

import networkx as nx

from ..domain.errors import DrewValidationError
from ..domain.graph import Graph, build_graph

logger = logging.getLogger(__name__)

GRAPH_KINDS = (
    "cycle",
    "path",
    "star",
    "binary_tree",
    "erdos_renyi",
    "disjoint_cycles",
)


def from_networkx(nx_graph: nx.Graph, *, allow_isolated: bool = False) -> Graph:
    """把 networkx 图按节点排序重新编号为 0..n-1 后构建 Graph"""
    relabeled = nx.convert_node_labels_to_integers(nx_graph, ordering="sorted")
    return build_graph(
        relabeled.edges(),
        relabeled.number_of_nodes(),
        allow_isolated=allow_isolated,
    )


def to_networkx(g: Graph) -> nx.Graph:
    out = nx.Graph()
    out.add_nodes_from(range(g.n))
    out.add_edges_from(g.edges)
    return out


def cycle_graph(n: int) -> Graph:
    """无弦环 C_n"""
    if n < 3:
        raise DrewValidationError(f"环长必须至少为 3: {n}")
    return from_networkx(nx.cycle_graph(n))


def path_graph(n: int) -> Graph:
    if n < 2:
        raise DrewValidationError(f"路径至少需要 2 个节点: {n}")
    return from_networkx(nx.path_graph(n))


def star_graph(leaves: int) -> Graph:
    """星图 K_{1,leaves}，中心为节点 0"""
    if leaves < 1:
        raise DrewValidationError(f"星图至少需要 1 个叶子: {leaves}")
    return from_networkx(nx.star_graph(leaves))


def binary_tree(depth: int) -> Graph:
    """深度为 depth 的完全二叉树，根为节点 0"""
    if depth < 1:
        raise DrewValidationError(f"树深度必须至少为 1: {depth}")
    return from_networkx(nx.balanced_tree(2, depth))


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p) 随机图；可能不连通，也可能含孤立节点"""
    if not 0.0 <= p <= 1.0:
        raise DrewValidationError(f"p 必须位于 [0, 1]: {p}")
    return from_networkx(nx.gnp_random_graph(n, p, seed=seed), allow_isolated=True)


def disjoint_cycles(length: int, count: int) -> Graph:
    """count 个互不相连的 C_length"""
    if count < 1:
        raise DrewValidationError(f"环的个数必须至少为 1: {count}")
    parts = [nx.cycle_graph(length) for _ in range(count)]
    return from_networkx(nx.disjoint_union_all(parts))


def generate(kind: str, *, n: int, p: float, depth: int, seed: int) -> Graph:
    """按名称生成图；disjoint_cycles 生成 2 个 C_{n/2}"""
    if kind == "cycle":
        g = cycle_graph(n)
    elif kind == "path":
        g = path_graph(n)
    elif kind == "star":
        g = star_graph(n - 1)
    elif kind == "binary_tree":
        g = binary_tree(depth)
    elif kind == "erdos_renyi":
        g = erdos_renyi(n, p, seed)
    elif kind == "disjoint_cycles":
        g = disjoint_cycles(n // 2, 2)
    else:
        raise DrewValidationError(f"未知的图类型: {kind}，可选 {', '.join(GRAPH_KINDS)}")
    logger.info(f"生成图: {kind} (n={g.n}, m={g.num_edges})")
    return g
