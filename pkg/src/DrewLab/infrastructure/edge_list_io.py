"""边列表文件读写

文件格式（UTF-8）：第一行 `n m`，随后 m 行 `u v`，节点编号从 0 开始，空白分隔。
"""
from __future__ import annotations

import logging
from pathlib import Path

from ..domain.errors import FormatError
from ..domain.graph import Graph, build_graph

logger = logging.getLogger(__name__)


def format_edge_list(g: Graph) -> str:
    """把图序列化为边列表文本"""
    lines = [f"{g.n} {g.num_edges}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str, *, allow_isolated: bool = False) -> Graph:
    """解析边列表文本

    Raises:
        FormatError: 头部或边行格式错误、边数与头部不一致
        DrewValidationError: 图本身不合法（自环、越界等）
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise FormatError("边列表为空，缺少 `n m` 头部")

    header = lines[0].split()
    try:
        n, m = (int(tok) for tok in header)
    except ValueError as e:
        raise FormatError(f"边列表头部格式错误: {lines[0]!r}") from e
    if n < 1 or m < 0:
        raise FormatError(f"边列表头部数值非法: n={n}, m={m}")

    body = lines[1:]
    if len(body) != m:
        raise FormatError(f"边数不一致: 头部声明 {m} 条，实际 {len(body)} 行")

    edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(body, start=2):
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"第 {lineno} 行格式错误: {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as e:
            raise FormatError(f"第 {lineno} 行不是整数: {line!r}") from e

    return build_graph(edges, n, allow_isolated=allow_isolated)


def write_edge_list(g: Graph, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_edge_list(g), encoding="utf-8")
    logger.debug(f"写入边列表: {path}")


def read_edge_list(path: Path, *, allow_isolated: bool = False) -> Graph:
    """从文件读取图"""
    if not path.exists():
        raise FileNotFoundError(f"边列表文件不存在: {path}")
    g = parse_edge_list(path.read_text(encoding="utf-8"), allow_isolated=allow_isolated)
    logger.info(f"读取图: {path.name} (n={g.n}, m={g.num_edges})")
    return g
