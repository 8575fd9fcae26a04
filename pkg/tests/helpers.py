"""测试辅助函数：随机图与有限差分梯度检查"""
from collections.abc import Callable
from pathlib import Path

import networkx as nx
import numpy as np

from DrewLab.domain.graph import Graph, build_graph
from DrewLab.infrastructure.tensor import Tape, Tensor

FD_STEP = 1e-5
DATA_DIR = Path(__file__).parent / "data"


def random_connected_graph(n: int, seed: int, p: float = 0.3) -> Graph:
    """连通的 G(n, p)：在随机递归树上再加随机边"""
    rng = np.random.default_rng(seed)
    tree = [(v, int(rng.integers(v))) for v in range(1, n)]
    extra = nx.gnp_random_graph(n, p, seed=int(rng.integers(1 << 31)))
    return build_graph([*tree, *extra.edges()], n)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """逐元素相对误差的最大值，分母下限 1e-6"""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numeric_grad(f: Callable[[], float], arr: np.ndarray) -> np.ndarray:
    """对 arr 原地扰动做中心差分"""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    out = grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + FD_STEP
        plus = f()
        flat[idx] = orig - FD_STEP
        minus = f()
        flat[idx] = orig
        out[idx] = (plus - minus) / (2 * FD_STEP)
    return grad


def check_gradients(
    loss_fn: Callable[[], Tensor], leaves: list[Tensor]
) -> float:
    """比较自动微分与中心差分，返回所有叶子上的最大相对误差"""
    for leaf in leaves:
        leaf.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    worst = 0.0
    for leaf in leaves:
        assert leaf.grad is not None
        analytic = leaf.grad.copy()
        numeric = numeric_grad(lambda: loss_fn().item(), leaf.data)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
