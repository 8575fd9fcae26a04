"""稠密张量与反向模式自动微分

Tensor 以 numpy float64 数组保存数据。在活动的 Tape 上执行的运算会被记录下来，
backward() 按逆拓扑序回放这些记录，把梯度累加到叶子张量的 grad 上。
没有活动 Tape 时运算不做记录（推理模式）。

除行向量偏置相加外不支持广播。
"""
from __future__ import annotations

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logsumexp, softmax

from ..domain.errors import (
    DrewValidationError,
    OutOfRangeError,
    ShapeMismatchError,
)

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


class Tensor:
    """稠密张量

    Attributes:
        data: 连续的 float64 数组
        requires_grad: 是否需要梯度
        grad: 与 data 同形状的梯度累加器（仅叶子张量，requires_grad 时存在）
        is_leaf: 是否为叶子（不由已记录的运算产生）
        name: 参数名，便于调试和保存
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "name")

    def __init__(
        self,
        data: np.ndarray | Sequence[float] | float,
        requires_grad: bool = False,
        name: str = "",
    ) -> None:
        self.data = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = (
            np.zeros_like(self.data) if requires_grad else None
        )
        self.is_leaf = True
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> Tensor:
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64, order="C")
        out.requires_grad = requires_grad
        out.grad = None
        out.is_leaf = not requires_grad
        out.name = ""
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __truediv__(self, other: Tensor) -> Tensor:
        return div(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


@dataclass(eq=False)
class TapeNode:
    """一条运算记录"""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


_local = threading.local()


def _tape_stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def current_tape() -> Tape | None:
    """当前线程上活动的 Tape"""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """运算记录带

    用作上下文管理器激活。同一个 Tape 可以多次反向传播（例如逐行计算雅可比），
    记录按执行顺序保存，因此天然满足拓扑序。
    """

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._outputs: set[int] = set()

    def __enter__(self) -> Tape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _tape_stack().pop()

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)
        self._outputs.add(id(node.output))

    def owns(self, t: Tensor) -> bool:
        return id(t) in self._outputs

    def _propagate(
        self, output: Tensor, cotangent: np.ndarray
    ) -> dict[int, np.ndarray]:
        grads: dict[int, np.ndarray] = {id(output): cotangent}
        for node in reversed(self.nodes):
            g = grads.get(id(node.output))
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g), strict=True):
                if gi is None or not inp.requires_grad:
                    continue
                key = id(inp)
                grads[key] = grads[key] + gi if key in grads else gi
        return grads

    def vjp(
        self, output: Tensor, cotangent: np.ndarray, wrt: Sequence[Tensor]
    ) -> list[np.ndarray]:
        """向量-雅可比积，不修改任何 grad，可在多个线程上并发调用"""
        if cotangent.shape != output.data.shape:
            raise ShapeMismatchError(
                f"余切形状 {cotangent.shape} 与输出形状 {output.shape} 不一致"
            )
        grads = self._propagate(output, np.asarray(cotangent, dtype=np.float64))
        return [grads.get(id(t), np.zeros_like(t.data)) for t in wrt]

    def backward(self, loss: Tensor) -> None:
        """把 dLoss/dLeaf 累加到所有需要梯度的叶子张量上"""
        if loss.size != 1:
            raise DrewValidationError(f"loss 必须是标量，实际形状 {loss.shape}")
        if not loss.requires_grad:
            raise DrewValidationError("loss 不依赖任何需要梯度的张量")
        if not loss.is_leaf and not self.owns(loss):
            raise DrewValidationError("loss 不在当前 Tape 上")

        grads = self._propagate(loss, np.ones_like(loss.data))
        seen: set[int] = set()
        leaves = [loss] if loss.is_leaf else []
        for node in self.nodes:
            leaves.extend(t for t in node.inputs if t.is_leaf and t.requires_grad)
        for leaf in leaves:
            key = id(leaf)
            if key in seen or key not in grads:
                continue
            seen.add(key)
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)
            leaf.grad += grads[key]


def backward(loss: Tensor) -> None:
    """在当前活动的 Tape 上对标量 loss 反向传播"""
    tape = current_tape()
    if tape is None:
        raise DrewValidationError("没有活动的 Tape")
    tape.backward(loss)


def _record(
    op: str, inputs: Sequence[Tensor], out: np.ndarray, backward_fn: BackwardFn
) -> Tensor:
    tape = current_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    result = Tensor._wrap(out, needs)
    if needs and tape is not None:
        tape.record(TapeNode(op, tuple(inputs), result, backward_fn))
    return result


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: 形状不一致 {a.shape} vs {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: 形状不兼容 {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _record(
        "matmul", (a, b), ad @ bd, lambda g: (g @ bd.T, ad.T @ g)
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    """逐元素相加；b 可以是与 a 列数相同的行向量偏置"""
    if a.shape == b.shape:
        return _record("add", (a, b), a.data + b.data, lambda g: (g, g))
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return _record(
            "add_bias", (a, b), a.data + b.data, lambda g: (g, g.sum(axis=0))
        )
    raise ShapeMismatchError(f"add: 形状不兼容 {a.shape} + {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return _record("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    ad, bd = a.data, b.data
    return _record("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("div", a, b)
    ad, bd = a.data, b.data
    return _record(
        "div", (a, b), ad / bd, lambda g: (g / bd, -g * ad / (bd * bd))
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _record("scale", (a,), a.data * c, lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    """ReLU，在 0 处的次梯度取 0"""
    mask = a.data > 0
    return _record("relu", (a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    s = expit(a.data)
    return _record("sigmoid", (a,), s, lambda g: (g * s * (1.0 - s),))


def softplus(a: Tensor) -> Tensor:
    ad = a.data
    return _record(
        "softplus", (a,), np.logaddexp(0.0, ad), lambda g: (g * expit(ad),)
    )


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DrewValidationError("concat 需要至少一个张量")
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeMismatchError(f"concat: {e}") from e
    cuts = np.cumsum(sizes)[:-1]
    return _record(
        "concat", tensors, out, lambda g: np.split(g, cuts, axis=axis)
    )


def _check_index(op: str, index: np.ndarray, n: int) -> np.ndarray:
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeMismatchError(f"{op}: 索引必须是一维")
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise OutOfRangeError(f"{op}: 行索引超出范围 [0, {n})")
    return idx


def gather_rows(t: Tensor, index: Sequence[int] | np.ndarray) -> Tensor:
    idx = _check_index("gather_rows", np.asarray(index), t.shape[0])
    shape = t.data.shape

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        z = np.zeros(shape, dtype=np.float64)
        np.add.at(z, idx, g)
        return (z,)

    return _record("gather_rows", (t,), t.data[idx], _backward)


def scatter_add_rows(
    t: Tensor, index: Sequence[int] | np.ndarray, source: Tensor
) -> Tensor:
    """out = t；out[index[r]] += source[r]（按 r 顺序累加）"""
    idx = _check_index("scatter_add_rows", np.asarray(index), t.shape[0])
    if source.shape != (len(idx), *t.shape[1:]):
        raise ShapeMismatchError(
            f"scatter_add_rows: source 形状 {source.shape} 与索引不匹配"
        )
    out = t.data.copy()
    np.add.at(out, idx, source.data)
    return _record("scatter_add_rows", (t, source), out, lambda g: (g, g[idx]))


def sum(t: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    shape = t.data.shape

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is None:
            return (np.full(shape, g.item()),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _record("sum", (t,), np.asarray(t.data.sum(axis=axis)), _backward)


def mean(t: Tensor, axis: int | None = None) -> Tensor:
    count = t.size if axis is None else t.shape[axis]
    return scale(sum(t, axis), 1.0 / count)


def sparse_matmul(a: sp.spmatrix, t: Tensor) -> Tensor:
    """常量稀疏矩阵乘稠密张量：out = A @ t"""
    if t.data.ndim != 2 or a.shape[1] != t.shape[0]:
        raise ShapeMismatchError(f"sparse_matmul: 形状不兼容 {a.shape} @ {t.shape}")
    csr = sp.csr_matrix(a)
    csr_t = csr.T.tocsr()
    out = np.asarray(csr @ t.data)
    return _record("sparse_matmul", (t,), out, lambda g: (np.asarray(csr_t @ g),))


def combine(tensors: Sequence[Tensor], weights: Tensor) -> Tensor:
    """按权重向量线性组合同形状张量：Σ_k w_k T_k"""
    if weights.data.ndim != 1 or weights.shape[0] != len(tensors) or not tensors:
        raise ShapeMismatchError("combine: 权重长度与张量个数不一致")
    for t in tensors[1:]:
        _same_shape("combine", tensors[0], t)
    w = weights.data
    out = w[0] * tensors[0].data
    for k in range(1, len(tensors)):
        out = out + w[k] * tensors[k].data
    datas = [t.data for t in tensors]

    def _backward(g: np.ndarray) -> list[np.ndarray]:
        grads = [w[k] * g for k in range(len(datas))]
        grads.append(np.asarray([float((d * g).sum()) for d in datas]))
        return grads

    return _record("combine", (*tensors, weights), out, _backward)


def normalize(t: Tensor) -> Tensor:
    """把一维正向量归一化到和为 1"""
    if t.data.ndim != 1:
        raise ShapeMismatchError("normalize: 只支持一维张量")
    s = float(t.data.sum())
    out = t.data / s
    return _record(
        "normalize", (t,), out, lambda g: ((g - float((g * out).sum())) / s,)
    )


@dataclass(eq=False)
class BatchNormStats:
    """批归一化的滑动统计量（不参与梯度）"""

    running_mean: np.ndarray
    running_var: np.ndarray

    @classmethod
    def fresh(cls, dim: int) -> BatchNormStats:
        return cls(np.zeros(dim), np.ones(dim))


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    stats: BatchNormStats,
    training: bool,
    *,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """按行（节点）统计的批归一化

    训练模式使用批内有偏方差做归一化，并以 momentum 更新滑动均值和无偏方差；
    评估模式使用冻结的滑动统计量，是一个纯仿射映射。
    """
    if x.data.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != gamma.shape:
        raise ShapeMismatchError(f"batch_norm: 形状不兼容 {x.shape}")
    gd = gamma.data
    n = x.shape[0]

    if not training:
        inv_std = 1.0 / np.sqrt(stats.running_var + eps)
        xhat = (x.data - stats.running_mean) * inv_std
        return _record(
            "batch_norm_eval",
            (x, gamma, beta),
            xhat * gd + beta.data,
            lambda g: (g * gd * inv_std, (g * xhat).sum(axis=0), g.sum(axis=0)),
        )

    mu = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    unbiased = var * n / (n - 1) if n > 1 else var
    stats.running_mean = (1.0 - momentum) * stats.running_mean + momentum * mu
    stats.running_var = (1.0 - momentum) * stats.running_var + momentum * unbiased

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        dxhat = g * gd
        dx = (
            inv_std
            / n
            * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        )
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _record("batch_norm", (x, gamma, beta), xhat * gd + beta.data, _backward)


def cross_entropy_logits(
    logits: Tensor, labels: Sequence[int] | np.ndarray
) -> Tensor:
    """多分类交叉熵，按样本取平均，返回标量"""
    if logits.data.ndim != 2:
        raise ShapeMismatchError(f"cross_entropy_logits: logits 必须是二维 {logits.shape}")
    y = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if y.shape != (batch,):
        raise ShapeMismatchError("cross_entropy_logits: 标签数量与样本数不一致")
    if len(y) and (y.min() < 0 or y.max() >= classes):
        raise DrewValidationError(f"标签超出类别范围 [0, {classes})")

    z = logits.data
    rows = np.arange(batch)
    loss = float((logsumexp(z, axis=1) - z[rows, y]).mean())
    probs = softmax(z, axis=1)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        d = probs.copy()
        d[rows, y] -= 1.0
        return (d * (g.item() / batch),)

    return _record("cross_entropy", (logits,), np.asarray(loss), _backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out
