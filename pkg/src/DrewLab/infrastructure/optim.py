"""Adam 优化器与 Glorot 初始化"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..domain.errors import DrewValidationError
from .tensor import Tensor


@dataclass
class AdamState:
    """Adam 优化器状态

    Attributes:
        lr: 学习率
        beta1: 一阶矩衰减率
        beta2: 二阶矩衰减率
        eps: 数值稳定常数
        step: 已执行的步数
        m: 参数名 -> 一阶矩
        v: 参数名 -> 二阶矩
    """

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """带偏差修正的 Adam 更新；不清零梯度，由调用方负责"""
    for name, p in params.items():
        if p.grad is None:
            raise DrewValidationError(f"参数 {name} 缺少梯度")

    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    step_size = state.lr / bc1

    for name, p in params.items():
        g = p.grad
        assert g is not None
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= step_size * m / (np.sqrt(v / bc2) + state.eps)


def zero_grads(params: Mapping[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()


def glorot_init(
    shape: tuple[int, ...], rng: np.random.Generator, name: str = ""
) -> Tensor:
    """均匀分布 U(-a, a)，a = sqrt(6 / (fan_in + fan_out))，返回需要梯度的参数"""
    if len(shape) != 2:
        raise DrewValidationError(f"glorot_init 只支持二维形状: {shape}")
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-bound, bound, size=shape)
    return Tensor(data, requires_grad=True, name=name)
