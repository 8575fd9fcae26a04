"""νDRew 层调度

决定每一层激活哪些跳数，以及每个跳数读取哪一层的（延迟）节点状态。
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Generic, TypeVar

from .errors import DrewValidationError, OutOfRangeError

INFINITY = math.inf

T = TypeVar("T")


@dataclass(frozen=True)
class DelayPolicy:
    """延迟策略

    Attributes:
        nu: 正整数，或 INFINITY 表示无延迟
    """

    nu: float = INFINITY

    def __post_init__(self) -> None:
        if self.nu != INFINITY and (self.nu < 1 or self.nu != int(self.nu)):
            raise DrewValidationError(f"nu 必须是正整数或 inf: {self.nu}")

    @property
    def is_infinite(self) -> bool:
        return self.nu == INFINITY

    @classmethod
    def parse(cls, text: str | int | float) -> DelayPolicy:
        """从配置文本解析，接受 'inf'、'∞' 或正整数"""
        if isinstance(text, str):
            token = text.strip().lower()
            if token in {"inf", "infinity", "∞"}:
                return cls(INFINITY)
            try:
                return cls(float(int(token)))
            except ValueError as e:
                raise DrewValidationError(f"无法解析 nu: {text!r}") from e
        return cls(float(text))

    def __str__(self) -> str:
        return "inf" if self.is_infinite else str(int(self.nu))


def tau(policy: DelayPolicy, k: int) -> int:
    """τ_ν(k) = max(0, k - ν)；无延迟策略返回 0"""
    if k < 1:
        raise DrewValidationError(f"跳数必须至少为 1: {k}")
    if policy.is_infinite:
        return 0
    return max(0, k - int(policy.nu))


@dataclass(frozen=True)
class ScheduleEntry:
    k: int
    source_index: int


@dataclass(frozen=True)
class LayerSchedule:
    """层调度表

    Attributes:
        layers: 层数 L
        k_cap: 最大跳数
        policy: 延迟策略
        entries: 第 ℓ 项为该层的 (k, source_index) 列表，k 升序
    """

    layers: int
    k_cap: int
    policy: DelayPolicy
    entries: tuple[tuple[ScheduleEntry, ...], ...]

    def at(self, layer: int) -> tuple[ScheduleEntry, ...]:
        if not 0 <= layer < self.layers:
            raise OutOfRangeError(f"层号 {layer} 超出范围 [0, {self.layers})")
        return self.entries[layer]

    def total_aggregations(self) -> int:
        return sum(len(row) for row in self.entries)

    def dump(self) -> str:
        """以 'layer k source_index' 每行一个三元组的文本形式导出"""
        lines = [
            f"{layer} {e.k} {e.source_index}"
            for layer, row in enumerate(self.entries)
            for e in row
        ]
        return "\n".join(lines) + "\n"


def build_schedule(layers: int, policy: DelayPolicy, k_cap: int) -> LayerSchedule:
    """构造调度表：第 ℓ 层激活 k ∈ [1, min(ℓ+1, k_cap)]，读取第 ℓ - τ_ν(k) 层状态"""
    if layers < 1:
        raise DrewValidationError(f"层数必须至少为 1: {layers}")
    if k_cap < 1:
        raise DrewValidationError(f"k_cap 必须至少为 1: {k_cap}")

    entries = tuple(
        tuple(
            ScheduleEntry(k=k, source_index=layer - tau(policy, k))
            for k in range(1, min(layer + 1, k_cap) + 1)
        )
        for layer in range(layers)
    )
    return LayerSchedule(layers=layers, k_cap=k_cap, policy=policy, entries=entries)


class DelayBuffer(Generic[T]):
    """按层号保存历史节点状态

    第 t 项为 h^(t)。存放的是参与自动微分的张量本身，梯度可以流回历史状态。
    """

    def __init__(self) -> None:
        self._states: list[T] = []

    def push(self, state: T) -> None:
        self._states.append(state)

    def get(self, t: int) -> T:
        if not 0 <= t < len(self._states):
            raise OutOfRangeError(
                f"第 {t} 层状态尚未写入（已写入 {len(self._states)} 层）"
            )
        return self._states[t]

    def states(self) -> list[T]:
        return list(self._states)

    def __len__(self) -> int:
        return len(self._states)
