"""模型配置实体

定义模型结构的全部超参数及其校验规则。
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

from .errors import DrewValidationError
from .schedule import DelayPolicy

logger = logging.getLogger(__name__)


class Architecture(Enum):
    """模型结构枚举"""

    GCN = "gcn"  # 经典残差 GCN
    DREW_GCN = "drew_gcn"
    DREW_GIN = "drew_gin"
    DREW_GATEDGCN = "drew_gatedgcn"
    SP_GCN = "sp_gcn"  # 静态多跳基线


class ReadoutMode(Enum):
    """读出方式枚举"""

    TARGET = "target"  # 目标节点
    SOURCE = "source"  # 源节点
    MEAN = "mean"  # 按图平均池化


# 这些结构支持线性探针
_PROBE_ARCHS = {Architecture.GCN, Architecture.DREW_GCN, Architecture.SP_GCN}


@dataclass
class ModelConfig:
    """模型配置

    Attributes:
        arch: 模型结构
        layers: 层数 L
        hidden: 隐藏维度 d
        nu: 延迟策略
        k_cap: 最大跳数；None 表示不设上限（即 L）。sp_gcn 把它当作 k_max
        in_dim: 输入特征维度
        out_dim: 输出类别数
        weight_sharing: 跨跳数共享权重；None 表示使用结构默认值
        use_batch_norm: 每层残差更新后是否做批归一化
        gin_eps: GIN 自环 MLP 的缩放系数 ε
        gate_eps: GatedGCN 门控归一化的数值稳定常数
        readout: 读出方式
        linear_probe: 线性探针（恒等激活、恒等权重、无残差、无批归一化）
    """

    arch: Architecture = Architecture.DREW_GCN
    layers: int = 3
    hidden: int = 16
    nu: DelayPolicy = field(default_factory=DelayPolicy)
    k_cap: int | None = None
    in_dim: int = 5
    out_dim: int = 5
    weight_sharing: bool | None = None
    use_batch_norm: bool = True
    gin_eps: float = 0.0
    gate_eps: float = 1e-6
    readout: ReadoutMode = ReadoutMode.TARGET
    linear_probe: bool = False

    def __post_init__(self) -> None:
        """数据验证"""
        if isinstance(self.arch, str):
            self.arch = Architecture(self.arch)
        if isinstance(self.readout, str):
            self.readout = ReadoutMode(self.readout)
        if not isinstance(self.nu, DelayPolicy):
            self.nu = DelayPolicy.parse(self.nu)
        if self.layers < 1:
            raise DrewValidationError(f"层数必须至少为 1: {self.layers}")
        if self.hidden < 1:
            raise DrewValidationError(f"隐藏维度必须至少为 1: {self.hidden}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise DrewValidationError("输入和输出维度必须为正")
        if self.k_cap is not None and self.k_cap < 1:
            raise DrewValidationError(f"k_cap 必须至少为 1: {self.k_cap}")
        if self.gate_eps <= 0:
            raise DrewValidationError(f"gate_eps 必须为正: {self.gate_eps}")

        if self.arch is Architecture.DREW_GATEDGCN:
            if self.weight_sharing is False:
                logger.warning("drew_gatedgcn 强制跨跳数共享权重")
            self.weight_sharing = True
        elif self.weight_sharing is None:
            self.weight_sharing = False

        if self.linear_probe:
            if self.arch not in _PROBE_ARCHS:
                raise DrewValidationError(f"线性探针不支持结构: {self.arch.value}")
            if self.in_dim != self.hidden:
                raise DrewValidationError("线性探针要求 in_dim == hidden")
            self.use_batch_norm = False

    @property
    def hop_limit(self) -> int:
        """参数分配时使用的最大跳数"""
        return self.k_cap if self.k_cap is not None else self.layers

    def hops_at(self, layer: int) -> range:
        """第 layer 层拥有独立参数的跳数"""
        if self.arch is Architecture.GCN:
            return range(1, 2)
        if self.arch is Architecture.SP_GCN:
            return range(1, self.hop_limit + 1)
        return range(1, min(layer + 1, self.hop_limit) + 1)

    def to_dict(self) -> dict[str, Any]:
        """转换为字典格式"""
        data = asdict(self)
        data["arch"] = self.arch.value
        data["readout"] = self.readout.value
        data["nu"] = str(self.nu)
        return data
