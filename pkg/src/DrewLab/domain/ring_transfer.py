"""RingTransfer 数据集实体

每个实例是长度为 k 的无弦环，源节点 0 的特征是类别 one-hot，
其余节点特征是均匀常数 1/C，目标节点位于 ⌊k/2⌋。
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DrewValidationError
from .graph import Graph


class Split(Enum):
    """数据划分枚举"""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class RingInstance:
    """单个 RingTransfer 实例"""

    index: int
    label: int
    source: int
    target: int
    split: Split


@dataclass(frozen=True, eq=False)
class RingTransferDataset:
    """RingTransfer 数据集

    所有实例共享同一个环图，只有源节点特征和标签不同。

    Attributes:
        size: 实例数量 N
        ring_length: 环长 k
        classes: 类别数 C
        ring: 环图 C_k
        labels: 每个实例的标签
        splits: 每个实例的划分
        seed: 生成种子
    """

    size: int
    ring_length: int
    classes: int
    ring: Graph = field(repr=False)
    labels: np.ndarray = field(repr=False)
    splits: tuple[Split, ...] = field(repr=False)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.labels) != self.size or len(self.splits) != self.size:
            raise DrewValidationError("标签或划分数量与数据集大小不一致")

    @property
    def source(self) -> int:
        return 0

    @property
    def target(self) -> int:
        return self.ring_length // 2

    def instance(self, index: int) -> RingInstance:
        return RingInstance(
            index=index,
            label=int(self.labels[index]),
            source=self.source,
            target=self.target,
            split=self.splits[index],
        )

    def indices(self, split: Split) -> np.ndarray:
        return np.asarray(
            [i for i, s in enumerate(self.splits) if s is split], dtype=np.int64
        )

    def features(self, label: int) -> np.ndarray:
        """单个实例的 k×C 特征矩阵"""
        x = np.full((self.ring_length, self.classes), 1.0 / self.classes)
        x[self.source] = 0.0
        x[self.source, label] = 1.0
        return x
