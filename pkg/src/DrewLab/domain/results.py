"""实验结果实体

训练运行结果与敏感度报告。
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DrewValidationError

# 不可达节点对的首次交互层
NEVER = -1


@dataclass
class TrainRunResult:
    """单次训练运行结果

    Attributes:
        model: 模型名称
        train_loss: 每个 epoch 的平均训练损失
        val_acc: 每个 epoch 的验证准确率
        test_acc: 最佳验证 epoch 对应的测试准确率
        best_epoch: 最佳验证 epoch
        seconds: 耗时
        seed: 随机种子
        params: 参数数量
        config: 解析后的模型配置
        failed: 是否发散失败
        failure: 失败原因与运行标记
    """

    model: str
    train_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    test_acc: float = 0.0
    best_epoch: int = -1
    seconds: float = 0.0
    seed: int = 0
    params: int = 0
    config: dict[str, Any] = field(default_factory=dict)
    failed: bool = False
    failure: str | None = None

    def __post_init__(self) -> None:
        for acc in [*self.val_acc, self.test_acc]:
            if not 0.0 <= acc <= 1.0:
                raise DrewValidationError(f"准确率超出 [0, 1]: {acc}")

    @property
    def best_val_acc(self) -> float:
        return self.val_acc[self.best_epoch] if self.best_epoch >= 0 else 0.0

    def to_dict(self) -> dict[str, Any]:
        """转换为字典格式"""
        return {
            "model": self.model,
            "train_loss": self.train_loss,
            "val_acc": self.val_acc,
            "test_acc": self.test_acc,
            "best_epoch": self.best_epoch,
            "seconds": self.seconds,
            "seed": self.seed,
            "params": self.params,
            "config": self.config,
            "failed": self.failed,
            "failure": self.failure,
        }


@dataclass(eq=False)
class SensitivityReport:
    """雅可比敏感度报告

    Attributes:
        graph_id: 图标识
        config: 模型配置字典
        per_layer: 形状 (L+1, n, n)，第 ℓ 层的 S[i][j] = ‖∂h_i^(ℓ)/∂x_j‖_1
        distances: d_G(i, j)，-1 表示不可达
        seed: 随机种子
        zero_threshold: 低于该值的范数视为 0
        nodes: 计算了哪些输出节点的行（其余行为 0）
    """

    graph_id: str
    config: dict[str, Any]
    per_layer: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    seed: int = 0
    zero_threshold: float = 1e-12
    nodes: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if np.any(self.per_layer < 0):
            raise DrewValidationError("敏感度范数不能为负")

    @property
    def layers(self) -> int:
        return self.per_layer.shape[0] - 1

    @property
    def matrix(self) -> np.ndarray:
        """最后一层的敏感度矩阵 S"""
        return self.per_layer[-1]

    def to_dict(self) -> dict[str, Any]:
        """转换为字典格式"""
        n = self.distances.shape[0]
        return {
            "graph_id": self.graph_id,
            "config": self.config,
            "seed": self.seed,
            "layers": self.layers,
            "nu": self.config.get("nu"),
            "zero_threshold": self.zero_threshold,
            "S": self.matrix.tolist(),
            "first_interaction": [
                {
                    "i": i,
                    "j": j,
                    "distance": int(self.distances[i, j]),
                    "layer": first_interaction(self, i, j),
                }
                for i in self.nodes
                for j in range(n)
            ],
        }


def first_interaction(report: SensitivityReport, i: int, j: int) -> int:
    """最小的 ℓ 使得 S^(ℓ)[i][j] 非零；不可达或从未交互返回 NEVER"""
    if report.distances[i, j] < 0:
        return NEVER
    column = report.per_layer[:, i, j]
    hits = np.flatnonzero(column > report.zero_threshold)
    return int(hits[0]) if len(hits) else NEVER


@dataclass(frozen=True)
class SweepRow:
    """扫描中的一次运行（结果 CSV 的一行）"""

    model: str
    k: int
    layers: int
    seed: int
    val_acc: float
    test_acc: float
    params: int
    seconds: float
    failed: bool = False
    failure: str | None = None

    @classmethod
    def from_run(cls, run: TrainRunResult, k: int, layers: int) -> SweepRow:
        return cls(
            model=run.model,
            k=k,
            layers=layers,
            seed=run.seed,
            val_acc=run.best_val_acc,
            test_acc=run.test_acc,
            params=run.params,
            seconds=run.seconds,
            failed=run.failed,
            failure=run.failure,
        )


@dataclass(frozen=True)
class SweepCell:
    """同一 (模型, k) 在多个种子上的汇总；失败的运行不计入均值"""

    model: str
    k: int
    layers: int
    mean_test_acc: float
    std_test_acc: float
    runs: int
    failed: int

    @classmethod
    def summarize(cls, rows: list[SweepRow]) -> SweepCell:
        if not rows:
            raise DrewValidationError("汇总需要至少一次运行")
        ok = np.asarray([r.test_acc for r in rows if not r.failed], dtype=np.float64)
        first = rows[0]
        return cls(
            model=first.model,
            k=first.k,
            layers=first.layers,
            mean_test_acc=float(ok.mean()) if len(ok) else float("nan"),
            std_test_acc=float(ok.std()) if len(ok) else float("nan"),
            runs=len(rows),
            failed=len(rows) - len(ok),
        )
