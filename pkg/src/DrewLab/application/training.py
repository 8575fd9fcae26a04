"""训练与扫描

RingTransfer 的训练循环、评估、常数基线、参数预算匹配的扫描以及延迟消融实验。
同一批次内的实例按不相交并图拼接，算子是块对角矩阵。
"""
from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..domain.errors import DrewValidationError, TrainingDivergedError
from ..domain.model_config import Architecture, ModelConfig, ReadoutMode
from ..domain.results import SweepRow, TrainRunResult
from ..domain.ring_transfer import RingTransferDataset, Split
from ..domain.schedule import DelayPolicy
from ..infrastructure.optim import AdamState, adam_step, zero_grads
from ..infrastructure.tensor import Tape, cross_entropy_logits
from .datasets import gen_ring_transfer
from .graph_operators import GraphOperators, batch_operators, operators_for
from .models import DrewModel, count_params, solve_hidden

logger = logging.getLogger(__name__)

CONSTANT_MODEL = "constant"


@dataclass(frozen=True)
class TrainHyper:
    """训练超参数"""

    lr: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    divergence_threshold: float = 1e6

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise DrewValidationError(f"学习率不能为负: {self.lr}")
        if self.epochs < 1 or self.batch_size < 1:
            raise DrewValidationError("epochs 和 batch_size 必须为正")


class RingBatcher:
    """把若干 RingTransfer 实例拼成一个批次

    所有实例共用同一个环，因此相同批大小的块对角算子只构造一次。
    """

    def __init__(self, dataset: RingTransferDataset, readout: ReadoutMode) -> None:
        self._dataset = dataset
        self._readout = readout
        self._ring_ops = operators_for(dataset.ring)
        self._cache: dict[int, GraphOperators] = {}
        self._features = np.stack(
            [dataset.features(c) for c in range(dataset.classes)]
        )

    def operators(self, count: int) -> GraphOperators:
        if count not in self._cache:
            self._cache[count] = batch_operators([self._ring_ops] * count)
        return self._cache[count]

    def batch(
        self, indices: np.ndarray
    ) -> tuple[GraphOperators, np.ndarray, np.ndarray | None, np.ndarray]:
        """返回 (算子, 特征, 读出节点或 None, 标签)"""
        ds = self._dataset
        labels = ds.labels[indices]
        ops = self.operators(len(indices))
        x = self._features[labels].reshape(-1, ds.classes)
        offsets = ops.graph_offsets
        if self._readout is ReadoutMode.MEAN:
            nodes = None
        elif self._readout is ReadoutMode.SOURCE:
            nodes = offsets + ds.source
        else:
            nodes = offsets + ds.target
        return ops, x, nodes, labels


def _check_compatible(config: ModelConfig, dataset: RingTransferDataset) -> None:
    if config.in_dim != dataset.classes or config.out_dim != dataset.classes:
        raise DrewValidationError(
            f"模型维度 in_dim={config.in_dim}, out_dim={config.out_dim} "
            f"与类别数 C={dataset.classes} 不一致"
        )


def evaluate(
    model: DrewModel,
    dataset: RingTransferDataset,
    split: Split,
    *,
    batch_size: int = 32,
    batcher: RingBatcher | None = None,
) -> float:
    """评估模式下的准确率；空划分返回 0"""
    _check_compatible(model.config, dataset)
    indices = dataset.indices(split)
    if len(indices) == 0:
        return 0.0
    batcher = batcher or RingBatcher(dataset, model.config.readout)
    correct = 0
    for start in range(0, len(indices), batch_size):
        ops, x, nodes, labels = batcher.batch(indices[start : start + batch_size])
        logits = model.logits(ops, x, nodes, training=False)
        correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return correct / len(indices)


def train(
    config: ModelConfig,
    dataset: RingTransferDataset,
    hyper: TrainHyper,
    *,
    name: str | None = None,
) -> tuple[TrainRunResult, DrewModel]:
    """训练一个模型

    以交叉熵在读出节点上训练，按验证集准确率选择最佳 epoch 的参数计算测试准确率。
    损失为 NaN 或超过阈值时停止，返回 failed=True 的结果。

    Returns:
        (运行结果, 已恢复到最佳 epoch 的模型)
    """
    _check_compatible(config, dataset)
    model_name = name or config.arch.value
    started = time.perf_counter()
    model = DrewModel.create(config, hyper.seed)
    params = model.params.parameters()
    state = AdamState(lr=hyper.lr)
    batcher = RingBatcher(dataset, config.readout)
    shuffle_rng = np.random.default_rng([hyper.seed, 1])
    train_idx = dataset.indices(Split.TRAIN)

    result = TrainRunResult(
        model=model_name,
        seed=hyper.seed,
        params=model.params.count(),
        config=config.to_dict(),
    )
    best_state = model.params.snapshot()
    best_val = -math.inf

    try:
        for epoch in range(hyper.epochs):
            losses: list[float] = []
            order = shuffle_rng.permutation(train_idx)
            for start in range(0, len(order), hyper.batch_size):
                chunk = order[start : start + hyper.batch_size]
                ops, x, nodes, labels = batcher.batch(chunk)
                zero_grads(params)
                with Tape() as tape:
                    logits = model.logits(ops, x, nodes, training=True)
                    loss = cross_entropy_logits(logits, labels)
                    tape.backward(loss)
                value = loss.item()
                if not math.isfinite(value) or value > hyper.divergence_threshold:
                    raise TrainingDivergedError(
                        f"损失发散: {value}",
                        marker=f"{model_name}/seed={hyper.seed}/epoch={epoch}",
                    )
                adam_step(params, state)
                losses.append(value)

            val_acc = evaluate(model, dataset, Split.VAL, batcher=batcher)
            result.train_loss.append(float(np.mean(losses)) if losses else 0.0)
            result.val_acc.append(val_acc)
            if val_acc > best_val:
                best_val = val_acc
                result.best_epoch = epoch
                best_state = model.params.snapshot()
            logger.info(
                f"[{model_name}] epoch {epoch + 1}/{hyper.epochs} "
                f"loss={result.train_loss[-1]:.4f} val_acc={val_acc:.4f}"
            )
    except TrainingDivergedError as e:
        logger.error(f"训练发散 [{e.marker}]: {e}")
        result.failed = True
        result.failure = f"{e.marker}: {e}"
        result.seconds = time.perf_counter() - started
        return result, model

    model.params.restore(best_state)
    result.test_acc = evaluate(model, dataset, Split.TEST, batcher=batcher)
    result.seconds = time.perf_counter() - started
    logger.info(
        f"[{model_name}] 完成: best_epoch={result.best_epoch + 1} "
        f"val_acc={result.best_val_acc:.4f} test_acc={result.test_acc:.4f} "
        f"({result.seconds:.1f}s)"
    )
    return result, model


def constant_baseline(dataset: RingTransferDataset, seed: int = 0) -> TrainRunResult:
    """常数预测基线：总是输出训练集中的多数类"""
    started = time.perf_counter()
    train_labels = dataset.labels[dataset.indices(Split.TRAIN)]
    majority = int(np.argmax(np.bincount(train_labels, minlength=dataset.classes)))

    def accuracy(split: Split) -> float:
        labels = dataset.labels[dataset.indices(split)]
        return float(np.mean(labels == majority)) if len(labels) else 0.0

    return TrainRunResult(
        model=CONSTANT_MODEL,
        train_loss=[],
        val_acc=[accuracy(Split.VAL)],
        test_acc=accuracy(Split.TEST),
        best_epoch=0,
        seconds=time.perf_counter() - started,
        seed=seed,
        params=0,
        config={"arch": CONSTANT_MODEL, "majority": majority},
    )


@dataclass(frozen=True)
class ModelSpec:
    """扫描中的一个模型：名称 + 覆盖项

    Attributes:
        token: 原始名称，如 "drew_gcn:nu=1"
        arch: 结构；None 表示常数基线
        options: 冒号后的 key=value 覆盖项
    """

    token: str
    arch: Architecture | None
    options: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, token: str) -> ModelSpec:
        """解析 `arch[:key=value[:key=value]]`；允许的键为 nu、k_cap、weight_sharing

        模型列表在配置中以逗号分隔，因此选项之间用冒号分隔。
        """
        head, _, tail = token.strip().partition(":")
        if head == CONSTANT_MODEL:
            return cls(token=token.strip(), arch=None)
        try:
            arch = Architecture(head)
        except ValueError as e:
            raise DrewValidationError(f"未知的模型: {head}") from e
        options = []
        for item in filter(None, (part.strip() for part in tail.split(":"))):
            key, sep, value = item.partition("=")
            if not sep or key not in {"nu", "k_cap", "weight_sharing"}:
                raise DrewValidationError(f"模型选项不合法: {item!r} ({token})")
            options.append((key, value))
        return cls(token=token.strip(), arch=arch, options=tuple(options))

    def config(self, layers: int, classes: int, hidden: int) -> ModelConfig:
        """按层数和类别数实例化配置；nu=half 表示 ⌊L/2⌋（至少为 1）"""
        if self.arch is None:
            raise DrewValidationError("常数基线没有模型配置")
        kwargs: dict[str, object] = {}
        for key, value in self.options:
            if key == "nu":
                kwargs["nu"] = (
                    DelayPolicy(float(max(1, layers // 2)))
                    if value == "half"
                    else DelayPolicy.parse(value)
                )
            elif key == "k_cap":
                kwargs["k_cap"] = int(value)
            else:
                kwargs["weight_sharing"] = value.lower() in {"1", "true", "yes"}
        if self.arch is Architecture.SP_GCN and "k_cap" not in kwargs:
            kwargs["k_cap"] = layers
        return ModelConfig(
            arch=self.arch,
            layers=layers,
            hidden=hidden,
            in_dim=classes,
            out_dim=classes,
            **kwargs,  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class GridCell:
    spec: ModelSpec
    k: int
    repeat: int


def reference_budget(
    reference_arch: Architecture, layers: int, classes: int, hidden: int
) -> int:
    """参考模型（GCN 或 SP-GCN，固定隐藏维度）的参数量"""
    ref = ModelSpec(token=reference_arch.value, arch=reference_arch)
    return count_params(ref.config(layers, classes, hidden))


def run_grid(
    specs: Sequence[ModelSpec],
    ring_lengths: Sequence[int],
    *,
    repeats: int,
    dataset_size: int,
    classes: int,
    hyper: TrainHyper,
    hidden_for: Callable[[ModelSpec, int], int],
    threads: int = 1,
) -> list[SweepRow]:
    """对 (模型, k, 重复) 网格逐格训练；第 r 次重复使用种子 hyper.seed + r

    层数固定为 L = ⌊k/2⌋，即源与目标交互所需的最小深度。
    """
    datasets = {
        (k, r): gen_ring_transfer(dataset_size, k, classes, hyper.seed + r)
        for k in ring_lengths
        for r in range(repeats)
    }
    cells = [
        GridCell(spec, k, r)
        for k in ring_lengths
        for spec in specs
        for r in range(repeats)
    ]

    def run_cell(cell: GridCell) -> SweepRow:
        layers = cell.k // 2
        dataset = datasets[(cell.k, cell.repeat)]
        seed = hyper.seed + cell.repeat
        if cell.spec.arch is None:
            run = constant_baseline(dataset, seed)
        else:
            config = cell.spec.config(layers, classes, hidden_for(cell.spec, cell.k))
            cell_hyper = replace(hyper, seed=seed)
            run, _ = train(config, dataset, cell_hyper, name=cell.spec.token)
        logger.info(
            f"单元完成: {cell.spec.token} k={cell.k} L={layers} seed={seed} "
            f"test_acc={run.test_acc:.4f}{' (失败)' if run.failed else ''}"
        )
        return SweepRow.from_run(run, cell.k, layers)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(cell) for cell in cells]


def sweep(
    models: Sequence[str],
    ring_lengths: Sequence[int],
    *,
    repeats: int = 3,
    dataset_size: int = 2000,
    classes: int = 5,
    hyper: TrainHyper | None = None,
    reference_arch: Architecture = Architecture.GCN,
    reference_hidden: int = 256,
    threads: int = 1,
) -> list[SweepRow]:
    """参数预算匹配的 RingTransfer 扫描

    每个 k 以参考模型在 reference_hidden 下的参数量为预算，
    SP-GCN 与参考模型一样固定用 reference_hidden，
    其余模型用 solve_hidden 求出不超过预算的最大隐藏维度。
    返回 |models| × |ring_lengths| × repeats 行。
    """
    specs = [ModelSpec.parse(token) for token in models]

    def hidden_for(spec: ModelSpec, k: int) -> int:
        layers = k // 2
        if spec.arch is Architecture.SP_GCN or (
            spec.arch is reference_arch and not spec.options
        ):
            return reference_hidden
        budget = reference_budget(reference_arch, layers, classes, reference_hidden)
        return solve_hidden(spec.config(layers, classes, 1), budget).hidden

    return run_grid(
        specs,
        ring_lengths,
        repeats=repeats,
        dataset_size=dataset_size,
        classes=classes,
        hyper=hyper or TrainHyper(),
        hidden_for=hidden_for,
        threads=threads,
    )


DELAY_ABLATION_MODELS = (
    "gcn",
    "drew_gcn:nu=1",
    "drew_gcn:nu=half",
    "drew_gcn:nu=inf",
)


def delay_ablation(
    ring_lengths: Sequence[int],
    *,
    hidden: int,
    repeats: int = 3,
    dataset_size: int = 2000,
    classes: int = 5,
    hyper: TrainHyper | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """延迟消融：经典残差 GCN 与 ν ∈ {1, ⌊L/2⌋, ∞} 的 DRew-GCN，固定隐藏维度"""
    specs = [ModelSpec.parse(token) for token in DELAY_ABLATION_MODELS]
    return run_grid(
        specs,
        ring_lengths,
        repeats=repeats,
        dataset_size=dataset_size,
        classes=classes,
        hyper=hyper or TrainHyper(),
        hidden_for=lambda _spec, _k: hidden,
        threads=threads,
    )
