"""RingTransfer 数据集生成与导出"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..domain.errors import DrewValidationError
from ..domain.ring_transfer import RingTransferDataset, Split
from ..infrastructure.edge_list_io import write_edge_list
from ..infrastructure.graph_generators import cycle_graph

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


def split_sizes(size: int) -> tuple[int, int, int]:
    """80:10:10 划分：训练集 ⌈0.8N⌉，剩余部分对半（余数归测试集）"""
    n_train = -(-4 * size // 5)
    n_val = (size - n_train) // 2
    return n_train, n_val, size - n_train - n_val


def gen_ring_transfer(
    size: int, ring_length: int, classes: int, seed: int
) -> RingTransferDataset:
    """生成 RingTransfer 数据集

    每个划分内标签按 i mod C 均衡分配后再随机打乱，因此各类数量相差不超过 1。

    Args:
        size: 实例数量 N（不少于 C）
        ring_length: 环长 k（至少为 3）
        classes: 类别数 C（至少为 2）
        seed: 随机种子

    Returns:
        RingTransferDataset
    """
    if ring_length < 3:
        raise DrewValidationError(f"环长必须至少为 3: k={ring_length}")
    if classes < 2:
        raise DrewValidationError(f"类别数必须至少为 2: C={classes}")
    if size < classes:
        raise DrewValidationError(f"实例数不能少于类别数: N={size}, C={classes}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(size)
    n_train, n_val, _ = split_sizes(size)
    boundaries = [(Split.TRAIN, 0, n_train), (Split.VAL, n_train, n_train + n_val)]
    boundaries.append((Split.TEST, n_train + n_val, size))

    labels = np.zeros(size, dtype=np.int64)
    splits: list[Split] = [Split.TRAIN] * size
    for split, start, stop in boundaries:
        members = order[start:stop]
        balanced = np.arange(len(members), dtype=np.int64) % classes
        labels[members] = rng.permutation(balanced)
        for idx in members:
            splits[int(idx)] = split

    dataset = RingTransferDataset(
        size=size,
        ring_length=ring_length,
        classes=classes,
        ring=cycle_graph(ring_length),
        labels=labels,
        splits=tuple(splits),
        seed=seed,
    )
    logger.info(
        f"生成 RingTransfer: N={size}, k={ring_length}, C={classes}, "
        f"划分 {n_train}/{n_val}/{size - n_train - n_val}"
    )
    return dataset


def dump_dataset(dataset: RingTransferDataset, out_dir: Path) -> Path:
    """每个实例写一个边列表文件，另写一行一个实例的 JSON 清单

    Returns:
        清单文件路径
    """
    graphs_dir = out_dir / "graphs"
    graphs_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / MANIFEST_NAME
    with open(manifest, "w", encoding="utf-8") as f:
        for i in range(dataset.size):
            inst = dataset.instance(i)
            edge_file = graphs_dir / f"instance_{i:05d}.edges"
            write_edge_list(dataset.ring, edge_file)
            record = {
                "id": inst.index,
                "label": inst.label,
                "source": inst.source,
                "target": inst.target,
                "split": inst.split.value,
                "edges": edge_file.relative_to(out_dir).as_posix(),
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    logger.info(f"数据集已导出: {out_dir} ({dataset.size} 个实例)")
    return manifest
