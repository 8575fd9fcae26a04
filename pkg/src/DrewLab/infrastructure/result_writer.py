"""结果文件写出

CSV 列顺序固定；每个 CSV/JSON 输出都带库版本号和随机种子。
"""
from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from ..domain.results import SweepCell, SweepRow
from .version import get_version

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "model",
    "k",
    "L",
    "seed",
    "val_acc",
    "test_acc",
    "params",
    "seconds",
    "version",
)

SUMMARY_COLUMNS = (
    "model",
    "k",
    "L",
    "mean_test_acc",
    "std_test_acc",
    "runs",
    "failed",
    "seed",
    "version",
)

FAILED_MARK = "failed"


def _row_values(row: SweepRow, version: str) -> list[str]:
    if row.failed:
        val_acc = test_acc = FAILED_MARK
    else:
        val_acc, test_acc = f"{row.val_acc:.6f}", f"{row.test_acc:.6f}"
    return [
        row.model,
        str(row.k),
        str(row.layers),
        str(row.seed),
        val_acc,
        test_acc,
        str(row.params),
        f"{row.seconds:.3f}",
        version,
    ]


def append_results_csv(path: Path, rows: Iterable[SweepRow]) -> int:
    """追加写入运行结果；文件不存在时先写表头。返回写入的行数"""
    path.parent.mkdir(parents=True, exist_ok=True)
    is_new = not path.exists() or path.stat().st_size == 0
    version = get_version()
    count = 0
    with open(path, "a", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        if is_new:
            writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(_row_values(row, version))
            count += 1
    logger.info(f"写入 {count} 行结果: {path}")
    return count


def write_summary_csv(path: Path, cells: Iterable[SweepCell], seed: int) -> None:
    """写出 (模型, k) 汇总表，每次覆盖"""
    path.parent.mkdir(parents=True, exist_ok=True)
    version = get_version()
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for cell in cells:
            writer.writerow(
                [
                    cell.model,
                    cell.k,
                    cell.layers,
                    f"{cell.mean_test_acc:.6f}",
                    f"{cell.std_test_acc:.6f}",
                    cell.runs,
                    cell.failed,
                    seed,
                    version,
                ]
            )
    logger.info(f"写入汇总表: {path}")


def write_json(path: Path, payload: dict[str, Any], seed: int) -> None:
    """写出 JSON 报告，附带版本号和种子"""
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"version": get_version(), "seed": seed, **payload}
    path.write_text(
        json.dumps(document, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    logger.info(f"写入报告: {path}")
