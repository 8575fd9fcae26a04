"""模型检查点

二进制格式（小端）：
    magic b"DRWCKPT" | u32 版本 | u32 配置 JSON 长度 | 配置 JSON (UTF-8) | u32 条目数
    每个条目: u16 名称长度 | 名称 | u8 类别(0 参数 / 1 缓冲区) | u8 维数 | u32 × 维数 | <f8 数据
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from ..domain.errors import FormatError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"DRWCKPT"
CHECKPOINT_VERSION = 1

_KIND_PARAM = 0
_KIND_BUFFER = 1


@dataclass
class Checkpoint:
    """检查点内容

    Attributes:
        config: 模型配置字典（ModelConfig.to_dict()）
        tensors: 参数名 -> 数组
        buffers: 缓冲区名 -> 数组（批归一化滑动统计量）
    """

    config: dict[str, Any]
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)


def _write_entry(f: BinaryIO, name: str, kind: int, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    data = np.ascontiguousarray(arr, dtype="<f8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<BB", kind, data.ndim))
    f.write(struct.pack(f"<{data.ndim}I", *data.shape))
    f.write(data.tobytes())


def save_checkpoint(path: Path, ckpt: Checkpoint) -> None:
    config_bytes = json.dumps(ckpt.config, ensure_ascii=False, sort_keys=True).encode(
        "utf-8"
    )
    entries = [(name, _KIND_PARAM, arr) for name, arr in ckpt.tensors.items()]
    entries += [(name, _KIND_BUFFER, arr) for name, arr in ckpt.buffers.items()]

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(config_bytes)))
        f.write(config_bytes)
        f.write(struct.pack("<I", len(entries)))
        for name, kind, arr in entries:
            _write_entry(f, name, kind, arr)
    logger.info(f"检查点已保存: {path} ({len(entries)} 项)")


class _Reader:
    """带越界检查的字节读取器"""

    def __init__(self, raw: bytes) -> None:
        self._raw = raw
        self._pos = 0

    def take(self, size: int) -> bytes:
        if self._pos + size > len(self._raw):
            raise FormatError("检查点文件被截断")
        chunk = self._raw[self._pos : self._pos + size]
        self._pos += size
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._raw)


def load_checkpoint(path: Path) -> Checkpoint:
    """读取检查点

    Raises:
        FileNotFoundError: 文件不存在
        FormatError: 魔数错误、版本不受支持或内容被截断
    """
    if not path.exists():
        raise FileNotFoundError(f"检查点文件不存在: {path}")
    reader = _Reader(path.read_bytes())

    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise FormatError(f"不是检查点文件: {path}")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"不支持的检查点版本: {version}")

    (config_len,) = reader.unpack("<I")
    try:
        config = json.loads(reader.take(config_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"检查点配置损坏: {e}") from e

    ckpt = Checkpoint(config=config)
    (count,) = reader.unpack("<I")
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        kind, ndim = reader.unpack("<BB")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(reader.take(8 * size), dtype="<f8").reshape(shape)
        if kind not in (_KIND_PARAM, _KIND_BUFFER):
            raise FormatError(f"未知的条目类别: {kind} ({name})")
        target = ckpt.tensors if kind == _KIND_PARAM else ckpt.buffers
        target[name] = arr.astype(np.float64)

    if not reader.exhausted:
        raise FormatError("检查点文件末尾有多余数据")
    logger.info(f"读取检查点: {path.name} ({count} 项)")
    return ckpt
