"""跳数索引缓存

以 numpy .npz 保存 HopIndex：每个壳层存 CSR 的 indptr / indices，
另存节点数、k_max 和格式版本号。
"""
from __future__ import annotations

import logging
import zipfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..domain.errors import FormatError
from ..domain.hop_index import DENSE_DIST_THRESHOLD, HopIndex, distance_table

logger = logging.getLogger(__name__)

HOP_CACHE_FORMAT_VERSION = 1


def save_hop_index(hi: HopIndex, path: Path) -> None:
    """写入缓存文件（.npz）"""
    arrays: dict[str, np.ndarray] = {
        "format_version": np.asarray(HOP_CACHE_FORMAT_VERSION, dtype=np.int64),
        "n": np.asarray(hi.n, dtype=np.int64),
        "k_max": np.asarray(hi.k_max, dtype=np.int64),
    }
    for k, m in hi.shells.items():
        arrays[f"shell{k}_indptr"] = m.indptr.astype(np.int64)
        arrays[f"shell{k}_indices"] = m.indices.astype(np.int64)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez_compressed(f, **arrays)
    logger.info(f"跳数索引已缓存: {path} (n={hi.n}, k_max={hi.k_max})")


def load_hop_index(path: Path) -> HopIndex:
    """读取缓存文件

    Raises:
        FileNotFoundError: 文件不存在
        FormatError: 文件损坏、缺少字段或版本不受支持
    """
    if not path.exists():
        raise FileNotFoundError(f"跳数索引缓存不存在: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {name: data[name] for name in data.files}
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise FormatError(f"跳数索引缓存损坏: {path}: {e}") from e

    if "format_version" not in arrays:
        raise FormatError(f"跳数索引缓存缺少 format_version: {path}")
    version = int(arrays["format_version"])
    if version != HOP_CACHE_FORMAT_VERSION:
        raise FormatError(f"不支持的跳数索引缓存版本: {version}")

    try:
        n = int(arrays["n"])
        k_max = int(arrays["k_max"])
        shells: dict[int, sp.csr_matrix] = {}
        for k in range(1, k_max + 1):
            indptr = arrays[f"shell{k}_indptr"]
            indices = arrays[f"shell{k}_indices"]
            shells[k] = sp.csr_matrix(
                (np.ones(len(indices)), indices, indptr), shape=(n, n)
            )
    except (KeyError, ValueError) as e:
        raise FormatError(f"跳数索引缓存内容不完整: {e}") from e

    dist = distance_table(n, shells) if n <= DENSE_DIST_THRESHOLD else None
    logger.info(f"读取跳数索引缓存: {path.name} (n={n}, k_max={k_max})")
    return HopIndex(n=n, k_max=k_max, shells=shells, dist=dist)
