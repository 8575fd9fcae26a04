"""版本信息

版本号只保存在项目根目录的 version_info.json 中，由 build.py --set-version 更新。
"""
import json
import logging
from functools import lru_cache

from .paths import get_project_root

logger = logging.getLogger(__name__)

UNKNOWN_VERSION = "0.0.0"


@lru_cache(maxsize=1)
def get_version() -> str:
    """读取库版本号；文件缺失或损坏时返回 UNKNOWN_VERSION"""
    version_file = get_project_root() / "version_info.json"
    try:
        data = json.loads(version_file.read_text(encoding="utf-8"))
        return str(data["version"])
    except (OSError, ValueError, KeyError) as e:
        logger.warning(f"无法读取版本信息: {e}")
        return UNKNOWN_VERSION
