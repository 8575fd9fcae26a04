import sys
from pathlib import Path


def get_project_root() -> Path:
    """获取项目根目录"""
    if getattr(sys, "frozen", False):
        # PyInstaller 打包后 version_info.json 位于解包目录
        return Path(getattr(sys, "_MEIPASS", Path(sys.executable).parent))
    # 从 infrastructure/paths.py 向上 3 层是 src/，再向上 1 层是项目根目录
    return Path(__file__).parent.parent.parent.parent


def get_logs_dir() -> Path:
    """默认日志目录（打包后放在可执行文件旁边）"""
    if getattr(sys, "frozen", False):
        return Path(sys.executable).parent / "logs"
    return get_project_root() / "logs"
