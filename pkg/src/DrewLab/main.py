"""应用入口模块

负责日志配置和命令分发。
"""
import logging
import sys
from collections.abc import Sequence
from datetime import date
from logging.handlers import RotatingFileHandler
from pathlib import Path

# 添加 DrewLab 包到 Python 路径（PyInstaller 兼容）
if getattr(sys, "frozen", False):
    # PyInstaller 打包后的路径
    if hasattr(sys, "_MEIPASS"):
        # 单文件打包
        sys.path.insert(0, str(Path(sys._MEIPASS)))
    else:
        # 目录打包
        sys.path.insert(0, str(Path(sys.executable).parent))
else:
    # 开发环境
    project_root = Path(__file__).parent.parent
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))

from DrewLab.infrastructure.paths import get_logs_dir
from DrewLab.interface.cli import ExitCode, build_parser, run_command


def setup_logging(verbose: bool = False, log_dir: Path | None = None) -> Path:
    """配置日志系统

    Returns:
        日志文件路径
    """
    level = logging.DEBUG if verbose else logging.INFO
    logs_dir = log_dir or get_logs_dir()
    logs_dir.mkdir(parents=True, exist_ok=True)
    log_file = logs_dir / f"app_{date.today():%Y%m%d}.log"

    # 配置根日志器
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # 控制台处理器
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(
        logging.Formatter("[%(asctime)s] %(message)s", datefmt="%H:%M:%S")
    )

    # 文件处理器
    file_handler = RotatingFileHandler(
        log_file, maxBytes=10 * 1024 * 1024, backupCount=5, encoding="utf-8"
    )
    file_handler.setLevel(level)
    file_handler.setFormatter(
        logging.Formatter("%(asctime)s - %(levelname)s - %(name)s - %(message)s")
    )

    root_logger.handlers.clear()
    root_logger.addHandler(console_handler)
    root_logger.addHandler(file_handler)
    return log_file


def main(argv: Sequence[str] | None = None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.log_dir)
    logging.info(f"执行命令: {args.command}")

    try:
        return int(run_command(args))
    except Exception as e:
        logging.error(f"运行失败: {e}", exc_info=True)
        return int(ExitCode.FAILURE)


if __name__ == "__main__":
    sys.exit(main())
