"""命令行界面

子命令与 ExperimentService 的方法一一对应。退出码：
0 成功，1 未预期的失败，2 配置或输入错误，3 训练发散。
"""
from __future__ import annotations

import argparse
import logging
import sys
from enum import IntEnum
from pathlib import Path

from ..application.experiment_service import ExperimentService
from ..domain.errors import ConfigError, DrewValidationError, TrainingDivergedError
from ..infrastructure.run_config import load_run_config
from ..infrastructure.version import get_version

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    FAILURE = 1
    CONFIG_ERROR = 2
    DIVERGED = 3


# 子命令 -> (ExperimentService 方法名, 帮助信息)
COMMANDS: dict[str, tuple[str, str]] = {
    "precompute": ("precompute", "边列表 -> 跳数索引缓存"),
    "train": ("train", "训练一个模型，写出结果和检查点"),
    "eval": ("evaluate", "载入检查点并评估"),
    "ringtransfer-sweep": ("ringtransfer_sweep", "参数预算匹配的 RingTransfer 扫描"),
    "delay-ablation": ("delay_ablation", "GCN 与不同 ν 的 DRew-GCN 对比"),
    "sensitivity": ("sensitivity", "雅可比敏感度报告"),
    "schedule-dump": ("schedule_dump", "导出层调度表"),
    "params": ("params", "统计参数量"),
    "dump-dataset": ("dump_dataset", "导出 RingTransfer 数据集"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI 配置文件")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--threads", type=int, help="线程数")
    common.add_argument("--verbose", action="store_true", help="输出调试日志")
    common.add_argument("--log-dir", type=Path, help="日志目录")
    common.add_argument(
        "overrides",
        nargs="*",
        metavar="key=value",
        help="覆盖单个配置项，如 L=3 或 model.nu=1",
    )

    parser = argparse.ArgumentParser(
        prog="DrewLab", description="νDRew 动态重连消息传递实验工具"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {get_version()}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def run_command(args: argparse.Namespace) -> ExitCode:
    """执行已解析的子命令并返回退出码"""
    try:
        config = load_run_config(
            args.config,
            args.overrides,
            seed=args.seed,
            out_dir=args.out,
            threads=args.threads,
        )
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return ExitCode.CONFIG_ERROR

    service = ExperimentService(config)
    method_name, _ = COMMANDS[args.command]
    try:
        success, message = getattr(service, method_name)()
    except TrainingDivergedError as e:
        logger.error(f"训练发散，运行标记: {e.marker}")
        return ExitCode.DIVERGED
    except DrewValidationError as e:
        logger.error(f"输入错误: {e}")
        return ExitCode.CONFIG_ERROR

    if not success:
        return ExitCode.FAILURE
    sys.stdout.write(message if message.endswith("\n") else message + "\n")
    return ExitCode.OK
