"""Interface 模块 - 命令行界面

本模块提供基于 argparse 的命令行入口。
"""
