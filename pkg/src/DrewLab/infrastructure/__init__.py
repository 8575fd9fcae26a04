"""Infrastructure 模块 - 张量引擎、优化器和文件格式

本模块实现数值计算与文件读写的底层逻辑。
"""
