"""Domain 模块 - 图、跳数索引、层调度和实验实体

本模块定义与计算框架无关的核心业务实体。
"""
