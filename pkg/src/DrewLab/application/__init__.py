"""Application 模块 - 模型、训练和敏感度分析

本模块负责业务流程的编排。
"""
