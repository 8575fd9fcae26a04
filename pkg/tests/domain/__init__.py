"""Domain 层测试"""
