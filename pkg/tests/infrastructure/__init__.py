"""Infrastructure 层测试"""
