"""DrewLab - 动态重连延迟消息传递 (νDRew) 实验库"""
