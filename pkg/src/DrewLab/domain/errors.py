"""异常类型

所有异常都继承自内置异常类型，调用方可以按 ValueError / IndexError 捕获。
"""


class DrewValidationError(ValueError):
    """输入校验失败"""


class ShapeMismatchError(DrewValidationError):
    """张量维度不匹配"""


class FormatError(DrewValidationError):
    """文件格式错误或版本不受支持"""


class ConfigError(DrewValidationError):
    """运行配置不合法；消息以 `section.key` 开头"""


class OutOfRangeError(IndexError):
    """索引越界（跳数、层号、节点号）"""


class TrainingDivergedError(RuntimeError):
    """训练发散（损失为 NaN 或超过阈值）

    Attributes:
        marker: 运行标记，用于在结果文件中定位失败的运行
    """

    def __init__(self, message: str, marker: str = "") -> None:
        super().__init__(message)
        self.marker = marker
