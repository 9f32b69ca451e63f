# common/errors.py
# 统一异常体系：所有数值/配置错误都继承 ChainError，CLI 按类型映射退出码
from typing import Optional


class ChainError(Exception):
    """所有领域错误的基类"""


class InvalidInputError(ChainError):
    """输入不满足前置条件 (validation error)"""


class OutOfRangeError(ChainError):
    """切口/区间/参数越界 (range error)"""


class ResourceLimitError(ChainError):
    """超出内存预算或稠密求解器上限"""


class NumericalError(ChainError):
    """不收敛，或双路径交叉校验不一致"""


class InsufficientDataError(ChainError):
    """数据点太少，无法拟合"""


class BoundUndefinedError(ChainError):
    """界在该点无定义 (例如 log 0)"""


class DegenerateGroundStateError(ChainError):
    """面积律扫描拒绝简并基态"""


class ConfigError(ChainError):
    """实验配置无法解析或字段非法"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field
