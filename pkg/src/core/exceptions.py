"""
异常定义
模拟与统计模块共用的错误类型
"""


class GLSimError(Exception):
    """所有 glsim 错误的基类"""


class ParameterError(GLSimError, ValueError):
    """参数不满足前置条件或模型假设（CLI 退出码 2）"""


class FieldOverflowError(GLSimError, ArithmeticError):
    """网格上出现非有限值（非线性项溢出）"""


class StepRejectedError(GLSimError, ArithmeticError):
    """单次 Y 步被拒绝（溢出或显式稳定性条件不满足）"""


class TrajectoryAbortedError(GLSimError, RuntimeError):
    """达到最大折半次数后仍被拒绝，放弃该轨迹"""

    def __init__(self, trajectory_index: int, time: float, reason: str):
        self.trajectory_index = trajectory_index
        self.time = time
        self.reason = reason
        super().__init__(
            f"Trajectory {trajectory_index} aborted at t={time:.6g}: {reason}"
        )


class EstimationError(GLSimError, RuntimeError):
    """估计量无法给出数值（例如全部样本被截断）（CLI 退出码 3）"""
