"""
比较方程 g' = -g^2 + Kc^2 的显式解、数值解与半区间界
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .config import COMPARISON_RTOL, RICCATI_SERIES_TOL
from .exceptions import ParameterError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class RiccatiInput:
    """g(0) = g0，常数 Kc >= 1，时间窗 [0, T]"""
    g0: float
    Kc: float
    T: float

    def __post_init__(self):
        if self.g0 < 0:
            raise ParameterError(f"g0 must be nonnegative, got {self.g0}")
        if self.Kc < 1:
            raise ParameterError(f"Kc must be at least 1, got {self.Kc}")
        if not self.T > 0:
            raise ParameterError(f"T must be positive, got {self.T}")


def riccati_explicit(inp: RiccatiInput, t: ArrayLike) -> ArrayLike:
    """
    显式解 g(t) = Kc + 2Kc ((g0+Kc)/(g0-Kc) e^{2Kc t} - 1)^{-1}

    按 g = Kc + 2Kc e^{-2Kc t} / (r - e^{-2Kc t}) 计算以避免溢出；
    g0 与 Kc 极接近时使用线性化 Kc + (g0 - Kc) e^{-2Kc t}。

    Args:
        inp: 初值与常数
        t: 时间（标量或数组），0 <= t <= T

    Returns:
        g(t)

    Raises:
        ParameterError: t 超出 [0, T]
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > inp.T):
        raise ParameterError(f"t must lie in [0, {inp.T}], got {t}")
    K = inp.Kc
    diff = inp.g0 - K
    decay = np.exp(-2.0 * K * t_arr)
    if abs(diff) < RICCATI_SERIES_TOL * K:
        result = K + diff * decay
    else:
        ratio = (inp.g0 + K) / diff
        result = K + 2.0 * K * decay / (ratio - decay)
    if np.ndim(t) == 0:
        return float(result)
    return result


def _rhs(g: float, K: float) -> float:
    return -g * g + K * K


def _rk4_step(g: float, K: float, h: float) -> float:
    k1 = _rhs(g, K)
    k2 = _rhs(g + 0.5 * h * k1, K)
    k3 = _rhs(g + 0.5 * h * k2, K)
    k4 = _rhs(g + h * k3, K)
    return g + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def riccati_numeric(inp: RiccatiInput, grid: Sequence[float], max_lipschitz_step: float = 0.005) -> np.ndarray:
    """
    经典四阶 Runge-Kutta 在给定时间网格上积分 g' = -g^2 + Kc^2

    网格间距内按 h * max(g, Kc) <= max_lipschitz_step 自动细分，
    以处理大初值的快速下降。

    Args:
        inp: 初值与常数
        grid: 递增时间网格，从 0 开始
        max_lipschitz_step: 子步的 h * |2g| 上限

    Returns:
        网格上的 g 值
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return np.empty(0)
    if grid[0] != 0 or np.any(np.diff(grid) < 0):
        raise ParameterError("grid must start at 0 and be nondecreasing")
    values = np.empty_like(grid)
    g = inp.g0
    values[0] = g
    for i in range(1, grid.size):
        remaining = grid[i] - grid[i - 1]
        while remaining > 0:
            h = min(remaining, max_lipschitz_step / max(abs(g), inp.Kc))
            g = _rk4_step(g, inp.Kc, h)
            remaining -= h
            if remaining < 1e-15 * max(1.0, grid[i]):
                remaining = 0.0
        values[i] = g
    return values


def halfinterval_bound(Kc: float, T: float) -> float:
    """对任意 g0 >= 0 与 t in [T/2, T]: g(t) <= Kc (1 + 2/(e^T - 1))"""
    if Kc < 1:
        raise ParameterError(f"Kc must be at least 1, got {Kc}")
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    return Kc * (1.0 + 2.0 / np.expm1(T))


@dataclass
class ComparisonResult:
    passed: bool
    first_violation: Optional[int]
    max_ratio: float


def comparison_verify(
    h_trace: Sequence[Tuple[float, float]],
    Kc: float,
    rtol: float = COMPARISON_RTOL,
) -> ComparisonResult:
    """
    检验 h(t_i) <= g(t_i)(1 + rtol)，g 从 g(0) = h(0) 出发

    Args:
        h_trace: (t, h(t)) 序列，h 非负，t 递增且从 0 开始
        Kc: Riccati 常数
        rtol: 相对容差

    Returns:
        ComparisonResult: 是否通过、第一个违反的下标、最大比值 h/g

    Raises:
        ParameterError: 轨迹为空或格式不符
    """
    trace = np.asarray(h_trace, dtype=float)
    if trace.size == 0:
        raise ParameterError("comparison trace is empty")
    if trace.ndim != 2 or trace.shape[1] != 2:
        raise ParameterError(f"trace must be a sequence of (t, h) pairs, got shape {trace.shape}")
    times = trace[:, 0] - trace[0, 0]
    h = trace[:, 1]
    if np.any(h < 0) or np.any(np.diff(times) < 0):
        raise ParameterError("trace must be nonnegative and time-increasing")
    horizon = max(float(times[-1]), np.finfo(float).tiny)
    g = np.atleast_1d(riccati_explicit(RiccatiInput(float(h[0]), Kc, horizon), np.clip(times, 0, horizon)))
    violations = np.nonzero(h > g * (1.0 + rtol))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(g > 0, h / g, np.where(h > 0, np.inf, 0.0))
    return ComparisonResult(
        passed=violations.size == 0,
        first_violation=int(violations[0]) if violations.size else None,
        max_ratio=float(np.max(ratios)),
    )
