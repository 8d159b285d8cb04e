"""
对称 alpha-稳定噪声

Chambers-Mallows-Stuck (CMS) 变换采样标准对称稳定变量，特征函数为
exp(-|t|^alpha)；尺度参数 s 对应 exp(-s^alpha |t|^alpha)，因此 alpha=2 时
方差为 2 s^2。
"""

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import ParameterError

ArrayLike = Union[float, np.ndarray]

FOUR_PI_SQ = 4.0 * np.pi ** 2


def _check_alpha(alpha: float) -> None:
    if not (1.0 < alpha <= 2.0):
        raise ParameterError(f"alpha must lie in (1, 2], got {alpha}")


def cms_transform(alpha: float, u: ArrayLike, w: ArrayLike) -> ArrayLike:
    """
    CMS 变换

    Args:
        alpha: 稳定指数
        u: (-pi/2, pi/2) 上的均匀变量
        w: 单位指数变量

    Returns:
        标准对称 alpha-稳定样本
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if alpha == 2.0:
        # 化简为 2 sin(U) sqrt(W)
        return 2.0 * np.sin(u) * np.sqrt(w)
    head = np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
    tail = (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    return head * tail


def sample_standard_stable(
    alpha: float,
    rng: np.random.Generator,
    size: Optional[Union[int, tuple]] = None,
) -> ArrayLike:
    """
    采样标准对称 alpha-稳定变量（尺度 1）

    Args:
        alpha: 稳定指数，1 < alpha <= 2
        rng: 随机数流
        size: 输出形状，None 时返回单个浮点数

    Returns:
        样本（float 或 ndarray）

    Raises:
        ParameterError: alpha 超出范围
    """
    _check_alpha(alpha)
    u = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=size)
    w = rng.standard_exponential(size=size)
    draws = cms_transform(alpha, u, w)
    if size is None:
        return float(draws)
    return draws


@dataclass(frozen=True)
class StableParams:
    """对称稳定过程参数（无偏度）"""
    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.scale > 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")


def stable_increment(
    params: StableParams,
    dt: float,
    rng: np.random.Generator,
    size: Optional[Union[int, tuple]] = None,
) -> ArrayLike:
    """时间步 dt 上的稳定过程增量: scale * dt^(1/alpha) * S_alpha"""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    factor = params.scale * dt ** (1.0 / params.alpha)
    return factor * sample_standard_stable(params.alpha, rng, size=size)


def eigenvalues(K: int) -> np.ndarray:
    """gamma_k = 4 pi^2 k^2, k = 1..K"""
    k = np.arange(1, K + 1, dtype=float)
    return FOUR_PI_SQ * k ** 2


def admissibility_violation(alpha: float, beta: float) -> Optional[str]:
    """
    检查 (alpha, beta) 是否落在适定区域

    Returns:
        违反时返回引用具体不等式的说明，否则 None
    """
    if not (1.5 < alpha < 2.0):
        return f"alpha in (3/2, 2) violated: alpha = {alpha}"
    lower = 0.5 + 1.0 / (2.0 * alpha)
    upper = 1.5 - 1.0 / alpha
    if not (lower < beta < upper):
        return (
            f"1/2 + 1/(2 alpha) < beta < 3/2 - 1/alpha violated: "
            f"{lower:.6g} < {beta} < {upper:.6g} is false"
        )
    return None


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    """
    噪声谱: beta_k = gamma_k^(-beta)

    amplitude 是整体倍数（0 表示关闭噪声），mode_scales 保持精确公式。
    """
    alpha: float
    beta: float
    K: int
    mode_scales: np.ndarray = field(repr=False)
    amplitude: float = 1.0

    @property
    def admissible(self) -> bool:
        return admissibility_violation(self.alpha, self.beta) is None

    @property
    def effective_scales(self) -> np.ndarray:
        return self.amplitude * self.mode_scales

    @property
    def gammas(self) -> np.ndarray:
        return eigenvalues(self.K)

    def scaled(self, factor: float) -> "NoiseSpectrum":
        """返回振幅乘以 factor 的新谱"""
        if factor < 0:
            raise ParameterError(f"noise factor must be nonnegative, got {factor}")
        return NoiseSpectrum(
            self.alpha, self.beta, self.K, self.mode_scales, self.amplitude * factor
        )


def mode_scales(alpha: float, beta: float, K: int, amplitude: float = 1.0) -> NoiseSpectrum:
    """
    构造噪声谱

    Args:
        alpha: 稳定指数
        beta: 谱衰减指数
        K: 模数
        amplitude: 整体噪声倍数

    Returns:
        NoiseSpectrum

    Raises:
        ParameterError: K < 1, beta <= 0 或 alpha 超出 (1, 2]
    """
    _check_alpha(alpha)
    if K < 1:
        raise ParameterError(f"K must be at least 1, got {K}")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    if amplitude < 0:
        raise ParameterError(f"amplitude must be nonnegative, got {amplitude}")
    scales = eigenvalues(K) ** (-beta)
    return NoiseSpectrum(alpha=alpha, beta=beta, K=K, mode_scales=scales, amplitude=amplitude)


def empirical_characteristic_function(samples: np.ndarray, t: ArrayLike) -> np.ndarray:
    """对称样本的经验特征函数 mean(cos(t X))"""
    samples = np.asarray(samples, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([np.mean(np.cos(ti * samples)) for ti in t])


def hill_estimator(samples: np.ndarray, tail_fraction: float = 0.01) -> float:
    """
    Hill 尾指数估计

    Args:
        samples: 样本（取绝对值）
        tail_fraction: 使用的顶部顺序统计量比例

    Returns:
        尾指数估计 alpha_hat
    """
    data = np.sort(np.abs(np.asarray(samples, dtype=float)))[::-1]
    k = int(len(data) * tail_fraction)
    if k < 2 or k >= len(data):
        raise ParameterError(
            f"tail_fraction {tail_fraction} leaves {k} order statistics out of {len(data)}"
        )
    top_k = data[:k]
    threshold = data[k]
    return float(k / np.sum(np.log(top_k / threshold)))
