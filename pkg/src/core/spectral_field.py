"""
环面上零均值实函数的截断 Fourier 表示

x(xi) = sum_k a_k sqrt(2) cos(2 pi k xi) + b_k sqrt(2) sin(2 pi k xi), k = 1..K

系数以形状 (2, K) 的数组保存（第 0 行 cos，第 1 行 sin）；批量运算使用
(..., 2, K)。在该正交归一实基下 |x|_H^2 = sum(a_k^2 + b_k^2)。
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import fft

from .config import STABILITY_LIMIT
from .exceptions import FieldOverflowError, ParameterError
from .stable_noise import eigenvalues

SQRT2 = np.sqrt(2.0)


@dataclass(eq=False)
class SpectralField:
    """K 个模的零均值实场"""
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != 2:
            raise ParameterError(f"coefficients must have shape (2, K), got {self.coeffs.shape}")

    @property
    def K(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cos_coeffs(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def sin_coeffs(self) -> np.ndarray:
        return self.coeffs[1]

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    @classmethod
    def zeros(cls, K: int) -> "SpectralField":
        return cls(np.zeros((2, K)))

    @classmethod
    def from_modes(cls, cos_coeffs: Sequence[float], sin_coeffs: Sequence[float]) -> "SpectralField":
        return cls(np.vstack([np.asarray(cos_coeffs, float), np.asarray(sin_coeffs, float)]))

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "SpectralField":
        """由 [a_1..a_K, b_1..b_K] 构造"""
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size % 2:
            raise ParameterError(f"flat field must have even length, got {values.size}")
        return cls(values.reshape(2, -1))

    def to_flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1).copy()

    def copy(self) -> "SpectralField":
        return SpectralField(self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, factor: float) -> "SpectralField":
        return SpectralField(self.coeffs * factor)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SpectralField(K={self.K}, normH={norm_H(self):.6g})"


def grid_size(K: int, degree: int = 4) -> int:
    """网格点数 N >= degree*K + 1（对 degree 次乘积无混叠）"""
    return fft.next_fast_len(degree * K + 1, real=True)


def to_grid(coeffs: np.ndarray, n: int) -> np.ndarray:
    """
    系数到均匀网格 xi_j = j/n 上的值

    Args:
        coeffs: (..., 2, K) 系数
        n: 网格点数，需满足 n > 2K

    Returns:
        (..., n) 网格值
    """
    coeffs = np.asarray(coeffs, dtype=float)
    K = coeffs.shape[-1]
    if n <= 2 * K:
        raise ParameterError(f"grid of {n} points cannot resolve {K} modes")
    spectrum = np.zeros(coeffs.shape[:-2] + (n // 2 + 1,), dtype=complex)
    spectrum[..., 1:K + 1] = (n / SQRT2) * (coeffs[..., 0, :] - 1j * coeffs[..., 1, :])
    return fft.irfft(spectrum, n=n, axis=-1)


def from_grid(values: np.ndarray, K: int) -> np.ndarray:
    """网格值到前 K 个模的系数（丢弃均值分量）"""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    spectrum = fft.rfft(values, axis=-1)[..., 1:K + 1]
    coeffs = np.empty(values.shape[:-1] + (2, K))
    coeffs[..., 0, :] = SQRT2 * spectrum.real / n
    coeffs[..., 1, :] = -SQRT2 * spectrum.imag / n
    return coeffs


def norm_sobolev_array(coeffs: np.ndarray, sigma: float) -> np.ndarray:
    """批量 |A^sigma x|_H"""
    coeffs = np.asarray(coeffs, dtype=float)
    weights = eigenvalues(coeffs.shape[-1]) ** (2.0 * sigma)
    return np.sqrt(np.sum(weights * coeffs ** 2, axis=(-2, -1)))


def norm_sobolev(x: SpectralField, sigma: float) -> float:
    """
    |A^sigma x|_H = (sum_k gamma_k^(2 sigma) (a_k^2 + b_k^2))^(1/2)

    Args:
        x: 场
        sigma: 分数指数，sigma >= 0

    Returns:
        范数值
    """
    if sigma < 0:
        raise ParameterError(f"sigma must be nonnegative, got {sigma}")
    return float(norm_sobolev_array(x.coeffs, sigma))


def norm_H(x: SpectralField) -> float:
    return float(np.sqrt(np.sum(x.coeffs ** 2)))


def norm_V(x: SpectralField) -> float:
    return norm_sobolev(x, 0.5)


def inner(x: SpectralField, y: SpectralField) -> float:
    return float(np.sum(x.coeffs * y.coeffs))


def norm_L4_array(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    values = to_grid(coeffs, grid_size(coeffs.shape[-1], 4))
    return np.mean(values ** 4, axis=-1) ** 0.25


def norm_L4(x: SpectralField) -> float:
    """(int x^4)^(1/4)，周期梯形公式在 N >= 4K+1 时精确"""
    return float(norm_L4_array(x.coeffs))


def semigroup_factors(K: int, t: float) -> np.ndarray:
    if t < 0:
        raise ParameterError(f"semigroup time must be nonnegative, got {t}")
    return np.exp(-eigenvalues(K) * t)


def apply_semigroup(x: SpectralField, t: float) -> SpectralField:
    """e^{-At} x: 第 k 模乘以 exp(-gamma_k t)"""
    return SpectralField(x.coeffs * semigroup_factors(x.K, t))


def apply_fractional(x: SpectralField, sigma: float) -> SpectralField:
    """A^sigma x: 第 k 模乘以 gamma_k^sigma"""
    if sigma < 0:
        raise ParameterError(f"sigma must be nonnegative, got {sigma}")
    return SpectralField(x.coeffs * eigenvalues(x.K) ** sigma)


def nonlinear_terms(coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    批量伪谱计算 N(u) = u - u^3 在模 1..K 上的 Galerkin 投影

    Args:
        coeffs: (..., 2, K) 系数

    Returns:
        (N(u) 系数, 每个场的 max|1 - 3u^2|)；网格上出现非有限值的场
        对应的 stiffness 为 inf
    """
    K = coeffs.shape[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        u = to_grid(coeffs, grid_size(K, 4))
        values = u - u ** 3
        stiffness = np.max(np.abs(1.0 - 3.0 * u ** 2), axis=-1)
        finite = np.all(np.isfinite(values), axis=-1)
        values = np.where(finite[..., None], values, 0.0)
    stiffness = np.where(finite, stiffness, np.inf)
    return from_grid(values, K), stiffness


def nonlinearity(x: SpectralField) -> SpectralField:
    """
    N(u) = u - u^3，投影到零均值并截断到 K 个模

    Raises:
        FieldOverflowError: 网格上出现非有限值
    """
    projected, stiffness = nonlinear_terms(x.coeffs)
    if not np.isfinite(stiffness):
        raise FieldOverflowError("non-finite values in the cubic nonlinearity")
    return SpectralField(projected)


def explicit_step_stable(stiffness: np.ndarray, h: float) -> np.ndarray:
    """显式处理三次项时的稳定性判据 h * max|1 - 3u^2| <= STABILITY_LIMIT"""
    return h * stiffness <= STABILITY_LIMIT


def translate(x: SpectralField, shift: float) -> SpectralField:
    """空间平移 xi -> xi + shift（各模的相位旋转）"""
    phase = 2.0 * np.pi * np.arange(1, x.K + 1) * shift
    c, s = np.cos(phase), np.sin(phase)
    a, b = x.cos_coeffs, x.sin_coeffs
    return SpectralField.from_modes(a * c + b * s, b * c - a * s)


def random_field(
    K: int,
    rng: np.random.Generator,
    norm: float = 1.0,
    decay: float = 0.0,
) -> SpectralField:
    """
    随机方向、指定 H 范数的场

    Args:
        K: 模数
        rng: 随机数流
        norm: 目标 |x|_H
        decay: 系数按 k^(-decay) 衰减
    """
    if norm < 0:
        raise ParameterError(f"norm must be nonnegative, got {norm}")
    coeffs = rng.standard_normal((2, K)) * np.arange(1, K + 1, dtype=float) ** (-decay)
    if norm == 0:
        return SpectralField.zeros(K)
    return SpectralField(coeffs * (norm / np.sqrt(np.sum(coeffs ** 2))))


@dataclass
class EmbeddingReport:
    """嵌入不等式检验结果"""
    l4_bound_holds: bool          # |x|_L4^4 <= |x|_V^2 |x|_H^2
    vh_bound_holds: bool          # |x|_V^2 |x|_H^2 <= |x|_V^4
    interpolation_holds: bool     # |A^{1/4}x|^2 |x|_H <= |x|_V |x|_H^2
    l4_slack: float
    vh_slack: float
    interpolation_slack: float
    cube_ratio: float             # |x^3|_H / (|A^{1/4}x|_H^2 |x|_H)

    @property
    def all_hold(self) -> bool:
        return self.l4_bound_holds and self.vh_bound_holds and self.interpolation_holds


def cube_norm(x: SpectralField) -> float:
    """|x^3|_{L2}（x^3 含均值分量；N >= 6K+1 时平方积分精确）"""
    values = to_grid(x.coeffs, grid_size(x.K, 6))
    return float(np.sqrt(np.mean(values ** 6)))


def verify_embedding_inequalities(x: SpectralField, rtol: float = 1e-12) -> EmbeddingReport:
    """
    检验 |x|_L4^4 <= |x|_V^2 |x|_H^2 <= |x|_V^4 并给出 |x^3|_H 比值

    Args:
        x: 非零场
        rtol: 浮点比较的相对容差

    Returns:
        EmbeddingReport
    """
    h = norm_H(x)
    if h == 0:
        raise ParameterError("embedding inequalities need a nonzero field")
    v = norm_V(x)
    quarter_sq = norm_sobolev(x, 0.25) ** 2
    l4 = norm_L4(x) ** 4
    vh = v ** 2 * h ** 2
    v4 = v ** 4
    interp_rhs = v * h ** 2
    interp_lhs = quarter_sq * h
    return EmbeddingReport(
        l4_bound_holds=l4 <= vh * (1 + rtol),
        vh_bound_holds=vh <= v4 * (1 + rtol),
        interpolation_holds=interp_lhs <= interp_rhs * (1 + rtol),
        l4_slack=vh - l4,
        vh_slack=v4 - vh,
        interpolation_slack=interp_rhs - interp_lhs,
        cube_ratio=cube_norm(x) / (quarter_sq * h),
    )
