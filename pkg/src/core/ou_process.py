"""
alpha-稳定 Ornstein-Uhlenbeck 过程（随机卷积 Z_t）

每个模精确分布更新:
    z_k <- e^{-gamma_k h} z_k + beta_k sigma_k(h) S_alpha,
    sigma_k(h) = ((1 - e^{-alpha gamma_k h}) / (alpha gamma_k))^(1/alpha)
"""

import logging
from dataclasses import dataclass
from datetime import datetime
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, stats

from .config import BATCH_SIZE
from .exceptions import ParameterError
from .spectral_field import SpectralField, norm_sobolev_array
from .stable_noise import NoiseSpectrum, sample_standard_stable
from ..utils.helpers import seed_streams
from ..utils.parallel import run_ordered

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class OUState:
    """Z_t 的当前状态"""
    time: float
    field: SpectralField
    spectrum: NoiseSpectrum

    def __post_init__(self):
        if self.field.K != self.spectrum.K:
            raise ParameterError(
                f"field has {self.field.K} modes but spectrum has {self.spectrum.K}"
            )

    @classmethod
    def fresh(cls, spectrum: NoiseSpectrum) -> "OUState":
        """Z_0 = 0"""
        return cls(0.0, SpectralField.zeros(spectrum.K), spectrum)


def exact_coefficients(spectrum: NoiseSpectrum, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    步长 h 的精确更新系数

    Returns:
        (衰减因子 e^{-gamma_k h}, 噪声尺度 beta_k sigma_k(h))
    """
    if not h > 0:
        raise ParameterError(f"OU step must be positive, got {h}")
    gammas = spectrum.gammas
    alpha = spectrum.alpha
    decay = np.exp(-gammas * h)
    sigma = (-np.expm1(-alpha * gammas * h) / (alpha * gammas)) ** (1.0 / alpha)
    return decay, spectrum.effective_scales * sigma


def stationary_scale(spectrum: NoiseSpectrum) -> np.ndarray:
    """h -> inf 时的尺度 beta_k (alpha gamma_k)^(-1/alpha)"""
    return spectrum.effective_scales * (spectrum.alpha * spectrum.gammas) ** (-1.0 / spectrum.alpha)


def ou_step(state: OUState, h: float, rng: np.random.Generator) -> OUState:
    """
    精确分布的一步更新

    Args:
        state: 当前状态
        h: 步长
        rng: 随机数流

    Returns:
        新的 OUState
    """
    decay, scale = exact_coefficients(state.spectrum, h)
    draws = sample_standard_stable(state.spectrum.alpha, rng, size=(2, state.spectrum.K))
    field = SpectralField(decay * state.field.coeffs + scale * draws)
    return OUState(state.time + h, field, state.spectrum)


def ou_path(
    spectrum: NoiseSpectrum,
    h: float,
    n_steps: int,
    rng: np.random.Generator,
    z0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    网格 {0, h, ..., n_steps h} 上的精确 OU 路径

    Args:
        spectrum: 噪声谱
        h: 步长
        n_steps: 步数
        rng: 随机数流
        z0: 初值系数 (2, K)，默认为 0

    Returns:
        (n_steps + 1, 2, K) 数组
    """
    decay, scale = exact_coefficients(spectrum, h)
    K = spectrum.K
    noise = scale * sample_standard_stable(spectrum.alpha, rng, size=(n_steps, 2, K))
    start = np.zeros((2, K)) if z0 is None else np.asarray(z0, dtype=float)
    path = np.empty((n_steps + 1, 2, K))
    path[0] = start
    for k in range(K):
        for row in range(2):
            # z_n = d z_{n-1} + e_n
            path[1:, row, k], _ = signal.lfilter(
                [1.0], [1.0, -decay[k]], noise[:, row, k], zi=[decay[k] * start[row, k]]
            )
    return path


def _grid_steps(T: float, h: float) -> int:
    return max(1, int(np.floor(T / h + 1e-9)))


def _check_theta(spectrum: NoiseSpectrum, theta: float) -> None:
    limit = spectrum.beta - 1.0 / (2.0 * spectrum.alpha)
    if not (0 <= theta < limit):
        raise ParameterError(
            f"0 <= theta < beta - 1/(2 alpha) violated: theta = {theta}, limit = {limit:.6g}"
        )


def ou_sup_norm(
    spectrum: NoiseSpectrum,
    theta: float,
    T: float,
    h: float,
    rng: np.random.Generator,
) -> float:
    """
    单条路径在网格上的 max_t |A^theta Z_t|_H

    Raises:
        ParameterError: theta 不满足最大不等式的条件，或 T, h 非正
    """
    _check_theta(spectrum, theta)
    if not (T > 0 and h > 0):
        raise ParameterError(f"T and h must be positive, got T={T}, h={h}")
    path = ou_path(spectrum, h, _grid_steps(T, h), rng)
    return float(np.max(norm_sobolev_array(path, theta)))


def running_sup_at(
    spectrum: NoiseSpectrum,
    theta: float,
    horizons: Sequence[float],
    h: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """一条路径在各时间窗 [0, T] 上的网格上确界（对 T 单调不减）"""
    steps = [_grid_steps(T, h) for T in horizons]
    path = ou_path(spectrum, h, steps[-1], rng)
    running = np.maximum.accumulate(norm_sobolev_array(path, theta))
    return running[steps]


@dataclass
class HorizonEstimate:
    T: float
    estimate: float
    stderr: float


@dataclass
class MaximalMomentResult:
    """E[sup_{t<=T} |A^theta Z_t|^p] 的 Monte Carlo 估计"""
    theta: float
    p: float
    n_traj: int
    estimates: List[HorizonEstimate]
    slope: Optional[float]
    slope_defined: bool
    raw_values: Optional[np.ndarray] = None

    def rows(self) -> List[dict]:
        return [
            {
                "theta": self.theta,
                "p": self.p,
                "T": e.T,
                "estimate": e.estimate,
                "stderr": e.stderr,
                "n_traj": self.n_traj,
                "slope": self.slope,
            }
            for e in self.estimates
        ]


def maximal_moment_probe(
    spectrum: NoiseSpectrum,
    theta: float,
    p: float,
    horizons: Sequence[float],
    n_traj: int,
    seed: int,
    h: float = 1e-2,
    workers: int = 1,
    progress=None,
) -> MaximalMomentResult:
    """
    估计各时间窗的 E[sup |A^theta Z_t|_H^p] 并拟合 log-log 斜率

    Args:
        spectrum: 噪声谱
        theta: 分数指数
        p: 矩阶，0 < p < alpha
        horizons: 递增的时间窗
        n_traj: 路径数
        seed: 主种子（路径 i 使用流 (seed, i)）
        h: 网格步长
        workers: 并行线程数
        progress: 可选回调，每完成一个批次调用一次

    Returns:
        MaximalMomentResult
    """
    _check_theta(spectrum, theta)
    if not (0 < p < spectrum.alpha):
        raise ParameterError(f"0 < p < alpha violated: p = {p}, alpha = {spectrum.alpha}")
    horizons = [float(T) for T in horizons]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ParameterError(f"horizons must be nonempty and increasing, got {horizons}")
    if n_traj < 1:
        raise ParameterError(f"n_traj must be at least 1, got {n_traj}")

    start_time = datetime.now()
    streams = seed_streams(seed, n_traj)
    batches = [range(i, min(i + BATCH_SIZE, n_traj)) for i in range(0, n_traj, BATCH_SIZE)]

    def run_batch(indices: range) -> np.ndarray:
        return np.array([
            running_sup_at(spectrum, theta, horizons, h, streams[i]) for i in indices
        ])

    sups = np.concatenate(run_ordered(run_batch, batches, workers, progress), axis=0)
    values = sups ** p
    means = values.mean(axis=0)
    if n_traj > 1:
        stderrs = values.std(axis=0, ddof=1) / np.sqrt(n_traj)
    else:
        stderrs = np.full(len(horizons), np.nan)
    estimates = [HorizonEstimate(T, float(m), float(s)) for T, m, s in zip(horizons, means, stderrs)]

    slope = None
    if n_traj > 1 and len(horizons) >= 2 and np.all(means > 0):
        slope = float(stats.linregress(np.log(horizons), np.log(means)).slope)
    duration = (datetime.now() - start_time).total_seconds()
    logger.info(
        f"Maximal moment probe theta={theta} p={p} n_traj={n_traj} finished in {duration:.2f} seconds"
    )
    return MaximalMomentResult(
        theta=theta,
        p=p,
        n_traj=n_traj,
        estimates=estimates,
        slope=slope,
        slope_defined=slope is not None,
        raw_values=values if n_traj == 1 else None,
    )
