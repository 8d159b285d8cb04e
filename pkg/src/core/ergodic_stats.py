"""
遍历统计: 占位测度、击中时间、超指数回归、一致矩探针与大偏差衰减率探针
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from .config import (
    BATCH_MEANS, BURN_IN_FRACTION, LONG_RUN_HORIZON, MIN_TAIL_SAMPLES, TAIL_FIT_MIN_COUNT,
)
from .exceptions import EstimationError, ParameterError
from .gl_integrator import Functional, Trajectory, simulate_ensemble, simulate_trajectory
from .models import SimConfig
from .spectral_field import SpectralField, norm_sobolev, norm_sobolev_array, random_field
from ..utils.helpers import aux_stream, stream

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054


# ---------------------------------------------------------------------------
# 有界泛函
# ---------------------------------------------------------------------------

def _sq_norm(coeffs: np.ndarray, sigma: float = 0.0) -> np.ndarray:
    return norm_sobolev_array(coeffs, sigma) ** 2


def make_functional(name: str, delta: float = 0.25, M: float = 1.0) -> Functional:
    """
    按名称构造有界泛函

    Args:
        name: FUNCTIONALS 中的名称
        delta: H_delta 指数（tanh_normHdelta_sq_minus_M2 使用）
        M: 阈值（tanh_normHdelta_sq_minus_M2 使用）
    """
    if name == "one":
        return Functional(name, lambda c: np.ones(np.shape(c)[:-2]), bound=1.0)
    if name == "exp_neg_normH_sq":
        return Functional(name, lambda c: np.exp(-_sq_norm(c)), bound=1.0)
    if name == "tanh_normH_sq":
        return Functional(name, lambda c: np.tanh(_sq_norm(c)), bound=1.0)
    if name == "tanh_normHdelta_sq_minus_M2":
        return Functional(name, lambda c: np.tanh(_sq_norm(c, delta) - M ** 2), bound=1.0)
    raise ParameterError(f"unknown functional {name!r}; expected one of {', '.join(FUNCTIONALS)}")


FUNCTIONALS = ("one", "exp_neg_normH_sq", "tanh_normH_sq", "tanh_normHdelta_sq_minus_M2")


def functional_values(traj: Trajectory, f: Functional) -> np.ndarray:
    """泛函在记录时刻上的值（优先使用已记录的轨迹）"""
    if f.name in traj.functional_track:
        return traj.functional_track[f.name]
    if traj.has_states:
        return np.asarray(f.func(traj.x_states), dtype=float)
    raise ParameterError(f"functional {f.name!r} was not recorded and the trajectory has no states")


def time_weights(times: np.ndarray) -> np.ndarray:
    """梯形公式权重，归一化为和 1"""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ParameterError("empty trajectory")
    if times.size == 1:
        return np.ones(1)
    gaps = np.diff(times)
    weights = np.zeros_like(times)
    weights[:-1] += gaps / 2
    weights[1:] += gaps / 2
    return weights / weights.sum()


# ---------------------------------------------------------------------------
# 占位测度
# ---------------------------------------------------------------------------

@dataclass
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    total_time: float
    outside_fraction: float


@dataclass
class OccupationRecord:
    """占位测度 L_T 的摘要"""
    T: float
    functional_averages: Dict[str, float] = field(default_factory=dict)
    histogram: Optional[Histogram] = None


def occupation_average(traj: Trajectory, f: Functional) -> float:
    """
    时间平均 (1/T) int_0^T f(X_s) ds（记录网格上的梯形公式）

    Raises:
        ParameterError: 轨迹为空
    """
    if len(traj) == 0:
        raise ParameterError("empty trajectory")
    return float(np.dot(time_weights(traj.times), functional_values(traj, f)))


def batch_means_stderr(values: np.ndarray, weights: np.ndarray, n_batches: int = BATCH_MEANS) -> float:
    """
    加权时间平均的批均值标准误

    记录按时间切成 n_batches 段，段均值的样本标准差除以 sqrt(n_batches)。
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size < 2 * n_batches:
        raise ParameterError(f"need at least {2 * n_batches} records for {n_batches} batch means")
    means = [
        np.dot(w, v) / w.sum()
        for v, w in zip(np.array_split(values, n_batches), np.array_split(weights, n_batches))
    ]
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def occupation_histogram(
    trajs: Sequence[Trajectory],
    f: Functional,
    edges: Sequence[float],
    window: Optional[float] = None,
) -> OccupationRecord:
    """
    泛函在占位测度下的推前（多条轨迹合并，按时间加权）

    window 给定时只使用 [0, window] 上的记录。

    Raises:
        ParameterError: 轨迹为空、记录网格不一致或分箱无效
    """
    if not trajs:
        raise ParameterError("no trajectories given")
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterError("bin edges must be a strictly increasing sequence of at least 2 values")
    times = trajs[0].times
    for traj in trajs[1:]:
        if not np.array_equal(traj.times, times):
            raise ParameterError(f"trajectory {traj.index} has a different record grid")
    keep = np.ones(times.size, dtype=bool) if window is None else times <= window + 1e-9
    if not keep.any():
        raise ParameterError(f"window {window} keeps no records")
    times = times[keep]
    weights = time_weights(times)
    values = np.concatenate([functional_values(t, f)[keep] for t in trajs])
    pooled = np.tile(weights, len(trajs)) / len(trajs)
    counts, _ = np.histogram(values, bins=edges, weights=pooled)
    inside = counts.sum()
    if inside <= 0:
        raise EstimationError("no occupation mass falls inside the histogram edges")
    average = float(np.dot(pooled, values))
    return OccupationRecord(
        T=float(times[-1] - times[0]),
        functional_averages={f.name: average},
        histogram=Histogram(
            edges=edges,
            masses=counts / inside,
            total_time=float(times[-1] - times[0]) * len(trajs),
            outside_fraction=float(max(0.0, 1.0 - inside)),
        ),
    )


@dataclass
class InvariantEstimate:
    mean: float
    stderr: float
    T: float
    burn_in: float


def estimate_invariant_mean(
    cfg: SimConfig,
    f: Functional,
    x0: Optional[SpectralField] = None,
    T_long: float = LONG_RUN_HORIZON,
    burn_in: float = BURN_IN_FRACTION,
    seed: Optional[int] = None,
) -> InvariantEstimate:
    """
    由一条长轨迹估计 pi(f)，丢弃前 burn_in 比例

    Args:
        cfg: 模拟配置（T 被 T_long 替换）
        f: 有界泛函
        x0: 初值，默认 0
        T_long: 长轨迹时长
        burn_in: 预热比例，0 <= burn_in < 1
        seed: 主种子，默认 cfg.seed
    """
    if not 0 <= burn_in < 1:
        raise ParameterError(f"burn-in fraction must lie in [0, 1), got {burn_in}")
    long_cfg = cfg.model_copy(update={"T": T_long, "record_states": False})
    x0 = SpectralField.zeros(cfg.K) if x0 is None else x0
    seed = cfg.seed if seed is None else seed
    traj = simulate_trajectory(x0, long_cfg, stream(seed, 0), functionals=[f])
    keep = traj.times >= burn_in * T_long
    values = functional_values(traj, f)[keep]
    weights = time_weights(traj.times[keep])
    mean = float(np.dot(weights, values))
    stderr = batch_means_stderr(values, weights)
    logger.info(f"Invariant mean of {f.name}: {mean:.6g} +/- {stderr:.2g} (T={T_long})")
    return InvariantEstimate(mean=mean, stderr=stderr, T=T_long, burn_in=burn_in)


# ---------------------------------------------------------------------------
# 击中时间与超指数回归
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HittingSample:
    """tau_M = inf{k >= 1: |X_k|_{H_delta} <= M}；censored 时 tau 为 None"""
    tau: Optional[int]
    censored: bool
    M: float
    delta: float
    horizon_n: int

    def __post_init__(self):
        if not self.censored and (self.tau is None or self.tau < 1):
            raise ParameterError(f"hitting time must be an integer >= 1, got {self.tau}")


def integer_time_norms(traj: Trajectory, delta: float) -> np.ndarray:
    """整数时刻 k = 1..n 上的 |X_k|_{H_delta}"""
    idx = traj.integer_time_indices()
    if idx.size == 0:
        raise ParameterError("trajectory has no records at integer times")
    ks = np.rint(traj.times[idx]).astype(int)
    if not np.array_equal(ks, np.arange(1, ks.size + 1)):
        raise ParameterError("trajectory records do not cover every integer time 1..n")
    if abs(traj.delta - delta) < 1e-15:
        return traj.functional_track["normHdelta"][idx]
    if traj.has_states:
        return norm_sobolev_array(traj.x_states[idx], delta)
    raise ParameterError(f"trajectory tracks delta={traj.delta} and has no states for delta={delta}")


def hitting_time(traj: Trajectory, M: float, delta: float) -> HittingSample:
    """
    整数时刻的击中时间

    Raises:
        ParameterError: 轨迹缺少整数时刻记录
    """
    norms = integer_time_norms(traj, delta)
    return _first_hit(norms, M, delta)


def _first_hit(norms: np.ndarray, M: float, delta: float) -> HittingSample:
    hits = np.nonzero(norms <= M)[0]
    if hits.size:
        return HittingSample(int(hits[0]) + 1, False, M, delta, norms.size)
    return HittingSample(None, True, M, delta, norms.size)


@dataclass
class TailFit:
    """生存函数 P(tau > n) 的几何拟合"""
    fit_ok: bool
    rho: Optional[float]
    r_squared: Optional[float]
    n: np.ndarray
    counts: np.ndarray
    survival: np.ndarray
    message: str = ""


def survival_curve(samples: Sequence[HittingSample]):
    """
    经验生存函数

    Returns:
        (n = 0..horizon, count(tau > n), P_hat(tau > n))
    """
    if not samples:
        raise ParameterError("no hitting samples given")
    horizons = {s.horizon_n for s in samples}
    if len(horizons) != 1:
        raise ParameterError(f"hitting samples have mixed horizons {sorted(horizons)}")
    horizon = horizons.pop()
    taus = np.array([horizon + 1 if s.censored else s.tau for s in samples])
    n = np.arange(0, horizon + 1)
    counts = np.array([(taus > k).sum() for k in n])
    return n, counts, counts / len(samples)


def geometric_tail_fit(samples: Sequence[HittingSample], min_samples: int = MIN_TAIL_SAMPLES) -> TailFit:
    """
    在 P_hat >= 10/N 的范围内对 log P_hat(tau > n) 关于 n 做最小二乘，rho = exp(slope)

    Raises:
        ParameterError: 样本少于 min_samples
    """
    if len(samples) < min_samples:
        raise ParameterError(f"geometric tail fit needs at least {min_samples} samples, got {len(samples)}")
    n, counts, survival = survival_curve(samples)
    usable = counts >= TAIL_FIT_MIN_COUNT
    if usable.sum() < 3:
        logger.warning(f"Tail fit failed: survival estimable at only {int(usable.sum())} values of n")
        return TailFit(False, None, None, n, counts, survival, "insufficient tail data")
    fit = stats.linregress(n[usable], np.log(survival[usable]))
    rho = float(np.exp(fit.slope))
    return TailFit(True, rho, float(fit.rvalue ** 2), n, counts, survival)


@dataclass
class RecurrenceReport:
    """E[e^{lambda tau_M}] 的估计"""
    lam: float
    M: float
    delta: float
    n: int
    raw_estimate: Optional[float]
    stderr: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    estimate: Optional[float]
    censored_fraction: float
    rho_fit: Optional[float]
    r_squared: Optional[float]
    divergence_risk: bool = False
    estimation_failed: bool = False
    threshold_check: Optional[bool] = None
    flags: List[str] = field(default_factory=list)

    def require(self) -> float:
        """返回估计值；没有数值时抛出 EstimationError"""
        if self.estimate is None:
            raise EstimationError(
                f"no finite estimate of E[exp({self.lam} tau_M)] at M={self.M}: {', '.join(self.flags)}"
            )
        return self.estimate


def exp_moment_estimate(
    samples: Sequence[HittingSample],
    lam: float,
    c_hat: Optional[float] = None,
    p: Optional[float] = None,
) -> RecurrenceReport:
    """
    估计 E[e^{lambda tau}]

    raw_estimate 为未截断样本上 e^{lambda tau} 的均值；截断部分按几何尾
    P(tau > n) ~ P_hat(tau > n) rho^{m - n} 补全:
        E[e^{lambda tau}; tau > n] = P_hat(tau > n)(1 - rho) e^{lambda(n+1)} / (1 - rho e^lambda)

    Args:
        samples: 击中时间样本（同一 M, delta, 截断时刻）
        lam: 指数率，lam > 0
        c_hat: 经验矩常数（用于阈值检验 M > (c_hat e^lambda)^{1/p}）
        p: 矩阶

    Returns:
        RecurrenceReport
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if not samples:
        raise ParameterError("no hitting samples given")
    M = samples[0].M
    delta = samples[0].delta
    N = len(samples)
    taus = np.array([s.tau for s in samples if not s.censored], dtype=float)
    censored_fraction = 1.0 - taus.size / N
    flags: List[str] = []

    threshold = None
    if c_hat is not None and p is not None:
        threshold = bool(M > (c_hat * np.exp(lam)) ** (1.0 / p))

    fit: Optional[TailFit] = None
    try:
        fit = geometric_tail_fit(samples)
    except ParameterError:
        fit = None
    rho = fit.rho if fit is not None and fit.fit_ok else None
    r_squared = fit.r_squared if fit is not None and fit.fit_ok else None

    if taus.size == 0:
        logger.warning(f"All {N} hitting samples censored at M={M}; no estimate")
        return RecurrenceReport(
            lam, M, delta, N, None, None, None, None, None, 1.0, rho, r_squared,
            estimation_failed=True, threshold_check=threshold, flags=["all_censored"],
        )

    values = np.exp(lam * taus)
    raw = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")
    ci_low = max(float(np.exp(lam)), raw - Z_95 * stderr) if np.isfinite(stderr) else None
    ci_high = raw + Z_95 * stderr if np.isfinite(stderr) else None

    divergence = rho is not None and rho * np.exp(lam) >= 1.0
    estimate: Optional[float]
    if divergence:
        flags.append("divergence_risk")
        estimate = None
    elif censored_fraction == 0:
        estimate = raw
    elif rho is None:
        flags.append("tail_fit_failed")
        estimate = None
    else:
        horizon = samples[0].horizon_n
        tail = censored_fraction * (1 - rho) * np.exp(lam * (horizon + 1)) / (1 - rho * np.exp(lam))
        estimate = float((1 - censored_fraction) * raw + tail)
        flags.append("censored_completion")
    if censored_fraction > 0:
        logger.warning(f"M={M}: {censored_fraction:.2%} of hitting samples censored")
    return RecurrenceReport(
        lam, M, delta, N, raw, stderr, ci_low, ci_high, estimate, censored_fraction,
        rho, r_squared, divergence_risk=divergence, threshold_check=threshold, flags=flags,
    )


def hitting_samples(
    cfg: SimConfig,
    M_grid: Sequence[float],
    n_traj: int,
    horizon_n: int,
    seed: int,
    initial: Optional[Callable[[int], np.ndarray]] = None,
    workers: int = 1,
    progress=None,
) -> Dict[float, List[HittingSample]]:
    """
    模拟 n_traj 条轨迹到整数时刻 horizon_n，同一路径上扫描各个 M

    Returns:
        {M: 击中时间样本}
    """
    steps_per_unit = int(round(1.0 / cfg.dt))
    if abs(steps_per_unit * cfg.dt - 1.0) > 1e-9:
        raise ParameterError(f"dt={cfg.dt} does not divide the unit time")
    run_cfg = cfg.model_copy(update={
        "T": float(horizon_n), "record_stride": steps_per_unit,
        "record_states": False, "record_components": False,
    })
    initial = initial if initial is not None else (lambda i: np.zeros((2, cfg.K)))

    def reduce(traj: Trajectory) -> List[HittingSample]:
        norms = integer_time_norms(traj, cfg.delta)
        return [_first_hit(norms, M, cfg.delta) for M in M_grid]

    per_traj = simulate_ensemble(run_cfg, initial, n_traj, seed, workers, reducer=reduce, progress=progress)
    return {M: [row[j] for row in per_traj] for j, M in enumerate(M_grid)}


def return_time_probe(
    cfg: SimConfig,
    M: float,
    lam: float,
    starts: Sequence[SpectralField],
    n_traj: int,
    horizon_n: int,
    seed: int,
    workers: int = 1,
) -> List[RecurrenceReport]:
    """
    从 K = {|x|_{H_delta} <= M} 内的点出发估计 E_x[e^{lambda tau^{(1)}}]

    Raises:
        ParameterError: 某个起点不在 K 内
    """
    reports = []
    for j, x0 in enumerate(starts):
        norm = norm_sobolev(x0, cfg.delta)
        if norm > M:
            raise ParameterError(f"start {j} has |x|_H_delta = {norm:.6g} > M = {M}")
        samples = hitting_samples(
            cfg, [M], n_traj, horizon_n, seed, initial=lambda i, c=x0.coeffs: c, workers=workers
        )[M]
        reports.append(exp_moment_estimate(samples, lam))
    return reports


# ---------------------------------------------------------------------------
# 一致矩探针
# ---------------------------------------------------------------------------

@dataclass
class MomentCell:
    x0_norm: float
    estimate: float
    stderr: float
    n: int


@dataclass
class MomentProbeReport:
    """E_x[|X_T|^p_{H_delta}] 对初值的一致性"""
    component: str
    T: float
    p: float
    delta: float
    cells: List[MomentCell]
    max_min_ratio: Optional[float]

    @property
    def c_hat(self) -> float:
        """经验常数: 各初值估计的最大值"""
        return max(c.estimate for c in self.cells)


def uniform_moment_probe(
    cfg: SimConfig,
    initial_norms: Sequence[float],
    n_traj: int,
    seed: Optional[int] = None,
    workers: int = 1,
    component: str = "X",
    progress=None,
) -> MomentProbeReport:
    """
    对每个 |x0|_H 估计 E_x[|X_T|^p_{H_delta}]（T = cfg.T）

    初值方向由辅助流 (seed, 格编号) 决定；所有格共享同一组噪声路径。

    Args:
        cfg: 模拟配置（p, delta, T）
        initial_norms: 初值的 H 范数
        n_traj: 每格的轨迹数
        seed: 主种子，默认 cfg.seed
        workers: 并行线程数
        component: "X" 或 "Y"
    """
    if component not in ("X", "Y"):
        raise ParameterError(f"component must be 'X' or 'Y', got {component!r}")
    if not cfg.p < cfg.alpha / 4:
        raise ParameterError(f"p < alpha/4 violated: p = {cfg.p}")
    if not initial_norms:
        raise ParameterError("initial_norms is empty")
    seed = cfg.seed if seed is None else seed
    run_cfg = cfg.model_copy(update={
        "record_stride": cfg.n_steps, "record_states": component == "X",
        "record_components": component == "Y",
    })

    def final_norm(traj: Trajectory) -> float:
        final = traj.x_states[-1] if component == "X" else traj.y_states[-1]
        return float(norm_sobolev_array(final, cfg.delta))

    cells = []
    for cell, norm in enumerate(initial_norms):
        x0 = random_field(cfg.K, aux_stream(seed, cell), norm=float(norm))
        finals = np.array(simulate_ensemble(
            run_cfg, x0, n_traj, seed, workers, reducer=final_norm, progress=progress
        ))
        values = finals ** cfg.p
        stderr = float(values.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else float("nan")
        cells.append(MomentCell(float(norm), float(values.mean()), stderr, n_traj))
        logger.info(f"Moment cell |x0|={norm}: {values.mean():.6g} +/- {stderr:.2g}")

    estimates = np.array([c.estimate for c in cells])
    ratio = float(estimates.max() / estimates.min()) if estimates.min() > 0 else None
    return MomentProbeReport(component, cfg.T, cfg.p, cfg.delta, cells, ratio)


# ---------------------------------------------------------------------------
# 大偏差衰减率探针
# ---------------------------------------------------------------------------

@dataclass
class DeviationCell:
    T: float
    n: int
    events: int
    p_hat: float
    wilson_low: float
    wilson_high: float
    rate: Optional[float]
    rate_lower_bound: float
    rate_upper_bound: Optional[float]


@dataclass
class LdpReport:
    functional: str
    level: float
    pi_hat: float
    two_sided: bool
    cells: List[DeviationCell]
    stabilization: Optional[float]


def wilson_interval(events: int, n: int, confidence: float = 0.95):
    ci = stats.binomtest(events, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def running_averages(traj: Trajectory, f: Functional, horizons: Sequence[float]) -> np.ndarray:
    """各时间窗 [0, T] 上的占位平均 L_T(f)"""
    values = functional_values(traj, f)
    out = np.empty(len(horizons))
    for j, T in enumerate(horizons):
        end = np.nonzero(np.abs(traj.times - T) < 1e-9)[0]
        if end.size == 0:
            raise ParameterError(f"horizon {T} is not on the record grid")
        stop = int(end[0]) + 1
        out[j] = np.dot(time_weights(traj.times[:stop]), values[:stop])
    return out


def ldp_decay_probe(
    cfg: SimConfig,
    f: Functional,
    level: float,
    horizons: Sequence[float],
    n_traj: int,
    pi_hat: float,
    seed: Optional[int] = None,
    workers: int = 1,
    x0: Optional[SpectralField] = None,
    two_sided: bool = False,
    progress=None,
) -> LdpReport:
    """
    估计 -(1/T) log P(L_T(f) - pi(f) > r)

    没有观测到偏差事件时只给出衰减率的单侧下界。

    Args:
        cfg: 模拟配置（T 被最大时间窗替换）
        f: 有界泛函
        level: 偏差水平 r > 0
        horizons: 递增时间窗
        n_traj: 轨迹数
        pi_hat: 预先估计的 pi(f)
        seed: 主种子，默认 cfg.seed
        workers: 并行线程数
        x0: 初值，默认 0
        two_sided: 使用 |L_T(f) - pi(f)| > r
    """
    if not level > 0:
        raise ParameterError(f"deviation level must be positive, got {level}")
    horizons = [float(T) for T in horizons]
    if not horizons or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ParameterError(f"horizons must be nonempty and increasing, got {horizons}")
    seed = cfg.seed if seed is None else seed
    x0 = SpectralField.zeros(cfg.K) if x0 is None else x0
    run_cfg = cfg.model_copy(update={"T": horizons[-1], "record_states": False})
    start_time = datetime.now()
    averages = np.array(simulate_ensemble(
        run_cfg, x0, n_traj, seed, workers, functionals=[f],
        reducer=lambda traj: running_averages(traj, f, horizons), progress=progress,
    ))
    deviations = averages - pi_hat
    events = (np.abs(deviations) > level) if two_sided else (deviations > level)

    cells = []
    for j, T in enumerate(horizons):
        k = int(events[:, j].sum())
        low, high = wilson_interval(k, n_traj)
        p_hat = k / n_traj
        rate = float(-np.log(p_hat) / T) if k > 0 else None
        cells.append(DeviationCell(
            T=T, n=n_traj, events=k, p_hat=p_hat, wilson_low=low, wilson_high=high,
            rate=rate,
            rate_lower_bound=float(-np.log(high) / T),
            rate_upper_bound=float(-np.log(low) / T) if low > 0 else None,
        ))
        if k == 0:
            logger.warning(f"No deviations above r={level} at T={T}; reporting a rate lower bound only")

    stabilization = None
    if len(cells) >= 2 and cells[-1].rate is not None and cells[-2].rate:
        stabilization = abs(cells[-1].rate - cells[-2].rate) / cells[-2].rate
    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"LDP probe for {f.name} at r={level} finished in {duration:.2f} seconds")
    return LdpReport(f.name, level, pi_hat, two_sided, cells, stabilization)
