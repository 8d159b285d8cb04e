"""
随机实 Ginzburg-Landau 方程的 X = Y + Z 分裂积分器

Z 为精确分布的 alpha-稳定 OU 过程；Y 满足随机 PDE
    dY + AY dt = N(Y + Z) dt,
用一阶指数积分器 Y <- e^{-Ah} Y + phi_1(h) N(Y + Z) 推进（Z 取左端点）。
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import BATCH_SIZE
from .exceptions import ParameterError, StepRejectedError, TrajectoryAbortedError
from .models import SimConfig
from .ou_process import exact_coefficients
from .riccati import halfinterval_bound
from .spectral_field import (
    SpectralField, explicit_step_stable, inner, norm_L4_array,
    norm_sobolev_array, nonlinear_terms, random_field,
)
from .stable_noise import eigenvalues, sample_standard_stable
from ..utils.helpers import stream
from ..utils.parallel import run_ordered

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

NOISE_CHUNK = 256   # 每条轨迹一次抽取的噪声步数（固定，与批大小无关）
BUILTIN_TRACKS = ("normH", "normHdelta", "normY", "normZV")


@dataclass(frozen=True)
class Functional:
    """作用在系数数组 (..., 2, K) 上的标量泛函"""
    name: str
    func: Callable[[np.ndarray], np.ndarray]
    bound: Optional[float] = None

    def __call__(self, x: SpectralField) -> float:
        return float(self.func(x.coeffs))


@dataclass(eq=False)
class Trajectory:
    """记录网格上的 X（以及可选的 Y, Z）与泛函轨迹"""
    times: np.ndarray
    delta: float
    functional_track: Dict[str, np.ndarray]
    x_states: Optional[np.ndarray] = None
    y_states: Optional[np.ndarray] = None
    z_states: Optional[np.ndarray] = None
    index: int = 0
    rejections: int = 0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def has_states(self) -> bool:
        return self.x_states is not None

    def state(self, i: int) -> SpectralField:
        if self.x_states is None:
            raise ParameterError("trajectory was recorded without states")
        return SpectralField(self.x_states[i])

    def y_state(self, i: int) -> SpectralField:
        if self.y_states is None:
            raise ParameterError("trajectory was recorded without Y components")
        return SpectralField(self.y_states[i])

    def z_state(self, i: int) -> SpectralField:
        if self.z_states is None:
            raise ParameterError("trajectory was recorded without Z components")
        return SpectralField(self.z_states[i])

    def integer_time_indices(self) -> np.ndarray:
        """整数时刻 k = 1, 2, ... 对应的记录下标"""
        rounded = np.rint(self.times)
        hits = np.nonzero((np.abs(self.times - rounded) < 1e-9) & (rounded >= 1))[0]
        return hits


def phi1(gammas: np.ndarray, h: float) -> np.ndarray:
    """phi_1(h) = (1 - e^{-gamma h}) / gamma"""
    return -np.expm1(-gammas * h) / gammas


def _exp_euler(y: np.ndarray, z: np.ndarray, h: float, gammas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """批量单步；返回新值与每条轨迹是否接受"""
    n_coeffs, stiffness = nonlinear_terms(y + z)
    accepted = explicit_step_stable(stiffness, h)
    with np.errstate(over="ignore", invalid="ignore"):
        y_new = np.exp(-gammas * h) * y + phi1(gammas, h) * n_coeffs
    accepted &= np.all(np.isfinite(y_new), axis=(-2, -1))
    return y_new, accepted


def step_Y(Y: SpectralField, Z: SpectralField, h: float) -> SpectralField:
    """
    一阶指数积分器的一步: Y <- e^{-Ah} Y + phi_1(h) N(Y + Z)

    Args:
        Y: 当前 Y
        Z: 左端点的 Z
        h: 步长

    Returns:
        新的 Y

    Raises:
        ParameterError: h 非正或模数不一致
        StepRejectedError: 溢出或不满足显式稳定性条件
    """
    if not h > 0:
        raise ParameterError(f"step must be positive, got {h}")
    if Y.K != Z.K:
        raise ParameterError(f"Y has {Y.K} modes but Z has {Z.K}")
    y_new, accepted = _exp_euler(Y.coeffs, Z.coeffs, h, eigenvalues(Y.K))
    if not accepted:
        raise StepRejectedError(f"Y step of size {h:.3g} rejected (overflow or explicit instability)")
    return SpectralField(y_new)


def _advance_with_halving(
    y: np.ndarray,
    z: np.ndarray,
    h: float,
    gammas: np.ndarray,
    max_halvings: int,
    index: int,
    time: float,
) -> Tuple[np.ndarray, int]:
    """
    被拒绝的步按折半子步推进，子步成功后逐级放大回去

    Returns:
        (新的 y, 被拒绝的子步数)

    Raises:
        TrajectoryAbortedError: 折半次数超过 max_halvings
    """
    remaining = h
    depth = 1
    rejections = 1
    while remaining > 1e-12 * h:
        sub = min(h / 2 ** depth, remaining)
        y_new, accepted = _exp_euler(y[None], z[None], sub, gammas)
        if accepted[0]:
            y = y_new[0]
            remaining -= sub
            depth = max(1, depth - 1)
            continue
        rejections += 1
        depth += 1
        if depth > max_halvings:
            logger.error(f"Trajectory {index} aborted at t={time:.6g} after {max_halvings} halvings")
            raise TrajectoryAbortedError(
                index, time, f"step still rejected after {max_halvings} halvings of dt={h:.3g}"
            )
    return y, rejections


def _record_steps(n_steps: int, stride: int) -> np.ndarray:
    steps = np.arange(0, n_steps + 1, stride)
    if steps[-1] != n_steps:
        steps = np.append(steps, n_steps)
    return steps


def simulate_batch(
    x0s: np.ndarray,
    cfg: SimConfig,
    streams: Sequence[np.random.Generator],
    functionals: Sequence[Functional] = (),
    indices: Optional[Sequence[int]] = None,
) -> List[Trajectory]:
    """
    向量化模拟一批轨迹，每条轨迹使用自己的随机流

    Args:
        x0s: (B, 2, K) 初值
        cfg: 模拟配置
        streams: B 个随机流
        functionals: 额外记录的泛函
        indices: 轨迹编号（用于诊断信息）

    Returns:
        List[Trajectory]

    Raises:
        ParameterError: 初值与配置不一致
        TrajectoryAbortedError: 某条轨迹的步在最大折半后仍被拒绝
    """
    x0s = np.asarray(x0s, dtype=float)
    if x0s.ndim != 3 or x0s.shape[1:] != (2, cfg.K):
        raise ParameterError(f"initial states must have shape (B, 2, {cfg.K}), got {x0s.shape}")
    B = x0s.shape[0]
    if len(streams) != B:
        raise ParameterError(f"need {B} random streams, got {len(streams)}")
    indices = list(range(B)) if indices is None else list(indices)

    spectrum = cfg.spectrum()
    gammas = spectrum.gammas
    ou_decay, ou_scale = exact_coefficients(spectrum, cfg.dt)
    noisy = spectrum.amplitude > 0
    n_steps = cfg.n_steps
    record_steps = _record_steps(n_steps, cfg.record_stride)
    n_rec = len(record_steps)

    y = x0s.copy()
    z = np.zeros_like(y)
    tracks = {name: np.empty((n_rec, B)) for name in BUILTIN_TRACKS}
    tracks.update({f.name: np.empty((n_rec, B)) for f in functionals})
    x_rec = np.empty((n_rec, B, 2, cfg.K)) if cfg.record_states else None
    y_rec = np.empty((n_rec, B, 2, cfg.K)) if cfg.record_components else None
    z_rec = np.empty((n_rec, B, 2, cfg.K)) if cfg.record_components else None
    rejections = np.zeros(B, dtype=int)
    noise = np.zeros((B, NOISE_CHUNK, 2, cfg.K))

    def record(slot: int) -> None:
        x = y + z
        tracks["normH"][slot] = norm_sobolev_array(x, 0.0)
        tracks["normHdelta"][slot] = norm_sobolev_array(x, cfg.delta)
        tracks["normY"][slot] = norm_sobolev_array(y, 0.0)
        tracks["normZV"][slot] = norm_sobolev_array(z, 0.5)
        for f in functionals:
            tracks[f.name][slot] = f.func(x)
        if x_rec is not None:
            x_rec[slot] = x
        if y_rec is not None:
            y_rec[slot] = y
            z_rec[slot] = z

    record(0)
    slot = 1
    for step in range(1, n_steps + 1):
        j = (step - 1) % NOISE_CHUNK
        if noisy and j == 0:
            for b in range(B):
                noise[b] = sample_standard_stable(
                    spectrum.alpha, streams[b], size=(NOISE_CHUNK, 2, cfg.K)
                )
        y_new, accepted = _exp_euler(y, z, cfg.dt, gammas)
        for b in np.nonzero(~accepted)[0]:
            y_new[b], count = _advance_with_halving(
                y[b], z[b], cfg.dt, gammas, cfg.max_halvings, indices[b], (step - 1) * cfg.dt
            )
            rejections[b] += count
        y = y_new
        if noisy:
            z = ou_decay * z + ou_scale * noise[:, j]
        if slot < n_rec and step == record_steps[slot]:
            record(slot)
            slot += 1

    times = record_steps * cfg.dt
    trajectories = []
    for b in range(B):
        if rejections[b]:
            logger.warning(f"Trajectory {indices[b]}: {rejections[b]} rejected Y sub-steps")
        trajectories.append(Trajectory(
            times=times,
            delta=cfg.delta,
            functional_track={name: track[:, b].copy() for name, track in tracks.items()},
            x_states=None if x_rec is None else x_rec[:, b].copy(),
            y_states=None if y_rec is None else y_rec[:, b].copy(),
            z_states=None if z_rec is None else z_rec[:, b].copy(),
            index=indices[b],
            rejections=int(rejections[b]),
        ))
    return trajectories


def simulate_trajectory(
    x0: SpectralField,
    cfg: SimConfig,
    rng: np.random.Generator,
    functionals: Sequence[Functional] = (),
    index: int = 0,
) -> Trajectory:
    """
    模拟单条轨迹: Y_0 = x0, Z_0 = 0，交替执行 Y 步与精确 OU 步

    Args:
        x0: 初值
        cfg: 模拟配置
        rng: 随机数流
        functionals: 额外记录的泛函
        index: 轨迹编号

    Returns:
        Trajectory
    """
    if x0.K != cfg.K:
        raise ParameterError(f"x0 has {x0.K} modes but cfg.K = {cfg.K}")
    start_time = datetime.now()
    traj = simulate_batch(x0.coeffs[None], cfg, [rng], functionals, [index])[0]
    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"Trajectory {index} simulated to T={cfg.T} in {duration:.2f} seconds")
    return traj


InitialState = Union[SpectralField, Callable[[int], np.ndarray]]


def simulate_ensemble(
    cfg: SimConfig,
    initial: InitialState,
    n_traj: int,
    seed: int,
    workers: int = 1,
    functionals: Sequence[Functional] = (),
    reducer: Optional[Callable[[Trajectory], Any]] = None,
    progress: Optional[Callable[[], None]] = None,
) -> List[Any]:
    """
    按固定大小的批并行模拟 n_traj 条轨迹

    轨迹 i 使用随机流 (seed, i)，批的划分与 worker 数无关，因此结果与调度无关。

    Args:
        cfg: 模拟配置
        initial: 公共初值，或由轨迹编号给出初值系数 (2, K) 的函数
        n_traj: 轨迹数
        seed: 主种子
        workers: 并行线程数
        functionals: 额外记录的泛函
        reducer: 在 worker 内把轨迹化简为小结果（节省内存）
        progress: 每完成一个批调用一次

    Returns:
        按轨迹编号排列的轨迹或 reducer 结果
    """
    if n_traj < 1:
        raise ParameterError(f"n_traj must be at least 1, got {n_traj}")
    start_time = datetime.now()

    def initial_coeffs(i: int) -> np.ndarray:
        if isinstance(initial, SpectralField):
            return initial.coeffs
        return np.asarray(initial(i), dtype=float)

    def run_batch(batch: range) -> List[Any]:
        x0s = np.stack([initial_coeffs(i) for i in batch])
        streams = [stream(seed, i) for i in batch]
        trajs = simulate_batch(x0s, cfg, streams, functionals, list(batch))
        return trajs if reducer is None else [reducer(t) for t in trajs]

    batches = [range(i, min(i + BATCH_SIZE, n_traj)) for i in range(0, n_traj, BATCH_SIZE)]
    results = [item for chunk in run_ordered(run_batch, batches, workers, progress) for item in chunk]
    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"Simulated {n_traj} trajectories to T={cfg.T} in {duration:.2f} seconds")
    return results


def _require_records(traj: Trajectory, minimum: int = 2) -> None:
    if len(traj) < minimum:
        raise ParameterError(f"need at least {minimum} records, got {len(traj)}")


def dissipation_check(traj: Trajectory) -> float:
    """
    能量不等式的最小经验常数 C*

    在相邻记录时刻上要求
        (|Y|^2_{i+1} - |Y|^2_i) / dt <= -|Y_i|^2 |Y_{i+1}|^2 + C* (1 + |Z_i|_V^4)
    返回满足所有增量的最小 C* >= 0。|Y|^4 在增量上取 h_i h_{i+1}，
    对 g' = -g^2 该差分形式是精确的，因此大初值不会抬高 C*；Z 取左端点，
    与 Y 步一致。

    Raises:
        ParameterError: 记录少于 2 个
    """
    _require_records(traj)
    h = traj.functional_track["normY"] ** 2
    z4 = traj.functional_track["normZV"] ** 4
    dt = np.diff(traj.times)
    lhs = np.diff(h) / dt + h[:-1] * h[1:]
    return float(max(0.0, np.max(lhs / (1.0 + z4[:-1]))))


@dataclass
class YBoundResult:
    passed: bool
    slack: float
    bound: float
    k_hat: float
    c_star: float
    max_energy: float


def ybound_check(traj: Trajectory, T: float, c_star: Optional[float] = None) -> YBoundResult:
    """
    检验 t in [T/2, T] 上 |Y_t|_H^2 <= K_T (1 + 2/(e^T - 1))，
    K_T = max(1, sqrt(C* (1 + sup_{t<=T} |Z_t|_V^4)))

    Args:
        traj: 覆盖 [0, T] 的轨迹
        T: 时间窗
        c_star: 能量常数；默认取该轨迹的 dissipation_check 值

    Returns:
        YBoundResult
    """
    if traj.times[-1] < T - 1e-9:
        raise ParameterError(f"trajectory ends at {traj.times[-1]} before T={T}")
    if c_star is None:
        c_star = dissipation_check(traj)
    window = traj.times <= T + 1e-9
    z_sup4 = float(np.max(traj.functional_track["normZV"][window] ** 4))
    k_hat = max(1.0, float(np.sqrt(c_star * (1.0 + z_sup4))))
    bound = halfinterval_bound(k_hat, T)
    half = window & (traj.times >= T / 2 - 1e-9)
    energy = traj.functional_track["normY"][half] ** 2
    max_energy = float(np.max(energy)) if energy.size else 0.0
    return YBoundResult(
        passed=max_energy <= bound,
        slack=bound - max_energy,
        bound=bound,
        k_hat=k_hat,
        c_star=c_star,
        max_energy=max_energy,
    )


def riccati_constant(traj: Trajectory, c_star: float, T: Optional[float] = None) -> float:
    """K_T 的经验值 max(1, sqrt(C* (1 + sup |Z|_V^4)))"""
    window = slice(None) if T is None else traj.times <= T + 1e-9
    z_sup4 = float(np.max(traj.functional_track["normZV"][window] ** 4))
    return max(1.0, float(np.sqrt(c_star * (1.0 + z_sup4))))


def young_constant_probe(
    K: int,
    n_samples: int,
    rng: np.random.Generator,
    z_scale: float = 1.0,
    log_norm_range: Tuple[float, float] = (-2.0, 2.0),
) -> float:
    """
    数值标定 2<y, N(y+z)> <= -|y|_L4^4 + C (1 + |z|_L4^4) 中的 C

    y 的 H 范数在 10^log_norm_range 上对数均匀抽取，z 的范数为 z_scale 乘以
    同样的因子（z_scale = 0 对应确定性情形，此时结果不超过 1）。

    Returns:
        样本上的最大比值
    """
    if n_samples < 1:
        raise ParameterError(f"n_samples must be at least 1, got {n_samples}")
    lo, hi = log_norm_range
    best = 0.0
    for _ in range(n_samples):
        y = random_field(K, rng, norm=10 ** rng.uniform(lo, hi), decay=rng.uniform(0.0, 2.0))
        z = random_field(K, rng, norm=z_scale * 10 ** rng.uniform(lo, hi), decay=rng.uniform(0.0, 2.0))
        n_coeffs, stiffness = nonlinear_terms((y + z).coeffs)
        if not np.isfinite(stiffness):
            continue
        lhs = 2.0 * inner(y, SpectralField(n_coeffs)) + float(norm_L4_array(y.coeffs)) ** 4
        rhs = 1.0 + float(norm_L4_array(z.coeffs)) ** 4
        best = max(best, lhs / rhs)
    return best
