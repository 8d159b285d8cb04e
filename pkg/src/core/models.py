from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .config import (
    DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_DELTA, DEFAULT_DT, DEFAULT_HORIZON,
    DEFAULT_MODES, DEFAULT_MOMENT_ORDER, DEFAULT_NOISE_AMPLITUDE,
    DEFAULT_RECORD_STRIDE, DEFAULT_SEED, DEFAULT_WORKERS, MAX_STEP_HALVINGS,
)
from .exceptions import ParameterError
from .stable_noise import NoiseSpectrum, admissibility_violation, mode_scales

EXPERIMENT_NAMES = (
    "noise-test", "ou-probe", "simulate", "riccati-verify", "recurrence",
    "occupation", "moment-probe", "ldp-probe", "verify-all",
)


def step_count(T: float, dt: float) -> int:
    """T / dt 的步数，要求 T 是 dt 的整数倍"""
    ratio = T / dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ParameterError(f"T = {T} is not a multiple of dt = {dt}")
    return n


class SimConfig(BaseModel):
    """模拟配置"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    K: int = DEFAULT_MODES
    dt: float = DEFAULT_DT
    T: float = DEFAULT_HORIZON
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    delta: float = DEFAULT_DELTA
    p: float = DEFAULT_MOMENT_ORDER
    record_stride: int = DEFAULT_RECORD_STRIDE
    seed: int = DEFAULT_SEED
    noise_amplitude: float = DEFAULT_NOISE_AMPLITUDE
    record_states: bool = True
    record_components: bool = False
    max_halvings: int = MAX_STEP_HALVINGS

    @field_validator("K", "record_stride")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be at least 1, got {value}")
        return value

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {value}")
        return value

    @model_validator(mode="after")
    def _hypotheses(self) -> "SimConfig":
        if not self.dt > 0:
            raise ValueError(f"dt > 0 violated: dt = {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T >= dt violated: T = {self.T}, dt = {self.dt}")
        step_count(self.T, self.dt)
        if not 1 < self.alpha <= 2:
            raise ValueError(f"1 < alpha <= 2 violated: alpha = {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta > 0 violated: beta = {self.beta}")
        if not 0 < self.delta < 0.5:
            raise ValueError(f"delta in (0, 1/2) violated: delta = {self.delta}")
        if not 0 < self.p < self.alpha / 4:
            raise ValueError(f"0 < p < alpha/4 violated: p = {self.p}, alpha/4 = {self.alpha / 4:.6g}")
        if self.noise_amplitude < 0:
            raise ValueError(f"noise_amplitude >= 0 violated: {self.noise_amplitude}")
        if self.max_halvings < 0:
            raise ValueError(f"max_halvings >= 0 violated: {self.max_halvings}")
        return self

    @property
    def n_steps(self) -> int:
        return step_count(self.T, self.dt)

    @property
    def admissibility_violation(self) -> Optional[str]:
        return admissibility_violation(self.alpha, self.beta)

    def spectrum(self) -> NoiseSpectrum:
        return mode_scales(self.alpha, self.beta, self.K, self.noise_amplitude)


class ExperimentSpec(BaseModel):
    """一次实验的完整描述"""
    model_config = ConfigDict(extra="forbid")

    name: str
    cfg: SimConfig = SimConfig()
    params: Dict[str, Any] = {}
    output_path: str
    worker_count: int = DEFAULT_WORKERS

    @field_validator("name")
    @classmethod
    def _known_name(cls, value: str) -> str:
        if value not in EXPERIMENT_NAMES:
            raise ValueError(f"unknown experiment {value!r}; expected one of {', '.join(EXPERIMENT_NAMES)}")
        return value

    @field_validator("worker_count")
    @classmethod
    def _workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"worker_count must be at least 1, got {value}")
        return value

    @field_validator("params")
    @classmethod
    def _nonempty_grids(cls, value: Dict[str, Any]) -> Dict[str, Any]:
        for key, item in value.items():
            if isinstance(item, (list, tuple)) and len(item) == 0:
                raise ValueError(f"parameter grid {key!r} is empty")
        return value


class ReportRow(BaseModel):
    """JSON-lines 报告中的一行"""
    experiment: str
    params: Dict[str, Any]
    estimate: Optional[float] = None
    stderr: Optional[float] = None
    n: Optional[int] = None
    flags: List[str] = []
    values: Dict[str, Any] = {}
