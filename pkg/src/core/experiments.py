"""
实验调度

run_experiment 把 ExperimentSpec 分派到各模块的操作，写出 JSON-lines 报告、
CSV 侧表（轨迹、生存曲线、直方图）与运行清单。报告只依赖 (spec, 主种子)，
与 worker 数无关；耗时只写入清单。
"""

import logging
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from .. import __version__
from .config import (
    BATCH_SIZE, BURN_IN_FRACTION, CENSOR_HORIZON, LARGE_DATA_MAX_HALVINGS, LONG_RUN_HORIZON, MIN_TAIL_SAMPLES,
)
from .ergodic_stats import (
    estimate_invariant_mean, exp_moment_estimate, geometric_tail_fit, hitting_samples,
    ldp_decay_probe, make_functional, occupation_average, occupation_histogram,
    return_time_probe, time_weights, batch_means_stderr, functional_values, uniform_moment_probe,
)
from .exceptions import EstimationError, ParameterError
from .gl_integrator import (
    dissipation_check, riccati_constant, simulate_ensemble, simulate_trajectory, ybound_check,
)
from .models import ExperimentSpec, ReportRow, SimConfig
from .ou_process import exact_coefficients, maximal_moment_probe
from .riccati import RiccatiInput, comparison_verify, halfinterval_bound, riccati_explicit, riccati_numeric
from .spectral_field import SpectralField, norm_sobolev, random_field
from .stable_noise import (
    NoiseSpectrum, StableParams, empirical_characteristic_function, hill_estimator,
    sample_standard_stable, stable_increment,
)
from ..utils.file_utils import emit_report, emit_table, write_manifest
from ..utils.helpers import aux_stream, derived_seed, stream

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

ProgressCallback = Optional[Callable[[], None]]

# 需要模型假设成立的实验
SIMULATING = {"simulate", "recurrence", "occupation", "moment-probe", "ldp-probe", "verify-all"}


@dataclass
class ExperimentOutcome:
    """一次实验的结果: 报告行、侧表与失败列表"""
    name: str
    rows: List[ReportRow] = field(default_factory=list)
    tables: Dict[str, Dict[str, list]] = field(default_factory=dict)
    side_reports: Dict[str, List[dict]] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    files: List[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class _Run:
    """单次实验的参数访问与结果收集"""

    def __init__(self, spec: ExperimentSpec, progress: ProgressCallback = None):
        self.spec = spec
        self.cfg = spec.cfg
        self.seed = spec.cfg.seed
        self.workers = spec.worker_count
        self.progress = progress
        self.stage: Optional[str] = None
        self.stage_defaults: Dict[str, Any] = {}
        self.outcome = ExperimentOutcome(spec.name)

    def enter(self, stage: Optional[str], **defaults: Any) -> None:
        """verify-all 的阶段: 参数查找顺序为 stage.key > key > 阶段默认值 > 默认值"""
        self.stage = stage
        self.stage_defaults = defaults

    def param(self, key: str, default: Any) -> Any:
        params = self.spec.params
        if self.stage is not None and f"{self.stage}.{key}" in params:
            return params[f"{self.stage}.{key}"]
        if key in params:
            return params[key]
        return self.stage_defaults.get(key, default)

    def floats(self, key: str, default: Sequence[float]) -> List[float]:
        value = self.param(key, default)
        if isinstance(value, (int, float)):
            value = [value]
        values = [float(v) for v in value]
        if not values:
            raise ParameterError(f"parameter grid {key!r} is empty")
        return values

    def integer(self, key: str, default: int) -> int:
        value = self.param(key, default)
        if float(value) != int(float(value)):
            raise ParameterError(f"{key} must be an integer, got {value}")
        return int(float(value))

    def flag(self, key: str, default: bool) -> bool:
        value = self.param(key, default)
        if isinstance(value, str):
            return value.lower() in ("true", "1", "yes")
        return bool(value)

    def row(
        self,
        cell: Dict[str, Any],
        estimate: Optional[float] = None,
        stderr: Optional[float] = None,
        n: Optional[int] = None,
        flags: Sequence[str] = (),
        **values: Any,
    ) -> None:
        params = {**self.cfg.model_dump(), **cell}
        if self.stage is not None:
            params["stage"] = self.stage
        self.outcome.rows.append(ReportRow(
            experiment=self.spec.name,
            params=params,
            estimate=None if estimate is None else float(estimate),
            stderr=None if stderr is None else float(stderr),
            n=None if n is None else int(n),
            flags=list(flags),
            values=values,
        ))

    def table(self, name: str, columns: Dict[str, Sequence[Any]]) -> None:
        key = name if self.stage is None else f"{self.stage}.{name}"
        self.outcome.tables[key] = {k: list(v) for k, v in columns.items()}

    def check(self, criterion: int, title: str, passed: bool, detail: str, **values: Any) -> None:
        self.row(
            {"criterion": criterion, "title": title},
            flags=["pass" if passed else "fail"], passed=bool(passed), detail=detail, **values,
        )
        if passed:
            logger.info(f"Criterion {criterion} ({title}) passed: {detail}")
        else:
            logger.warning(f"Criterion {criterion} ({title}) failed: {detail}")
            self.outcome.failures.append(f"criterion {criterion} ({title}): {detail}")


def _require_admissible(cfg: SimConfig) -> None:
    violation = cfg.admissibility_violation
    if violation is not None:
        raise ParameterError(f"(alpha, beta) = ({cfg.alpha}, {cfg.beta}) is not admissible: {violation}")


def _large_data_cfg(cfg: SimConfig, max_norm: float) -> SimConfig:
    """|x0|_H >= 100 的实验放宽折半上限"""
    if max_norm >= 100 and cfg.max_halvings < LARGE_DATA_MAX_HALVINGS:
        return cfg.model_copy(update={"max_halvings": LARGE_DATA_MAX_HALVINGS})
    return cfg


def _initial_field(cfg: SimConfig, norm: float, seed: int, index: int = 0) -> SpectralField:
    return random_field(cfg.K, aux_stream(seed, index), norm=norm)


def _names(value: Any) -> List[str]:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return [str(item) for item in value]


# ---------------------------------------------------------------------------
# noise-test
# ---------------------------------------------------------------------------

def semigroup_ks(spectrum: NoiseSpectrum, h: float, n_steps: int, n_samples: int, seed: int, mode: int = 1):
    """单个模: n 步步长 h 与一步步长 n h 的两样本 KS 检验（Z_0 = 0）"""
    k = mode - 1
    decay, scale = exact_coefficients(spectrum, h)
    rng = aux_stream(seed, 100)
    z = np.zeros(n_samples)
    for _ in range(n_steps):
        z = decay[k] * z + scale[k] * sample_standard_stable(spectrum.alpha, rng, size=n_samples)
    _, big_scale = exact_coefficients(spectrum, n_steps * h)
    one = big_scale[k] * sample_standard_stable(spectrum.alpha, aux_stream(seed, 101), size=n_samples)
    return stats.ks_2samp(z, one)


def fine_oracle_ks(
    spectrum: NoiseSpectrum,
    T: float,
    substeps: int,
    n_samples: int,
    seed: int,
    mode: int = 1,
    chunk: int = 1000,
):
    """
    z_k(T) 的精确一步采样与细分 Riemann-Stieltjes 和
    sum_j beta_k e^{-gamma_k (T - s_j)} dl(s_j)（中点权重）的两样本 KS 检验
    """
    k = mode - 1
    gamma = spectrum.gammas[k]
    ds = T / substeps
    mids = (np.arange(substeps) + 0.5) * ds
    weights = spectrum.effective_scales[k] * np.exp(-gamma * (T - mids)) * ds ** (1.0 / spectrum.alpha)
    rng = aux_stream(seed, 102)
    parts = []
    for start in range(0, n_samples, chunk):
        m = min(chunk, n_samples - start)
        parts.append(sample_standard_stable(spectrum.alpha, rng, size=(m, substeps)) @ weights)
    oracle = np.concatenate(parts)
    _, scale = exact_coefficients(spectrum, T)
    exact = scale[k] * sample_standard_stable(spectrum.alpha, aux_stream(seed, 103), size=n_samples)
    return stats.ks_2samp(exact, oracle)


def _noise_test(run: _Run) -> List[dict]:
    alphas = run.floats("alphas", [1.6, 1.8, 2.0])
    n = run.integer("n_samples", 100_000)
    t_grid = np.array(run.floats("t_grid", [0.25, 0.5, 1.0, 2.0]))
    tolerance = max(0.005, 3.0 / np.sqrt(n))
    summaries = []
    for j, alpha in enumerate(alphas):
        draws = sample_standard_stable(alpha, aux_stream(run.seed, 10 * j), size=n)
        ecf = empirical_characteristic_function(draws, t_grid)
        exact = np.exp(-np.abs(t_grid) ** alpha)
        cf_error = float(np.max(np.abs(ecf - exact)))
        sign_mean = float(np.mean(np.sign(draws)))

        params = StableParams(alpha)
        wide = stable_increment(params, 4.0, aux_stream(run.seed, 10 * j + 1), size=n)
        unit = stable_increment(params, 1.0, aux_stream(run.seed, 10 * j + 2), size=n)
        similarity = stats.ks_2samp(wide, 4.0 ** (1.0 / alpha) * unit)

        hill = hill_estimator(draws) if alpha < 2 else None
        variance = float(np.var(draws)) if alpha == 2 else None

        flags = []
        if cf_error > tolerance:
            flags.append("cf_mismatch")
        if abs(sign_mean) > 3.0 / np.sqrt(n):
            flags.append("asymmetric")
        if similarity.pvalue < 0.01:
            flags.append("self_similarity_rejected")
        summary = dict(
            alpha=alpha, cf_error=cf_error, variance=variance, hill=hill,
            sign_mean=sign_mean, similarity_pvalue=float(similarity.pvalue),
        )
        summaries.append(summary)
        run.row(
            {"alpha": alpha, "n_samples": n, "t_grid": t_grid.tolist()},
            estimate=cf_error, n=n, flags=flags,
            empirical_cf=ecf.tolist(), exact_cf=exact.tolist(), tolerance=tolerance,
            sign_mean=sign_mean, self_similarity_pvalue=float(similarity.pvalue),
            hill_estimate=hill, variance=variance,
        )
    return summaries


# ---------------------------------------------------------------------------
# ou-probe
# ---------------------------------------------------------------------------

def _ou_probe(run: _Run) -> dict:
    cfg = run.cfg
    spectrum = cfg.spectrum()
    theta = float(run.param("theta", 0.5))
    p = float(run.param("p_sup", 0.5))
    horizons = run.floats("horizons", [1, 2, 4, 8, 16])
    n_traj = run.integer("n_traj", 500)
    h = float(run.param("h", 1e-2))
    result = maximal_moment_probe(
        spectrum, theta, p, horizons, n_traj, run.seed, h=h, workers=run.workers, progress=run.progress
    )
    limit = p / spectrum.alpha + 0.15
    flags = [] if result.slope_defined else ["slope_undefined"]
    for item in result.rows():
        run.row(
            {"theta": theta, "p_sup": p, "T": item["T"], "n_traj": n_traj, "h": h},
            estimate=item["estimate"], stderr=item["stderr"], n=n_traj, flags=flags,
            slope=item["slope"], slope_limit=limit,
        )
    if result.raw_values is not None:
        run.row({"theta": theta, "p_sup": p, "n_traj": n_traj, "h": h}, n=1,
                flags=["raw_values"], raw_values=result.raw_values.tolist())

    summary = {"slope": result.slope, "slope_limit": limit}
    ks_samples = run.integer("ks_samples", 10_000)
    if ks_samples > 0:
        ks_h = float(run.param("ks_h", 1e-2))
        ks_steps = run.integer("ks_steps", 10)
        ks = semigroup_ks(spectrum, ks_h, ks_steps, ks_samples, run.seed)
        summary["semigroup_pvalue"] = float(ks.pvalue)
        run.row({"h": ks_h, "n_steps": ks_steps, "n_samples": ks_samples, "mode": 1},
                estimate=float(ks.statistic), n=ks_samples,
                flags=["semigroup_ks"] + (["rejected"] if ks.pvalue < 0.01 else []),
                pvalue=float(ks.pvalue))
    oracle_samples = run.integer("oracle_samples", 0)
    if oracle_samples > 0:
        substeps = run.integer("oracle_substeps", 10_000)
        oracle = fine_oracle_ks(spectrum, 1.0, substeps, oracle_samples, run.seed)
        summary["oracle_pvalue"] = float(oracle.pvalue)
        run.row({"T": 1.0, "substeps": substeps, "n_samples": oracle_samples, "mode": 1},
                estimate=float(oracle.statistic), n=oracle_samples,
                flags=["fine_oracle_ks"] + (["rejected"] if oracle.pvalue < 0.01 else []),
                pvalue=float(oracle.pvalue))
    return summary


# ---------------------------------------------------------------------------
# riccati-verify
# ---------------------------------------------------------------------------

def _riccati_verify(run: _Run) -> dict:
    g0_grid = sorted(run.floats("g0_grid", [0, 0.5, 1, 2, 10]))
    kc_grid = run.floats("Kc_grid", [1, 2, 5])
    t_max = float(run.param("t_max", 2.0))
    grid_dt = float(run.param("grid_dt", 1e-3))
    grid = np.linspace(0.0, t_max, int(round(t_max / grid_dt)) + 1)

    max_error = 0.0
    invariant_ok = True
    monotone_ok = True
    for Kc in kc_grid:
        previous = None
        for g0 in g0_grid:
            inp = RiccatiInput(g0, Kc, t_max)
            explicit = riccati_explicit(inp, grid)
            error = float(np.max(np.abs(explicit - riccati_numeric(inp, grid))))
            lo, hi = min(g0, Kc), max(g0, Kc)
            inside = bool(np.all(explicit >= lo - 1e-12 * hi) and np.all(explicit <= hi * (1 + 1e-12)))
            monotone = previous is None or bool(np.all(explicit >= previous - 1e-12 * hi))
            previous = explicit
            max_error = max(max_error, error)
            invariant_ok &= inside
            monotone_ok &= monotone
            flags = [name for name, ok in (("interval_violation", inside), ("not_monotone", monotone)) if not ok]
            run.row({"g0": g0, "Kc": Kc, "t_max": t_max, "grid_dt": grid_dt},
                    estimate=error, n=grid.size, flags=flags,
                    max_abs_error=error, invariant_interval=inside, monotone_in_g0=monotone)

    T = float(run.param("T_half", 1.0))
    bound = halfinterval_bound(1.0, T)
    half = np.linspace(T / 2, T, 501)
    dominated = True
    for g0 in run.floats("sweep_g0", [0, 1, 10, 1e6]):
        peak = float(np.max(riccati_explicit(RiccatiInput(g0, 1.0, T), half)))
        ok = peak <= bound + 1e-9
        dominated &= ok
        run.row({"g0": g0, "Kc": 1.0, "T": T}, estimate=peak, flags=[] if ok else ["bound_exceeded"],
                halfinterval_bound=bound, peak_on_half_interval=peak)
    return {"max_error": max_error, "dominated": dominated,
            "invariant_interval": invariant_ok, "monotone": monotone_ok}


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate(run: _Run) -> None:
    cfg = run.cfg
    n_traj = run.integer("n_traj", 1)
    x0_norm = float(run.param("x0_norm", 0.0))
    functionals = [
        make_functional(name, cfg.delta, float(run.param("M", 1.0)))
        for name in _names(run.param("functionals", []))
    ]
    sim_cfg = _large_data_cfg(cfg.model_copy(update={"record_components": True}), x0_norm)
    x0 = _initial_field(cfg, x0_norm, run.seed)
    trajs = simulate_ensemble(sim_cfg, x0, n_traj, run.seed, run.workers, functionals, progress=run.progress)

    names = ["normH", "normHdelta", "normY", "normZV"] + [f.name for f in functionals]
    columns: Dict[str, list] = {"trajectory": [], "time": [], **{name: [] for name in names}}
    states: List[dict] = []
    dump_states = run.flag("dump_states", False)
    for traj in trajs:
        identity = float(np.max(np.abs(traj.x_states - traj.y_states - traj.z_states)))
        finite = bool(np.all(np.isfinite(traj.x_states)))
        c_star = dissipation_check(traj) if len(traj) >= 2 else 0.0
        ybound = ybound_check(traj, float(traj.times[-1]), c_star)
        flags = []
        if identity > 1e-9:
            flags.append("identity_violation")
        if not ybound.passed:
            flags.append("ybound_failed")
        run.row(
            {"trajectory": traj.index, "x0_norm": x0_norm, "n_traj": n_traj},
            estimate=float(traj.functional_track["normH"][-1]), n=len(traj), flags=flags,
            identity_error=identity, finite=finite, c_star=c_star, rejections=traj.rejections,
            ybound_passed=ybound.passed, ybound_bound=ybound.bound, ybound_slack=ybound.slack,
        )
        columns["trajectory"].extend([traj.index] * len(traj))
        columns["time"].extend(traj.times.tolist())
        for name in names:
            columns[name].extend(traj.functional_track[name].tolist())
        if dump_states:
            states.extend(
                {"trajectory": traj.index, "time": float(t), "x": traj.x_states[i].reshape(-1).tolist()}
                for i, t in enumerate(traj.times)
            )
    run.table("trajectory", columns)
    if dump_states:
        run.outcome.side_reports["states"] = states


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------

def _recurrence(run: _Run) -> dict:
    cfg = run.cfg
    M_grid = sorted(run.floats("M_grid", [1, 2, 4, 8]))
    lambdas = run.floats("lambda_grid", [1.0])
    n_traj = run.integer("n_traj", 1000)
    horizon_n = run.integer("horizon_n", CENSOR_HORIZON)
    x0_norm = float(run.param("x0_norm", 0.0))
    c_hat = run.param("c_hat", None)
    c_hat = None if c_hat is None else float(c_hat)

    x0 = _initial_field(cfg, x0_norm, run.seed)
    sim_cfg = _large_data_cfg(cfg, x0_norm)
    samples = hitting_samples(
        sim_cfg, M_grid, n_traj, horizon_n, run.seed,
        initial=lambda i: x0.coeffs, workers=run.workers, progress=run.progress,
    )
    fits = {}
    reports = {}
    for M in M_grid:
        fit = geometric_tail_fit(samples[M])
        fits[M] = fit
        run.table(f"survival_M{M:g}", {"n": fit.n, "count": fit.counts, "survival": fit.survival})
        for lam in lambdas:
            report = exp_moment_estimate(samples[M], lam, c_hat=c_hat, p=cfg.p)
            reports[(M, lam)] = report
            if report.estimation_failed:
                run.outcome.failures.append(f"M={M:g}, lambda={lam:g}: all {n_traj} hitting samples censored")
            run.row(
                {"M": M, "lambda": lam, "n_traj": n_traj, "horizon_n": horizon_n,
                 "x0_norm": x0_norm, "c_hat": c_hat},
                estimate=report.estimate, stderr=report.stderr, n=report.n,
                flags=report.flags + ([] if fit.fit_ok else ["tail_fit_failed"]),
                raw_estimate=report.raw_estimate, ci_low=report.ci_low, ci_high=report.ci_high,
                censored_fraction=report.censored_fraction, rho_fit=fit.rho, r_squared=fit.r_squared,
                threshold_check=report.threshold_check, divergence_risk=report.divergence_risk,
            )

    n_starts = run.integer("return_starts", 0)
    if n_starts > 0:
        M = M_grid[-1]
        lam = lambdas[-1]
        starts = []
        for j in range(n_starts):
            rng = aux_stream(run.seed, 1000 + j)
            direction = random_field(cfg.K, rng, norm=1.0)
            starts.append(direction * (M * rng.uniform() / norm_sobolev(direction, cfg.delta)))
        returns = return_time_probe(
            sim_cfg, M, lam, starts, n_traj, horizon_n, derived_seed(run.seed, 4), run.workers
        )
        for j, report in enumerate(returns):
            run.row(
                {"M": M, "lambda": lam, "start": j, "n_traj": n_traj, "horizon_n": horizon_n},
                estimate=report.estimate, stderr=report.stderr, n=report.n,
                flags=["return_time"] + report.flags, start_norm=norm_sobolev(starts[j], cfg.delta),
                raw_estimate=report.raw_estimate, censored_fraction=report.censored_fraction,
            )
    return {"fits": fits, "reports": reports}


# ---------------------------------------------------------------------------
# occupation
# ---------------------------------------------------------------------------

def _occupation(run: _Run) -> dict:
    cfg = run.cfg
    f = make_functional(str(run.param("functional", "exp_neg_normH_sq")), cfg.delta, float(run.param("M", 1.0)))
    T = float(run.param("T_occ", 200.0))
    norms = run.floats("x0_norms", [0.0, 50.0])
    edges = run.floats("edges", np.linspace(-1.0, 1.0, 41).tolist())

    sim_cfg = _large_data_cfg(cfg.model_copy(update={"T": T, "record_states": False}), max(norms))
    fields = [_initial_field(cfg, norm, run.seed, j) for j, norm in enumerate(norms)]
    trajs = simulate_ensemble(
        sim_cfg, lambda i: fields[i].coeffs, len(norms), run.seed, run.workers, [f], progress=run.progress
    )
    averages = []
    for norm, traj in zip(norms, trajs):
        average = occupation_average(traj, f)
        stderr = batch_means_stderr(functional_values(traj, f), time_weights(traj.times))
        averages.append((average, stderr))
        run.row({"functional": f.name, "T": T, "x0_norm": norm}, estimate=average, stderr=stderr, n=len(traj))

    gap = abs(averages[0][0] - averages[-1][0])
    combined = float(np.sqrt(averages[0][1] ** 2 + averages[-1][1] ** 2))
    agree = gap <= 3.0 * combined
    run.row({"functional": f.name, "T": T, "x0_norms": norms}, estimate=gap, stderr=combined,
            flags=["two_start_comparison"] + ([] if agree else ["disagree"]), agree=agree)

    n_hist = run.integer("n_hist", 16)
    tv = None
    if n_hist > 0:
        hist_cfg = cfg.model_copy(update={"T": T, "record_states": False})
        hist_trajs = simulate_ensemble(
            hist_cfg, SpectralField.zeros(cfg.K), n_hist, derived_seed(run.seed, 3), run.workers, [f],
            progress=run.progress,
        )
        half = occupation_histogram(hist_trajs, f, edges, window=T / 2)
        full = occupation_histogram(hist_trajs, f, edges)
        tv = float(0.5 * np.sum(np.abs(half.histogram.masses - full.histogram.masses)))
        run.table("histogram", {
            "edge_low": edges[:-1], "edge_high": edges[1:],
            "mass_half": half.histogram.masses, "mass_full": full.histogram.masses,
        })
        run.row({"functional": f.name, "T": T, "n_hist": n_hist}, estimate=tv, n=n_hist,
                flags=["histogram_total_variation"],
                outside_fraction=full.histogram.outside_fraction,
                average=full.functional_averages[f.name])
    return {"agree": agree, "gap": gap, "combined_stderr": combined, "total_variation": tv}


# ---------------------------------------------------------------------------
# moment-probe
# ---------------------------------------------------------------------------

def _moment_probe(run: _Run) -> dict:
    cfg = run.cfg
    norms = run.floats("initial_norms", [0, 1, 10, 100, 1000])
    n_traj = run.integer("n_traj", 200)
    T = float(run.param("T_moment", 1.0))
    component = str(run.param("component", "X"))
    probe_cfg = _large_data_cfg(cfg.model_copy(update={"T": T}), max(norms))
    report = uniform_moment_probe(probe_cfg, norms, n_traj, run.seed, run.workers, component, run.progress)
    for cell in report.cells:
        run.row({"x0_norm": cell.x0_norm, "T": T, "component": component, "n_traj": n_traj},
                estimate=cell.estimate, stderr=cell.stderr, n=cell.n)
    run.row({"initial_norms": norms, "T": T, "component": component, "n_traj": n_traj},
            estimate=report.max_min_ratio, n=n_traj,
            flags=["max_min_ratio"] + ([] if report.max_min_ratio is not None else ["zero_estimate"]),
            c_hat=report.c_hat)
    summary = {"ratio": report.max_min_ratio, "c_hat": report.c_hat}

    if run.flag("compare_half_noise", False) and 0.0 in norms:
        half_cfg = probe_cfg.model_copy(update={"noise_amplitude": probe_cfg.noise_amplitude / 2})
        half = uniform_moment_probe(half_cfg, [0.0], n_traj, run.seed, run.workers, component, run.progress)
        full = report.cells[norms.index(0.0)].estimate
        decreased = half.cells[0].estimate < full
        summary["half_noise_decreased"] = decreased
        run.row({"x0_norm": 0.0, "T": T, "component": component, "n_traj": n_traj, "noise_factor": 0.5},
                estimate=half.cells[0].estimate, stderr=half.cells[0].stderr, n=n_traj,
                flags=["half_noise"] + ([] if decreased else ["not_decreased"]), full_noise_estimate=full)
    return summary


def ybound_uniformity(cfg: SimConfig, norms: Sequence[float], seed: int, T: float = 1.0) -> dict:
    """同一噪声路径、同一方向、不同 |x0|_H 下的 Y 界检验（共用右端）"""
    run_cfg = _large_data_cfg(
        cfg.model_copy(update={"T": T, "record_stride": 1, "record_states": False}), max(norms)
    )
    direction = random_field(cfg.K, aux_stream(seed, 0), norm=1.0)
    trajs = [
        simulate_trajectory(direction * float(norm), run_cfg, stream(seed, 0), index=j)
        for j, norm in enumerate(norms)
    ]
    c_star = max(dissipation_check(t) for t in trajs)
    results = [ybound_check(t, float(t.times[-1]), c_star) for t in trajs]
    bounds = [r.bound for r in results]
    same_rhs = bool(np.allclose(bounds, bounds[0], rtol=1e-12, atol=0.0))
    return {"passed": all(r.passed for r in results) and same_rhs, "same_rhs": same_rhs,
            "bound": bounds[0], "c_star": c_star, "max_energy": [r.max_energy for r in results]}


# ---------------------------------------------------------------------------
# ldp-probe
# ---------------------------------------------------------------------------

def _ldp_probe(run: _Run) -> dict:
    cfg = run.cfg
    f = make_functional(str(run.param("functional", "tanh_normH_sq")), cfg.delta, float(run.param("M", 1.0)))
    horizons = run.floats("horizons", [25, 50])
    n_traj = run.integer("n_traj", 500)
    two_sided = run.flag("two_sided", False)
    x0 = SpectralField.zeros(cfg.K)

    pi_hat = run.param("pi_hat", None)
    if pi_hat is None:
        estimate = estimate_invariant_mean(
            cfg, f, T_long=float(run.param("T_long", LONG_RUN_HORIZON)),
            burn_in=float(run.param("burn_in", BURN_IN_FRACTION)), seed=derived_seed(run.seed, 1),
        )
        pi_hat = estimate.mean
        run.row({"functional": f.name, "T_long": estimate.T, "burn_in": estimate.burn_in},
                estimate=estimate.mean, stderr=estimate.stderr, flags=["invariant_mean"])
    pi_hat = float(pi_hat)

    level = run.param("level", None)
    if level is None:
        quantile = float(run.param("level_quantile", 0.9))
        n_cal = run.integer("n_calibration", n_traj)
        cal_cfg = cfg.model_copy(update={"T": 1.0, "record_states": False})
        short = simulate_ensemble(
            cal_cfg, x0, n_cal, derived_seed(run.seed, 2), run.workers, [f],
            reducer=lambda t: occupation_average(t, f), progress=run.progress,
        )
        level = float(np.quantile(np.asarray(short) - pi_hat, quantile))
        if not level > 0:
            raise EstimationError(
                f"deviation level calibrated at the {quantile:g} quantile is {level:.3g}; pass an explicit level"
            )
        run.row({"functional": f.name, "quantile": quantile, "n_calibration": n_cal},
                estimate=level, n=n_cal, flags=["calibrated_level"])
    level = float(level)

    report = ldp_decay_probe(cfg, f, level, horizons, n_traj, pi_hat, run.seed, run.workers, x0,
                             two_sided, run.progress)
    for cell in report.cells:
        run.row(
            {"functional": f.name, "level": level, "T": cell.T, "n_traj": n_traj,
             "pi_hat": pi_hat, "two_sided": two_sided},
            estimate=cell.rate, n=cell.n, flags=[] if cell.rate is not None else ["lower_bound_only"],
            events=cell.events, p_hat=cell.p_hat, wilson_low=cell.wilson_low, wilson_high=cell.wilson_high,
            rate_lower_bound=cell.rate_lower_bound, rate_upper_bound=cell.rate_upper_bound,
        )
    run.row({"functional": f.name, "level": level, "horizons": horizons, "n_traj": n_traj},
            estimate=report.stabilization, flags=["stabilization"])
    return {"stabilization": report.stabilization, "rates": [c.rate for c in report.cells]}


# ---------------------------------------------------------------------------
# verify-all
# ---------------------------------------------------------------------------

def comparison_pass_count(
    cfg: SimConfig,
    n_traj: int,
    seed: int,
    noisy: bool,
    T: float = 1.0,
    workers: int = 1,
    progress: ProgressCallback = None,
) -> int:
    """h(t) = |Y_t|_H^2 与 Kc = K_T 的 Riccati 解比较，返回通过的轨迹数"""
    run_cfg = _large_data_cfg(cfg.model_copy(update={
        "T": T, "record_stride": 1, "record_states": False,
        "noise_amplitude": cfg.noise_amplitude if noisy else 0.0,
    }), 100.0)

    def initial(i: int) -> np.ndarray:
        rng = aux_stream(seed, i)
        return random_field(cfg.K, rng, norm=10 ** rng.uniform(-1.0, 2.0)).coeffs

    def compare(traj) -> bool:
        kc = riccati_constant(traj, dissipation_check(traj))
        trace = np.column_stack([traj.times, traj.functional_track["normY"] ** 2])
        return comparison_verify(trace, kc).passed

    results = simulate_ensemble(run_cfg, initial, n_traj, seed, workers, reducer=compare, progress=progress)
    return int(sum(results))


def _verify_all(run: _Run) -> None:
    criteria = {int(c) for c in run.floats("criteria", list(range(1, 11)))}
    cfg = run.cfg

    if 1 in criteria:
        run.enter("noise-test", n_samples=1_000_000)
        summaries = _noise_test(run)
        run.enter(None)
        cf_ok = all(s["cf_error"] <= 0.005 for s in summaries if s["alpha"] < 2)
        variances = [s["variance"] for s in summaries if s["variance"] is not None]
        var_ok = all(abs(v - 2.0) <= 0.02 for v in variances)
        run.check(1, "stable sampler law", cf_ok and var_ok,
                  f"max CF error {max(s['cf_error'] for s in summaries):.4g}, alpha=2 variance {variances}")

    if 2 in criteria or 3 in criteria:
        run.enter(
            "ou-probe",
            ks_samples=100_000 if 2 in criteria else 0,
            oracle_samples=20_000 if 2 in criteria else 0,
            n_traj=2000,
        )
        summary = _ou_probe(run)
        run.enter(None)
        if 2 in criteria:
            pvalues = [summary.get("semigroup_pvalue"), summary.get("oracle_pvalue")]
            observed = [p for p in pvalues if p is not None]
            run.check(2, "OU exactness", bool(observed) and all(p >= 0.01 for p in observed),
                      f"KS p-values {observed}")
        if 3 in criteria:
            slope = summary["slope"]
            run.check(3, "maximal inequality growth exponent",
                      slope is not None and slope <= summary["slope_limit"],
                      f"slope {slope} vs limit {summary['slope_limit']:.4g}")

    if 4 in criteria:
        run.enter("riccati-verify")
        summary = _riccati_verify(run)
        run.enter(None)
        run.check(4, "Riccati exactness", summary["max_error"] < 1e-8 and summary["dominated"],
                  f"max |explicit - RK4| {summary['max_error']:.3g}, half-interval bound dominates: "
                  f"{summary['dominated']}")

    if 5 in criteria:
        run.enter("comparison", n_traj=100)
        n = run.integer("n_traj", 100)
        run.enter(None)
        quiet = comparison_pass_count(cfg, n, derived_seed(run.seed, 10), False, workers=run.workers,
                                      progress=run.progress)
        noisy = comparison_pass_count(cfg, n, derived_seed(run.seed, 11), True, workers=run.workers,
                                      progress=run.progress)
        run.check(5, "comparison principle", min(quiet, noisy) >= 0.99 * n,
                  f"zero noise {quiet}/{n}, noisy {noisy}/{n}", zero_noise_passed=quiet, noisy_passed=noisy)

    if 6 in criteria:
        run.enter("moment-probe", n_traj=2000)
        summary = _moment_probe(run)
        run.enter(None)
        uniformity = ybound_uniformity(cfg, [10.0, 100.0, 1000.0], run.seed)
        ratio = summary["ratio"]
        run.check(6, "initial-condition uniformity",
                  ratio is not None and ratio <= 2.0 and uniformity["passed"],
                  f"max/min ratio {ratio}, Y bound with shared right-hand side: {uniformity['passed']}",
                  ybound=uniformity["bound"], c_star=uniformity["c_star"], max_energy=uniformity["max_energy"])

    if 7 in criteria:
        run.enter("recurrence", n_traj=10_000)
        summary = _recurrence(run)
        run.enter(None)
        fits = summary["fits"]
        Ms = sorted(fits)
        rhos = [fits[M].rho for M in Ms]
        fitted = all(fits[M].fit_ok and fits[M].r_squared > 0.9 for M in Ms)
        decreasing = fitted and all(a > b for a, b in zip(rhos, rhos[1:]))
        last = summary["reports"].get((Ms[-1], 1.0))
        finite = last is not None and last.estimate is not None and not last.divergence_risk
        run.check(7, "hyper-exponential recurrence", decreasing and finite,
                  f"rho(M) = {rhos}, finite E[exp(tau)] at M={Ms[-1]:g}: {finite}")

    if 8 in criteria:
        run.enter("occupation")
        summary = _occupation(run)
        run.enter(None)
        run.check(8, "ergodic uniqueness", summary["agree"],
                  f"|difference| {summary['gap']:.4g} vs 3 x combined SE {3 * summary['combined_stderr']:.4g}")

    if 9 in criteria:
        run.enter("ldp-probe", n_traj=1000)
        summary = _ldp_probe(run)
        run.enter(None)
        stab = summary["stabilization"]
        run.check(9, "LDP decay stabilization", stab is not None and stab <= 0.3,
                  f"relative change of the rate between the last two horizons: {stab}")

    if 10 in criteria:
        run.enter("determinism")
        worker_counts = [int(w) for w in run.floats("worker_counts", [1, 8])]
        run.enter(None)
        mismatched = determinism_check(cfg, worker_counts)
        detail = "byte-identical outputs" if not mismatched else f"outputs differ for {', '.join(mismatched)}"
        run.check(10, "determinism", not mismatched,
                  f"{', '.join(DETERMINISM_RUNS)} at workers {worker_counts}: {detail}",
                  worker_counts=worker_counts, mismatched=mismatched)


# 每个短实验都跨过批边界，覆盖各自的归约与报告编码
DETERMINISM_RUNS: Dict[str, Dict[str, Any]] = {
    "simulate": {"n_traj": 2 * BATCH_SIZE + 3, "x0_norm": 1.0, "functionals": ["tanh_normH_sq"]},
    "recurrence": {"M_grid": [0.05, 0.5], "lambda_grid": [0.5], "n_traj": MIN_TAIL_SAMPLES + 6, "horizon_n": 2},
    "occupation": {"T_occ": 1.0, "x0_norms": [0.0, 5.0], "n_hist": BATCH_SIZE + 2},
    "moment-probe": {"initial_norms": [0.0, 10.0], "n_traj": BATCH_SIZE + 6, "T_moment": 1.0},
    "ldp-probe": {"horizons": [0.5, 1.0], "n_traj": BATCH_SIZE + 6, "pi_hat": 0.0, "level": 1e-4},
}


def determinism_check(
    cfg: SimConfig,
    worker_counts: Sequence[int] = (1, 8),
    runs: Optional[Dict[str, Dict[str, Any]]] = None,
) -> List[str]:
    """
    以不同 worker 数运行同一组短实验，逐字节比较写出的报告与侧表

    清单含耗时与输出路径，不参与比较。

    Args:
        cfg: 模拟配置（T 换成 50 dt，逐步记录）
        worker_counts: 需要比较的 worker 数
        runs: {实验名: 参数}，默认 DETERMINISM_RUNS

    Returns:
        输出不一致的实验名
    """
    runs = DETERMINISM_RUNS if runs is None else runs
    short = cfg.model_copy(update={"T": 50 * cfg.dt, "record_stride": 1})
    mismatched = []
    for name, params in runs.items():
        outputs = []
        for workers in worker_counts:
            with tempfile.TemporaryDirectory() as tmp:
                spec = ExperimentSpec(
                    name=name, cfg=short, params=params,
                    output_path=str(Path(tmp) / "run.jsonl"), worker_count=workers,
                )
                outcome = run_experiment(spec)
                outputs.append({
                    path.name: path.read_bytes() for path in outcome.files
                    if not path.name.endswith(".manifest.json")
                })
        if any(output != outputs[0] for output in outputs[1:]):
            logger.warning(f"Experiment {name} wrote different outputs for workers {list(worker_counts)}")
            mismatched.append(name)
    return mismatched


EXPERIMENTS: Dict[str, Callable[[_Run], Any]] = {
    "noise-test": _noise_test,
    "ou-probe": _ou_probe,
    "simulate": _simulate,
    "riccati-verify": _riccati_verify,
    "recurrence": _recurrence,
    "occupation": _occupation,
    "moment-probe": _moment_probe,
    "ldp-probe": _ldp_probe,
    "verify-all": _verify_all,
}


def _write_outputs(spec: ExperimentSpec, outcome: ExperimentOutcome) -> None:
    path = Path(spec.output_path)
    outcome.files.append(emit_report(outcome.rows, path))
    for name, columns in outcome.tables.items():
        outcome.files.append(emit_table(columns, path.with_name(f"{path.stem}.{name}.csv")))
    for name, records in outcome.side_reports.items():
        outcome.files.append(emit_report(records, path.with_name(f"{path.stem}.{name}.jsonl")))
    manifest = {
        "spec": spec.model_dump(),
        "failures": outcome.failures,
        "files": [str(p) for p in outcome.files],
    }
    outcome.files.append(
        write_manifest(path.with_name(f"{path.stem}.manifest.json"), manifest, __version__, outcome.wall_time)
    )


def run_experiment(spec: ExperimentSpec, progress: ProgressCallback = None) -> ExperimentOutcome:
    """
    运行一个实验并写出报告

    Args:
        spec: 实验描述
        progress: 每完成一批轨迹调用一次的回调

    Returns:
        ExperimentOutcome: 报告行、侧表、失败列表与写出的文件

    Raises:
        ParameterError: 参数或模型假设不成立
        EstimationError: 估计量无法给出数值
        TrajectoryAbortedError: 轨迹在最大折半后仍被拒绝
    """
    if spec.name in SIMULATING:
        _require_admissible(spec.cfg)
    start_time = datetime.now()
    logger.info(f"Running experiment {spec.name} with seed {spec.cfg.seed} and {spec.worker_count} workers")
    run = _Run(spec, progress)
    EXPERIMENTS[spec.name](run)
    outcome = run.outcome
    outcome.wall_time = (datetime.now() - start_time).total_seconds()
    _write_outputs(spec, outcome)
    logger.info(
        f"Experiment {spec.name} finished in {outcome.wall_time:.2f} seconds "
        f"with {len(outcome.rows)} rows and {len(outcome.failures)} failures"
    )
    return outcome
