import typer
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn, BarColumn, TaskProgressColumn
from rich.panel import Panel
from rich.table import Table
from pydantic import ValidationError
from pathlib import Path
from typing import Any, Dict, List, Optional
import time
from datetime import datetime

from .. import __version__
from ..core.config import EXIT_ESTIMATION, EXIT_PARAMETER, WORKERS_ENV
from ..core.exceptions import EstimationError, ParameterError, TrajectoryAbortedError
from ..core.experiments import ExperimentOutcome, run_experiment
from ..core.models import ExperimentSpec, SimConfig
from ..utils.file_utils import parse_config_file, parse_value
from ..utils.helpers import resolve_workers

app = typer.Typer(help="Stochastic Ginzburg-Landau simulator with alpha-stable forcing")
console = Console()

OUT = typer.Option(..., "--out", "-o", help="Report path (JSON-lines); side tables and manifest go next to it")
N_TRAJ = typer.Option(None, "--n-traj", "-n", help="Number of trajectories")
X0_NORM = typer.Option(None, "--x0-norm", help="H-norm of the initial state (random direction)")
HORIZONS = typer.Option(None, "--horizons", help="Comma-separated increasing horizons, e.g. 1,2,4,8")
FUNCTIONAL = typer.Option(None, "--functional", "-f", help="Bounded functional name")


def _grid(text: Optional[str]) -> Optional[List[float]]:
    """解析逗号分隔的网格"""
    if text is None:
        return None
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise typer.BadParameter("grid is empty")
    return values


def _extra_params(items: List[str]) -> Dict[str, Any]:
    params = {}
    for item in items:
        if "=" not in item:
            raise typer.BadParameter(f"expected KEY=VALUE, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        try:
            params[key] = parse_value(key, raw)
        except ValueError as e:
            raise typer.BadParameter(str(e))
    return params


def build_spec(
    name: str,
    out: Path,
    config: Optional[Path] = None,
    workers: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
    params: Optional[Dict[str, Any]] = None,
) -> ExperimentSpec:
    """
    合并配置来源: 命令行 > 配置文件 > 默认值（worker 数另有 GLSIM_WORKERS）

    Raises:
        ParameterError: 配置文件或参数无效
    """
    try:
        file_values = parse_config_file(config)
        sim_fields = set(SimConfig.model_fields)
        cfg_values = {k: v for k, v in file_values.items() if k in sim_fields}
        cfg_values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        merged = {k: v for k, v in file_values.items() if k not in sim_fields and k != "workers"}
        merged.update({k: v for k, v in (params or {}).items() if v is not None})
        worker_count = resolve_workers(workers, file_values.get("workers"))
        return ExperimentSpec(
            name=name,
            cfg=SimConfig(**cfg_values),
            params=merged,
            output_path=str(out),
            worker_count=worker_count,
        )
    except ValidationError as e:
        raise ParameterError(str(e))
    except ParameterError:
        raise
    except ValueError as e:
        raise ParameterError(str(e))


def display_summary(outcome: ExperimentOutcome, duration: float):
    """显示实验摘要"""
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")

    table.add_row("Experiment", outcome.name)
    table.add_row("Processing Time", f"{duration:.2f} seconds")
    table.add_row("Report Rows", str(len(outcome.rows)))
    table.add_row("Output Files", str(len(outcome.files)))
    status = "[green]ok[/green]" if outcome.ok else f"[red]{len(outcome.failures)} failed[/red]"
    table.add_row("Status", status)
    console.print("\n", Panel(table, title="Experiment Summary", border_style="blue"))

    criteria = [row for row in outcome.rows if "criterion" in row.params]
    if criteria:
        checks = Table(show_header=True, header_style="bold magenta")
        checks.add_column("#", justify="right")
        checks.add_column("Criterion", style="cyan")
        checks.add_column("Result")
        checks.add_column("Detail")
        for row in criteria:
            result = "[green]pass[/green]" if row.values.get("passed") else "[red]fail[/red]"
            checks.add_row(str(row.params["criterion"]), row.params["title"], result, row.values.get("detail", ""))
        console.print(Panel(checks, title="Acceptance Criteria", border_style="blue"))

    for failure in outcome.failures:
        console.print(f"[red]✗[/red] {failure}")
    for path in outcome.files:
        console.print(f"[green]✓[/green] Wrote: {path}")


def _execute(ctx: typer.Context, name: str, out: Path, params: Dict[str, Any]) -> None:
    state = ctx.obj or {}
    start_time = time.time()
    console.print(f"\n[bold blue]glsim {name}[/bold blue]")
    console.print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")

    try:
        spec = build_spec(
            name,
            out,
            config=state.get("config"),
            workers=state.get("workers"),
            overrides=state.get("overrides"),
            params={**state.get("extra", {}), **{k: v for k, v in params.items() if v is not None}},
        )
        console.print(f"[blue]Using {spec.worker_count} worker threads, master seed {spec.cfg.seed}[/blue]\n")

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=console
        ) as progress:
            task = progress.add_task(f"[cyan]Running {name} (trajectory batches)...", total=None)
            outcome = run_experiment(spec, progress=lambda: progress.update(task, advance=1))
    except ParameterError as e:
        console.print(f"\n[red]Parameter error: {str(e)}[/red]")
        raise typer.Exit(code=EXIT_PARAMETER)
    except (EstimationError, TrajectoryAbortedError) as e:
        console.print(f"\n[red]Estimation failure: {str(e)}[/red]")
        raise typer.Exit(code=EXIT_ESTIMATION)
    except OSError as e:
        console.print(f"\n[red]Error: {str(e)}[/red]")
        raise typer.Exit(code=1)

    display_summary(outcome, time.time() - start_time)
    if not outcome.ok:
        raise typer.Exit(code=EXIT_ESTIMATION)


@app.callback()
def configure(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Flat 'key = value' config file"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Master seed (unsigned 64-bit)"),
    workers: Optional[int] = typer.Option(
        None, "--workers", "-w", help=f"Number of worker threads (overrides {WORKERS_ENV})"
    ),
    modes: Optional[int] = typer.Option(None, "--modes", "-K", help="Retained Fourier modes K"),
    dt: Optional[float] = typer.Option(None, "--dt", help="Time step"),
    horizon: Optional[float] = typer.Option(None, "--T", help="Simulation horizon"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Stability index"),
    beta: Optional[float] = typer.Option(None, "--beta", help="Spectral decay exponent"),
    delta: Optional[float] = typer.Option(None, "--delta", help="H_delta exponent in (0, 1/2)"),
    p: Optional[float] = typer.Option(None, "--p", help="Moment order in (0, alpha/4)"),
    noise_amplitude: Optional[float] = typer.Option(None, "--noise-amplitude", help="Overall noise factor (0 = off)"),
    record_stride: Optional[int] = typer.Option(None, "--record-stride", help="Steps between records"),
    max_halvings: Optional[int] = typer.Option(None, "--max-halvings", help="Maximum nested step halvings"),
    param: List[str] = typer.Option([], "--param", "-P", help="Extra experiment parameter KEY=VALUE"),
):
    """随机 Ginzburg-Landau 方程的模拟与统计检验"""
    ctx.obj = {
        "config": config,
        "workers": workers,
        "overrides": {
            "seed": seed, "K": modes, "dt": dt, "T": horizon, "alpha": alpha, "beta": beta,
            "delta": delta, "p": p, "noise_amplitude": noise_amplitude,
            "record_stride": record_stride, "max_halvings": max_halvings,
        },
        "extra": _extra_params(param),
    }


@app.command("noise-test")
def noise_test(
    ctx: typer.Context,
    out: Path = OUT,
    alphas: Optional[str] = typer.Option(None, "--alphas", help="Comma-separated stability indices"),
    n_samples: Optional[int] = typer.Option(None, "--n-samples", help="Draws per alpha"),
):
    """检验稳定采样器: 特征函数、对称性、自相似性与尾指数"""
    _execute(ctx, "noise-test", out, {"alphas": _grid(alphas), "n_samples": n_samples})


@app.command("ou-probe")
def ou_probe(
    ctx: typer.Context,
    out: Path = OUT,
    theta: Optional[float] = typer.Option(None, "--theta", help="Fractional exponent theta"),
    p_sup: Optional[float] = typer.Option(None, "--p-sup", help="Moment order of the supremum (p < alpha)"),
    horizons: Optional[str] = HORIZONS,
    n_traj: Optional[int] = N_TRAJ,
    h: Optional[float] = typer.Option(None, "--h", help="Grid step of the OU paths"),
    ks_samples: Optional[int] = typer.Option(None, "--ks-samples", help="Samples of the semigroup KS test"),
    oracle_samples: Optional[int] = typer.Option(None, "--oracle-samples", help="Samples of the fine-sum oracle"),
):
    """OU 过程的极大矩探针与精确性检验"""
    _execute(ctx, "ou-probe", out, {
        "theta": theta, "p_sup": p_sup, "horizons": _grid(horizons), "n_traj": n_traj, "h": h,
        "ks_samples": ks_samples, "oracle_samples": oracle_samples,
    })


@app.command("simulate")
def simulate(
    ctx: typer.Context,
    out: Path = OUT,
    n_traj: Optional[int] = N_TRAJ,
    x0_norm: Optional[float] = X0_NORM,
    functionals: Optional[str] = typer.Option(None, "--functionals", help="Comma-separated functionals to track"),
    dump_states: bool = typer.Option(False, "--dump-states", help="Also write full states as JSON-lines"),
):
    """模拟轨迹并写出范数轨迹 CSV"""
    _execute(ctx, "simulate", out, {
        "n_traj": n_traj, "x0_norm": x0_norm, "functionals": functionals,
        "dump_states": dump_states or None,
    })


@app.command("riccati-verify")
def riccati_verify(
    ctx: typer.Context,
    out: Path = OUT,
    g0_grid: Optional[str] = typer.Option(None, "--g0-grid", help="Initial values g0"),
    kc_grid: Optional[str] = typer.Option(None, "--Kc-grid", help="Riccati constants Kc >= 1"),
    grid_dt: Optional[float] = typer.Option(None, "--grid-dt", help="Spacing of the comparison grid"),
):
    """显式解、RK4 解与半区间界的对照"""
    _execute(ctx, "riccati-verify", out, {"g0_grid": _grid(g0_grid), "Kc_grid": _grid(kc_grid), "grid_dt": grid_dt})


@app.command("recurrence")
def recurrence(
    ctx: typer.Context,
    out: Path = OUT,
    m_grid: Optional[str] = typer.Option(None, "--M-grid", help="Thresholds M, e.g. 1,2,4,8"),
    lambda_grid: Optional[str] = typer.Option(None, "--lambda-grid", help="Exponential rates lambda"),
    n_traj: Optional[int] = N_TRAJ,
    horizon_n: Optional[int] = typer.Option(None, "--horizon-n", help="Censoring horizon (integer times)"),
    x0_norm: Optional[float] = X0_NORM,
    c_hat: Optional[float] = typer.Option(None, "--c-hat", help="Calibrated moment constant for the threshold check"),
    return_starts: Optional[int] = typer.Option(None, "--return-starts", help="Starting points inside K for return times"),
):
    """击中时间的几何尾与指数矩估计"""
    _execute(ctx, "recurrence", out, {
        "M_grid": _grid(m_grid), "lambda_grid": _grid(lambda_grid), "n_traj": n_traj,
        "horizon_n": horizon_n, "x0_norm": x0_norm, "c_hat": c_hat, "return_starts": return_starts,
    })


@app.command("occupation")
def occupation(
    ctx: typer.Context,
    out: Path = OUT,
    functional: Optional[str] = FUNCTIONAL,
    t_occ: Optional[float] = typer.Option(None, "--T-occ", help="Averaging horizon"),
    x0_norms: Optional[str] = typer.Option(None, "--x0-norms", help="Initial norms of the compared starts"),
    n_hist: Optional[int] = typer.Option(None, "--n-hist", help="Trajectories pooled in the histogram"),
):
    """占位平均的两起点比较与占位直方图"""
    _execute(ctx, "occupation", out, {
        "functional": functional, "T_occ": t_occ, "x0_norms": _grid(x0_norms), "n_hist": n_hist,
    })


@app.command("moment-probe")
def moment_probe(
    ctx: typer.Context,
    out: Path = OUT,
    initial_norms: Optional[str] = typer.Option(None, "--initial-norms", help="Initial H-norms, e.g. 0,1,10,100,1000"),
    n_traj: Optional[int] = N_TRAJ,
    t_moment: Optional[float] = typer.Option(None, "--T-moment", help="Time at which the moment is taken"),
    component: Optional[str] = typer.Option(None, "--component", help="X or Y"),
    compare_half_noise: bool = typer.Option(False, "--compare-half-noise", help="Rerun the x0 = 0 cell at half noise"),
):
    """E_x|X_T|^p_{H_delta} 对初值的一致性"""
    _execute(ctx, "moment-probe", out, {
        "initial_norms": _grid(initial_norms), "n_traj": n_traj, "T_moment": t_moment,
        "component": component, "compare_half_noise": compare_half_noise or None,
    })


@app.command("ldp-probe")
def ldp_probe(
    ctx: typer.Context,
    out: Path = OUT,
    functional: Optional[str] = FUNCTIONAL,
    level: Optional[float] = typer.Option(None, "--level", "-r", help="Deviation level r > 0"),
    horizons: Optional[str] = HORIZONS,
    n_traj: Optional[int] = N_TRAJ,
    pi_hat: Optional[float] = typer.Option(None, "--pi-hat", help="Known invariant mean (skips the long run)"),
    two_sided: bool = typer.Option(False, "--two-sided", help="Use |L_T(f) - pi(f)| > r"),
):
    """占位平均偏差概率的衰减率探针"""
    _execute(ctx, "ldp-probe", out, {
        "functional": functional, "level": level, "horizons": _grid(horizons), "n_traj": n_traj,
        "pi_hat": pi_hat, "two_sided": two_sided or None,
    })


@app.command("verify-all")
def verify_all(
    ctx: typer.Context,
    out: Path = OUT,
    criteria: Optional[str] = typer.Option(None, "--criteria", help="Subset of acceptance criteria, e.g. 1,4,10"),
):
    """运行全部验收检验"""
    _execute(ctx, "verify-all", out, {"criteria": _grid(criteria)})


@app.command()
def version():
    """显示版本信息"""
    console.print(f"[bold blue]glsim[/bold blue] v{__version__}")


if __name__ == "__main__":
    app()
