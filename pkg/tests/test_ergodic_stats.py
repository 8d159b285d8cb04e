import numpy as np
import pytest

from src.core.exceptions import EstimationError, ParameterError
from src.core.ergodic_stats import (
    FUNCTIONALS,
    HittingSample,
    batch_means_stderr,
    estimate_invariant_mean,
    exp_moment_estimate,
    geometric_tail_fit,
    hitting_samples,
    hitting_time,
    ldp_decay_probe,
    make_functional,
    occupation_average,
    occupation_histogram,
    return_time_probe,
    running_averages,
    survival_curve,
    time_weights,
    uniform_moment_probe,
    wilson_interval,
)
from src.core.gl_integrator import Functional, simulate_ensemble, simulate_trajectory
from src.core.models import SimConfig
from src.core.spectral_field import SpectralField, random_field
from src.utils.helpers import stream


def make_cfg(**overrides) -> SimConfig:
    values = dict(K=8, dt=1e-3, T=0.5, record_stride=10, seed=17)
    values.update(overrides)
    return SimConfig(**values)


def geometric_samples(rho: float, n: int, horizon: int, seed: int):
    taus = stream(seed, 0).geometric(1.0 - rho, size=n)
    return [
        HittingSample(None, True, 1.0, 0.25, horizon) if t > horizon
        else HittingSample(int(t), False, 1.0, 0.25, horizon)
        for t in taus
    ]


def closed_form(rho: float, lam: float) -> float:
    """E[e^{lambda tau}] for P(tau > n) = rho^n"""
    return np.exp(lam) * (1 - rho) / (1 - rho * np.exp(lam))


# 有界泛函

@pytest.mark.parametrize("name", FUNCTIONALS)
def test_functionals_are_bounded(name):
    f = make_functional(name, delta=0.25, M=2.0)
    coeffs = np.stack([random_field(6, stream(1, i), norm=10.0 ** (i - 3)).coeffs for i in range(7)])
    values = f.func(coeffs)
    assert values.shape == (7,)
    assert np.all(np.abs(values) <= f.bound)


def test_unknown_functional():
    with pytest.raises(ParameterError):
        make_functional("sup_norm")


# 占位测度

def test_time_weights_are_trapezoidal():
    weights = time_weights(np.array([0.0, 1.0, 3.0]))
    assert np.allclose(weights, [0.5, 1.5, 1.0] / np.float64(3.0))
    assert np.allclose(time_weights(np.array([2.0])), [1.0])


def test_occupation_average_of_constant():
    cfg = make_cfg()
    traj = simulate_trajectory(random_field(8, stream(2, 0), norm=3.0), cfg, stream(2, 1))
    assert occupation_average(traj, make_functional("one")) == pytest.approx(1.0)
    assert 0 < occupation_average(traj, make_functional("tanh_normH_sq")) < 1


def test_occupation_average_is_linear():
    traj = simulate_trajectory(random_field(8, stream(2, 2), norm=2.0), make_cfg(), stream(2, 3))
    f = make_functional("tanh_normH_sq")
    g = make_functional("exp_neg_normH_sq")
    combined = Functional("combined", lambda c: 2.0 * f.func(c) - 0.5 * g.func(c), bound=2.5)
    expected = 2.0 * occupation_average(traj, f) - 0.5 * occupation_average(traj, g)
    assert occupation_average(traj, combined) == pytest.approx(expected, rel=1e-12)


def test_batch_means_stderr():
    values = np.tile([0.0, 1.0], 40)
    weights = np.ones(80)
    assert batch_means_stderr(values, weights) == pytest.approx(0.0)
    with pytest.raises(ParameterError):
        batch_means_stderr(np.ones(10), np.ones(10))


def test_occupation_histogram_masses():
    cfg = make_cfg()
    trajs = simulate_ensemble(cfg, random_field(8, stream(3, 0), norm=2.0), 3, seed=5)
    f = make_functional("exp_neg_normH_sq")
    record = occupation_histogram(trajs, f, np.linspace(0.0, 1.0, 11))
    assert record.histogram.masses.sum() == pytest.approx(1.0)
    assert record.histogram.outside_fraction == pytest.approx(0.0, abs=1e-12)
    assert record.histogram.total_time == pytest.approx(1.5)
    expected = np.mean([occupation_average(t, f) for t in trajs])
    assert record.functional_averages[f.name] == pytest.approx(expected)

    windowed = occupation_histogram(trajs, f, np.linspace(0.0, 1.0, 11), window=0.2)
    assert windowed.T == pytest.approx(0.2)


def test_occupation_histogram_validation():
    cfg = make_cfg()
    short = simulate_trajectory(SpectralField.zeros(8), cfg, stream(4, 0))
    longer = simulate_trajectory(SpectralField.zeros(8), cfg.model_copy(update={"T": 1.0}), stream(4, 1))
    f = make_functional("one")
    with pytest.raises(ParameterError):
        occupation_histogram([short, longer], f, [0.0, 2.0])
    with pytest.raises(ParameterError):
        occupation_histogram([short], f, [1.0, 0.0])
    with pytest.raises(ParameterError):
        occupation_histogram([], f, [0.0, 2.0])
    with pytest.raises(EstimationError):
        occupation_histogram([short], f, [5.0, 6.0])


def test_invariant_mean_of_constant():
    estimate = estimate_invariant_mean(make_cfg(), make_functional("one"), T_long=2.0)
    assert estimate.mean == pytest.approx(1.0)
    assert estimate.stderr == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ParameterError):
        estimate_invariant_mean(make_cfg(), make_functional("one"), T_long=2.0, burn_in=1.0)


# 击中时间

def test_survival_curve_counts():
    samples = [HittingSample(t, False, 1.0, 0.25, 3) for t in (1, 1, 2, 3)]
    samples.append(HittingSample(None, True, 1.0, 0.25, 3))
    n, counts, survival = survival_curve(samples)
    assert list(n) == [0, 1, 2, 3]
    assert list(counts) == [5, 3, 2, 1]
    assert survival[0] == pytest.approx(1.0)


def test_hitting_sample_validation():
    with pytest.raises(ParameterError):
        HittingSample(0, False, 1.0, 0.25, 10)
    with pytest.raises(ParameterError):
        survival_curve([HittingSample(1, False, 1.0, 0.25, 3), HittingSample(1, False, 1.0, 0.25, 4)])


def test_geometric_tail_fit_recovers_ratio():
    fit = geometric_tail_fit(geometric_samples(0.5, 20_000, 50, seed=6))
    assert fit.fit_ok
    assert fit.rho == pytest.approx(0.5, abs=0.03)
    assert fit.r_squared > 0.99


def test_geometric_tail_fit_small_ratio():
    fit = geometric_tail_fit(geometric_samples(0.3, 100_000, 50, seed=12))
    assert fit.fit_ok
    assert 0.27 <= fit.rho <= 0.33


def test_geometric_tail_fit_needs_samples():
    with pytest.raises(ParameterError):
        geometric_tail_fit(geometric_samples(0.5, 50, 10, seed=6))
    fit = geometric_tail_fit([HittingSample(1, False, 1.0, 0.25, 10)] * 200)
    assert not fit.fit_ok


def test_exp_moment_of_constant_hitting_time():
    samples = [HittingSample(1, False, 1.0, 0.25, 10)] * 50
    report = exp_moment_estimate(samples, 0.7)
    assert report.estimate == pytest.approx(np.exp(0.7), rel=1e-14)
    assert report.censored_fraction == 0.0


def test_exp_moment_matches_geometric_closed_form():
    rho, lam = 0.2, 0.5
    report = exp_moment_estimate(geometric_samples(rho, 100_000, 200, seed=7), lam)
    assert report.censored_fraction == 0.0
    assert abs(report.estimate - closed_form(rho, lam)) < 4 * report.stderr
    assert report.ci_low < report.estimate < report.ci_high
    assert report.rho_fit == pytest.approx(rho, abs=0.03)


def test_censored_completion():
    rho, lam = 0.5, 0.4
    report = exp_moment_estimate(geometric_samples(rho, 50_000, 6, seed=8), lam)
    assert 0 < report.censored_fraction < 0.05
    assert "censored_completion" in report.flags
    assert report.estimate == pytest.approx(closed_form(rho, lam), rel=0.05)
    assert report.estimate > (1 - report.censored_fraction) * report.raw_estimate


def test_divergence_risk_is_flagged():
    report = exp_moment_estimate(geometric_samples(0.5, 5_000, 40, seed=9), 1.0)
    assert report.divergence_risk
    assert report.estimate is None
    with pytest.raises(EstimationError):
        report.require()


def test_all_censored_fails_estimation():
    samples = [HittingSample(None, True, 1.0, 0.25, 10)] * 20
    report = exp_moment_estimate(samples, 0.5)
    assert report.estimation_failed
    assert report.flags == ["all_censored"]
    with pytest.raises(EstimationError):
        report.require()


def test_threshold_check():
    samples = [HittingSample(1, False, 10.0, 0.25, 10)] * 5
    assert exp_moment_estimate(samples, 0.5, c_hat=1.0, p=0.3).threshold_check
    assert not exp_moment_estimate(samples, 5.0, c_hat=1.0, p=0.3).threshold_check
    with pytest.raises(ParameterError):
        exp_moment_estimate(samples, 0.0)


def test_hitting_samples_on_deterministic_flow():
    cfg = make_cfg(noise_amplitude=0.0)
    result = hitting_samples(
        cfg, [1.0, -1.0], n_traj=3, horizon_n=3, seed=1,
        initial=lambda i: random_field(8, stream(10, i), norm=5.0).coeffs,
    )
    assert all(s.tau == 1 for s in result[1.0])
    assert all(s.censored and s.horizon_n == 3 for s in result[-1.0])


def test_hitting_times_shrink_as_the_set_grows():
    M_grid = [0.001, 0.01, 0.1, 1.0]
    horizon = 3
    result = hitting_samples(
        make_cfg(), M_grid, n_traj=8, horizon_n=horizon, seed=2,
        initial=lambda i: random_field(8, stream(13, i), norm=20.0).coeffs,
    )
    for i in range(8):
        taus = [horizon + 1 if result[M][i].censored else result[M][i].tau for M in M_grid]
        assert all(b <= a for a, b in zip(taus, taus[1:]))


def test_hitting_time_on_simulated_trajectory():
    cfg = make_cfg(T=3.0, noise_amplitude=0.0)
    traj = simulate_trajectory(random_field(8, stream(14, 0), norm=5.0), cfg, stream(14, 1))
    hit = hitting_time(traj, 1.0, cfg.delta)
    assert hit.tau == 1 and not hit.censored
    missed = hitting_time(traj, -1.0, cfg.delta)
    assert missed.censored and missed.tau is None
    assert missed.horizon_n == 3


def test_hitting_time_needs_integer_records():
    traj = simulate_trajectory(SpectralField.zeros(8), make_cfg(), stream(1, 0))
    with pytest.raises(ParameterError):
        hitting_time(traj, 1.0, 0.25)


def test_return_time_probe_start_outside_set():
    with pytest.raises(ParameterError):
        return_time_probe(make_cfg(), 1.0, 0.5, [random_field(8, stream(1, 0), norm=50.0)], 4, 2, seed=1)


# 一致矩

def test_uniform_moment_probe_cells():
    cfg = make_cfg(T=0.2)
    report = uniform_moment_probe(cfg, [0.0, 10.0], n_traj=8, seed=3)
    assert [c.x0_norm for c in report.cells] == [0.0, 10.0]
    assert all(c.estimate > 0 and c.n == 8 for c in report.cells)
    assert report.max_min_ratio >= 1.0
    assert report.c_hat == max(c.estimate for c in report.cells)
    y_report = uniform_moment_probe(cfg, [1.0], n_traj=4, seed=3, component="Y")
    assert y_report.component == "Y"


def test_uniform_moment_probe_validation():
    with pytest.raises(ParameterError):
        uniform_moment_probe(make_cfg(), [1.0], 4, component="Z")
    with pytest.raises(ParameterError):
        uniform_moment_probe(make_cfg(), [], 4)


# 大偏差

def test_wilson_interval_without_events():
    low, high = wilson_interval(0, 10)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert high == pytest.approx(1.959963984540054 ** 2 / (10 + 1.959963984540054 ** 2), rel=1e-6)


def test_running_averages_match_occupation():
    cfg = make_cfg()
    f = make_functional("tanh_normH_sq")
    traj = simulate_trajectory(random_field(8, stream(11, 0), norm=1.0), cfg, stream(11, 1), [f])
    averages = running_averages(traj, f, [0.5])
    assert averages[0] == pytest.approx(occupation_average(traj, f))
    with pytest.raises(ParameterError):
        running_averages(traj, f, [0.123])


def test_ldp_probe_certain_and_impossible_events():
    cfg = make_cfg(T=0.2)
    f = make_functional("one")
    certain = ldp_decay_probe(cfg, f, 0.1, [0.1, 0.2], n_traj=6, pi_hat=0.5)
    assert [c.events for c in certain.cells] == [6, 6]
    assert certain.cells[-1].rate == pytest.approx(0.0)

    impossible = ldp_decay_probe(cfg, f, 0.1, [0.1, 0.2], n_traj=6, pi_hat=1.0)
    cell = impossible.cells[-1]
    assert cell.events == 0
    assert cell.rate is None
    assert cell.rate_lower_bound > 0
    assert impossible.stabilization is None

    two_sided = ldp_decay_probe(cfg, f, 0.1, [0.2], n_traj=6, pi_hat=1.5, two_sided=True)
    assert two_sided.cells[0].events == 6


def test_small_deviation_level_gives_half_probability():
    # 零初值、对称噪声: L_T(f) 关于 0 对称
    f = Functional("tanh_first_cos", lambda c: np.tanh(c[..., 0, 0]), bound=1.0)
    cfg = make_cfg(T=0.5)
    report = ldp_decay_probe(cfg, f, 1e-12, [0.25, 0.5], n_traj=256, pi_hat=0.0, seed=21)
    for cell in report.cells:
        assert abs(cell.p_hat - 0.5) < 0.12
    two_sided = ldp_decay_probe(cfg, f, 1e-12, [0.5], n_traj=256, pi_hat=0.0, seed=21, two_sided=True)
    assert two_sided.cells[0].events == 256


def test_ldp_probe_validation():
    f = make_functional("one")
    with pytest.raises(ParameterError):
        ldp_decay_probe(make_cfg(), f, 0.0, [0.1], 4, pi_hat=0.5)
    with pytest.raises(ParameterError):
        ldp_decay_probe(make_cfg(), f, 0.1, [0.2, 0.1], 4, pi_hat=0.5)
