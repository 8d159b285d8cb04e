import numpy as np
import pytest
from scipy import stats

from src.core.exceptions import ParameterError
from src.core.ou_process import (
    OUState,
    exact_coefficients,
    maximal_moment_probe,
    ou_path,
    ou_step,
    ou_sup_norm,
    running_sup_at,
    stationary_scale,
)
from src.core.spectral_field import SpectralField
from src.core.stable_noise import empirical_characteristic_function, mode_scales, sample_standard_stable
from src.utils.helpers import stream


@pytest.fixture
def spectrum():
    return mode_scales(1.8, 0.8, 4)


def test_two_half_steps_compose_to_one_step(spectrum):
    alpha = spectrum.alpha
    d1, s1 = exact_coefficients(spectrum, 0.01)
    d2, s2 = exact_coefficients(spectrum, 0.02)
    assert np.allclose(d1 ** 2, d2)
    # 稳定律的尺度按 alpha 次幂相加
    assert np.allclose((d1 * s1) ** alpha + s1 ** alpha, s2 ** alpha)


def test_long_step_reaches_stationary_scale(spectrum):
    _, scale = exact_coefficients(spectrum, 50.0)
    assert np.allclose(scale, stationary_scale(spectrum))


def test_nonpositive_step_rejected(spectrum):
    with pytest.raises(ParameterError):
        exact_coefficients(spectrum, 0.0)


def test_path_matches_step_recursion(spectrum):
    h, n = 0.005, 50
    path = ou_path(spectrum, h, n, stream(21, 0))
    decay, scale = exact_coefficients(spectrum, h)
    draws = sample_standard_stable(spectrum.alpha, stream(21, 0), size=(n, 2, spectrum.K))
    z = np.zeros((2, spectrum.K))
    assert np.allclose(path[0], z)
    for i in range(n):
        z = decay * z + scale * draws[i]
        assert np.allclose(path[i + 1], z)


def test_path_from_nonzero_start(spectrum):
    z0 = np.ones((2, spectrum.K))
    no_noise = spectrum.scaled(0.0)
    path = ou_path(no_noise, 0.01, 3, stream(22, 0), z0=z0)
    decay, _ = exact_coefficients(spectrum, 0.01)
    assert np.allclose(path[3], decay ** 3 * z0)


def test_step_distribution_of_first_mode():
    spec = mode_scales(1.7, 0.8, 1)
    h = 0.01
    _, scale = exact_coefficients(spec, h)
    samples = np.array([
        ou_step(OUState.fresh(spec), h, stream(23, i)).field.cos_coeffs[0] for i in range(20_000)
    ])
    t = 1.0 / scale[0]
    phi = empirical_characteristic_function(samples, [0.5 * t, t])
    assert np.allclose(phi, np.exp(-np.array([0.5, 1.0]) ** 1.7), atol=0.03)


def test_sup_norm_gaussian_limit():
    # alpha = 2 时 Z 是方差为 2 beta_k^2 sigma_k^2 的高斯 OU 过程
    spectrum = mode_scales(2.0, 0.8, 4)
    theta, T, h = 0.1, 0.5, 0.01
    stable_sups = [ou_sup_norm(spectrum, theta, T, h, stream(25, i)) for i in range(2000)]

    decay, scale = exact_coefficients(spectrum, h)
    weights = spectrum.gammas ** theta
    rng = stream(26, 0)
    gaussian_sups = []
    for _ in range(2000):
        z = np.zeros((2, 4))
        best = 0.0
        for _ in range(50):
            z = decay * z + scale * np.sqrt(2.0) * rng.standard_normal((2, 4))
            best = max(best, float(np.sqrt(np.sum((weights * z) ** 2))))
        gaussian_sups.append(best)
    assert stats.ks_2samp(stable_sups, gaussian_sups).pvalue > 0.01


def test_state_mode_mismatch(spectrum):
    with pytest.raises(ParameterError):
        OUState(0.0, SpectralField.zeros(3), spectrum)


def test_running_sup_is_nondecreasing(spectrum):
    sups = running_sup_at(spectrum, 0.1, [0.5, 1.0, 2.0], 0.01, stream(24, 0))
    assert np.all(np.diff(sups) >= 0)


def test_theta_condition(spectrum):
    # beta - 1/(2 alpha) = 0.8 - 0.2778
    with pytest.raises(ParameterError):
        ou_sup_norm(spectrum, 0.6, 1.0, 0.01, stream(1, 0))
    assert ou_sup_norm(spectrum, 0.0, 1.0, 0.01, stream(1, 0)) > 0


def test_maximal_moment_probe_is_worker_independent(spectrum):
    kwargs = dict(theta=0.2, p=0.5, horizons=[1.0, 2.0, 4.0], n_traj=80, seed=5, h=0.02)
    serial = maximal_moment_probe(spectrum, workers=1, **kwargs)
    threaded = maximal_moment_probe(spectrum, workers=3, **kwargs)
    assert [e.estimate for e in serial.estimates] == [e.estimate for e in threaded.estimates]
    means = [e.estimate for e in serial.estimates]
    assert means == sorted(means)
    assert serial.slope_defined
    assert len(serial.rows()) == 3


def test_maximal_moment_probe_single_path(spectrum):
    result = maximal_moment_probe(spectrum, 0.2, 0.5, [1.0], n_traj=1, seed=5)
    assert not result.slope_defined
    assert np.isnan(result.estimates[0].stderr)
    assert result.raw_values.shape == (1, 1)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p=2.0),
        dict(horizons=[2.0, 1.0]),
        dict(n_traj=0),
    ],
)
def test_maximal_moment_probe_validation(spectrum, kwargs):
    args = dict(theta=0.2, p=0.5, horizons=[1.0, 2.0], n_traj=4, seed=1)
    args.update(kwargs)
    with pytest.raises(ParameterError):
        maximal_moment_probe(spectrum, **args)
