import numpy as np
import pytest
from scipy import stats

from src.core.exceptions import ParameterError
from src.core.stable_noise import (
    StableParams,
    admissibility_violation,
    cms_transform,
    eigenvalues,
    empirical_characteristic_function,
    hill_estimator,
    mode_scales,
    sample_standard_stable,
    stable_increment,
)
from src.utils.helpers import stream


@pytest.mark.parametrize("alpha", [1.6, 1.7, 1.8, 1.9, 2.0])
def test_characteristic_function_matches(alpha):
    draws = sample_standard_stable(alpha, stream(11, 0), size=1_000_000)
    t = np.array([0.25, 0.5, 1.0, 2.0])
    phi = empirical_characteristic_function(draws, t)
    assert np.max(np.abs(phi - np.exp(-t ** alpha))) < 0.005


@pytest.mark.parametrize("alpha", [1.6, 1.8, 2.0])
def test_sign_mean_vanishes(alpha):
    n = 1_000_000
    draws = sample_standard_stable(alpha, stream(16, 0), size=n)
    assert abs(np.mean(np.sign(draws))) < 3.0 / np.sqrt(n)


def test_symmetry():
    draws = sample_standard_stable(1.7, stream(12, 0), size=100_000)
    t = np.array([0.5, 1.0])
    imag = np.array([np.mean(np.sin(ti * draws)) for ti in t])
    assert np.all(np.abs(imag) < 0.02)


def test_scalar_draw_is_float():
    value = sample_standard_stable(1.8, stream(1, 0))
    assert isinstance(value, float)


def test_gaussian_limit():
    draws = sample_standard_stable(2.0, stream(13, 0), size=1_000_000)
    assert np.var(draws) == pytest.approx(2.0, rel=0.01)
    assert stats.kstest(draws[:100_000], stats.norm(scale=np.sqrt(2.0)).cdf).pvalue > 0.01


def test_cms_at_zero_angle_is_zero():
    assert cms_transform(1.8, 0.0, 1.0) == pytest.approx(0.0)


def test_self_similarity_of_increments():
    params = StableParams(alpha=1.8, scale=1.0)
    dt = 0.01
    inc = stable_increment(params, dt, stream(14, 0), size=200_000)
    rescaled = inc / dt ** (1.0 / 1.8)
    t = np.array([0.5, 1.0])
    phi = empirical_characteristic_function(rescaled, t)
    assert np.allclose(phi, np.exp(-t ** 1.8), atol=0.01)


def test_increments_over_four_units_are_rescaled_unit_increments():
    params = StableParams(alpha=1.8)
    wide = stable_increment(params, 4.0, stream(17, 0), size=100_000)
    unit = stable_increment(params, 1.0, stream(17, 1), size=100_000)
    assert stats.ks_2samp(wide, 4.0 ** (1 / 1.8) * unit).pvalue > 0.01


def test_hill_estimator_recovers_tail_index():
    draws = sample_standard_stable(1.6, stream(15, 0), size=1_000_000)
    assert hill_estimator(draws, tail_fraction=0.01) == pytest.approx(1.6, abs=0.1)


def test_hill_estimator_rejects_tiny_fraction():
    with pytest.raises(ParameterError):
        hill_estimator(np.ones(10), tail_fraction=0.01)


@pytest.mark.parametrize("alpha", [1.0, 2.5, 0.5])
def test_alpha_out_of_range(alpha):
    with pytest.raises(ParameterError):
        sample_standard_stable(alpha, stream(1, 0), size=4)


def test_stable_params_validation():
    with pytest.raises(ParameterError):
        StableParams(alpha=1.8, scale=0.0)
    with pytest.raises(ParameterError):
        stable_increment(StableParams(alpha=1.8), 0.0, stream(1, 0))


def test_eigenvalues():
    gammas = eigenvalues(3)
    assert np.allclose(gammas, 4 * np.pi ** 2 * np.array([1.0, 4.0, 9.0]))


def test_mode_scales_formula_and_amplitude():
    spectrum = mode_scales(1.8, 0.8, 8, amplitude=0.5)
    expected = (4 * np.pi ** 2 * np.arange(1, 9) ** 2) ** -0.8
    assert np.allclose(spectrum.mode_scales, expected)
    assert np.allclose(spectrum.effective_scales, 0.5 * expected)
    assert spectrum.admissible
    half = spectrum.scaled(0.5)
    assert half.amplitude == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        spectrum.scaled(-1.0)


def test_mode_scales_rejects_bad_input():
    with pytest.raises(ParameterError):
        mode_scales(1.8, 0.8, 0)
    with pytest.raises(ParameterError):
        mode_scales(1.8, 0.0, 4)


@pytest.mark.parametrize(
    "alpha, beta, admissible",
    [
        (1.8, 0.8, True),
        (1.6, 0.85, True),
        (1.8, 0.7, False),  # beta 低于 1/2 + 1/(2 alpha)
        (1.8, 0.95, False),  # beta 高于 3/2 - 1/alpha
        (1.4, 0.8, False),
        (2.0, 0.8, False),
    ],
)
def test_admissibility(alpha, beta, admissible):
    assert (admissibility_violation(alpha, beta) is None) == admissible
