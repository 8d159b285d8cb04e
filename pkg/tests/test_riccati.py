import numpy as np
import pytest

from src.core.exceptions import ParameterError
from src.core.riccati import (
    RiccatiInput,
    comparison_verify,
    halfinterval_bound,
    riccati_explicit,
    riccati_numeric,
)


@pytest.mark.parametrize("g0", [0.0, 0.5, 1.0, 2.0, 10.0, 1e4])
@pytest.mark.parametrize("Kc", [1.0, 2.0, 5.0])
def test_explicit_matches_rk4(g0, Kc):
    inp = RiccatiInput(g0, Kc, 2.0)
    grid = np.linspace(0.0, 2.0, 201)
    numeric = riccati_numeric(inp, grid)
    explicit = riccati_explicit(inp, grid)
    assert np.allclose(numeric, explicit, rtol=1e-6, atol=1e-9)


def test_zero_start_is_tanh():
    inp = RiccatiInput(0.0, 3.0, 1.0)
    t = np.linspace(0, 1, 11)
    assert np.allclose(riccati_explicit(inp, t), 3.0 * np.tanh(3.0 * t))


def test_equilibrium_is_constant():
    inp = RiccatiInput(2.0, 2.0, 5.0)
    assert np.allclose(riccati_explicit(inp, np.linspace(0, 5, 6)), 2.0)
    assert riccati_explicit(inp, 0.0) == pytest.approx(2.0)
    assert isinstance(riccati_explicit(inp, 1.0), float)


def test_near_equilibrium_uses_linearisation():
    inp = RiccatiInput(2.0 + 1e-12, 2.0, 1.0)
    assert riccati_explicit(inp, 0.5) == pytest.approx(2.0, abs=1e-11)


@pytest.mark.parametrize("g0", [0.0, 1.0, 100.0, 1e8])
@pytest.mark.parametrize("Kc", [1.0, 3.0])
def test_halfinterval_bound_holds(g0, Kc):
    T = 1.0
    inp = RiccatiInput(g0, Kc, T)
    t = np.linspace(T / 2, T, 21)
    assert np.all(riccati_explicit(inp, t) <= halfinterval_bound(Kc, T) * (1 + 1e-12))


def test_halfinterval_bound_value():
    assert halfinterval_bound(2.0, 1.0) == pytest.approx(2.0 * (1 + 2 / (np.e - 1)))


@pytest.mark.parametrize(
    "g0, Kc, T",
    [(-1.0, 1.0, 1.0), (1.0, 0.5, 1.0), (1.0, 1.0, 0.0)],
)
def test_input_validation(g0, Kc, T):
    with pytest.raises(ParameterError):
        RiccatiInput(g0, Kc, T)


def test_time_outside_window():
    with pytest.raises(ParameterError):
        riccati_explicit(RiccatiInput(1.0, 1.0, 1.0), 1.5)


def test_numeric_grid_validation():
    with pytest.raises(ParameterError):
        riccati_numeric(RiccatiInput(1.0, 1.0, 1.0), [0.5, 1.0])
    assert riccati_numeric(RiccatiInput(1.0, 1.0, 1.0), []).size == 0


def test_comparison_passes_on_solution():
    inp = RiccatiInput(5.0, 2.0, 1.0)
    t = np.linspace(0, 1, 51)
    trace = list(zip(t, 0.9 * riccati_explicit(inp, t)))
    trace[0] = (0.0, 5.0)
    result = comparison_verify(trace, 2.0)
    assert result.passed
    assert result.first_violation is None
    assert result.max_ratio == pytest.approx(1.0)


def test_comparison_reports_first_violation():
    inp = RiccatiInput(1.0, 1.0, 1.0)
    t = np.linspace(0, 1, 11)
    h = riccati_explicit(inp, t).copy()
    h[4:] *= 1.01
    result = comparison_verify(list(zip(t, h)), 1.0)
    assert not result.passed
    assert result.first_violation == 4
    assert result.max_ratio == pytest.approx(1.01)


def test_comparison_rejects_bad_traces():
    with pytest.raises(ParameterError):
        comparison_verify([], 1.0)
    with pytest.raises(ParameterError):
        comparison_verify([(0.0, -1.0)], 1.0)
