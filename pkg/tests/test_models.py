import pytest
from pydantic import ValidationError

from src.core.exceptions import ParameterError
from src.core.models import SimConfig, step_count


def test_step_count():
    assert step_count(0.05, 1e-3) == 50
    assert step_count(1.0, 1e-3) == 1000
    assert SimConfig(dt=1e-3, T=0.5).n_steps == 500


def test_horizon_must_be_multiple_of_dt():
    with pytest.raises(ParameterError):
        step_count(0.0105, 1e-3)
    with pytest.raises(ValidationError):
        SimConfig(dt=1e-3, T=0.0105)


def test_copied_config_rechecks_horizon():
    # model_copy 不重新校验
    cfg = SimConfig(dt=1e-3, T=0.5).model_copy(update={"T": 0.0105})
    with pytest.raises(ParameterError):
        cfg.n_steps


def test_horizon_shorter_than_dt():
    with pytest.raises(ValidationError):
        SimConfig(dt=1e-2, T=1e-3)
