import numpy as np
import pytest

from panel_data.dataset import PanelDataset
from panel_data.simulate import SimulationConfig, simulate_panel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_config():
    return SimulationConfig(n=30, T=20, d=2, seed=3)


@pytest.fixture
def small_panel(small_config):
    return simulate_panel(small_config)


@pytest.fixture
def scenario_a_panel():
    return simulate_panel(SimulationConfig(n=50, T=50, d=4, seed=11))


@pytest.fixture
def exact_factor_panel():
    """Regressors with cross-sectionally demeaned idiosyncratic parts: the
    averages are F times the sample-mean loadings, spanning the factor space."""
    _, truth = simulate_panel(SimulationConfig(n=40, T=30, d=2, seed=5))
    Z = truth.Z - truth.Z.mean(axis=0, keepdims=True)
    X = np.einsum("tk,ijk->itj", truth.F, truth.Gamma) + Z
    Y = X @ np.r_[np.ones(3), np.zeros(6)] + truth.gamma @ truth.F.T + truth.eps
    return PanelDataset(Y, X), truth
