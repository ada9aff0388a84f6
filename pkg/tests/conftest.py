import numpy as np
import pytest

from vecselnoise import ModelParams, build_system


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams().with_pump_ratio(1.01)


@pytest.fixture(scope="session")
def dark_system():
    # well below the dark-state instability, so the gate passes
    return build_system(ModelParams().with_pump_ratio(0.5))


@pytest.fixture(scope="session")
def closed_system(ref_params):
    return build_system(ref_params, refine=False)


@pytest.fixture(scope="session")
def omega_grid():
    return np.geomspace(1e-2, 1e4, 60)
