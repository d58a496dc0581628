import numpy as np
import pytest

from interlimit.potential import solve_theta0


@pytest.fixture(scope="session")
def profile():
    return solve_theta0()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
