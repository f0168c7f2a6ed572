import pytest

from mimocfo import SystemConfig


@pytest.fixture(scope="session")
def base_config():
    """K=10 reference setup used by the rate and sweep tests."""
    return SystemConfig(M=80, K=10, N=100, N_u=100, N_c=200)


@pytest.fixture(scope="session")
def small_config():
    """Small setup for Monte Carlo structure checks."""
    return SystemConfig(M=40, K=4, N=40, N_u=40, N_c=80)
