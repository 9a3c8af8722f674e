import numpy as np
import pytest

from zapdisp import JumpKernel, MicroGrid, VelocityProfile, build_cross_section


@pytest.fixture(scope="session")
def cs16():
    return build_cross_section(16)


@pytest.fixture(scope="session")
def parabolic():
    return VelocityProfile.parabolic()


@pytest.fixture(scope="session")
def zappa(parabolic):
    return JumpKernel.exponential(parabolic)


@pytest.fixture
def small_grid():
    return MicroGrid(40.0, 128, build_cross_section(8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
