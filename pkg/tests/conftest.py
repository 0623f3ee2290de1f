import numpy as np
import pytest

from branchcd.geometry import SpaceParams, build_profile


@pytest.fixture(scope="session")
def params():
    return SpaceParams(k=0.01, K=1.0, epsilon=0.001)


@pytest.fixture(scope="session")
def profile(params):
    return build_profile(params)


@pytest.fixture(scope="session")
def params0():
    return SpaceParams(k=0.01, K=1.0, epsilon=0.0)


@pytest.fixture(scope="session")
def profile0(params0):
    return build_profile(params0)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(profile):
    # trigger JIT compilation once so timed tests measure compute only
    from branchcd.backend import kernels
    x = np.array([0.0, 0.5])
    kernels.eval_profile(x, profile.breaks, profile.c0, profile.c1,
                         profile.c2)
    kernels.midpoint(x, np.zeros(2), x + 0.2, np.zeros(2),
                     profile.breaks, profile.c0)
    kernels.jacobi_condition(x, np.zeros(2), x + 0.2, np.zeros(2),
                             np.ones(2), np.ones(2), 1.0,
                             profile.breaks, profile.c0)
    kernels.mgh_distortion(x, np.zeros(2), x + 0.2, np.zeros(2), 0.001,
                           profile.breaks, profile.c0)
    kernels.classify(x, np.zeros(2), x + 0.2, np.zeros(2))
