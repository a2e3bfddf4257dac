import math

import numpy as np
import pytest

from hybridmsa import discs


@pytest.fixture(scope="session")
def concentric_cfg():
    return discs.DiscWorldConfig(epsilon=0.1, horizon=1.0, q1=(-2.0, -2.0), q2=(-1.0, -1.0))


@pytest.fixture(scope="session")
def general_cfg():
    return discs.DiscWorldConfig(epsilon=0.01, horizon=1.0, q1=(-1.0, -2.0), q2=(-1.0, -1.0))


@pytest.fixture(scope="session")
def wall_cfg():
    s2 = math.sqrt(2.0)
    return discs.DiscWorldConfig(
        epsilon=0.01,
        horizon=1.0,
        q1=(-1.5 - s2 / 5.0, 0.1 - s2 / 5.0),
        q2=(-1.0, 0.6),
        wall=discs.WallConfig(b=1.0, normal=(0.0, 1.0)),
    )


@pytest.fixture(scope="session")
def l1_cfg():
    return discs.DiscWorldConfig(
        epsilon=0.01, horizon=1.0, q1=(-1.0, -2.0), q2=(-1.0, -1.0),
        cost=discs.L1, u_max=5.0 * math.sqrt(2.0),
    )


@pytest.fixture(scope="session")
def head_on_cfg():
    """Disc 1 sliding straight at a resting disc 2 along the x axis."""
    return discs.DiscWorldConfig(
        epsilon=0.1, horizon=1.0, q1=(-0.6, 0.0), q2=(0.0, 0.0), v1=(1.0, 0.0)
    )


def head_on_state():
    return np.array([-0.6, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
