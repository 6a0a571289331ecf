import numpy as np
import pytest
from hypothesis import settings

from uavnav.airdata import rab_from_angles
from uavnav.lie import so3_exp
from uavnav.state import FullState

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_state(rng, pos_scale=100.0):
    """A generic state away from any special configuration."""
    return FullState(
        R_bn=so3_exp(rng.normal(size=3)),
        v_n=rng.normal(size=3) * 10.0,
        p_n=rng.normal(size=3) * pos_scale,
        b_g=rng.normal(size=3) * 0.01,
        b_a=rng.normal(size=3) * 0.1,
        R_ab=rab_from_angles(*rng.uniform(-0.3, 0.3, 2)),
        v_wind=rng.normal(size=3),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rel_err(A, B):
    return float(np.linalg.norm(np.asarray(A) - np.asarray(B)) / max(np.linalg.norm(B), 1e-300))
