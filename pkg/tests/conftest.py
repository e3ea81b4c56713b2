import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from xylab.graphs import LatticeBox
from xylab.sampler import make_rng

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def box1():
    return LatticeBox(1)


@pytest.fixture(scope="session")
def box2():
    return LatticeBox(2)


@pytest.fixture
def rng():
    return make_rng(12345)


def clockwise_loop(L, x0, y0, x1, y1):
    """Current of one clockwise traversal of the rectangle ``[x0, x1] x [y0, y1]``."""
    pts = ([(x0, y) for y in range(y0, y1)] + [(x, y1) for x in range(x0, x1)]
           + [(x1, y) for y in range(y1, y0, -1)] + [(x, y0) for x in range(x1, x0, -1)])
    n = np.zeros(L.n_directed, dtype=np.int64)
    for (a, b), (c, d) in zip(pts, pts[1:] + pts[:1]):
        n[L.directed_index(L.vertex(a, b), L.vertex(c, d))] += 1
    return n
