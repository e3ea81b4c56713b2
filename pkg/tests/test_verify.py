import numpy as np
import pytest

from xylab import verify as vf
from xylab.heights import InconsistentHeight, height_from_current
from conftest import clockwise_loop


def test_fault_lattice_and_unknown_fault():
    with pytest.raises(ValueError):
        vf.lattice(1, "no-such-fault")
    L = vf.lattice(1, "face-flip")
    # the flipped convention still integrates consistently, only with the opposite sign
    h = height_from_current(L, clockwise_loop(L, 0, 0, 1, 1))
    assert h[L.face(0, 0)] == -1


def test_winding_identity_passes_and_catches_the_face_flip():
    good = vf.check_winding_identity(vf.Suite(seed=1), instances=100)
    assert all(r.passed for r in good)
    bad = vf.check_winding_identity(vf.Suite(seed=1, fault="face-flip"), instances=100)
    assert not any(r.passed for r in bad)


def test_homogeneity_p_has_power():
    rng = np.random.default_rng(0)
    a = rng.poisson(1.0, size=(5000, 1))
    b = rng.poisson(1.0, size=(5000, 1))
    c = rng.poisson(1.3, size=(5000, 1))
    assert vf._homogeneity_p(a, b) > 1e-3
    assert vf._homogeneity_p(a, c) < 1e-6
    assert vf._homogeneity_p(np.zeros((10, 1)), np.zeros((10, 1))) == 1.0


def test_suite_scaling():
    s = vf.Suite(scale=0.2)
    assert s.n(100_000) == 20_000 and s.n(10, floor=50) == 50


def test_tier_one_passes():
    names = []
    recs = vf.run_suite(1, seed=0, progress=lambda name, r: names.append(name))
    assert names == [c.__name__ for c in vf.CHECKS[1]]
    assert recs and all(r.passed for r in recs)
    with pytest.raises(ValueError):
        vf.run_suite(4)


def test_tier_two_checks_pass():
    s = vf.Suite()
    for check in vf.CHECKS[2]:
        assert all(r.passed for r in check(s)), check.__name__
