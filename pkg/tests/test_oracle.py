import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from xylab.graphs import LatticeBox, complete_graph, cycle_graph, path_graph, single_edge
from xylab.oracle import (RadiusField, TruncationPolicy, current_measure, gauge_check,
                          ginibre_check, haar_two_point, mono_check, normalized_ratio, pair_series,
                          partition_function, phi_potential, phi_table, simplex_cdf,
                          simplex_sample, two_point_current, walk_expansion_two_point,
                          walk_visit_counts)
from xylab.sampler import make_rng

# -log I_a(1) from scipy's Bessel routines
PHI_BETA1 = {0: -0.2359143585, 1: 0.5706479875, 2: 1.9969574859}


@pytest.mark.parametrize("a", [0, 1, 2])
def test_phi_frozen_values(a):
    assert phi_potential(1.0, a) == pytest.approx(PHI_BETA1[a], abs=1e-9)
    assert phi_potential(1.0, -a) == phi_potential(1.0, a)


@given(st.floats(0.05, 4.0), st.integers(0, 30))
def test_phi_matches_bessel(beta, a):
    ref = -math.log(special.ive(a, beta)) - beta
    assert phi_potential(beta, a) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_phi_table_layout_and_beta_zero():
    t = phi_table(0.7, 10)
    assert t[10] == pytest.approx(phi_potential(0.7, 0))
    assert t[10 + 3] == t[10 - 3]
    with pytest.raises(ValueError):
        phi_potential(0.0, 1)


@given(st.integers(-6, 6), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_pair_series_brute_force(m, u, v):
    brute = sum(u ** a * v ** (a - m) / (math.factorial(a) * math.factorial(a - m))
                for a in range(max(m, 0), max(m, 0) + 60))
    assert pair_series(m, u, v) == pytest.approx(brute, rel=1e-12, abs=1e-300)


def test_single_edge_measure_is_bessel():
    t = 0.5
    m = current_measure(single_edge(), [t, t])
    assert m.value == pytest.approx(special.i0(2 * t), rel=1e-13)
    assert m.tail <= 1e-10


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 2.0])
def test_single_edge_two_point_is_bessel_ratio(beta):
    G = single_edge()
    val, err = two_point_current(G, RadiusField.constant(G, beta), 0, 1, with_error=True)
    assert val == pytest.approx(special.i1(beta) / special.i0(beta), abs=1e-10)
    assert err <= 1e-9


def test_single_edge_beta1_value():
    G = single_edge()
    assert two_point_current(G, RadiusField.constant(G, 1.0), 0, 1) == pytest.approx(0.4463899659, abs=1e-9)


@pytest.mark.parametrize("G", [path_graph(3), cycle_graph(3), cycle_graph(4), complete_graph(4)], ids=repr)
def test_current_oracle_matches_haar_with_uneven_radii(G):
    r = RadiusField(np.linspace(0.6, 1.1, G.n_vertices))
    for y in range(1, G.n_vertices):
        assert two_point_current(G, r, 0, y) == pytest.approx(haar_two_point(G, r, 0, y), abs=1e-6)


def test_two_point_degenerate_cases():
    G = path_graph(3)
    r = RadiusField([1.0, 0.0, 1.0])
    assert two_point_current(G, r, 1, 1) == 1.0
    assert two_point_current(G, r, 0, 1) == 0.0
    assert haar_two_point(G, r, 2, 2) == 1.0
    with pytest.raises(ValueError):
        haar_two_point(LatticeBox(1), RadiusField.constant(LatticeBox(1), 1.0), 0, 1)
    with pytest.raises(ValueError):
        haar_two_point(G, r, 0, 2, grid_points=16)
    with pytest.raises(ValueError):
        RadiusField([-1.0])


def test_two_point_on_box1_matches_sum_rule():
    # the four nearest neighbours of the centre are equivalent
    L = LatticeBox(1)
    r = RadiusField.constant(L, 0.5)
    c = L.vertex(0, 0)
    vals = [two_point_current(L, r, c, L.vertex(*p)) for p in [(1, 0), (-1, 0), (0, 1), (0, -1)]]
    assert np.ptp(vals) < 1e-12
    assert vals[0] == pytest.approx(0.2696395399, abs=1e-9)


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(max_flow=-1)
    with pytest.raises(ValueError):
        TruncationPolicy(tail_tolerance=-1.0)


def test_ratio_and_partition_function():
    G = cycle_graph(4)
    R = np.full(4, 0.8)
    assert normalized_ratio(G, R, np.zeros(4)) == pytest.approx(1.0)
    assert partition_function(G, R - 2 * np.array([0.5, 0, 0, 0])).value == 0.0
    z = normalized_ratio(G, R, np.full(4, 0.1))
    assert 0 < z < 1


def test_gauge_check_true_and_false(rng):
    G = complete_graph(4)
    J = np.repeat(rng.normal(size=G.n_edges) + 1j * rng.normal(size=G.n_edges), 2)
    n = rng.integers(0, 4, G.n_directed)
    g = np.exp(1j * rng.uniform(0, 6, G.n_vertices)) * rng.uniform(0.5, 2, G.n_vertices)
    assert gauge_check(G, J, n, g)
    n2 = n.copy()
    n2[0] += 1  # sources at both ends of edge 0
    assert gauge_check(G, J, n2, g)
    # without the boundary factor the identity would fail
    gauged = (g[G.tail] / g[G.head]) * J
    assert abs(np.prod(gauged ** n2) - np.prod(J ** n2)) > 1e-6 * abs(np.prod(J ** n2))
    with pytest.raises(ValueError):
        gauge_check(G, J, n, np.zeros(4))


def test_ginibre_and_mono_records(rng):
    G = cycle_graph(5)
    r = np.full(5, 0.9)
    rec = ginibre_check(G, r, [0.2, 0.1, 0, 0, 0], [0, 0, 0.3, 0, 0.1])
    assert rec.passed and rec.lhs >= rec.rhs - rec.slack
    assert rec.to_dict()["pass"] is True
    with pytest.raises(ValueError):
        ginibre_check(G, r, [0.2, 0, 0, 0, 0], [0.1, 0, 0, 0, 0])
    rec = mono_check(G, r, [0, 1, 2], [0.1, 0.2, 0.3])
    assert rec.passed


def test_walk_counts_on_an_edge():
    G = single_edge()
    counts = walk_visit_counts(G, 1, 0, 5)
    lengths = sorted(sum(k) - 1 for k in counts)
    assert lengths == [1, 3, 5]
    assert all(v == 1 for v in counts.values())
    assert walk_visit_counts(G, 1, 0, 5, first_hit=True) == {(1, 1): 1}


def test_walk_counts_on_a_triangle():
    # walks of length 2 from 0 back to 0 on K3: two of them
    counts = walk_visit_counts(complete_graph(3), 0, 0, 2)
    assert counts[(1, 0, 0)] == 1
    assert sum(c for k, c in counts.items() if sum(k) == 3) == 2


def test_simplex_helpers(rng):
    assert simplex_cdf(0, 1.3) == 1.0
    assert simplex_cdf(3, 2.0) == pytest.approx(8 / 6)
    s = simplex_sample(3, 2.0, 200_000, rng)
    assert s.max() <= 2.0
    # density proportional to t^2 on [0, 2]: mean 3/4 * 2
    assert s.mean() == pytest.approx(1.5, abs=5e-3)
    assert not simplex_sample(0, 1.0, 5, rng).any()
    with pytest.raises(ValueError):
        simplex_cdf(-1, 1.0)


@pytest.mark.parametrize("form", ["integrated", "naive"])
def test_walk_expansion_converges_on_an_edge(form):
    G = single_edge()
    r = RadiusField.constant(G, 1.0)
    w = walk_expansion_two_point(G, r, 0, 1, 12, 20_000, make_rng(3), form=form)
    exact = special.i1(1.0) / special.i0(1.0)
    assert abs(w.value - exact) <= 4 * w.stderr[-1] + 1e-3
    assert np.all(np.diff(w.partial_sums) >= -1e-12)


def test_walk_expansion_rejects_bad_input():
    G = single_edge()
    with pytest.raises(ValueError):
        walk_expansion_two_point(G, [1, 1], 0, 1, 3, 10, make_rng(0), form="other")
    with pytest.raises(ValueError):
        walk_expansion_two_point(LatticeBox(1), np.ones(9), 0, 1, 3, 10, make_rng(0))
