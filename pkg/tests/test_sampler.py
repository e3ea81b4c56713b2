import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special, stats

from xylab.graphs import LatticeBox, cycle_graph, single_edge
from xylab.oracle import RadiusField, current_measure, two_point_current
from xylab.sampler import (McmcConfig, PoissonEdgeSet, RejectionFailure, WormState, assign_times,
                           load_checkpoint, local_time_norm, make_rng, mcmc_chain, mcmc_sweep,
                           sample_sourceless_counts, sample_sourceless_rejection,
                           sample_unconditioned, save_checkpoint, worm_run, worm_sweep)


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1).random(4)
    assert np.array_equal(a, make_rng(7, 1).random(4))
    assert not np.array_equal(a, make_rng(7, 2).random(4))


def test_local_time_norm(box1):
    T = np.full(box1.n_vertices, 0.25)
    assert local_time_norm(box1, T) == pytest.approx(0.25 * 2 * box1.n_edges)


def test_poisson_edge_set_order_and_validation():
    pes = PoissonEdgeSet([3, 1, 0], [0.5, 0.5, 0.1])
    assert pes.edges.tolist() == [0, 1, 3]
    G = single_edge()
    with pytest.raises(ValueError):
        PoissonEdgeSet([0, 1], [0.1])
    with pytest.raises(ValueError):
        PoissonEdgeSet([0], [0.7]).validate(G, [0.5, 0.5])
    with pytest.raises(ValueError):
        PoissonEdgeSet([0, 0], [0.2, 0.2]).validate(G, [0.5, 0.5])
    assert PoissonEdgeSet([0, 1], [0.1, 0.2]).validate(G, [0.5, 0.5])
    assert len(PoissonEdgeSet.empty()) == 0
    assert PoissonEdgeSet([1], [0.25]).to_json() == {"points": [[1, 0.25]]}


@given(st.integers(0, 2 ** 31))
def test_assigned_times_lie_below_budget(seed):
    L = LatticeBox(1)
    rng = make_rng(seed)
    T = rng.uniform(0.01, 1.0, L.n_vertices)
    pes = sample_unconditioned(L, T, rng)
    pes.validate(L, T)
    assert np.array_equal(pes.counts(L), np.bincount(pes.edges, minlength=L.n_directed))


def _single_edge_law(t, kmax):
    k = np.arange(kmax + 1)
    w = t ** (2 * k) / special.factorial(k) ** 2
    return w / special.i0(2 * t)


def test_rejection_matches_exact_single_edge_law():
    G = single_edge()
    t = 0.6
    counts, attempts = sample_sourceless_counts(G, [t, t], make_rng(1), 50_000)
    assert attempts >= 50_000
    assert np.array_equal(counts[:, 0], counts[:, 1])
    obs = np.bincount(counts[:, 0], minlength=6)[:6]
    p = _single_edge_law(t, 5)
    exp = p * len(counts)
    exp[-1] += len(counts) - exp.sum()
    obs[-1] += len(counts) - obs.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_rejection_failure_is_reported(box2):
    T = np.full(box2.n_vertices, 1.0)
    with pytest.raises(RejectionFailure):
        sample_sourceless_rejection(box2, T, make_rng(0), max_attempts=10)
    with pytest.raises(RejectionFailure):
        sample_sourceless_counts(box2, T, make_rng(0), 5, max_attempts=100)


def test_mcmc_matches_exact_single_edge_law():
    G = single_edge()
    t = 0.6
    cfg = McmcConfig(sweeps=60_000, burnin=1000, seed=4)
    rows = mcmc_chain(G, [t, t], cfg)
    obs = np.bincount(rows[:, 0], minlength=6)[:6].astype(float)
    p = _single_edge_law(t, 5)
    # correlated chain: compare frequencies with a generous tolerance
    assert np.allclose(obs / len(rows), p, atol=0.01)


def _c4_states(total_max=4):
    G = cycle_graph(4)
    out = set()
    for v in np.ndindex(*(3,) * G.n_directed):
        n = np.array(v)
        if n.sum() <= total_max and not np.any(G.divergence(n)):
            out.add(tuple(n))
    return G, out


def test_mcmc_on_c4_visits_every_small_state_with_exact_weights():
    G, states = _c4_states()
    assert len(states) == 17
    T = np.full(4, 0.5)
    cfg = McmcConfig(sweeps=200_000, burnin=1000, seed=5)
    rows = mcmc_chain(G, T, cfg)
    seen = {tuple(r) for r in rows if r.sum() <= 4}
    assert seen == states
    Z = current_measure(G, T).value
    lam = T[G.tail]
    for s in [(0,) * 8, (1, 1, 0, 0, 0, 0, 0, 0), (1, 0, 1, 0, 1, 0, 1, 0)]:
        w = np.prod(lam ** np.array(s) / special.factorial(np.array(s))) / Z
        freq = np.mean(np.all(rows == np.array(s), axis=1))
        assert freq == pytest.approx(w, rel=0.05)


@given(st.integers(0, 2 ** 31))
def test_mcmc_sweep_keeps_currents_sourceless(seed):
    L = LatticeBox(1)
    rng = make_rng(seed)
    n = np.zeros(L.n_directed, dtype=np.int64)
    cfg = McmcConfig(sweeps=10, burnin=0)
    for _ in range(5):
        n = mcmc_sweep(L, np.full(L.n_vertices, 0.4), n, cfg, rng)
        assert not np.any(L.divergence(n))
        assert n.min() >= 0
    with pytest.raises(ValueError):
        mcmc_sweep(L, np.ones(L.n_vertices), np.eye(1, L.n_directed, 0, dtype=np.int64)[0], cfg, rng)


def test_mcmc_config_validation():
    with pytest.raises(ValueError):
        McmcConfig(sweeps=10, burnin=10)
    with pytest.raises(ValueError):
        McmcConfig(p_pair=1.5)
    with pytest.raises(ValueError):
        McmcConfig(thin=0)


def test_worm_states_keep_their_sources(box1):
    T = np.full(box1.n_vertices, 0.3)
    rng = make_rng(2)
    state = WormState.start(box1, 4)
    cfg = McmcConfig(sweeps=10, burnin=0)
    for _ in range(50):
        state = worm_sweep(box1, T, state, 4, 5, cfg, rng)
        assert state.check(box1)
    assert worm_sweep(box1, T, state, 4, 4, cfg, rng) is state
    with pytest.raises(ValueError):
        worm_sweep(box1, T, WormState.start(box1, 0), 4, 5, cfg, rng)


def test_worm_two_point_on_an_edge():
    G = single_edge()
    beta = 1.0
    r = RadiusField.constant(G, beta)
    run = worm_run(G, r.local_time, 0, McmcConfig(sweeps=100_000, burnin=1000, seed=8))
    est, se = run.two_point(r)
    exact = special.i1(beta) / special.i0(beta)
    assert est[0] == pytest.approx(1.0)
    assert abs(est[1] - exact) < 4 * se[1]


def test_worm_two_point_on_box1(box1):
    r = RadiusField.constant(box1, 0.5)
    c = box1.vertex(0, 0)
    run = worm_run(box1, r.local_time, c, McmcConfig(sweeps=60_000, burnin=1000, seed=9))
    est, se = run.two_point(r)
    y = box1.vertex(1, 0)
    assert abs(est[y] - two_point_current(box1, r, c, y)) < 3 * se[y]


def test_checkpoint_round_trip(tmp_path, box1):
    counts = np.zeros(box1.n_directed, dtype=np.int64)
    counts[box1.plaquettes[0]] = 1
    path = tmp_path / "chk.json"
    save_checkpoint(path, box1, 0.8, counts, 17, 3)
    G, beta, c, sweep, seed = load_checkpoint(path)
    assert isinstance(G, LatticeBox) and G.n == 1
    assert (beta, sweep, seed) == (0.8, 17, 3)
    assert np.array_equal(c, counts)
    g = cycle_graph(3)
    save_checkpoint(path, g, 0.5, np.zeros(6, int), 0, 0)
    G2, *_ = load_checkpoint(path)
    assert np.array_equal(G2.edges, g.edges)


def test_rejection_acceptance_rate_on_an_edge():
    G = single_edge()
    counts, attempts = sample_sourceless_counts(G, [0.5, 0.5], make_rng(10), 20_000, batch=1000)
    rate = len(counts) / attempts
    exact = special.i0(1.0) * math.exp(-1.0)  # sourceless mass times exp(-|T|)
    assert exact == pytest.approx(0.4658, abs=1e-4)
    assert abs(rate - exact) < 3 * math.sqrt(exact * (1 - exact) / attempts)
