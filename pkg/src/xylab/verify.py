"""Tiered verification suite.

Tier 1 holds exact per-sample identities, tier 2 oracle equivalences and
tier 3 paired statistical tests.  Every check returns ``CheckRecord`` rows;
a tier runs every check at or below its level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from . import cycles as cy
from .estimators import (batch_means, lattice_samples, paired_test, shared_cycle_indicator)
from .graphs import (FiniteGraph, LatticeBox, complete_graph, connected_small_graphs, cycle_graph,
                     path_graph, single_edge)
from .heights import gibbs_heights, height_from_current, windings_from_labels
from .oracle import (CheckRecord, RadiusField, ginibre_check, gauge_check, haar_two_point,
                     mono_check, phi_potential, two_point_current, walk_expansion_two_point)
from .sampler import (McmcConfig, assign_times, make_rng, mcmc_chain, sample_sourceless_counts)

__all__ = ["FAULTS", "Suite", "lattice", "run_suite", "CHECKS"]

FAULTS = ("face-flip",)
SINGLE_EDGE_BETA1 = 0.446384


def lattice(n, fault=None):
    """``LatticeBox(n)``, optionally with the right/left face convention reversed."""
    L = LatticeBox(n)
    if fault is None:
        return L
    if fault != "face-flip":
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    L.edge_faces = L.edge_faces[:, ::-1].copy()
    L.dual_edges = L.dual_edges[:, ::-1].copy()
    L.tree_sign = -L.tree_sign
    return L


def _tally(check, instance, ok):
    ok = np.asarray(ok, bool)
    return CheckRecord(check, instance, float(ok.sum()), float(ok.size), 0.0, bool(ok.all()))


def _paired(check, instance, a, b, k=3.0):
    pt = paired_test(a, b)
    return CheckRecord(check, instance, float(np.mean(a)), float(np.mean(b)), k * pt.se,
                       bool(pt.passed(k)))


@dataclass
class Suite:
    """Sample sizes and seed shared by the checks; ``scale`` shrinks the statistical ones."""

    seed: int = 0
    fault: str | None = None
    scale: float = 1.0

    def n(self, full, floor=1):
        return max(floor, int(round(full * self.scale)))

    def rng(self, *stream):
        return make_rng(self.seed, *stream)

    def box_currents(self, n_box, beta, count, stream, thin=5):
        """``count`` thinned sourceless currents on ``Lambda_n`` from the MCMC chain."""
        L = lattice(n_box, self.fault)
        cfg = McmcConfig(sweeps=200 + count * thin, burnin=200, thin=thin, seed=self.seed)
        T = RadiusField.constant(L, beta).local_time
        return L, T, mcmc_chain(L, T, cfg, rng=self.rng(*stream))


# ---------------------------------------------------------------------------
# tier 1: exact identities


def _gauge_graphs():
    return [single_edge(), path_graph(4), cycle_graph(5), complete_graph(4), complete_graph(5),
            cycle_graph(8), LatticeBox(1).induced_subgraph(range(8))[0]]


def check_gauge(suite, instances=100):
    rng = suite.rng(1)
    graphs = _gauge_graphs()
    ok = []
    for _ in range(instances):
        G = graphs[rng.integers(len(graphs))]
        J = rng.normal(size=G.n_edges) + 1j * rng.normal(size=G.n_edges)
        J = np.repeat(J, 2)  # one coupling per directed slot
        J[1::2] = np.conj(J[1::2])
        n = rng.integers(0, 5, size=G.n_directed)
        g = np.exp(rng.normal(size=G.n_vertices) + 1j * rng.uniform(0, 2 * np.pi, G.n_vertices))
        ok.append(gauge_check(G, J, n, g, rtol=1e-12))
    return [_tally("gauge identity", f"{instances} random instances, graphs up to 8 vertices", ok)]


def _small_sets(G, beta, count, max_points, rng):
    """Sourceless point sets with between 1 and ``max_points`` points."""
    T = RadiusField.constant(G, beta).local_time
    out = []
    while len(out) < count:
        need = 2 * (count - len(out))
        counts, _ = sample_sourceless_counts(G, T, rng, need, max_attempts=100_000 * need)
        tot = counts.sum(axis=1)
        for c in counts[(tot > 0) & (tot <= max_points)][: count - len(out)]:
            out.append(assign_times(G, T, c, rng))
    return out


def check_partition_uniqueness(suite, instances=200, max_points=10):
    rng = suite.rng(2)
    recs = []
    for name, G, beta in (("K4", complete_graph(4), 1.0), ("Lambda_1", LatticeBox(1), 1.2)):
        ok = []
        for pes in _small_sets(G, beta, instances // 2, max_points, rng):
            found = cy.brute_force_proper_partitions(G, pes, max_points=max_points)
            part = cy.decompose(G, pes)
            sets = {frozenset(c.points) for c in part.cycles}
            ok.append(len(found) == 1 and {frozenset(c.points) for c in found[0]} == sets
                      and cy.is_proper_partition(G, pes, part))
        recs.append(_tally("proper partition uniqueness", f"{name}, {len(ok)} sets, <= {max_points} points", ok))
    return recs


def _box_sets(suite, count, stream):
    L, T, currents = suite.box_currents(2, 0.8, count, stream)
    rng = suite.rng(*stream, 1)
    return L, T, [assign_times(L, T, c, rng) for c in currents], rng


def _point_sets(part_sets):
    return {frozenset(c) for c in part_sets}


def check_time_inversion(suite, instances=1000):
    L, T, sets, _ = _box_sets(suite, instances, (3,))
    ok = []
    for pes in sets:
        part = cy.decompose(L, pes)
        inv = cy.time_invert(L, pes, T)
        top = T[L.tail[pes.edges]]
        expected = {frozenset((int(pes.edges[p]), float(top[p] - pes.times[p])) for p in c.points)
                    for c in part.cycles}
        ok.append(cy.decompose(L, inv).as_sets() == expected)
    return [_tally("time-inversion equivariance", f"Lambda_2 beta=0.8, {instances} samples", ok)]


def check_direction_flip(suite, instances=1000):
    L, T, sets, rng = _box_sets(suite, instances, (4,))
    ok = []
    for pes in sets:
        part = cy.decompose(L, pes)
        which = [c for c in range(len(part)) if rng.random() < 0.5]
        flipped = cy.flip_cycles(part, which)
        expected = set()
        for c, cyc in enumerate(part.cycles):
            if c in which:
                slots, times = cy._inverse_points(pes, cyc)
                expected.add(frozenset(zip(slots.tolist(), times.tolist())))
            else:
                expected.add(frozenset((int(pes.edges[p]), float(pes.times[p])) for p in cyc.points))
        ok.append(cy.decompose(L, flipped).as_sets() == expected)
    return [_tally("direction-flip equivariance", f"Lambda_2 beta=0.8, {instances} samples", ok)]


def check_exploration(suite, instances=1000):
    L, T, sets, rng = _box_sets(suite, instances, (5,))
    ok = []
    for pes in sets:
        if len(pes) == 0:
            ok.append(True)
            continue
        part = cy.decompose(L, pes)
        tails = L.tail[pes.edges]
        x = int(tails[rng.integers(len(pes))])
        trace = cy.explore(L, pes, x, T=T, budget=rng.uniform(0, T[x]))
        if trace.used.size == 0:
            ok.append(True)
            continue
        lab = part.labels()
        last = trace.used[tails[trace.used] == x][-1]
        up = cy.up_set(L, part, int(lab[last]))
        expected = {p for c in up for p in part.cycles[c].points}
        ok.append(set(trace.used.tolist()) == expected and trace.walk[-1] == x)
    return [_tally("exploration equals up-set", f"Lambda_2 beta=0.8, {instances} samples", ok)]


def check_winding_identity(suite, instances=500):
    """Height from the current equals the summed clockwise windings of the cycles."""
    L, T, sets, _ = _box_sets(suite, instances, (6,))
    ok = []
    for pes in sets:
        h = height_from_current(L, pes.counts(L))
        lab, nc = cy.cycle_labels(L, pes)
        W = windings_from_labels(L, pes.edges, lab, nc)
        ok.append(np.array_equal(h[: L.n_faces], W.sum(axis=0)))
    return [_tally("height equals cycle windings", f"Lambda_2 beta=0.8, {instances} samples", ok)]


# ---------------------------------------------------------------------------
# tier 2: oracle equivalences


def check_oracle_cross(suite, betas=(0.25, 0.5, 1.0), tol=1e-5):
    recs = []
    for G in connected_small_graphs(4):
        for beta in betas:
            r = RadiusField.constant(G, beta)
            worst = 0.0
            for x in range(G.n_vertices):
                for y in range(x + 1, G.n_vertices):
                    a = two_point_current(G, r, x, y)
                    b = haar_two_point(G, r, x, y)
                    worst = max(worst, abs(a - b))
            recs.append(CheckRecord("current vs Haar two-point", f"{G!r} beta={beta}", worst, 0.0,
                                    tol, worst <= tol))
    G = single_edge()
    r = RadiusField.constant(G, 1.0)
    val = two_point_current(G, r, 0, 1)
    bessel = special.i1(1.0) / special.i0(1.0)
    recs.append(CheckRecord("single edge beta=1", "current oracle", val, SINGLE_EDGE_BETA1, tol,
                            abs(val - SINGLE_EDGE_BETA1) <= tol))
    recs.append(CheckRecord("single edge beta=1", "Haar oracle", haar_two_point(G, r, 0, 1),
                            SINGLE_EDGE_BETA1, tol,
                            abs(haar_two_point(G, r, 0, 1) - SINGLE_EDGE_BETA1) <= tol))
    recs.append(CheckRecord("single edge beta=1", "Bessel ratio I1/I0", val, float(bessel), 1e-9,
                            abs(val - bessel) <= 1e-9))
    return recs


def check_phi(suite, betas=(0.3, 0.5, 1.0, 2.0), amax=20):
    recs = []
    for beta in betas:
        a = np.arange(-amax, amax + 1)
        ours = phi_potential(beta, a)
        ref = -np.log(special.ive(np.abs(a), beta)) - beta
        err = float(np.max(np.abs(ours - ref) / np.maximum(1.0, np.abs(ref))))
        recs.append(CheckRecord("edge potential vs Bessel", f"beta={beta} |a|<={amax}", err, 0.0,
                                1e-12, err <= 1e-12))
    return recs


def _six_vertex_graphs():
    grid = FiniteGraph(6, [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)])
    return [path_graph(5), cycle_graph(6), complete_graph(4), grid, cycle_graph(4)]


def check_ginibre(suite, instances=200):
    rng = suite.rng(7)
    graphs = _six_vertex_graphs()
    recs = []
    for _ in range(instances):
        G = graphs[rng.integers(len(graphs))]
        r = rng.uniform(0.2, 1.0, G.n_vertices)
        side = rng.integers(0, 3, G.n_vertices)  # 0: neither, 1: tau1, 2: tau2
        t = rng.uniform(0, r ** 2 / 2)
        tau1 = np.where(side == 1, t, 0.0)
        tau2 = np.where(side == 2, t, 0.0)
        recs.append(ginibre_check(G, r, tau1, tau2))
    return [_summary("ginibre inequality", recs)]


def check_mono(suite, instances=100):
    rng = suite.rng(8)
    graphs = _six_vertex_graphs()
    recs = []
    for _ in range(instances):
        G = graphs[rng.integers(len(graphs))]
        r = rng.uniform(0.2, 1.0, G.n_vertices)
        k = int(rng.integers(1, G.n_vertices))
        subset = np.sort(rng.choice(G.n_vertices, size=k, replace=False))
        tau = rng.uniform(0, r[subset] ** 2 / 2)
        recs.append(mono_check(G, r, subset, tau))
    return [_summary("monotonicity inequality", recs)]


def _summary(name, recs):
    """Fold many inequality records into one: ``lhs`` is the worst margin ``lhs - rhs + slack``."""
    margins = [r.lhs - r.rhs + r.slack for r in recs]
    worst = int(np.argmin(margins))
    return CheckRecord(name, f"{len(recs)} instances; worst: {recs[worst].instance}",
                       float(margins[worst]), 0.0, recs[worst].slack, all(r.passed for r in recs))


# ---------------------------------------------------------------------------
# tier 3: paired statistical tests


def _box_pairs(L):
    a = L.face(0, 0)
    return [(a, a), (a, L.face(0, 1)), (a, L.face(1, 1))]


def check_covariance_identity(suite, samples=100_000):
    L = lattice(2, suite.fault)
    pairs = _box_pairs(L)
    cfg = McmcConfig(sweeps=500 + suite.n(samples, 2000), burnin=500, seed=suite.seed)
    d = lattice_samples(L, 0.8, pairs, cfg, suite.rng(9), fk=False)
    return [_paired("height product = surrounding count", f"Lambda_2 beta=0.8 faces {a},{b}",
                    d["hh"][:, i], d["surround"][:, i]) for i, (a, b) in enumerate(pairs)]


def check_edwards_sokal(suite, samples=100_000):
    L = lattice(2, suite.fault)
    a = L.face(0, -1)
    pairs = [(a, L.face(0, -1 + k)) for k in (1, 2)]
    cfg = McmcConfig(sweeps=500 + suite.n(samples, 2000), burnin=500, seed=suite.seed)
    d = lattice_samples(L, 0.8, pairs, cfg, suite.rng(10), cycles=False)
    return [_paired("sign product = FK connectivity", f"Lambda_2 beta=0.8 k={k}",
                    d["ss"][:, i], d["fk"][:, i]) for i, k in enumerate((1, 2))]


def check_surround_inequality(suite, samples=100_000):
    L = lattice(2, suite.fault)
    pairs = _box_pairs(L)
    cfg = McmcConfig(sweeps=500 + suite.n(samples, 2000), burnin=500, seed=suite.seed)
    d = lattice_samples(L, 0.8, pairs, cfg, suite.rng(11), fk=False)
    recs = []
    for i, (a, b) in enumerate(pairs):
        pt = paired_test(d["any_surround"][:, i], d["ss"][:, i])
        recs.append(CheckRecord("P[surrounding cycle] >= sign covariance",
                                f"Lambda_2 beta=0.8 faces {a},{b}",
                                float(d["any_surround"][:, i].mean()), float(d["ss"][:, i].mean()),
                                3 * pt.se, bool(pt.mean >= -3 * pt.se)))
    return recs


def check_shared_cycle_inequality(suite, samples=20_000, betas=(0.1, 0.5)):
    recs = []
    rng = suite.rng(12)
    for name, G, x, y in (("C4", cycle_graph(4), 0, 2), ("Lambda_1", LatticeBox(1), 0, 8)):
        for beta in betas:
            r = RadiusField.constant(G, beta)
            lhs = 2 * two_point_current(G, r, x, y) ** 2
            ind = shared_cycle_indicator(G, r.local_time, x, y, suite.n(samples, 1000), rng)
            m, se = batch_means(ind)
            recs.append(CheckRecord("2 <sigma sigma>^2 >= P[cycle through both]",
                                    f"{name} beta={beta} x={x} y={y}", float(lhs), float(m),
                                    3 * se, bool(lhs - m >= -3 * se)))
    return recs


def check_height_laws(suite, samples=100_000, alpha=1e-3):
    """Chi-square homogeneity of current-derived and Gibbs heights on ``Lambda_1``."""
    L = lattice(1, suite.fault)
    beta = 0.7
    N = suite.n(samples, 2000)
    T = RadiusField.constant(L, beta).local_time
    counts, _ = sample_sourceless_counts(L, T, suite.rng(13), N, max_attempts=5000 * N)
    from_current = np.array([height_from_current(L, c)[: L.n_faces] for c in counts])
    direct = gibbs_heights(L, beta, N, suite.rng(14), burnin=100, thin=10)[:, : L.n_faces]
    recs = []
    views = [("joint", from_current, direct)]
    views += [(f"face {f}", from_current[:, [f]], direct[:, [f]]) for f in range(L.n_faces)]
    for name, a, b in views:
        p = _homogeneity_p(a, b)
        recs.append(CheckRecord("current heights ~ Gibbs heights", f"Lambda_1 beta={beta} {name}",
                                p, alpha, 0.0, p >= alpha))
    return recs


def _homogeneity_p(a, b, min_expected=5.0):
    keys, inv = np.unique(np.concatenate([a, b]), axis=0, return_inverse=True)
    inv = inv.ravel()
    table = np.zeros((2, len(keys)))
    np.add.at(table[0], inv[: len(a)], 1)
    np.add.at(table[1], inv[len(a):], 1)
    expected = table.sum(axis=0) * min(len(a), len(b)) / (len(a) + len(b))
    rare = expected < min_expected
    if rare.any():
        table = np.column_stack([table[:, ~rare], table[:, rare].sum(axis=1)])
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table)[1])


def check_walk_expansion(suite, beta=0.5, max_length=12, mc_samples=20_000, rtol=0.02):
    G = single_edge()
    r = RadiusField.constant(G, beta)
    exact = two_point_current(G, r, 0, 1)
    w = walk_expansion_two_point(G, r, 0, 1, max_length, suite.n(mc_samples, 500), suite.rng(15))
    err = abs(w.value - exact) / exact
    return [CheckRecord("walk expansion partial sums", f"single edge beta={beta} L_max={max_length}",
                        w.value, exact, rtol * exact, bool(err <= rtol))]


CHECKS = {
    1: [check_gauge, check_partition_uniqueness, check_time_inversion, check_direction_flip,
        check_exploration, check_winding_identity],
    2: [check_oracle_cross, check_phi, check_ginibre, check_mono],
    3: [check_covariance_identity, check_edwards_sokal, check_surround_inequality,
        check_shared_cycle_inequality, check_height_laws, check_walk_expansion],
}


def run_suite(tier=1, seed=0, fault=None, scale=None, progress=None):
    """All checks up to ``tier``; statistical checks default to a fifth of the full sizes."""
    if tier not in CHECKS:
        raise ValueError("tier must be 1, 2 or 3")
    suite = Suite(seed=seed, fault=fault, scale=0.2 if scale is None else scale)
    out = []
    for t in range(1, tier + 1):
        for check in CHECKS[t]:
            recs = check(suite)
            if progress is not None:
                progress(check.__name__, recs)
            out.extend(recs)
    return out
