"""Exact small-graph computations for the current expansion of the XY model.

Sums over currents are organised by the net flow ``m_e = n_xy - n_yx`` on each
edge.  For fixed net flow the remaining sum over the symmetric part factorises
edge by edge into ``sum_k u^(|m|+k) v^k / ((|m|+k)! k!)`` (with the roles of
``u`` and ``v`` swapped for negative ``m``), which is summed directly.  The
divergence constraint is solved on a spanning tree and the free chord flows are
enumerated in a box ``[-M, M]``; the omitted chord flows are bounded by a
rigorous tail estimate.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .graphs import FiniteGraph

__all__ = [
    "TruncationPolicy",
    "Truncated",
    "CheckRecord",
    "RadiusField",
    "pair_series",
    "phi_potential",
    "phi_table",
    "current_measure",
    "partition_function",
    "normalized_ratio",
    "two_point_current",
    "haar_two_point",
    "gauge_check",
    "ginibre_check",
    "mono_check",
    "Walk",
    "walk_visit_counts",
    "simplex_cdf",
    "simplex_sample",
    "walk_expansion_two_point",
]


@dataclass(frozen=True)
class TruncationPolicy:
    """Truncation of current sums.

    ``max_flow`` caps the absolute net flow on each chord of the spanning
    tree; the actual cap is the smallest value meeting ``tail_tolerance``.
    """

    max_flow: int = 60
    tail_tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_flow < 0:
            raise ValueError("max_flow must be nonnegative")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")


DEFAULT_POLICY = TruncationPolicy()


class Truncated(NamedTuple):
    value: float
    tail: float  # rigorous upper bound on the omitted (nonnegative) mass


@dataclass
class CheckRecord:
    check: str
    instance: str
    lhs: float
    rhs: float
    slack: float
    passed: bool

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


class RadiusField(np.ndarray):
    """Per-vertex radius ``r``; ``R = r**2`` and ``T = r**2 / 2`` derive from it."""

    def __new__(cls, r):
        arr = np.asarray(r, dtype=float).view(cls)
        if np.any(arr < 0):
            raise ValueError("radii must be nonnegative")
        return arr

    @classmethod
    def constant(cls, G, beta):
        return cls(np.full(G.n_vertices, math.sqrt(beta)))

    @property
    def squared(self):
        return np.asarray(self) ** 2

    @property
    def local_time(self):
        return np.asarray(self) ** 2 / 2


# ---------------------------------------------------------------------------
# one-edge series


def _log_pair_series(a, p):
    """``log sum_k p^k / ((a+k)! k!)`` for integer ``a >= 0`` and ``p >= 0``."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    a, p = np.broadcast_arrays(a, p)
    term = np.ones(a.shape)
    total = np.ones(a.shape)
    k = 0
    while True:
        k += 1
        term = term * p / ((a + k) * k)
        total = total + term
        if np.all(term <= 1e-17 * total) or k > 100_000:
            break
    return np.log(total) - gammaln(a + 1)


def pair_series(m, u, v):
    """Sum of ``u^a v^b / (a! b!)`` over ``a - b = m``."""
    m = np.asarray(m)
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    base = np.where(m >= 0, u, v)
    am = np.abs(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        logbase = np.where(am > 0, am * np.log(base), 0.0)
    return np.exp(logbase + _log_pair_series(am, u * v))


def phi_potential(beta, a):
    """``Phi_beta(a) = -log sum_k (beta/2)^(|a|+2k) / ((|a|+k)! k!)``."""
    if not beta > 0:
        raise ValueError("phi_potential needs beta > 0")
    am = np.abs(np.asarray(a))
    half = beta / 2
    out = -(am * math.log(half) + _log_pair_series(am, half * half))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def phi_table(beta, amax=128):
    """``Phi_beta`` on ``-amax..amax`` (index ``a + amax``)."""
    t = phi_potential(beta, np.arange(-amax, amax + 1))
    t.setflags(write=False)
    return t


# ---------------------------------------------------------------------------
# current sums


def _tree_flow(G, target):
    """Integer net flow on tree edges with divergence ``target`` (chords zero), or None."""
    parent, parent_edge, order = G.spanning_forest()
    labels = G.components()
    sums = np.bincount(labels, weights=target)
    if np.any(np.abs(sums) > 1e-9):
        return None
    flow = np.zeros(G.n_edges, dtype=np.int64)
    demand = np.asarray(target, dtype=np.int64).copy()
    for v in order[::-1]:
        d = parent_edge[v]
        if d < 0:
            continue
        # edge parent -> v must carry the subtree's total divergence out of the subtree
        e = d // 2
        carried = -demand[v]  # net flow parent -> v
        flow[e] += carried if d % 2 == 0 else -carried
        demand[parent[v]] += demand[v]
    return flow


def _chord_vectors(G):
    cyc = G.fundamental_cycles()
    C = np.zeros((len(cyc), G.n_edges), dtype=np.int64)
    chords = np.empty(len(cyc), dtype=np.int64)
    for i, c in enumerate(cyc):
        chords[i] = c[0] // 2
        for d in c:
            C[i, d // 2] += 1 if d % 2 == 0 else -1
    return C, chords


def _current_sum(G, W, target, policy):
    """``sum_{n: div n = target} prod_d W_d^{n_d} / n_d!`` for a batch of weights.

    Returns ``(values, tails)`` with shapes ``(S,)``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    S = W.shape[0]
    m0 = _tree_flow(G, np.asarray(target))
    if m0 is None or G.n_edges == 0:
        val = np.zeros(S) if m0 is None else np.ones(S)
        return val, np.zeros(S)
    u, v = W[:, 0::2], W[:, 1::2]
    C, chords = _chord_vectors(G)
    k = len(chords)

    log_edge_total = u + v  # log of sum over all flows, e^{u+v}
    tol = policy.tail_tolerance
    M = 0
    tail = np.zeros(S)
    if k:
        # g(m+1) <= g(m) * w / (m+1), so past m > 2w the rest is at most the last term
        wmax = float(max(u.max(), v.max()))
        L = 16
        while L < 2 * wmax + 2 or L < policy.max_flow + 2:
            L *= 2
        span = np.arange(1, L + 1)
        total_log = log_edge_total.sum(axis=1)
        suffix = []
        for e in chords:
            g = pair_series(span[None, :], u[:, e:e + 1], v[:, e:e + 1]) + \
                pair_series(-span[None, :], u[:, e:e + 1], v[:, e:e + 1])
            g[:, -1] *= 2
            rest = np.exp(total_log - log_edge_total[:, e])
            suffix.append(np.cumsum(g[:, ::-1], axis=1)[:, ::-1] * rest[:, None])
        suffix = np.sum(suffix, axis=0)  # suffix[:, j] bounds flows with |m| >= j + 1

        def tail_at(M):
            return suffix[:, M]
        M = 0
        tail = tail_at(M)
        while np.max(tail) > tol and M < policy.max_flow:
            M += 1
            tail = tail_at(M)
        if np.max(tail) > tol:
            warnings.warn(f"current sum tail bound {np.max(tail):.3g} exceeds tolerance {tol:.3g}",
                          RuntimeWarning, stacklevel=3)

    mmax = int(M * np.abs(C).sum(axis=0).max(initial=0) + np.abs(m0).max())
    flows = np.arange(-mmax, mmax + 1)
    with np.errstate(divide="ignore"):
        logg = np.log(pair_series(flows[None, None, :], u[:, :, None], v[:, :, None]))  # (S, m, F)

    grid = np.arange(-M, M + 1)
    total = np.full(S, -np.inf)
    chunk = max(1, int(2e6 // max(1, S * G.n_edges)))
    combos = itertools.product(grid, repeat=k)
    eidx = np.arange(G.n_edges)
    while True:
        rows = list(itertools.islice(combos, chunk))
        if not rows:
            break
        block = np.array(rows, dtype=np.int64).reshape(len(rows), k)
        m = m0[None, :] + block @ C  # (B, m)
        lg = logg[:, eidx[None, :], m + mmax].sum(axis=2)  # (S, B)
        total = np.logaddexp(total, logsumexp(lg, axis=1))
    return np.exp(total), tail


def current_measure(G, T, source=None, policy=DEFAULT_POLICY):
    """``M_T[div n = source]``: Poisson(``T_x``) weights on every edge leaving ``x``."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise ValueError("local times must be nonnegative")
    source = np.zeros(G.n_vertices, dtype=np.int64) if source is None else np.asarray(source)
    val, tail = _current_sum(G, T[G.tail], source, policy)
    return Truncated(float(val[0]), float(tail[0]))


def _symmetric_weights(G, R):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return np.sqrt(R[:, G.tail] * R[:, G.head]) / 2


def _partition_batch(G, R, policy):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    ok = np.all(R >= 0, axis=1)
    vals, tails = np.zeros(len(R)), np.zeros(len(R))
    if np.any(ok):
        v, t = _current_sum(G, _symmetric_weights(G, np.where(ok[:, None], R, 0.0)[ok]),
                            np.zeros(G.n_vertices, dtype=np.int64), policy)
        vals[ok], tails[ok] = v, t
    return vals, tails


def partition_function(G, R, policy=DEFAULT_POLICY):
    """``Z_{G,R}``; zero when ``R`` is negative somewhere."""
    v, t = _partition_batch(G, R, policy)
    return Truncated(float(v[0]), float(t[0]))


def _ratio(G, R, tau, policy):
    R = np.asarray(R, dtype=float)
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    num, num_t = _partition_batch(G, R[None, :] - 2 * tau, policy)
    den, den_t = partition_function(G, R, policy)
    return num / den, num_t / den + num * den_t / den ** 2


def normalized_ratio(G, R, tau, policy=DEFAULT_POLICY):
    """``z_{G,R}(tau) = Z_{G,R-2tau} / Z_{G,R}``."""
    val, _ = _ratio(G, R, tau, policy)
    return float(val[0])


def two_point_current(G, r, x, y, policy=DEFAULT_POLICY, with_error=False):
    """``<sigma_x conj(sigma_y)>`` as ``(r_x/r_y) M[div n = 1_y - 1_x] / M[div n = 0]``."""
    r = np.asarray(r, dtype=float)
    if x == y:
        return (1.0, 0.0) if with_error else 1.0
    if r[x] == 0 or r[y] == 0:
        # a zero radius decouples the spin: it is uniform and independent
        return (0.0, 0.0) if with_error else 0.0
    T = r ** 2 / 2
    a = np.zeros(G.n_vertices, dtype=np.int64)
    a[y] += 1
    a[x] -= 1
    num = current_measure(G, T, a, policy)
    den = current_measure(G, T, None, policy)
    scale = r[x] / r[y]
    val = scale * num.value / den.value
    err = scale * (num.tail / den.value + num.value * den.tail / den.value ** 2)
    return (val, err) if with_error else val


def haar_two_point(G, r, x, y, grid_points=64):
    """Tensor-grid quadrature of ``Re <sigma_x conj(sigma_y)>`` over the Haar measure."""
    if G.n_vertices > 4:
        raise ValueError("haar_two_point only handles graphs with at most 4 vertices")
    if grid_points < 64:
        raise ValueError("grid_points must be at least 64")
    r = np.asarray(r, dtype=float)
    if x == y:
        return 1.0
    nv = G.n_vertices
    free = [v for v in range(nv) if v != x]  # sigma_x fixed to 1 by rotation invariance
    theta = 2 * np.pi * np.arange(grid_points) / grid_points
    axes = np.meshgrid(*([theta] * len(free)), indexing="ij", sparse=True)
    ang = [0.0] * nv
    for v, ax in zip(free, axes):
        ang[v] = ax
    energy = 0.0
    for a, b in G.edges.tolist():
        energy = energy + r[a] * r[b] * np.cos(ang[a] - ang[b])
    energy = np.broadcast_to(energy, (grid_points,) * len(free))
    w = np.exp(energy - energy.max())
    obs = np.cos(ang[x] - ang[y]) * np.ones_like(w)
    return float((w * obs).sum() / w.sum())


# ---------------------------------------------------------------------------
# identities and inequalities


def gauge_check(G, J, n, g, rtol=1e-12):
    """Check ``J^n == g^(-dn) prod ((g_x/g_y) J_xy)^(n_xy)`` to relative ``rtol``."""
    J = np.asarray(J, dtype=complex)
    n = np.asarray(n, dtype=np.int64)
    g = np.asarray(g, dtype=complex)
    if np.any(g == 0):
        raise ValueError("gauge function must be nonzero")
    dn = G.divergence(n)
    lhs = complex(np.prod(J ** n))
    gauged = (g[G.tail] / g[G.head]) * J
    rhs = complex(np.prod(g ** (-dn)) * np.prod(gauged ** n))
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) <= rtol * scale


def _slack(*errors):
    return 1e-10 + float(sum(errors))


def ginibre_check(G, r, tau1, tau2, policy=DEFAULT_POLICY):
    """``z(tau1 + tau2) >= z(tau1) z(tau2)`` for disjointly supported ``tau1, tau2``."""
    tau1, tau2 = np.asarray(tau1, float), np.asarray(tau2, float)
    if np.any((tau1 > 0) & (tau2 > 0)):
        raise ValueError("tau1 and tau2 must have disjoint supports")
    R = np.asarray(r, float) ** 2
    vals, errs = _ratio(G, R, np.stack([tau1 + tau2, tau1, tau2]), policy)
    lhs, rhs = vals[0], vals[1] * vals[2]
    slack = _slack(errs[0], errs[1] * vals[2] + errs[2] * vals[1] + errs[1] * errs[2])
    return CheckRecord("ginibre", f"{G!r} tau1={tau1.tolist()} tau2={tau2.tolist()}",
                       float(lhs), float(rhs), slack, bool(lhs >= rhs - slack))


def mono_check(G_big, r_big, subset, tau, policy=DEFAULT_POLICY):
    """``z_{G[V]}(tau) >= z_{G~}(tau extended by zero)`` for an induced subgraph."""
    subset = [int(v) for v in subset]
    tau = np.asarray(tau, float)
    G_sub, _ = G_big.induced_subgraph(subset)
    r_big = np.asarray(r_big, float)
    tau_big = np.zeros(G_big.n_vertices)
    tau_big[subset] = tau
    lhs, e1 = _ratio(G_sub, r_big[subset] ** 2, tau, policy)
    rhs, e2 = _ratio(G_big, r_big ** 2, tau_big, policy)
    slack = _slack(e1[0], e2[0])
    return CheckRecord("mono", f"{G_big!r} V={subset} tau={tau.tolist()}",
                       float(lhs[0]), float(rhs[0]), slack, bool(lhs[0] >= rhs[0] - slack))


# ---------------------------------------------------------------------------
# walks and simplex measures


@dataclass(frozen=True)
class Walk:
    vertices: tuple

    @property
    def length(self):
        return len(self.vertices) - 1

    def visits(self, n_vertices):
        return np.bincount(np.asarray(self.vertices, dtype=np.int64), minlength=n_vertices)

    def truncated(self):
        """The walk with its last vertex removed."""
        return Walk(self.vertices[:-1])


def walk_visit_counts(G, start, end, max_length, first_hit=False):
    """Count walks ``start -> end`` of length ``<= max_length`` by visit vector.

    With ``first_hit`` only walks visiting ``end`` exactly once (at the end)
    are counted.  Returns ``{visit tuple: number of walks}``.
    """
    counts = defaultdict(int)
    frontier = {(start, tuple(int(i == start) for i in range(G.n_vertices))): 1}
    for length in range(max_length + 1):
        nxt = defaultdict(int)
        for (v, k), c in frontier.items():
            if v == end:
                counts[k] += c
                if first_hit:
                    continue
            if length == max_length:
                continue
            for w in G.neighbors(v):
                w = int(w)
                kk = list(k)
                kk[w] += 1
                nxt[(w, tuple(kk))] += c
        frontier = nxt
    return dict(counts)


def simplex_cdf(k, lam):
    """``rho_k([0, lam]) = lam^k / k!``; ``rho_0`` is the Dirac mass at zero."""
    if k < 0 or lam < 0:
        raise ValueError("k and lam must be nonnegative")
    return lam ** k / math.factorial(k)


def simplex_sample(k, bound, size, rng):
    """Draw from ``rho_k`` restricted to ``[0, bound]`` and normalised."""
    if k == 0:
        return np.zeros(size)
    return bound * rng.random(size) ** (1.0 / k)


@dataclass
class WalkExpansion:
    lengths: np.ndarray
    partial_sums: np.ndarray
    stderr: np.ndarray

    @property
    def value(self):
        return float(self.partial_sums[-1])


def walk_expansion_two_point(G, r, x, y, max_length, mc_samples, rng,
                             form="integrated", policy=DEFAULT_POLICY):
    """Partial sums of the walk expansions of ``<sigma_x conj(sigma_y)>``.

    ``form="integrated"`` sums ``2/(r_x r_y) * int z(tau) d rho_omega`` over
    walks ``y -> x``; ``form="naive"`` sums ``(r_x/r_y) * int z d rho_{omega*}``
    over walks hitting ``x`` only at their end.  Simplex integrals are Monte
    Carlo averages of ``z`` under the normalised restricted simplex measures.
    """
    if G.n_vertices > 4:
        raise ValueError("walk expansion is limited to graphs with at most 4 vertices")
    r = np.asarray(r, float)
    R = r ** 2
    T = R / 2
    naive = form == "naive"
    if form not in ("integrated", "naive"):
        raise ValueError("form must be 'integrated' or 'naive'")
    counts = walk_visit_counts(G, y, x, max_length, first_hit=naive)
    prefactor = r[x] / r[y] if naive else 2.0 / (r[x] * r[y])
    sums = np.zeros(max_length + 1)
    var = np.zeros(max_length + 1)
    for k, n_walks in sorted(counts.items()):
        k = np.asarray(k)
        if naive:
            k = k.copy()
            k[x] -= 1
            length = int(k.sum())
        else:
            length = int(k.sum()) - 1
        mass = float(np.prod([simplex_cdf(int(kk), t) for kk, t in zip(k, T)]))
        if mass == 0.0:
            continue
        tau = np.stack([simplex_sample(int(kk), t, mc_samples, rng) for kk, t in zip(k, T)], axis=1)
        z, _ = _ratio(G, R, tau, policy)
        scale = prefactor * n_walks * mass
        sums[length] += scale * z.mean()
        var[length] += (scale * z.std(ddof=1)) ** 2 / mc_samples if mc_samples > 1 else 0.0
    return WalkExpansion(np.arange(max_length + 1), np.cumsum(sums), np.sqrt(np.cumsum(var)))
