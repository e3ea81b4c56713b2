"""Poisson edge sets: unconditioned draws, rejection and MCMC on sourceless currents, worm."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graphs import FiniteGraph, LatticeBox

__all__ = [
    "make_rng",
    "local_time_norm",
    "PoissonEdgeSet",
    "McmcConfig",
    "WormState",
    "RejectionFailure",
    "sample_unconditioned",
    "assign_times",
    "sample_sourceless_rejection",
    "sample_sourceless_counts",
    "mcmc_sweep",
    "mcmc_chain",
    "worm_sweep",
    "worm_run",
    "save_checkpoint",
    "load_checkpoint",
]


def make_rng(seed, *stream):
    """Counter-based generator keyed by ``seed`` and an optional stream tuple."""
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def local_time_norm(G, T):
    """``||T|| = sum_x deg(x) T_x``, the mean number of Poisson edges."""
    return float(np.dot(G.degree, np.asarray(T, float)))


@dataclass
class PoissonEdgeSet:
    """Points ``(directed edge, time)`` kept sorted by ``(time, edge)``.

    The position of a point in this order is its rank; ties in floating-point
    times are broken by the directed-edge index.
    """

    edges: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).ravel()
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.edges.shape != self.times.shape:
            raise ValueError("edges and times must have the same length")
        order = np.lexsort((self.edges, self.times))
        self.edges = self.edges[order]
        self.times = self.times[order]

    def __len__(self):
        return self.edges.size

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0))

    def counts(self, G):
        return np.bincount(self.edges, minlength=G.n_directed).astype(np.int64)

    def validate(self, G, T):
        """Raise if a time is out of range or two points coincide."""
        T = np.asarray(T, float)
        if np.any(self.edges < 0) or np.any(self.edges >= G.n_directed):
            raise ValueError("unknown directed edge")
        if np.any(self.times < 0) or np.any(self.times >= T[G.tail[self.edges]]):
            raise ValueError("time outside [0, T_tail)")
        same = (np.diff(self.times) == 0) & (np.diff(self.edges) == 0)
        if np.any(same):
            raise ValueError("duplicate point")
        return True

    def subset(self, mask_or_index):
        return PoissonEdgeSet(self.edges[mask_or_index], self.times[mask_or_index])

    def key(self):
        """Hashable identity of the point set."""
        return tuple(zip(self.edges.tolist(), self.times.tolist()))

    def to_json(self):
        return {"points": [[int(e), float(t)] for e, t in zip(self.edges, self.times)]}


def assign_times(G, T, counts, rng):
    """Uniform times on ``[0, T_tail)`` for the given counts per directed edge."""
    T = np.asarray(T, float)
    counts = np.asarray(counts, dtype=np.int64)
    edges = np.repeat(np.arange(G.n_directed), counts)
    top = T[G.tail[edges]]
    times = rng.random(edges.size) * top
    times = np.minimum(times, np.nextafter(top, 0))
    return PoissonEdgeSet(edges, times)


def sample_unconditioned(G, T, rng):
    """Independent Poisson(``T_x``) points on each directed edge ``xy``."""
    T = np.asarray(T, float)
    if np.any(T < 0):
        raise ValueError("local times must be nonnegative")
    counts = rng.poisson(T[G.tail])
    return assign_times(G, T, counts, rng)


class RejectionFailure(RuntimeError):
    pass


def sample_sourceless_counts(G, T, rng, n_samples, max_attempts=10_000_000, batch=None):
    """Many exact sourceless current draws by batched rejection.

    Returns ``(counts, attempts)`` where ``counts`` has shape ``(n_samples, 2|E|)``.
    """
    T = np.asarray(T, float)
    lam = T[G.tail]
    if batch is None:
        batch = max(1000, min(200_000, int(4e6 // max(1, G.n_directed))))
    out, got, attempts = [], 0, 0
    inc = G.incidence
    while got < n_samples:
        if attempts >= max_attempts:
            raise RejectionFailure(
                f"rejection sampler accepted {got} of {n_samples} draws in {attempts} attempts; "
                "use the mcmc sampler for this graph and beta")
        b = min(batch, max_attempts - attempts)
        c = rng.poisson(lam, size=(b, lam.size))
        ok = ~np.any(np.asarray(inc @ c.T).T != 0, axis=1)
        idx = np.flatnonzero(ok)[: n_samples - got]
        if idx.size:
            # attempts up to and including the last kept draw
            attempts += int(idx[-1]) + 1 if got + idx.size == n_samples else b
        else:
            attempts += b
        out.append(c[idx])
        got += idx.size
    return np.concatenate(out).astype(np.int64), attempts


def sample_sourceless_rejection(G, T, rng, max_attempts=1_000_000):
    """Exact draw conditioned on ``div n = 0``; returns ``(PoissonEdgeSet, attempts)``."""
    T = np.asarray(T, float)
    lam = T[G.tail]
    inc = G.incidence
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        c = rng.poisson(lam)
        if not np.any(inc @ c):
            return assign_times(G, T, c, rng), attempts
    raise RejectionFailure(f"no sourceless draw in {max_attempts} attempts; use the mcmc sampler")


# ---------------------------------------------------------------------------
# MCMC


@dataclass(frozen=True)
class McmcConfig:
    sweeps: int = 10_000
    moves_per_sweep: int | None = None  # default: one per edge plus one per basis cycle
    p_pair: float = 0.5  # remaining probability goes to oriented cycle moves
    p_worm: float = 0.5  # worm only: fraction of head moves
    thin: int = 1
    burnin: int = 1_000
    seed: int = 0

    def __post_init__(self):
        for name in ("p_pair", "p_worm"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.burnin >= self.sweeps:
            raise ValueError("burnin must be smaller than sweeps")
        if self.thin < 1:
            raise ValueError("thin must be positive")

    def to_json(self):
        return dict(self.__dict__)


def _move_tables(G):
    """Basis cycles for the cycle moves: plaquettes on a box, fundamental cycles otherwise."""
    cached = getattr(G, "_move_tables_cache", None)
    if cached is not None:
        return cached
    if isinstance(G, LatticeBox):
        cycles = list(G.plaquettes)
    else:
        cycles = G.fundamental_cycles()
    ptr = np.zeros(len(cycles) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(c) for c in cycles])
    slots = np.concatenate(cycles).astype(np.int64) if cycles else np.zeros(0, np.int64)
    G._move_tables_cache = (ptr, slots)
    return ptr, slots


def _moves(G, cfg):
    if cfg.moves_per_sweep is not None:
        return int(cfg.moves_per_sweep)
    ptr, _ = _move_tables(G)
    return max(1, G.n_edges + len(ptr) - 1)


def mcmc_sweep(G, T, state, cfg, rng):
    """One sweep of pair and oriented-cycle moves; returns the new current."""
    n = np.array(state, dtype=np.int64)
    if np.any(G.divergence(n) != 0):
        raise ValueError("mcmc_sweep needs a sourceless state")
    ptr, slots = _move_tables(G)
    slot_T = np.asarray(T, float)[G.tail]
    _kernels.sourceless_moves(n, slot_T, ptr, slots, cfg.p_pair, rng.random((_moves(G, cfg), 4)))
    return n


def mcmc_chain(G, T, cfg, state=None, rng=None, observe=None):
    """Run ``cfg.sweeps`` sweeps and return thinned post-burn-in samples.

    ``observe(n)`` maps a state to a row that is stored instead of the raw
    current (useful on big graphs).
    """
    rng = make_rng(cfg.seed) if rng is None else rng
    n = np.zeros(G.n_directed, dtype=np.int64) if state is None else np.array(state, np.int64)
    ptr, slots = _move_tables(G)
    slot_T = np.asarray(T, float)[G.tail]
    moves = _moves(G, cfg)
    rows = []
    for s in range(cfg.sweeps):
        _kernels.sourceless_moves(n, slot_T, ptr, slots, cfg.p_pair, rng.random((moves, 4)))
        if s >= cfg.burnin and (s - cfg.burnin) % cfg.thin == 0:
            rows.append(n.copy() if observe is None else observe(n))
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# worm


@dataclass
class WormState:
    """Current with ``div n = 1_head - 1_anchor`` (sourceless when they coincide)."""

    counts: np.ndarray
    anchor: int
    head: int

    @classmethod
    def start(cls, G, anchor):
        return cls(np.zeros(G.n_directed, dtype=np.int64), int(anchor), int(anchor))

    @property
    def sourceless(self):
        return self.head == self.anchor

    def check(self, G):
        target = np.zeros(G.n_vertices, dtype=np.int64)
        target[self.head] += 1
        target[self.anchor] -= 1
        return bool(np.array_equal(G.divergence(self.counts), target))


def _worm_tables(G):
    return G.out_ptr.astype(np.int64), G.out_edges.astype(np.int64), G.head.astype(np.int64)


def worm_sweep(G, T, state, x, y, cfg, rng, bias=None, hist=None):
    """One worm sweep anchored at ``x``.

    The head roams freely; visits of the head to ``y`` against visits to
    ``x`` estimate ``M[div n = 1_y - 1_x] / M[div n = 0]`` (accumulated in
    ``hist`` when given).  For ``x == y`` the state is returned unchanged.
    """
    if x == y:
        return state
    if state.anchor != x:
        raise ValueError("worm state is anchored elsewhere")
    out_ptr, out_slots, slot_head = _worm_tables(G)
    ptr, slots = _move_tables(G)
    bias = np.zeros(G.n_vertices) if bias is None else np.asarray(bias, float)
    hist = np.zeros(G.n_vertices, dtype=np.int64) if hist is None else hist
    n = state.counts.copy()
    head = _kernels.worm_moves(n, state.head, np.asarray(T, float)[G.tail], out_ptr, out_slots,
                               slot_head, bias, ptr, slots, cfg.p_worm, cfg.p_pair,
                               rng.random((_moves(G, cfg), 4)), hist)
    return WormState(n, state.anchor, int(head))


@dataclass
class WormRun:
    """Head-position histograms of a worm chain, one row per batch."""

    anchor: int
    bias: np.ndarray
    batches: np.ndarray
    state: WormState = field(repr=False)

    def sector_ratio(self, hist=None):
        """``M[div n = 1_y - 1_anchor] / M[div n = 0]`` for every ``y``."""
        h = self.batches.sum(axis=0) if hist is None else hist
        with np.errstate(divide="ignore", invalid="ignore"):
            w = h * np.exp(-(self.bias - self.bias[self.anchor]))
            return w / w[self.anchor]

    def two_point(self, r):
        """Estimates and jackknife standard errors of ``<sigma_anchor conj(sigma_y)>``."""
        r = np.asarray(r, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = r[self.anchor] / r
        est = scale * self.sector_ratio()
        B = len(self.batches)
        total = self.batches.sum(axis=0)
        jk = np.array([scale * self.sector_ratio(total - b) for b in self.batches])
        se = np.sqrt((B - 1) / B * ((jk - jk.mean(axis=0)) ** 2).sum(axis=0))
        return est, se


def worm_run(G, T, x, cfg, rng=None, bias=None, n_batches=32, state=None):
    """Worm chain anchored at ``x`` with batch histograms of the head position."""
    rng = make_rng(cfg.seed) if rng is None else rng
    bias = np.zeros(G.n_vertices) if bias is None else np.asarray(bias, float)
    state = WormState.start(G, x) if state is None else state
    out_ptr, out_slots, slot_head = _worm_tables(G)
    ptr, slots = _move_tables(G)
    slot_T = np.asarray(T, float)[G.tail]
    moves = _moves(G, cfg)
    n = state.counts.copy()
    head = state.head
    scratch = np.zeros(G.n_vertices, dtype=np.int64)
    for _ in range(cfg.burnin):
        head = _kernels.worm_moves(n, head, slot_T, out_ptr, out_slots, slot_head, bias,
                                   ptr, slots, cfg.p_worm, cfg.p_pair, rng.random((moves, 4)), scratch)
    batches = np.zeros((n_batches, G.n_vertices), dtype=np.int64)
    per = max(1, (cfg.sweeps - cfg.burnin) // n_batches)
    for b in range(n_batches):
        for _ in range(per):
            head = _kernels.worm_moves(n, head, slot_T, out_ptr, out_slots, slot_head, bias,
                                       ptr, slots, cfg.p_worm, cfg.p_pair,
                                       rng.random((moves, 4)), batches[b])
    return WormRun(int(x), bias, batches, WormState(n, int(x), int(head)))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, G, beta, counts, sweep, seed):
    counts = np.asarray(counts)
    doc = {
        "graph": json.loads(G.to_json()),
        "beta": float(beta),
        "counts": [[int(e), int(k)] for e, k in enumerate(counts) if k],
        "sweep": int(sweep),
        "seed": int(seed),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    g = doc["graph"]
    if g.get("n") is not None:
        G = LatticeBox(g["n"])
    else:
        G = FiniteGraph(len(g["vertices"]), g["edges"])
    counts = np.zeros(G.n_directed, dtype=np.int64)
    for e, k in doc["counts"]:
        counts[e] = k
    return G, doc["beta"], counts, doc["sweep"], doc["seed"]
