"""Monte Carlo estimators: accumulators, error bars, correlation series and mass fits."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .cycles import cycle_labels
from .graphs import LatticeBox
from .heights import (fk_components, fk_edges, height_from_current, ising_couplings,
                      windings_from_labels)
from .oracle import phi_potential, phi_table
from .sampler import (McmcConfig, _move_tables, _moves, _worm_tables, assign_times, make_rng,
                      sample_sourceless_counts)

__all__ = [
    "Accumulator",
    "batch_means",
    "jackknife",
    "PairedTest",
    "paired_test",
    "SeriesEstimate",
    "MassFit",
    "fit_mass",
    "fit_window",
    "lattice_samples",
    "estimate_two_point_series",
    "estimate_cov_series",
    "estimate_sign_cov_series",
    "estimate_cov_series_tilted",
    "ratio_ci",
    "synthetic_series",
    "inequality_checks",
    "shared_cycle_indicator",
    "DemoReport",
    "main_theorem_demo",
]

N_BATCHES = 32


# ---------------------------------------------------------------------------
# streaming moments and error bars


class Accumulator:
    """Running count, mean and centred second moment; mergeable."""

    def __init__(self, shape=()):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, rows):
        """Add a batch of observations stacked along axis 0."""
        rows = np.asarray(rows, dtype=float)
        if rows.shape == self.mean.shape:
            rows = rows[None]
        other = Accumulator(self.mean.shape)
        other.count = rows.shape[0]
        if other.count:
            other.mean = rows.mean(axis=0)
            other.m2 = ((rows - other.mean) ** 2).sum(axis=0)
        merged = self.merge(other)
        self.count, self.mean, self.m2 = merged.count, merged.mean, merged.m2
        return self

    def merge(self, other):
        out = Accumulator(self.mean.shape)
        n = self.count + other.count
        out.count = n
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * (other.count / n)
        out.m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
        return out

    @property
    def var(self):
        return self.m2 / (self.count - 1) if self.count > 1 else np.full_like(self.m2, np.nan)

    @property
    def se(self):
        return np.sqrt(self.var / self.count)


def batch_means(x, n_batches=N_BATCHES):
    """Mean and batch-means standard error along axis 0."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    b = min(n_batches, n)
    means = np.array([c.mean(axis=0) for c in np.array_split(x, b)])
    se = means.std(axis=0, ddof=1) / math.sqrt(b) if b > 1 else np.zeros(x.shape[1:])
    return x.mean(axis=0), se


def jackknife(batches, statistic):
    """Delete-one-batch jackknife of ``statistic(sum of batches)``."""
    batches = np.asarray(batches, dtype=float)
    total = batches.sum(axis=0)
    est = statistic(total)
    B = len(batches)
    reps = np.array([statistic(total - b) for b in batches])
    se = np.sqrt((B - 1) / B * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))
    return est, se


@dataclass
class PairedTest:
    mean: float
    se: float

    @property
    def z(self):
        return self.mean / self.se if self.se > 0 else (0.0 if self.mean == 0 else math.inf)

    def passed(self, k=3.0):
        return abs(self.mean) <= k * self.se or self.mean == 0


def paired_test(a, b, n_batches=N_BATCHES):
    """Mean of ``a - b`` with a batch-means standard error."""
    m, se = batch_means(np.asarray(a, float) - np.asarray(b, float), n_batches)
    return PairedTest(float(m), float(se))


# ---------------------------------------------------------------------------
# series and fits


@dataclass
class SeriesEstimate:
    k: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    n_samples: np.ndarray
    label: str = ""
    flagged: np.ndarray | None = None  # entries the producer considers unreliable

    def to_csv(self):
        lines = ["k,estimate,se,n_samples"]
        for k, e, s, n in zip(self.k, self.estimate, self.se, self.n_samples):
            lines.append(f"{int(k)},{float(e)!r},{float(s)!r},{int(n)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, label=""):
        rows = [r.split(",") for r in text.strip().splitlines()[1:]]
        a = np.array(rows, dtype=float).reshape(-1, 4)
        return cls(a[:, 0].astype(int), a[:, 1], a[:, 2], a[:, 3].astype(int), label)


@dataclass
class MassFit:
    mass: float
    intercept: float
    window: tuple
    ci_lo: float
    ci_hi: float
    se: float
    chi2_red: float
    k_used: list = field(default_factory=list)

    def to_json(self, **extra):
        d = asdict(self)
        d["window"] = list(self.window)
        d.update(extra)
        return json.dumps(d, sort_keys=True)


def fit_window(n):
    return (math.ceil(n / 4), math.ceil(n / 2))


def fit_mass(series, window=None, level=0.95):
    """Weighted least squares of ``log estimate`` against ``k``; the mass is minus the slope.

    Only entries inside ``window`` with ``estimate > 5 se`` are used.  The
    parameter covariance is scaled by the reduced chi-square when it exceeds 1.
    """
    k = np.asarray(series.k, float)
    y = np.asarray(series.estimate, float)
    se = np.asarray(series.se, float)
    mask = (y > 5 * se) & (y > 0)
    if window is not None:
        mask &= (k >= window[0]) & (k <= window[1])
    if series.flagged is not None:
        mask &= ~np.asarray(series.flagged, bool)
    if mask.sum() < 3:
        raise ValueError(f"only {int(mask.sum())} usable entries in window {window}; need 3")
    k, y, se = k[mask], y[mask], se[mask]
    ly = np.log(y)
    sig = se / y
    weighted = np.any(sig > 0)
    if weighted:
        sig = np.where(sig > 0, sig, sig[sig > 0].min())
        w = 1.0 / sig ** 2
    else:
        w = np.ones_like(ly)
    X = np.stack([np.ones_like(k), k], axis=1)
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * ly))
    resid = ly - X @ coef
    dof = len(k) - 2
    chi2_red = float((w * resid ** 2).sum() / dof) if dof > 0 else 0.0
    cov = np.linalg.inv(A) * (max(1.0, chi2_red) if weighted else chi2_red)
    slope_se = float(math.sqrt(max(cov[1, 1], 0.0)))
    q = stats.t.ppf(0.5 + level / 2, max(dof, 1))
    mass = -float(coef[1])
    return MassFit(mass, float(coef[0]), tuple(window) if window else (int(k[0]), int(k[-1])),
                   mass - q * slope_se, mass + q * slope_se, slope_se, chi2_red,
                   [int(v) for v in k])


# ---------------------------------------------------------------------------
# current-side samples on small boxes


def _chain_states(L, T, cfg, rng):
    ptr, slots = _move_tables(L)
    slot_T = T[L.tail]
    moves = _moves(L, cfg)
    n = np.zeros(L.n_directed, dtype=np.int64)
    for s in range(cfg.sweeps):
        _kernels.sourceless_moves(n, slot_T, ptr, slots, cfg.p_pair, rng.random((moves, 4)))
        if s >= cfg.burnin and (s - cfg.burnin) % cfg.thin == 0:
            yield n


def lattice_samples(L, beta, pairs, cfg, rng=None, cycles=True, fk=True, xy_pairs=(),
                    currents=None):
    """Per-sample observables from the sourceless current chain on a box.

    For every face pair ``(a, b)`` in ``pairs`` the returned dict holds arrays
    of shape ``(samples, len(pairs))``: ``hh`` (height product), ``ss`` (sign
    product), and if requested ``surround`` (cycles surrounding both),
    ``any_surround`` and ``fk`` (FK connectivity given ``|h|``).  For vertex
    pairs in ``xy_pairs`` it records ``share`` (some cycle visits both).
    ``h`` holds the full height fields.  ``currents`` replaces the chain by
    given sourceless currents (e.g. exact rejection draws).
    """
    rng = make_rng(cfg.seed) if rng is None else rng
    T = np.full(L.n_vertices, beta / 2)
    pa = np.array([p[0] for p in pairs], dtype=np.int64)
    pb = np.array([p[1] for p in pairs], dtype=np.int64)
    cols = {"hh": [], "ss": [], "h": []}
    if cycles:
        cols.update(surround=[], any_surround=[])
    if fk:
        cols["fk"] = []
    if xy_pairs:
        cols["share"] = []
    for n in (_chain_states(L, T, cfg, rng) if currents is None else currents):
        h = height_from_current(L, n)
        sg = np.sign(h)
        cols["h"].append(h)
        cols["hh"].append(h[pa] * h[pb])
        cols["ss"].append(sg[pa] * sg[pb])
        if cycles or xy_pairs:
            pes = assign_times(L, T, n, rng)
            lab, nc = cycle_labels(L, pes)
        if cycles:
            W = np.abs(windings_from_labels(L, pes.edges, lab, nc))
            W = np.concatenate([W, np.zeros((nc, 1), np.int64)], axis=1)  # outer face column
            both = W[:, pa] * W[:, pb]
            cols["surround"].append(both.sum(axis=0))
            cols["any_surround"].append((both.sum(axis=0) > 0).astype(np.int64))
        if xy_pairs:
            tails = L.tail[pes.edges]
            row = []
            for x, y in xy_pairs:
                row.append(int(bool(set(lab[tails == x].tolist()) & set(lab[tails == y].tolist()))))
            cols["share"].append(row)
        if fk:
            K = ising_couplings(L, np.abs(h), beta)
            labels = fk_components(L, fk_edges(L, sg, K, rng))
            cols["fk"].append((labels[pa] == labels[pb]).astype(np.int64))
    return {key: np.asarray(v) for key, v in cols.items()}


def _face_pairs(L, anchor, k_max):
    a = L.face(*anchor)
    return [(a, L.face(anchor[0], anchor[1] + k)) for k in range(k_max + 1)]


def estimate_cov_series(L, beta, k_max, cfg, anchor=(0, 0), rng=None, samples=None):
    """``Cov[(0,0); (0,k)]`` as height products and as surrounding-cycle counts.

    Returns ``(product series, surrounding series, paired differences)``.
    """
    pairs = _face_pairs(L, anchor, k_max)
    if beta == 0:
        z = np.zeros(k_max + 1)
        s = SeriesEstimate(np.arange(k_max + 1), z, z, np.zeros(k_max + 1, int), "cov")
        return s, s, [PairedTest(0.0, 0.0)] * (k_max + 1)
    d = lattice_samples(L, beta, pairs, cfg, rng, fk=False) if samples is None else samples
    m1, s1 = batch_means(d["hh"])
    m2, s2 = batch_means(d["surround"])
    N = np.full(k_max + 1, len(d["hh"]))
    ks = np.arange(k_max + 1)
    diffs = [paired_test(d["hh"][:, i], d["surround"][:, i]) for i in range(k_max + 1)]
    return (SeriesEstimate(ks, m1, s1, N, "cov-height"),
            SeriesEstimate(ks, m2, s2, N, "cov-surround"), diffs)


def estimate_sign_cov_series(L, beta, k_max, cfg, anchor=(0, 0), rng=None, samples=None):
    """``SigCov[(0,0); (0,k)]`` for ``k >= 1`` as sign products and FK connectivity."""
    pairs = _face_pairs(L, anchor, k_max)[1:]
    ks = np.arange(1, k_max + 1)
    if beta == 0:
        z = np.zeros(k_max)
        s = SeriesEstimate(ks, z, z, np.zeros(k_max, int), "sigcov")
        return s, s, [PairedTest(0.0, 0.0)] * k_max
    d = lattice_samples(L, beta, pairs, cfg, rng, cycles=False) if samples is None else samples
    m1, s1 = batch_means(d["ss"])
    m2, s2 = batch_means(d["fk"])
    N = np.full(k_max, len(d["ss"]))
    diffs = [paired_test(d["ss"][:, i], d["fk"][:, i]) for i in range(k_max)]
    return (SeriesEstimate(ks, m1, s1, N, "sigcov-sign"),
            SeriesEstimate(ks, m2, s2, N, "sigcov-fk"), diffs)


def inequality_checks(L, beta, cfg, pairs, rng=None, samples=None):
    """``P[some cycle surrounds a and b] >= SigCov[a; b]`` for each face pair, paired.

    Returns records with ``lhs``, ``rhs`` and the margin ``lhs - rhs`` in SE units.
    """
    d = lattice_samples(L, beta, pairs, cfg, rng) if samples is None else samples
    out = []
    for i, (a, b) in enumerate(pairs):
        lhs = batch_means(d["any_surround"][:, i])[0]
        rhs = batch_means(d["ss"][:, i])[0]
        pt = paired_test(d["any_surround"][:, i], d["ss"][:, i])
        margin = pt.mean / pt.se if pt.se > 0 else (0.0 if pt.mean == 0 else math.copysign(math.inf, pt.mean))
        out.append({"a": int(a), "b": int(b), "lhs": float(lhs), "rhs": float(rhs),
                    "se": pt.se, "margin_se": float(margin), "pass": bool(pt.mean >= -3 * pt.se)})
    return out


def shared_cycle_indicator(G, T, x, y, n_samples, rng):
    """Per exact sourceless draw: 1 if some cycle of the decomposition visits both ``x`` and ``y``."""
    counts, _ = sample_sourceless_counts(G, T, rng, n_samples)
    out = np.zeros(n_samples, dtype=np.int64)
    for i, c in enumerate(counts):
        pes = assign_times(G, T, c, rng)
        if len(pes) == 0:
            continue
        lab, _ = cycle_labels(G, pes)
        tails = G.tail[pes.edges]
        out[i] = bool(np.intersect1d(lab[tails == x], lab[tails == y]).size)
    return out


# ---------------------------------------------------------------------------
# two-point series by a biased worm


def _axis_vertices(L, anchor, k):
    ax, ay = anchor
    out = []
    for dx, dy in ((k, 0), (-k, 0), (0, k), (0, -k)):
        try:
            out.append(L.vertex(ax + dx, ay + dy))
        except KeyError:
            pass
    return out


def _worm_chunk(state, L, slot_T, bias, cfg, moves, sweeps, rng, hist):
    n, head = state
    out_ptr, out_slots, slot_head = _worm_tables(L)
    ptr, slots = _move_tables(L)
    for _ in range(sweeps):
        head = _kernels.worm_moves(n, head, slot_T, out_ptr, out_slots, slot_head, bias,
                                   ptr, slots, cfg.p_worm, cfg.p_pair, rng.random((moves, 4)), hist)
    return n, head


def _tune_worm_bias(L, beta, anchor_v, K, rounds, sweeps, cfg, rng, gamma=0.5):
    """Iteratively flatten the head histogram over the box ``|v - anchor|_inf <= K``.

    The target occupancy decays like ``exp(-gamma * distance to the axes)``
    so that sampling concentrates where the series is read off.  Statistics
    are pooled over the symmetry orbits of the anchor.
    """
    c = L.coords - L.coords[anchor_v]
    ax, ay = np.abs(c[:, 0]), np.abs(c[:, 1])
    big, small = np.maximum(ax, ay), np.minimum(ax, ay)
    orbit = big * (big + 1) // 2 + small
    inside = big <= K
    n_orb = int(orbit.max()) + 1
    target = np.exp(-gamma * small.astype(float))
    # start from the one-dimensional decay rate per step
    step = phi_potential(beta, 1) - phi_potential(beta, 0)
    bias = step * (ax + ay).astype(float)
    state = (np.zeros(L.n_directed, dtype=np.int64), anchor_v)
    slot_T = np.full(L.n_vertices, beta / 2)[L.tail]
    moves = _moves(L, cfg)
    for r in range(rounds):
        bias = np.where(inside, bias, -1e3)  # keep the head inside the tuned region
        hist = np.zeros(L.n_vertices, dtype=np.int64)
        state = _worm_chunk(state, L, slot_T, bias, cfg, moves, sweeps * (r + 1), rng, hist)
        ho = np.bincount(orbit[inside], weights=hist[inside], minlength=n_orb)
        size = np.bincount(orbit[inside], minlength=n_orb)
        per = np.where(size > 0, ho / np.maximum(size, 1), 0.0)
        tg = np.bincount(orbit[inside], weights=target[inside], minlength=n_orb) / np.maximum(size, 1)
        seen = per > 0
        corr = np.zeros(n_orb)
        norm = np.log(per[seen] / tg[seen]).mean()
        corr[seen] = np.log(per[seen] / tg[seen]) - norm
        corr[~seen & (size > 0)] = -3.0  # unvisited: raise their bias
        bias = bias - corr[orbit] * inside
    bias = np.where(inside, bias, -1e3)
    return bias, state


def estimate_two_point_series(L, beta, k_max, cfg, rng=None, tune_rounds=0, tune_sweeps=200,
                              n_batches=N_BATCHES):
    """``<sigma_0 conj(sigma_(k,0))>`` for ``k = 0..k_max`` from a worm anchored at the centre.

    The four axis directions are averaged.  With ``tune_rounds > 0`` the head
    is biased by an iteratively tuned weight so that large distances are
    visited; the bias is divided out exactly.
    """
    if k_max >= L.n + 1 and isinstance(L, LatticeBox):
        raise ValueError("k_max must be at most n")
    ks = np.arange(k_max + 1)
    if beta == 0:
        est = (ks == 0).astype(float)
        return SeriesEstimate(ks, est, np.zeros(k_max + 1), np.zeros(k_max + 1, int), "two-point")
    rng = make_rng(cfg.seed) if rng is None else rng
    anchor = L.vertex(0, 0)
    if tune_rounds:
        bias, state = _tune_worm_bias(L, beta, anchor, min(k_max + 1, L.n), tune_rounds,
                                      tune_sweeps, cfg, rng)
    else:
        bias, state = np.zeros(L.n_vertices), (np.zeros(L.n_directed, dtype=np.int64), anchor)
    slot_T = np.full(L.n_vertices, beta / 2)[L.tail]
    moves = _moves(L, cfg)
    hist = np.zeros(L.n_vertices, dtype=np.int64)
    state = _worm_chunk(state, L, slot_T, bias, cfg, moves, cfg.burnin, rng, hist)
    per = max(1, (cfg.sweeps - cfg.burnin) // n_batches)
    batches = np.zeros((n_batches, L.n_vertices), dtype=np.int64)
    for b in range(n_batches):
        state = _worm_chunk(state, L, slot_T, bias, cfg, moves, per, rng, batches[b])
    groups = [_axis_vertices(L, (0, 0), k) for k in ks]
    unbias = np.exp(np.minimum(-(bias - bias[anchor]), 700.0))

    def stat(h):
        base = h[anchor]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.array([np.mean(h[g] * unbias[g]) / base for g in groups])

    est, se = jackknife(batches, stat)
    visits = np.array([batches.sum(axis=0)[g].sum() for g in groups])
    flagged = visits < 100
    if np.any(flagged[1:]):
        warnings.warn("some distances were rarely visited by the worm head", RuntimeWarning,
                      stacklevel=2)
    return SeriesEstimate(ks, est, se, visits, "two-point", flagged)


# ---------------------------------------------------------------------------
# height covariance on large boxes by a tilted heat bath


def _column(L, anchor, length):
    a, b = anchor
    return np.array([L.face(a, b + j) for j in range(length)], dtype=np.int64)


def _local_faces(L, anchor, k_max, pad=3):
    a0, b0 = anchor
    out = []
    for b in range(b0 - pad, b0 + k_max + pad + 1):
        for a in range(a0 - pad, a0 + pad + 1):
            f = L.face(a, b)
            if f != L.outer:
                out.append(f)
    return np.array(out, dtype=np.int64)


class _TiltedHeights:
    """Heat bath tilted by ``exp(B[X])`` where ``X`` is the same-sign run up the column."""

    def __init__(self, L, beta, k_max, rng, anchor=(0, 0), local_passes=8):
        self.L, self.beta, self.rng = L, beta, rng
        self.cap = k_max + 1
        self.column = _column(L, anchor, self.cap)
        self.in_column = np.zeros(L.n_faces + 1, dtype=np.bool_)
        self.in_column[self.column] = True
        self.all_faces = np.arange(L.n_faces, dtype=np.int64)
        self.local = _local_faces(L, anchor, k_max)
        self.local_passes = local_passes
        self.amax = 128
        self.phi = phi_table(float(beta), self.amax)
        self.window = 6 + math.ceil(beta)
        self.h = np.zeros(L.n_faces + 1, dtype=np.int64)
        self.x = 0
        self.widened = 0

    def _pass(self, faces, bias):
        u = self.rng.random((faces.size, 2))
        self.x, w = _kernels.biased_heat_bath(self.h, faces, self.L.face_neighbors, self.phi,
                                              self.amax, self.window, u, self.in_column,
                                              self.column, bias, self.x)
        self.widened += w

    def sweep(self, bias, record=None):
        self._pass(self.all_faces, bias)
        for _ in range(self.local_passes):
            self._pass(self.local, bias)
            if record is not None:
                record(self.h, self.x)

    def seat(self, j):
        """Force a run of exactly ``j`` positive faces up the column."""
        self.h[self.column[:j]] = np.maximum(self.h[self.column[:j]], 1)
        if j < self.column.size:
            self.h[self.column[j]] = 0
        self.x = _kernels.column_run(self.h, self.column, self.cap)

    def tune(self, max_sweeps, burnin=5):
        """Bias from adjacent-window umbrella runs: ``B[j+1] - B[j] = -log(P(j+1) / P(j))``."""
        per = max(burnin + 2, max_sweeps // self.cap)
        bias = np.zeros(self.cap + 1)
        for j in range(self.cap):
            win = np.full(self.cap + 1, -np.inf)
            win[j: j + 2] = 0.0
            self.seat(j)
            hist = np.zeros(2)

            def rec(h, x):
                hist[x - j] += 1

            for s in range(per):
                self.sweep(win, rec if s >= burnin else None)
            hist += 0.5  # keeps the log finite when a side is never seen
            bias[j + 1] = bias[j] - math.log(hist[1] / hist[0])
        self.seat(0)
        return bias


def estimate_cov_series_tilted(L, beta, k_max, sweeps, rng, tune_sweeps=2000,
                               n_batches=N_BATCHES, anchor=(0, 0)):
    """``Cov`` and ``SigCov`` along a column from a tilted heat bath, reweighted exactly.

    Returns ``(cov series, sign-cov series)``.
    """
    ks = np.arange(k_max + 1)
    if beta == 0:
        z = np.zeros(k_max + 1)
        return (SeriesEstimate(ks, z, z, np.zeros(k_max + 1, int), "cov-height"),
                SeriesEstimate(ks, z, z, np.zeros(k_max + 1, int), "sigcov-sign"))
    S = _TiltedHeights(L, beta, k_max, rng, anchor)
    bias = S.tune(tune_sweeps) if tune_sweeps else np.zeros(S.cap + 1)
    col = _column(L, anchor, k_max + 1)
    a = col[0]
    # per batch: sum of weights, weighted sums of h_a h_b and of sign products
    acc = np.zeros((n_batches, 1 + 2 * (k_max + 1)))
    per = max(1, sweeps // n_batches)
    ebias = np.exp(-(bias - bias.max()))
    # flipping the nonzero cluster of the anchor is a symmetry of both the plain
    # and the tilted law, so pairs outside that cluster contribute zero on average
    stamp = np.zeros(L.n_faces + 1, dtype=np.int64)
    stack = np.empty(L.n_faces + 1, dtype=np.int64)
    tag = [0]
    for b in range(n_batches):
        row = acc[b]

        def rec(h, x):
            w = ebias[x]
            row[0] += w
            if h[a] == 0:
                return
            tag[0] += 1
            _kernels.nonzero_cluster(h, L.face_neighbors, a, stamp, tag[0], stack)
            inside = stamp[col] == tag[0]
            row[1: k_max + 2] += np.where(inside, w * h[a] * h[col], 0.0)
            row[k_max + 2:] += np.where(inside, w * np.sign(h[a]) * np.sign(h[col]), 0.0)

        for _ in range(per):
            S.sweep(bias, rec)
    if S.widened:
        warnings.warn(f"heat-bath window widened {S.widened} times", RuntimeWarning, stacklevel=2)

    def stat(t):
        return t[1:] / t[0]

    est, se = jackknife(acc, stat)
    N = np.full(k_max + 1, n_batches * per * S.local_passes)
    cov = SeriesEstimate(ks, est[: k_max + 1], se[: k_max + 1], N, "cov-height")
    sig = SeriesEstimate(ks, est[k_max + 1:], se[k_max + 1:], N, "sigcov-sign")
    return cov, sig


# ---------------------------------------------------------------------------
# main-theorem demonstration


@dataclass
class DemoReport:
    beta: float
    n: int
    window: tuple
    xy: SeriesEstimate | None
    cov: SeriesEstimate | None
    sigcov: SeriesEstimate | None
    fit_xy: MassFit | None
    fit_height: MassFit | None
    fit_sigcov: MassFit | None
    ratio: float | None
    ratio_ci: tuple | None
    notes: list = field(default_factory=list)

    @property
    def complete(self):
        return self.ratio is not None

    def to_json(self):
        def fit(f):
            return None if f is None else json.loads(f.to_json())

        return json.dumps({
            "beta": self.beta, "n": self.n, "window": list(self.window),
            "m_xy": fit(self.fit_xy), "m_height": fit(self.fit_height),
            "m_height_sigcov": fit(self.fit_sigcov),
            "ratio": self.ratio, "ratio_ci": None if self.ratio_ci is None else list(self.ratio_ci),
            "complete": self.complete, "notes": self.notes,
        }, indent=2, sort_keys=True)


def ratio_ci(num, den, level=0.95):
    """Delta-method interval for ``num.mass / den.mass``."""
    r = num.mass / den.mass
    rel = math.hypot(num.se / num.mass, den.se / den.mass)
    q = stats.norm.ppf(0.5 + level / 2)
    return r, (r - q * r * rel, r + q * r * rel)


def synthetic_series(rate, k_max, amplitude=1.0, label="synthetic"):
    ks = np.arange(k_max + 1)
    est = amplitude * np.exp(-rate * ks)
    return SeriesEstimate(ks, est, np.zeros_like(est), np.zeros(k_max + 1, int), label)


def main_theorem_demo(beta=0.5, n=24, seed=0, xy_sweeps=4000, height_sweeps=20000,
                      synthetic=None, window=None, tune_rounds=6):
    """Fit both masses on ``Lambda_n`` and report ``m_Height / m_XY``.

    ``synthetic=(rate_xy, rate_height)`` bypasses sampling with exact series.
    """
    window = fit_window(n) if window is None else tuple(window)
    notes = []
    if n < 8:
        warnings.warn("box too small: the fit window is degenerate", RuntimeWarning, stacklevel=2)
        notes.append("fit window degenerate for n < 8")
    k_max = window[1]
    if synthetic is not None:
        xy = synthetic_series(synthetic[0], k_max, label="two-point")
        cov = synthetic_series(synthetic[1], k_max, label="cov-height")
        sig = None
    else:
        L = LatticeBox(n)
        cfg = McmcConfig(sweeps=xy_sweeps, burnin=max(1, xy_sweeps // 10), seed=seed, p_worm=0.5)
        xy = estimate_two_point_series(L, beta, k_max, cfg, rng=make_rng(seed, 1),
                                       tune_rounds=tune_rounds, tune_sweeps=max(1, xy_sweeps // 40))
        cov, sig = estimate_cov_series_tilted(L, beta, k_max, height_sweeps, make_rng(seed, 2),
                                              tune_sweeps=max(1, height_sweeps // 4))
    fits = {}
    for name, s in (("xy", xy), ("height", cov), ("sigcov", sig)):
        if s is None:
            fits[name] = None
            continue
        try:
            fits[name] = fit_mass(s, window)
        except ValueError as exc:
            fits[name] = None
            notes.append(f"{name} fit failed: {exc}")
    r = ci = None
    if fits["xy"] is not None and fits["height"] is not None:
        r, ci = ratio_ci(fits["height"], fits["xy"])
    return DemoReport(beta, n, window, xy, cov, sig, fits["xy"], fits["height"], fits["sigcov"],
                      r, ci, notes)
