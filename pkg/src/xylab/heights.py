"""Height functions on the faces of a box, their Gibbs sampler, and the Ising/FK coupling.

Heights live in arrays of length ``n_faces + 1``; the last entry is the outer
face and is always 0.  Crossing a directed edge ``xy`` from its left face to
its right face raises the height by ``n_xy - n_yx``.
"""

from __future__ import annotations

import json
import math
import warnings

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .oracle import phi_table

__all__ = [
    "InconsistentHeight",
    "height_from_current",
    "sign_field",
    "vertical_crossings",
    "cycle_windings",
    "windings_from_labels",
    "surrounding_count",
    "gibbs_height_sweep",
    "gibbs_heights",
    "ising_couplings",
    "fk_edges",
    "fk_components",
    "connectivity",
    "height_csv",
    "fk_json",
]


class InconsistentHeight(RuntimeError):
    """Integration around some dual loop is not closed (a convention bug)."""


def height_from_current(L, n):
    """Integrate the antisymmetric part of a sourceless current from the outer face."""
    n = np.asarray(n)
    if np.any(L.divergence(n) != 0):
        raise ValueError("height function needs a sourceless current")
    net = n[0::2] - n[1::2]
    h = np.zeros(L.n_faces + 1, dtype=np.int64)
    if L.n_faces:
        # comb dual tree: each column of faces integrated upward from the outer face
        steps = L.face_grid(L.tree_sign * net[L.tree_edge])
        h[: L.n_faces] = np.cumsum(steps, axis=0).ravel()
    r, l = L.dual_edges[:, 0], L.dual_edges[:, 1]
    if not np.array_equal(h[r] - h[l], net):
        raise InconsistentHeight("height increments disagree with the current on some edge")
    return h


def sign_field(h):
    return np.sign(np.asarray(h)).astype(np.int64)


def vertical_crossings(L):
    """Per directed edge: ``(row, column, dy)`` of vertical edges, ``dy = 0`` if horizontal."""
    cached = getattr(L, "_crossings_cache", None)
    if cached is not None:
        return cached
    c = L.coords
    dy = (c[L.head, 1] - c[L.tail, 1]).astype(np.int64)
    row = np.minimum(c[L.head, 1], c[L.tail, 1]) + L.n
    col = c[L.tail, 0] + L.n
    L._crossings_cache = (row.astype(np.int64), col.astype(np.int64), dy)
    return L._crossings_cache


def cycle_windings(L, part):
    """Clockwise winding number of every cycle around every interior face.

    Counted along a ray from the face centre towards increasing ``x``: a cycle
    edge crossing it downwards contributes ``+1``.  Shape ``(n_cycles, n_faces)``.
    """
    return windings_from_labels(L, part.pes.edges, part.labels(), len(part))


def windings_from_labels(L, slots, labels, n_cycles):
    """``cycle_windings`` from per-point cycle labels."""
    w = 2 * L.n
    nc = n_cycles
    if nc == 0 or L.n_faces == 0:
        return np.zeros((nc, L.n_faces), dtype=np.int64)
    row, col, dy = vertical_crossings(L)
    vert = dy[slots] != 0
    sv = slots[vert]
    cnt = np.zeros((nc, w, w + 2), dtype=np.int64)
    np.add.at(cnt, (labels[vert], row[sv], col[sv]), -dy[sv])
    # face column a sees the edges in columns a+1 .. 2n
    tail = np.cumsum(cnt[:, :, ::-1], axis=2)[:, :, ::-1]
    return tail[:, :, 1: w + 1].reshape(nc, -1)


def surrounding_count(L, part, a, b, windings=None):
    """Number of cycles surrounding both faces ``a`` and ``b`` (either orientation)."""
    if a == L.outer or b == L.outer:
        return 0
    W = cycle_windings(L, part) if windings is None else windings
    return int(np.sum(np.abs(W[:, a]) * np.abs(W[:, b])))


def _window(beta):
    return 6 + math.ceil(beta)


def gibbs_height_sweep(L, beta, h, rng, window=None):
    """One heat-bath pass over the interior faces; returns the new field."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    h = np.array(h, dtype=np.int64)
    h[L.outer] = 0
    amax = 128
    phi = phi_table(float(beta), amax)
    widened = _kernels.heat_bath_sweep(h, L.face_neighbors, phi, amax,
                                       _window(beta) if window is None else window,
                                       rng.random(L.n_faces))
    if widened:
        warnings.warn(f"heat-bath window widened {widened} times", RuntimeWarning, stacklevel=2)
    return h


def gibbs_heights(L, beta, n_samples, rng, burnin=100, thin=1, h=None):
    """Thinned heat-bath samples, shape ``(n_samples, n_faces + 1)``."""
    h = np.zeros(L.n_faces + 1, dtype=np.int64) if h is None else np.array(h, np.int64)
    amax = 128
    phi = phi_table(float(beta), amax)
    out = np.empty((n_samples, L.n_faces + 1), dtype=np.int64)
    widened = 0
    for s in range(burnin + n_samples * thin):
        widened += _kernels.heat_bath_sweep(h, L.face_neighbors, phi, amax, _window(beta),
                                            rng.random(L.n_faces))
        if s >= burnin and (s - burnin) % thin == 0:
            out[(s - burnin) // thin] = h
    if widened:
        warnings.warn(f"heat-bath window widened {widened} times", RuntimeWarning, stacklevel=2)
    return out


def ising_couplings(L, H, beta):
    """``K = (Phi(H_r + H_l) - Phi(H_r - H_l)) / 2`` on every dual edge (indexed by primal edge)."""
    H = np.asarray(H, dtype=np.int64)
    if np.any(H < 0) or H[L.outer] != 0:
        raise ValueError("H must be nonnegative and vanish on the outer face")
    amax = max(128, int(2 * H.max()) + 1)
    phi = phi_table(float(beta), amax)
    r, l = L.dual_edges[:, 0], L.dual_edges[:, 1]
    return 0.5 * (phi[H[r] + H[l] + amax] - phi[H[r] - H[l] + amax])


def fk_edges(L, s, K, rng):
    """Open each dual edge between equal nonzero signs with probability ``1 - exp(-2K)``."""
    s = np.asarray(s)
    r, l = L.dual_edges[:, 0], L.dual_edges[:, 1]
    allowed = (s[r] == s[l]) & (s[r] != 0)
    return allowed & (rng.random(L.n_edges) < -np.expm1(-2 * np.asarray(K)))


def fk_components(L, open_edges):
    """Component label of every face (outer face included) under the open dual edges."""
    r, l = L.dual_edges[open_edges, 0], L.dual_edges[open_edges, 1]
    nf = L.n_faces + 1
    adj = coo_array((np.ones(r.size), (r, l)), shape=(nf, nf))
    _, labels = connected_components(adj, directed=False)
    return labels


def connectivity(labels, a, b):
    return bool(labels[a] == labels[b])


def height_csv(L, h):
    """CSV text with rows ``face_x,face_y,h`` for the interior faces."""
    lines = ["face_x,face_y,h"]
    for (a, b), v in zip(L.face_coords.tolist(), np.asarray(h)[: L.n_faces].tolist()):
        lines.append(f"{a},{b},{v}")
    return "\n".join(lines) + "\n"


def fk_json(L, open_edges):
    """FK components as adjacency lists over faces (outer face is ``"outer"``)."""
    adj = {}
    for e in np.flatnonzero(open_edges):
        r, l = (int(v) for v in L.dual_edges[e])
        adj.setdefault(r, []).append(l)
        adj.setdefault(l, []).append(r)
    name = lambda f: "outer" if f == L.outer else str(f)
    return json.dumps({name(k): sorted(name(v) for v in vs) for k, vs in sorted(adj.items())})
