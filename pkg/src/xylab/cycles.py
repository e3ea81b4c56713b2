"""Cycle partitions of sourceless Poisson edge sets.

A point set is peeled in layers: every vertex points along its outgoing point
of largest time, the cycles of that functional graph form the top layer, and
the procedure repeats on what is left.  Points are referred to by their rank,
i.e. their position in the ``(time, edge)`` order of the ``PoissonEdgeSet``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

import numpy as np

from . import _kernels
from .sampler import PoissonEdgeSet

__all__ = [
    "Cycle",
    "CyclePartition",
    "ExplorationTrace",
    "ImproperInput",
    "decompose",
    "cycle_labels",
    "order_relation",
    "is_proper_partition",
    "brute_force_proper_partitions",
    "time_invert",
    "direction_invert",
    "flip_cycles",
    "resample_orientations",
    "explore",
    "up_set",
]


class ImproperInput(ValueError):
    """The candidate is not a disjoint cover of the point set by cycles."""


@dataclass(frozen=True)
class Cycle:
    """Points of one cycle (ranks into the parent set) in traversal order."""

    points: tuple

    def slots(self, pes):
        return pes.edges[list(self.points)]

    def vertices(self, G, pes):
        return G.tail[self.slots(pes)]

    def activation(self, G, pes):
        """``{vertex: time of the outgoing point at that vertex}``."""
        idx = list(self.points)
        return dict(zip(G.tail[pes.edges[idx]].tolist(), pes.times[idx].tolist()))


@dataclass
class CyclePartition:
    pes: PoissonEdgeSet
    cycles: list
    layers: np.ndarray

    def __len__(self):
        return len(self.cycles)

    def labels(self):
        """Cycle index of every point."""
        lab = np.full(len(self.pes), -1, dtype=np.int64)
        for c, cyc in enumerate(self.cycles):
            lab[list(cyc.points)] = c
        return lab

    def as_sets(self):
        """The partition as a set of frozensets of ``(edge, time)`` points."""
        e, t = self.pes.edges, self.pes.times
        return {frozenset((int(e[p]), float(t[p])) for p in c.points) for c in self.cycles}

    def to_json(self):
        e, t = self.pes.edges, self.pes.times
        return json.dumps({"cycles": [
            {"edges": [[int(e[p]), float(t[p])] for p in c.points], "layer": int(k)}
            for c, k in zip(self.cycles, self.layers)]})


def decompose(G, pes):
    """Layer-peeling cycle partition of a sourceless point set."""
    if len(pes) > 1:
        same = (np.diff(pes.times) == 0) & (np.diff(pes.edges) == 0)
        if np.any(same):
            raise ValueError("duplicate points: apply the (time, edge) order upstream")
    if np.any(G.divergence(pes.counts(G)) != 0):
        raise ValueError("point set has sources; only sourceless sets decompose into cycles")
    flat, ptr, layer, status = _kernels.decompose_points(
        pes.edges, G.tail.astype(np.int64), G.head.astype(np.int64), G.n_vertices)
    if status != 0:
        raise RuntimeError("peeling got stuck on a sourceless set")
    cycles = [Cycle(tuple(flat[ptr[c]:ptr[c + 1]].tolist())) for c in range(len(layer))]
    return CyclePartition(pes, cycles, np.asarray(layer))


def cycle_labels(G, pes):
    """Fast path: cycle index of every point and the number of cycles (no validation)."""
    flat, ptr, layer, status = _kernels.decompose_points(
        pes.edges, G.tail.astype(np.int64), G.head.astype(np.int64), G.n_vertices)
    if status != 0:
        raise ValueError("point set has sources")
    lab = np.empty(len(pes), dtype=np.int64)
    lab[flat] = np.repeat(np.arange(len(layer)), np.diff(ptr))
    return lab, len(layer)


def _validate_cover(G, pes, cycles):
    seen = np.zeros(len(pes), dtype=bool)
    for cyc in cycles:
        pts = list(cyc.points)
        if not pts:
            raise ImproperInput("empty cycle")
        if np.any(seen[pts]):
            raise ImproperInput("cycles overlap")
        seen[pts] = True
        slots = pes.edges[pts]
        tails, heads = G.tail[slots], G.head[slots]
        if len(set(tails.tolist())) != len(pts):
            raise ImproperInput("cycle visits a vertex twice")
        if not np.array_equal(np.roll(tails, -1), heads):
            raise ImproperInput("points do not close up into a cycle")
    if not np.all(seen):
        raise ImproperInput("cycles do not cover the point set")


def order_relation(G, pes, cycles):
    """Raw comparisons ``(i, j)``: cycles ``i != j`` share a vertex where ``a(i) < a(j)``."""
    at_vertex = {}
    for i, cyc in enumerate(cycles):
        for v, t in cyc.activation(G, pes).items():
            at_vertex.setdefault(v, []).append((t, i))
    pairs = set()
    for lst in at_vertex.values():
        lst.sort()
        for (t1, i), (t2, j) in zip(lst, lst[1:]):
            pairs.add((i, j))  # consecutive pairs generate the same closure
    return pairs


def is_proper_partition(G, pes, cycles):
    """Whether the induced order on the cycle cover is a partial order."""
    cycles = cycles.cycles if isinstance(cycles, CyclePartition) else cycles
    _validate_cover(G, pes, cycles)
    ts = TopologicalSorter({i: set() for i in range(len(cycles))})
    for i, j in order_relation(G, pes, cycles):
        ts.add(j, i)
    try:
        ts.prepare()
    except CycleError:
        return False
    return True


def _all_cycle_covers(G, pes):
    """Every partition of the points into cycles (as lists of ``Cycle``)."""
    tails = G.tail[pes.edges].tolist()
    heads = G.head[pes.edges].tolist()
    L = len(pes)
    out_of = {}
    for p in range(L):
        out_of.setdefault(tails[p], []).append(p)

    def cycles_from(start, used):
        # simple cycles through point `start` using unused points, start vertex first
        s = tails[start]
        stack = [(start, [start], {s})]
        while stack:
            p, path, verts = stack.pop()
            v = heads[p]
            if v == s:
                yield path
                continue
            if v in verts:
                continue
            for q in out_of.get(v, []):
                if not used[q]:
                    stack.append((q, path + [q], verts | {v}))

    results = []

    def rec(used, acc):
        free = [p for p in range(L) if not used[p]]
        if not free:
            results.append(list(acc))
            return
        p0 = free[0]
        for path in cycles_from(p0, used):
            for q in path:
                used[q] = True
            acc.append(Cycle(tuple(path)))
            rec(used, acc)
            acc.pop()
            for q in path:
                used[q] = False

    rec([False] * L, [])
    return results


def brute_force_proper_partitions(G, pes, max_points=12):
    """All proper cycle partitions, by exhaustive enumeration of cycle covers."""
    if len(pes) > max_points:
        raise ValueError(f"brute force is limited to {max_points} points")
    return [covers for covers in _all_cycle_covers(G, pes) if is_proper_partition(G, pes, covers)]


def time_invert(G, pes, T):
    """``(xy, tau) -> (xy, T_x - tau)``."""
    T = np.asarray(T, float)
    top = T[G.tail[pes.edges]]
    return PoissonEdgeSet(pes.edges, top - pes.times)


def _inverse_points(pes, cyc):
    idx = np.asarray(cyc.points, dtype=np.int64)
    slots = pes.edges[idx] ^ 1
    times = pes.times[np.roll(idx, -1)]
    return slots, times


def direction_invert(pes, cyc):
    """The reversed cycle as a standalone point set (vertex activation times kept)."""
    slots, times = _inverse_points(pes, cyc)
    return PoissonEdgeSet(slots, times)


def _self_inverse(pes, cyc):
    slots, times = _inverse_points(pes, cyc)
    own = set(zip(pes.edges[list(cyc.points)].tolist(), pes.times[list(cyc.points)].tolist()))
    return own == set(zip(slots.tolist(), times.tolist()))


def flip_cycles(part, which):
    """Point set with the cycles listed in ``which`` direction-inverted."""
    pes = part.pes
    edges, times = pes.edges.copy(), pes.times.copy()
    for c in which:
        cyc = part.cycles[c]
        slots, t = _inverse_points(pes, cyc)
        idx = list(cyc.points)
        edges[idx] = slots
        times[idx] = t
    return PoissonEdgeSet(edges, times)


def resample_orientations(G, pes, rng, part=None):
    """Flip each cycle that differs from its inverse with probability 1/2."""
    part = decompose(G, pes) if part is None else part
    coins = rng.random(len(part)) < 0.5
    which = [c for c in range(len(part)) if coins[c] and not _self_inverse(pes, part.cycles[c])]
    return flip_cycles(part, which)


@dataclass
class ExplorationTrace:
    walk: list  # vertex sequence
    used: np.ndarray  # ranks of the points used, in order of use
    hit: bool


def explore(G, pes, x, T=None, target=None, budget=None):
    """Walk from ``x`` using, at each vertex, the unused outgoing point of largest time.

    Exactly one stop rule applies: ``target=y`` stops on first arrival at
    ``y``; ``budget=s`` (needs ``T``) stops at ``x`` once the next point there
    would push the time spent at ``x`` (``T_x`` minus its time) beyond ``s``.
    """
    if (target is None) == (budget is None):
        raise ValueError("give exactly one of target or budget")
    stacks = {}
    for p in range(len(pes)):  # increasing rank, so the stack top is the latest time
        stacks.setdefault(int(G.tail[pes.edges[p]]), []).append(p)
    v = int(x)
    walk, used = [v], []
    while True:
        if budget is not None and v == x:
            st = stacks.get(v)
            if not st or T[x] - pes.times[st[-1]] > budget:
                return ExplorationTrace(walk, np.asarray(used, dtype=np.int64), True)
        st = stacks.get(v)
        if not st:
            return ExplorationTrace(walk, np.asarray(used, dtype=np.int64), False)
        p = st.pop()
        used.append(p)
        v = int(G.head[pes.edges[p]])
        walk.append(v)
        if target is not None and v == target:
            return ExplorationTrace(walk, np.asarray(used, dtype=np.int64), True)


def up_set(G, part, c):
    """Indices of all cycles ``c'`` with ``c <= c'``."""
    succ = {}
    for i, j in order_relation(G, part.pes, part.cycles):
        succ.setdefault(i, set()).add(j)
    seen, stack = {c}, [c]
    while stack:
        i = stack.pop()
        for j in succ.get(i, ()):
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return seen
