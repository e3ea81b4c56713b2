"""Finite simple graphs and square-lattice boxes.

Directed edges live in ``2 * n_edges`` contiguous slots: slot ``2 * e`` is the
edge ``edges[e, 0] -> edges[e, 1]`` and slot ``2 * e + 1`` its reversal, so
``reverse(d) == d ^ 1``.  Currents are integer arrays indexed by these slots.
"""

from __future__ import annotations

import json
from collections import deque

import numpy as np
from scipy import sparse

__all__ = [
    "FiniteGraph",
    "LatticeBox",
    "build_lattice",
    "faces_of_edge",
    "source_function",
    "reverse",
    "single_edge",
    "path_graph",
    "cycle_graph",
    "complete_graph",
    "connected_small_graphs",
]


def reverse(d):
    """Index of the reversed directed edge."""
    return np.bitwise_xor(d, 1)


class FiniteGraph:
    """A finite simple graph with indexed vertices and paired directed edges."""

    def __init__(self, n_vertices, edges, coords=None):
        n_vertices = int(n_vertices)
        if n_vertices < 0:
            raise ValueError("n_vertices must be nonnegative")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n_vertices):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        keys = {tuple(sorted(map(int, e))) for e in edges}
        if len(keys) != len(edges):
            raise ValueError("duplicate edges are not allowed")

        self.n_vertices = n_vertices
        self.edges = edges
        self.n_edges = len(edges)
        self.coords = None if coords is None else np.asarray(coords, dtype=np.int64)

        m2 = 2 * self.n_edges
        self.tail = np.empty(m2, dtype=np.int64)
        self.head = np.empty(m2, dtype=np.int64)
        self.tail[0::2], self.head[0::2] = edges[:, 0], edges[:, 1]
        self.tail[1::2], self.head[1::2] = edges[:, 1], edges[:, 0]

        order = np.argsort(self.tail, kind="stable")
        self.out_ptr = np.zeros(n_vertices + 1, dtype=np.int64)
        np.add.at(self.out_ptr, self.tail + 1, 1)
        self.out_ptr = np.cumsum(self.out_ptr)
        self.out_edges = order.astype(np.int64)
        self.degree = np.diff(self.out_ptr)
        self._index = {(int(t), int(h)): d for d, (t, h) in enumerate(zip(self.tail, self.head))}

    @property
    def n_directed(self):
        return 2 * self.n_edges

    def __repr__(self):
        return f"{type(self).__name__}(n_vertices={self.n_vertices}, n_edges={self.n_edges})"

    def directed_index(self, u, v):
        """Slot of the directed edge ``u -> v``."""
        try:
            return self._index[(int(u), int(v))]
        except KeyError:
            raise KeyError(f"no edge {u} -> {v}") from None

    def neighbors(self, v):
        return self.head[self.out_edges[self.out_ptr[v]:self.out_ptr[v + 1]]]

    def outgoing(self, v):
        return self.out_edges[self.out_ptr[v]:self.out_ptr[v + 1]]

    def divergence(self, currents):
        """Source function of one current ``(2m,)`` or a batch ``(S, 2m)``."""
        currents = np.asarray(currents)
        return np.asarray(self.incidence @ currents.T).T

    @property
    def incidence(self):
        """Sparse ``(n_vertices, 2m)`` matrix, ``+1`` at the tail and ``-1`` at the head."""
        if not hasattr(self, "_incidence"):
            idx = np.arange(self.n_directed)
            data = np.concatenate([np.ones(self.n_directed, np.int64), -np.ones(self.n_directed, np.int64)])
            self._incidence = sparse.csr_array(
                (data, (np.concatenate([self.tail, self.head]), np.concatenate([idx, idx]))),
                shape=(self.n_vertices, self.n_directed))
        return self._incidence

    def components(self):
        """Connected-component label per vertex."""
        labels = -np.ones(self.n_vertices, dtype=np.int64)
        c = 0
        for s in range(self.n_vertices):
            if labels[s] >= 0:
                continue
            labels[s] = c
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self.neighbors(u):
                    if labels[w] < 0:
                        labels[w] = c
                        queue.append(w)
            c += 1
        return labels

    def spanning_forest(self):
        """BFS spanning forest.

        Returns ``(parent, parent_edge, order)``: ``parent_edge[v]`` is the
        directed slot ``parent[v] -> v`` (``-1`` at roots) and ``order`` lists
        vertices so that parents come first.
        """
        parent = -np.ones(self.n_vertices, dtype=np.int64)
        parent_edge = -np.ones(self.n_vertices, dtype=np.int64)
        seen = np.zeros(self.n_vertices, dtype=bool)
        order = []
        for s in range(self.n_vertices):
            if seen[s]:
                continue
            seen[s] = True
            queue = deque([s])
            while queue:
                u = queue.popleft()
                order.append(u)
                for d in self.outgoing(u):
                    w = self.head[d]
                    if not seen[w]:
                        seen[w] = True
                        parent[w] = u
                        parent_edge[w] = d
                        queue.append(w)
        return parent, parent_edge, np.asarray(order, dtype=np.int64)

    def fundamental_cycles(self):
        """Directed fundamental cycles of the BFS forest, one per chord.

        Each cycle is an array of directed slots forming a closed walk that
        starts with the chord in its ``2 * e`` orientation.
        """
        parent, parent_edge, order = self.spanning_forest()
        tree = set((parent_edge[parent_edge >= 0] // 2).tolist())
        depth = np.zeros(self.n_vertices, dtype=np.int64)
        for v in order:
            if parent[v] >= 0:
                depth[v] = depth[parent[v]] + 1
        cycles = []
        for e in range(self.n_edges):
            if e in tree:
                continue
            p, q = self.edges[e]
            # walk q -> p through the tree: q up to the LCA, then down to p
            up, down = [], []
            a, b = int(q), int(p)
            while a != b:
                if depth[a] >= depth[b]:
                    up.append(int(parent_edge[a]) ^ 1)  # a -> parent(a)
                    a = int(parent[a])
                else:
                    down.append(int(parent_edge[b]))  # parent(b) -> b
                    b = int(parent[b])
            cycles.append(np.asarray([2 * e] + up + down[::-1], dtype=np.int64))
        return cycles

    def induced_subgraph(self, vertices):
        """Subgraph induced by ``vertices``; returns ``(graph, old_to_new)``."""
        vertices = [int(v) for v in vertices]
        index = {v: i for i, v in enumerate(vertices)}
        sub = [(index[a], index[b]) for a, b in self.edges.tolist() if a in index and b in index]
        coords = None if self.coords is None else self.coords[vertices]
        return FiniteGraph(len(vertices), sub, coords=coords), index

    def to_json(self):
        vertices = (self.coords.tolist() if self.coords is not None
                    else [[v] for v in range(self.n_vertices)])
        return json.dumps({"n": getattr(self, "n", None), "vertices": vertices,
                           "edges": self.edges.tolist()})


class LatticeBox(FiniteGraph):
    """The box ``[-n, n]^2`` of the square lattice with its faces.

    Interior faces are indexed by their lower-left corner ``(a, b)`` in
    ``[-n, n)^2`` as ``(b + n) * 2n + (a + n)``; the outer face has index
    ``n_faces`` and stands for every face outside the box.
    """

    def __init__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("box radius must be nonnegative")
        self.n = n
        side = 2 * n + 1
        xs, ys = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1))
        coords = np.stack([xs.ravel(), ys.ravel()], axis=1)
        vid = np.arange(side * side).reshape(side, side)  # [y + n, x + n]
        horiz = np.stack([vid[:, :-1].ravel(), vid[:, 1:].ravel()], axis=1)
        vert = np.stack([vid[:-1, :].ravel(), vid[1:, :].ravel()], axis=1)
        super().__init__(side * side, np.concatenate([horiz, vert]).reshape(-1, 2), coords=coords)
        self.n_horizontal = len(horiz)

        w = 2 * n
        self.n_faces = w * w
        self.outer = self.n_faces
        fa, fb = np.meshgrid(np.arange(-n, n), np.arange(-n, n))
        self.face_coords = np.stack([fa.ravel(), fb.ravel()], axis=1).astype(np.int64)

        # right face of x -> y is centred at midpoint + (dy, -dx) / 2
        c = self.coords
        dx = c[self.head] - c[self.tail]
        mid2 = c[self.head] + c[self.tail]  # twice the midpoint
        right_centre2 = mid2 + np.stack([dx[:, 1], -dx[:, 0]], axis=1)
        left_centre2 = mid2 - np.stack([dx[:, 1], -dx[:, 0]], axis=1)
        self.edge_faces = np.stack([self._face_from_centre2(right_centre2),
                                    self._face_from_centre2(left_centre2)], axis=1)
        self.dual_edges = self.edge_faces[0::2].copy()

        # neighbours across bottom, right, top, left (outer where absent)
        nbrs = np.full((self.n_faces, 4), self.outer, dtype=np.int64)
        for k, (da, db) in enumerate([(0, -1), (1, 0), (0, 1), (-1, 0)]):
            nbrs[:, k] = self.face(self.face_coords[:, 0] + da, self.face_coords[:, 1] + db)
        self.face_neighbors = nbrs

        # clockwise boundary of each face: (a,b) -> (a,b+1) -> (a+1,b+1) -> (a+1,b)
        plaq = np.empty((self.n_faces, 4), dtype=np.int64)
        if self.n_faces:
            a, b = self.face_coords[:, 0], self.face_coords[:, 1]
            corners = [self.vertex(a, b), self.vertex(a, b + 1),
                       self.vertex(a + 1, b + 1), self.vertex(a + 1, b)]
            for k in range(4):
                u, v = corners[k], corners[(k + 1) % 4]
                plaq[:, k] = [self.directed_index(s, t) for s, t in zip(u, v)]
        self.plaquettes = plaq

        # comb dual tree: each face hangs off the face below it, bottom row off the outer face
        self.tree_edge = np.empty(self.n_faces, dtype=np.int64)
        self.tree_sign = np.empty(self.n_faces, dtype=np.int64)
        for f in range(self.n_faces):
            a, b = self.face_coords[f]
            e = self.directed_index(self.vertex(a, b), self.vertex(a + 1, b)) // 2
            r, _ = self.dual_edges[e]
            self.tree_edge[f] = e
            self.tree_sign[f] = 1 if r == f else -1

    def _face_from_centre2(self, centre2):
        return self.face((centre2[:, 0] - 1) // 2, (centre2[:, 1] - 1) // 2)

    def vertex(self, x, y):
        """Vertex index of ``(x, y)``; works elementwise on arrays."""
        x, y = np.asarray(x), np.asarray(y)
        if np.any((np.abs(x) > self.n) | (np.abs(y) > self.n)):
            raise KeyError("vertex outside the box")
        v = (y + self.n) * (2 * self.n + 1) + (x + self.n)
        return int(v) if v.ndim == 0 else v

    def face(self, a, b):
        """Face index of the face with lower-left corner ``(a, b)``, or the outer face."""
        a, b = np.asarray(a), np.asarray(b)
        n = self.n
        inside = (a >= -n) & (a < n) & (b >= -n) & (b < n)
        f = np.where(inside, (b + n) * (2 * n) + (a + n), self.outer)
        return int(f) if f.ndim == 0 else f.astype(np.int64)

    def face_grid(self, values):
        """Interior face values as a ``(2n, 2n)`` array indexed ``[b + n, a + n]``."""
        values = np.asarray(values)
        return values[..., : self.n_faces].reshape(values.shape[:-1] + (2 * self.n, 2 * self.n))


def build_lattice(n):
    """Square-lattice box ``Lambda_n`` with faces."""
    return LatticeBox(n)


def faces_of_edge(L, d):
    """``(right face, left face)`` of directed edge ``d``, walking along the edge."""
    d = int(d)
    if not 0 <= d < L.n_directed:
        raise KeyError(f"unknown directed edge {d}")
    r, l = L.edge_faces[d]
    return int(r), int(l)


def source_function(G, current):
    """Net outflow ``x -> sum_y (n_xy - n_yx)`` at each vertex."""
    current = np.asarray(current)
    if current.shape[-1] != G.n_directed:
        raise ValueError("current must be defined on every directed edge")
    return G.divergence(current)


def single_edge():
    return FiniteGraph(2, [(0, 1)])


def path_graph(k):
    return FiniteGraph(k, [(i, i + 1) for i in range(k - 1)])


def cycle_graph(k):
    return FiniteGraph(k, [(i, (i + 1) % k) for i in range(k)])


def complete_graph(k):
    return FiniteGraph(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


def connected_small_graphs(max_vertices=4):
    """All connected simple graphs on 1..max_vertices vertices, up to isomorphism."""
    import networkx as nx

    out = []
    for g in nx.graph_atlas_g():
        if 0 < g.number_of_nodes() <= max_vertices and nx.is_connected(g):
            out.append(FiniteGraph(g.number_of_nodes(), list(g.edges())))
    return out
