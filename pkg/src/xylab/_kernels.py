"""Numba kernels for the samplers and the cycle decomposition.

Random numbers are drawn outside the kernels and passed in as uniform arrays,
so a chain is a pure function of its seed whatever the chunking.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _pick(u, k):
    i = int(u * k)
    return k - 1 if i >= k else i


@njit(cache=True)
def _pair_move(n, slot_T, e, up, acc):
    a = 2 * e
    b = a + 1
    if up:
        ratio = slot_T[a] * slot_T[b] / ((n[a] + 1.0) * (n[b] + 1.0))
        if acc < ratio:
            n[a] += 1
            n[b] += 1
    else:
        if n[a] == 0 or n[b] == 0:
            return
        ratio = n[a] * n[b] / (slot_T[a] * slot_T[b])
        if acc < ratio:
            n[a] -= 1
            n[b] -= 1


@njit(cache=True)
def _cycle_move(n, slot_T, cyc_ptr, cyc_slots, c, q, acc):
    # q in 0..3: bit 0 flips the orientation, bit 1 selects removal
    flip = q & 1
    down = q >> 1
    ratio = 1.0
    for j in range(cyc_ptr[c], cyc_ptr[c + 1]):
        d = cyc_slots[j] ^ flip
        if down:
            if n[d] == 0:
                return
            ratio *= n[d] / slot_T[d]
        else:
            ratio *= slot_T[d] / (n[d] + 1.0)
    if acc < ratio:
        for j in range(cyc_ptr[c], cyc_ptr[c + 1]):
            d = cyc_slots[j] ^ flip
            if down:
                n[d] -= 1
            else:
                n[d] += 1


@njit(cache=True)
def sourceless_moves(n, slot_T, cyc_ptr, cyc_slots, p_pair, u):
    """Metropolis pair and oriented-cycle moves; ``u`` has shape ``(moves, 4)``."""
    m = n.size // 2
    n_cyc = cyc_ptr.size - 1
    for i in range(u.shape[0]):
        if m == 0:
            break
        if u[i, 0] < p_pair or n_cyc == 0:
            _pair_move(n, slot_T, _pick(u[i, 1], m), u[i, 2] < 0.5, u[i, 3])
        else:
            _cycle_move(n, slot_T, cyc_ptr, cyc_slots, _pick(u[i, 1], n_cyc),
                        _pick(u[i, 2], 4), u[i, 3])


@njit(cache=True)
def worm_moves(n, head, slot_T, out_ptr, out_slots, slot_head, bias,
               cyc_ptr, cyc_slots, p_worm, p_pair, u, hist):
    """Worm with a free head; the tail sits at the anchor implicitly.

    The state weight is ``prod T^n/n! * exp(bias[head])``.  ``hist[head]`` is
    incremented after every move.  Returns the final head.
    """
    m = n.size // 2
    n_cyc = cyc_ptr.size - 1
    for i in range(u.shape[0]):
        r = u[i, 0]
        if r < p_worm:
            h = head
            dh = out_ptr[h + 1] - out_ptr[h]
            if dh > 0:
                d = out_slots[out_ptr[h] + _pick(u[i, 1], dh)]  # h -> v
                v = slot_head[d]
                dv = out_ptr[v + 1] - out_ptr[v]
                extra = math.exp(bias[v] - bias[h]) * dh / dv
                if u[i, 2] < 0.5:
                    rd = d ^ 1  # grow n[v -> h]
                    ratio = slot_T[rd] / (n[rd] + 1.0) * extra
                    if u[i, 3] < ratio:
                        n[rd] += 1
                        head = v
                elif n[d] > 0:  # shrink n[h -> v]
                    ratio = n[d] / slot_T[d] * extra
                    if u[i, 3] < ratio:
                        n[d] -= 1
                        head = v
        elif m > 0:
            if (r - p_worm) < p_pair * (1.0 - p_worm) or n_cyc == 0:
                _pair_move(n, slot_T, _pick(u[i, 1], m), u[i, 2] < 0.5, u[i, 3])
            else:
                _cycle_move(n, slot_T, cyc_ptr, cyc_slots, _pick(u[i, 1], n_cyc),
                            _pick(u[i, 2], 4), u[i, 3])
        hist[head] += 1
    return head


@njit(cache=True)
def decompose_points(slots, slot_tail, slot_head, n_vertices):
    """Layer peeling of points sorted by rank (increasing time).

    Returns ``(flat, ptr, layer, status)``: cycle ``c`` consists of the points
    ``flat[ptr[c]:ptr[c+1]]`` in traversal order.  ``status`` is 0 on success
    and -1 when some layer has no cycle (the input has sources).
    """
    L = slots.size
    start = np.zeros(n_vertices + 1, dtype=np.int64)
    for i in range(L):
        start[slot_tail[slots[i]] + 1] += 1
    for v in range(n_vertices):
        start[v + 1] += start[v]
    pos = start[:-1].copy()
    order = np.empty(L, dtype=np.int64)
    for i in range(L):
        t = slot_tail[slots[i]]
        order[pos[t]] = i
        pos[t] += 1
    top = start[1:].copy()  # order[top[v] - 1] is the highest remaining point at v

    flat = np.empty(L, dtype=np.int64)
    ptr = np.zeros(L + 1, dtype=np.int64)
    layer = np.empty(L, dtype=np.int64)
    stamp = np.zeros(n_vertices, dtype=np.int64)
    walk = 0
    n_cyc = 0
    filled = 0
    depth = 0
    while filled < L:
        depth += 1
        first = walk + 1
        found = 0
        for v0 in range(n_vertices):
            if top[v0] == start[v0] or stamp[v0] >= first:
                continue
            walk += 1
            v = v0
            hit = -1
            while True:
                if stamp[v] >= first:
                    if stamp[v] == walk:
                        hit = v
                    break
                if top[v] == start[v]:
                    break
                stamp[v] = walk
                v = slot_head[slots[order[top[v] - 1]]]
            if hit < 0:
                continue
            w = hit
            while True:
                p = order[top[w] - 1]
                top[w] -= 1
                flat[filled] = p
                filled += 1
                w = slot_head[slots[p]]
                if w == hit:
                    break
            layer[n_cyc] = depth
            n_cyc += 1
            ptr[n_cyc] = filled
            found += 1
        if found == 0:
            return flat, ptr[: n_cyc + 1], layer[:n_cyc], -1
    return flat, ptr[: n_cyc + 1], layer[:n_cyc], 0


@njit(cache=True)
def _face_logweights(h, f, nbrs, phi, amax, lo, hi, out):
    for k in range(lo, hi + 1):
        s = 0.0
        for j in range(nbrs.shape[1]):
            a = k - h[nbrs[f, j]]
            if a < -amax or a > amax:
                s = np.inf
                break
            s += phi[a + amax]
        out[k - lo] = -s


@njit(cache=True)
def _sample_face(h, f, nbrs, phi, amax, window, u, buf):
    """Draw ``h[f]`` from its conditional law; returns ``(value, widenings)``."""
    nn = nbrs.shape[1]
    nb = np.empty(nn)
    for j in range(nn):
        nb[j] = h[nbrs[f, j]]
    centre = int(np.median(nb))
    w = window
    widened = 0
    while True:
        lo = centre - w
        hi = centre + w
        _face_logweights(h, f, nbrs, phi, amax, lo, hi, buf)
        size = hi - lo + 1
        mx = -np.inf
        for i in range(size):
            if buf[i] > mx:
                mx = buf[i]
        tot = 0.0
        for i in range(size):
            buf[i] = math.exp(buf[i] - mx)
            tot += buf[i]
        if (buf[0] + buf[size - 1]) / tot <= 1e-12 or 2 * w >= amax:
            break
        w += 2
        widened += 1
    target = u * tot
    acc = 0.0
    for i in range(size):
        acc += buf[i]
        if acc >= target:
            return lo + i, widened
    return hi, widened


@njit(cache=True)
def heat_bath_sweep(h, nbrs, phi, amax, window, u):
    """One heat-bath pass over faces ``0..len(u)-1``; ``h[-1]`` is the pinned outer face.

    Returns the number of times a window had to be widened.
    """
    widened = 0
    buf = np.empty(2 * amax + 1)
    for f in range(u.size):
        k, w = _sample_face(h, f, nbrs, phi, amax, window, u[f], buf)
        h[f] = k
        widened += w
    return widened


@njit(cache=True)
def column_run(h, column, cap):
    """Length of the run of faces up ``column`` sharing the nonzero sign of the first."""
    s0 = np.sign(h[column[0]])
    if s0 == 0:
        return 0
    x = 1
    for j in range(1, column.size):
        if x >= cap or np.sign(h[column[j]]) != s0:
            break
        x += 1
    return min(x, cap)


@njit(cache=True)
def biased_heat_bath(h, faces, nbrs, phi, amax, window, u, in_column, column, bias, x):
    """Heat-bath proposals at ``faces`` for the law tilted by ``exp(bias[column_run])``.

    Proposals that change the run length are accepted with the bias ratio.
    ``u`` has shape ``(len(faces), 2)``.  Returns ``(run length, widenings)``.
    """
    cap = bias.size - 1
    widened = 0
    buf = np.empty(2 * amax + 1)
    for i in range(faces.size):
        f = faces[i]
        k, w = _sample_face(h, f, nbrs, phi, amax, window, u[i, 0], buf)
        widened += w
        old = h[f]
        if k == old:
            continue
        h[f] = k
        if in_column[f]:
            x2 = column_run(h, column, cap)
            if x2 != x:
                if u[i, 1] < math.exp(bias[x2] - bias[x]):
                    x = x2
                else:
                    h[f] = old
    return x, widened


@njit(cache=True)
def nonzero_cluster(h, nbrs, start, stamp, tag, stack):
    """Mark with ``tag`` the faces joined to ``start`` through nonzero heights."""
    if h[start] == 0:
        return 0
    top = 0
    stack[0] = start
    stamp[start] = tag
    size = 1
    while top >= 0:
        f = stack[top]
        top -= 1
        for j in range(nbrs.shape[1]):
            g = nbrs[f, j]
            if stamp[g] != tag and h[g] != 0:
                stamp[g] = tag
                top += 1
                stack[top] = g
                size += 1
    return size
