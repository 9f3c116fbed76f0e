# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: simplex tableau pivot and Dinic max-flow.

Mirrors `_pykern` exactly; see `kernels` for lane selection.  Max-flow runs
its residual arithmetic in long double so that comparisons at the 1e-9
tolerance stay meaningful after long augmentation chains.
"""

import numpy as np

cimport numpy as cnp


def pivot_update(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q):
    """Eliminate column q everywhere but row r, in place (see `_pykern`)."""
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef Py_ssize_t nd = d.shape[0]
    cdef Py_ssize_t i, j
    cdef double piv = T[r, q]
    cdef double mult
    for j in range(n):
        T[r, j] /= piv
    for i in range(m):
        if i == r:
            continue
        mult = T[i, q]
        if mult != 0.0:
            for j in range(n):
                T[i, j] -= mult * T[r, j]
    mult = d[q]
    if mult != 0.0:
        for j in range(nd):
            d[j] -= mult * T[r, j]
    for i in range(m):
        T[i, q] = 0.0
    T[r, q] = 1.0
    d[q] = 0.0


cdef long double _push(long double[::1] cap, long long[::1] to,
                       long long[::1] astart, long long[::1] aflat,
                       long long[::1] it, long long[::1] level,
                       Py_ssize_t u, Py_ssize_t t, long double limit,
                       long double eps):
    cdef Py_ssize_t a, v
    cdef long double got, room
    if u == t:
        return limit
    while it[u] < astart[u + 1]:
        a = aflat[it[u]]
        v = to[a]
        if cap[a] > eps and level[v] == level[u] + 1:
            room = cap[a] if cap[a] < limit else limit
            got = _push(cap, to, astart, aflat, it, level, v, t, room, eps)
            if got > eps:
                cap[a] -= got
                cap[a ^ 1] += got
                return got
        it[u] += 1
    return 0.0


def dinic_maxflow(tails, heads, caps, Py_ssize_t n, Py_ssize_t s,
                  Py_ssize_t t, double eps=1e-9):
    """Max flow from s to t; returns (value, per-edge flow array)."""
    cdef Py_ssize_t m = len(tails)
    cdef cnp.ndarray[long long, ndim=1] to_np = np.empty(2 * m, dtype=np.int64)
    cap_np = np.empty(2 * m, dtype=np.longdouble)
    cdef long double[::1] cap = cap_np
    cdef long long[::1] to = to_np
    cdef long long[::1] tl = np.ascontiguousarray(tails, dtype=np.int64)
    cdef long long[::1] hd = np.ascontiguousarray(heads, dtype=np.int64)
    cdef double[::1] cp = np.ascontiguousarray(caps, dtype=np.float64)
    cdef Py_ssize_t a, u, v, qh
    for a in range(m):
        to[2 * a] = hd[a]
        cap[2 * a] = cp[a]
        to[2 * a + 1] = tl[a]
        cap[2 * a + 1] = 0.0

    # adjacency in CSR layout
    cdef long long[::1] deg = np.zeros(n + 1, dtype=np.int64)
    for a in range(m):
        deg[tl[a] + 1] += 1
        deg[hd[a] + 1] += 1
    cdef long long[::1] astart = np.cumsum(deg, dtype=np.int64)
    cdef long long[::1] fill = np.asarray(astart).copy()
    cdef long long[::1] aflat = np.empty(2 * m, dtype=np.int64)
    for a in range(m):
        u = tl[a]
        v = hd[a]
        aflat[fill[u]] = 2 * a
        fill[u] += 1
        aflat[fill[v]] = 2 * a + 1
        fill[v] += 1

    cdef long long[::1] level = np.empty(n, dtype=np.int64)
    cdef long long[::1] it = np.empty(n, dtype=np.int64)
    cdef long long[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t qlen
    cdef long double total = 0.0
    cdef long double pushed
    cdef long double leps = eps

    while True:
        for u in range(n):
            level[u] = -1
        level[s] = 0
        queue[0] = s
        qlen = 1
        qh = 0
        while qh < qlen:
            u = queue[qh]
            qh += 1
            for a in range(astart[u], astart[u + 1]):
                v = to[aflat[a]]
                if cap[aflat[a]] > leps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qlen] = v
                    qlen += 1
        if level[t] < 0:
            break
        for u in range(n):
            it[u] = astart[u]
        while True:
            pushed = _push(cap, to, astart, aflat, it, level, s, t,
                           np.inf, leps)
            if pushed <= leps:
                break
            total += pushed

    flows = np.asarray(cp, dtype=np.float64) - \
        np.asarray(cap_np[0::2], dtype=np.float64)
    np.clip(flows, 0.0, None, out=flows)
    return float(total), flows
