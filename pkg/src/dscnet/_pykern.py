"""Pure numpy/scipy implementations of the two hot kernels.

These are the fallback lane used when the compiled extension is unavailable
(or disabled via DSCNET_FORCE_PURE=1).  Interfaces match `_speedups` exactly:

* ``pivot_update`` - one simplex tableau elimination step, in place.
* ``dinic_maxflow`` - blocking-flow max-flow on a directed graph.
"""

from collections import deque

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except ImportError:  # pragma: no cover - scipy is a hard dependency
    _dger = None


def pivot_update(T, d, r, q):
    """Eliminate column q from all tableau rows but r, in place.

    Row r must already contain a nonzero pivot at column q.  ``d`` is the
    reduced-cost row (one entry per tableau column except the trailing rhs
    column), updated with the same elimination.  Uses an in-place BLAS
    rank-1 update to avoid materialising an (m, n) temporary.
    """
    piv = T[r, q]
    T[r, :] /= piv
    col = T[:, q].copy()
    col[r] = 0.0
    row = T[r, :]
    if _dger is not None and T.flags.c_contiguous:
        # T is C-ordered so T.T is F-ordered; update T.T += (-col row^T)^T.
        _dger(-1.0, row, col, a=T.T, overwrite_a=1)
    else:  # pragma: no cover - exercised only without scipy BLAS
        T -= np.outer(col, row)
    T[:, q] = 0.0
    T[r, q] = 1.0
    d -= d[q] * row[:d.size]
    d[q] = 0.0


def dinic_maxflow(tails, heads, caps, n, s, t, eps=1e-9):
    """Max flow from s to t; returns (value, per-edge flow array).

    Standard level-graph blocking-flow scheme.  Capacities are doubles here;
    the compiled lane uses long double accumulation.
    """
    m = len(tails)
    to = np.empty(2 * m, dtype=np.int64)
    cap = np.empty(2 * m, dtype=np.float64)
    adj = [[] for _ in range(n)]
    for a in range(m):
        u, v = int(tails[a]), int(heads[a])
        to[2 * a] = v
        cap[2 * a] = caps[a]
        to[2 * a + 1] = u
        cap[2 * a + 1] = 0.0
        adj[u].append(2 * a)
        adj[v].append(2 * a + 1)

    total = 0.0
    level = np.empty(n, dtype=np.int64)
    while True:
        level.fill(-1)
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for a in adj[u]:
                v = to[a]
                if cap[a] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[t] < 0:
            break
        it = [0] * n

        def push(u, limit):
            if u == t:
                return limit
            while it[u] < len(adj[u]):
                a = adj[u][it[u]]
                v = to[a]
                if cap[a] > eps and level[v] == level[u] + 1:
                    got = push(v, min(limit, cap[a]))
                    if got > eps:
                        cap[a] -= got
                        cap[a ^ 1] += got
                        return got
                it[u] += 1
            return 0.0

        while True:
            pushed = push(s, np.inf)
            if pushed <= eps:
                break
            total += pushed

    flows = np.asarray(caps, dtype=np.float64) - cap[0::2]
    np.clip(flows, 0.0, None, out=flows)
    return total, flows
