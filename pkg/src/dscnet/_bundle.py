"""Proximal bundle internals: the cutting-plane model and its prox QP.

The bundle maximizes a concave function known through (value, supergradient)
oracle calls.  Each linearization overestimates the function; the proximal
subproblem maximizes the polyhedral model minus a quadratic penalty around
the stability center, over the floor-bounded orthant.  The QP is solved by a
primal active-set method over (y, v): strictly convex in y, with v pinned by
at least one active cut throughout.
"""

import numpy as np


class BundleQpError(RuntimeError):
    pass


class Cut:
    """One linearization f(y_j) + s_j'(y - y_j) with its primal payload."""

    def __init__(self, value, grad, point, payload):
        self.grad = np.asarray(grad, dtype=float)
        self.const = float(value - self.grad @ point)
        self.payload = payload

    def at(self, y):
        return self.const + float(self.grad @ y)


def solve_prox_qp(cuts, center, mu, floor, max_iter=500):
    """max_v,y  v - mu/2 |y - center|^2  s.t. v <= cut_j(y), y >= floor.

    Returns (y, model_value, nu) where nu are the convex multipliers over
    the cuts (the primal-recovery weights).
    """
    m = len(cuts)
    d = center.size
    S = np.array([c.grad for c in cuts])
    consts = np.array([c.const for c in cuts])
    y = np.maximum(center.copy(), floor)
    vals = consts + S @ y
    j0 = int(np.argmin(vals))
    v = float(vals[j0])
    act_cuts = [j0]
    act_bnds = []

    for _ in range(max_iter):
        ja = np.array(act_cuts, dtype=int)
        ia = np.array(act_bnds, dtype=int)
        nj, ni = ja.size, ia.size
        # KKT system over (y, v, nu_J, eta_I)
        dim = d + 1 + nj + ni
        mat = np.zeros((dim, dim))
        rhs = np.zeros(dim)
        mat[:d, :d] = mu * np.eye(d)
        rhs[:d] = mu * center
        for a, j in enumerate(ja):
            mat[:d, d + 1 + a] = -S[j]
            mat[d, d + 1 + a] = 1.0
            mat[d + 1 + a, :d] = -S[j]
            mat[d + 1 + a, d] = 1.0
            rhs[d + 1 + a] = consts[j]
        for b, i in enumerate(ia):
            mat[i, d + 1 + nj + b] = -1.0
            mat[d + 1 + nj + b, i] = 1.0
            rhs[d + 1 + nj + b] = floor
        rhs[d] = 1.0
        try:
            sol = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        y_t, v_t = sol[:d], float(sol[d])
        nu_t = sol[d + 1:d + 1 + nj]
        eta_t = sol[d + 1 + nj:]

        p_y = y_t - y
        p_v = v_t - v
        if max(np.max(np.abs(p_y), initial=0.0), abs(p_v)) <= 1e-12 * (
                1.0 + abs(v)):
            # stationary on the working set: check multiplier signs
            worst, which, kind = -1e-9, -1, None
            for a, j in enumerate(ja):
                if nu_t[a] < worst and nj > 1:
                    worst, which, kind = nu_t[a], j, "cut"
            for b, i in enumerate(ia):
                if eta_t[b] < worst:
                    worst, which, kind = eta_t[b], i, "bnd"
            if which < 0:
                nu = np.zeros(m)
                nu[ja] = np.maximum(nu_t, 0.0)
                tot = nu.sum()
                if tot > 0:
                    nu /= tot
                return y, v, nu
            if kind == "cut":
                act_cuts.remove(which)
            else:
                act_bnds.remove(which)
            continue

        # ratio test toward the EQP target over inactive constraints
        t = 1.0
        block, bkind = -1, None
        rest = [j for j in range(m) if j not in act_cuts]
        if rest:
            g0 = v - (consts[rest] + S[rest] @ y)      # <= 0 feasible
            slope = p_v - S[rest] @ p_y
            for idx, j in enumerate(rest):
                if slope[idx] > 1e-14:
                    tj = -g0[idx] / slope[idx]
                    if tj < t - 1e-14:
                        t, block, bkind = max(tj, 0.0), j, "cut"
        for i in range(d):
            if i not in act_bnds and p_y[i] < -1e-14:
                ti = (y[i] - floor) / (-p_y[i])
                if ti < t - 1e-14:
                    t, block, bkind = max(ti, 0.0), i, "bnd"
        y = y + t * p_y
        v = v + t * p_v
        if t < 1.0 and block >= 0:
            if bkind == "cut":
                act_cuts.append(block)
            else:
                act_bnds.append(block)
                y[block] = floor
    raise BundleQpError("active-set QP failed to converge")


def aggregate_payloads(cuts, nu, combine):
    """nu-weighted combination of cut payloads via user combine(payloads, w)."""
    keep = nu > 1e-14
    weights = nu[keep] / nu[keep].sum()
    payloads = [c.payload for c, k in zip(cuts, keep) if k]
    return combine(payloads, weights)
