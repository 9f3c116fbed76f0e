"""Dense bounded-variable simplex and the dual flow subproblems built on it.

One in-house solver backs everything (decomposition subproblems, brute-force
references, feasibility certificates): identical arithmetic everywhere means
reference comparisons never dispute each other over solver tolerances.  The
solver is a full-tableau two-phase primal simplex with variable bounds,
Dantzig pricing, and Bland's rule engaged to resolve degenerate stretches.
Dense tableaus are deliberate: desk-scale instances stay well under ~5k rows
and the per-pivot rank-1 update is the compiled kernel's job.

Objective sense is minimization throughout.
"""

import math

import numpy as np

from . import kernels

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
COST_TOL = 1e-9
#: consecutive degenerate pivots before switching to Bland's rule
DEGEN_LIMIT = 60
#: pivots between reduced-cost/basic-value refreshes
REFRESH_EVERY = 400


class LpError(RuntimeError):
    """Numerical failure inside the simplex (reported, never silent)."""


class LinearProgram:
    """min c'x  s.t.  a_ub x <= b_ub,  a_eq x = b_eq,  lb <= x <= ub."""

    def __init__(self, c, a_ub=None, b_ub=None, a_eq=None, b_eq=None,
                 lb=None, ub=None):
        self.c = np.asarray(c, dtype=float)
        n = self.c.size
        self.a_ub = _as_matrix(a_ub, n)
        self.b_ub = _as_vector(b_ub, self.a_ub.shape[0])
        self.a_eq = _as_matrix(a_eq, n)
        self.b_eq = _as_vector(b_eq, self.a_eq.shape[0])
        self.lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
        self.ub = np.full(n, np.inf) if ub is None \
            else np.asarray(ub, dtype=float)
        if not np.all(np.isfinite(self.lb)):
            raise LpError("lower bounds must be finite")
        if np.any(self.ub < self.lb - FEAS_TOL):
            # empty box: report as a regular infeasibility, not an error
            self._empty_box = True
        else:
            self._empty_box = False
        for arr in (self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise LpError("non-finite coefficient in program")

    @property
    def n(self):
        return self.c.size


def _as_matrix(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != n:
        raise LpError(f"constraint matrix shape {a.shape} != (*, {n})")
    return a


def _as_vector(b, m):
    if b is None:
        b = np.zeros(0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.size != m:
        raise LpError("rhs length mismatch")
    return b


class LpResult:
    def __init__(self, status, x=None, value=None, dual_ub=None,
                 dual_eq=None, n_pivots=0):
        self.status = status          # "optimal" | "infeasible" | "unbounded"
        self.x = x
        self.value = value
        #: KKT multipliers (>= 0) of the a_ub rows
        self.dual_ub = dual_ub
        #: KKT multipliers (free sign) of the a_eq rows
        self.dual_eq = dual_eq
        self.n_pivots = n_pivots

    def __repr__(self):
        return f"LpResult({self.status}, value={self.value})"


AT_LO, AT_UP = 0, 1


class BoundedSimplex:
    """Reusable solver instance; supports warm re-solves on objective change.

    Not thread-safe: each instance owns one tableau.  Build once per
    constraint structure, then `solve()`; afterwards `resolve(new_c)` reuses
    the final (still feasible) basis, which is what makes thousands of
    subgradient iterations affordable.
    """

    def __init__(self, lp):
        self.lp = lp
        self._built = False
        self._solved = False

    @staticmethod
    def _artificial_mass(resid, m_ub):
        mass = float(np.sum(-np.minimum(resid[:m_ub], 0.0)))
        return mass + float(np.sum(np.abs(resid[m_ub:])))

    # ------------------------------------------------------------------
    def _build(self):
        lp = self.lp
        n = lp.n
        m_ub, m_eq = lp.a_ub.shape[0], lp.a_eq.shape[0]
        m = m_ub + m_eq
        self.m, self.n_struct, self.m_ub = m, n, m_ub

        lo = np.concatenate([lp.lb, np.zeros(m_ub)])
        hi = np.concatenate([lp.ub, np.full(m_ub, np.inf)])
        g_rows = np.vstack([lp.a_ub, lp.a_eq]) if m else np.zeros((0, n))
        b = np.concatenate([lp.b_ub, lp.b_eq])

        # nonbasic start: all-lower vs all-upper corner, whichever needs the
        # smaller artificial mass in phase 1 (fewer pivots to feasibility)
        start = lp.lb.copy()
        resid = b - g_rows @ start
        up_start = np.where(np.isfinite(lp.ub), lp.ub, lp.lb)
        up_resid = b - g_rows @ up_start
        if self._artificial_mass(up_resid, m_ub) \
                < self._artificial_mass(resid, m_ub):
            start, resid = up_start, up_resid

        # row scaling so that every initially-basic column has coefficient +1
        sigma = np.ones(m)
        art_rows = []
        for r in range(m):
            if r < m_ub:
                if resid[r] < -FEAS_TOL:
                    sigma[r] = -1.0
                    art_rows.append(r)
            else:
                if resid[r] < 0:
                    sigma[r] = -1.0
                art_rows.append(r)
        n_art = len(art_rows)
        ncols = n + m_ub + n_art

        T = np.zeros((m, ncols + 1))
        T[:, :n] = g_rows * sigma[:, None]
        for r in range(m_ub):
            T[r, n + r] = sigma[r]
        art_of_row = {}
        for k, r in enumerate(art_rows):
            T[r, n + m_ub + k] = 1.0
            art_of_row[r] = n + m_ub + k
        T[:, -1] = b * sigma

        self.T = T
        self.lo = np.concatenate([lo, np.zeros(n_art)])
        self.hi = np.concatenate([hi, np.full(n_art, np.inf)])
        self.is_art = np.zeros(ncols, dtype=bool)
        self.is_art[n + m_ub:] = True
        self.art_of_row = art_of_row

        self.xval = np.zeros(ncols)
        self.xval[:n] = start
        self.state = np.full(ncols, AT_LO, dtype=np.int8)
        self.state[:n] = np.where(start == lp.lb, AT_LO, AT_UP)
        self.in_basis = np.zeros(ncols, dtype=bool)
        self.basis = np.empty(m, dtype=np.int64)
        self.xB = np.empty(m)
        for r in range(m):
            if r in art_of_row:
                col = art_of_row[r]
                self.xB[r] = abs(resid[r])
            else:
                col = n + r
                self.xB[r] = resid[r]
            self.basis[r] = col
            self.in_basis[col] = True
        # unit column per row (B started as the identity in these columns)
        self.unit_cols = np.array(
            [art_of_row.get(r, n + r) for r in range(m)], dtype=np.int64)

        self.cvec = np.zeros(ncols)
        self._fixed = self.hi - self.lo <= 0.0
        self.forbidden = self._fixed.copy()
        self._sigma = sigma
        self._devex = np.ones(ncols)
        self.n_pivots = 0
        self._built = True
        self._scale = max(1.0, np.max(np.abs(b)) if m else 1.0)

    # ------------------------------------------------------------------
    def _reduced_costs(self):
        d = self.cvec - self.T[:, :-1].T @ self.cvec[self.basis]
        d[self.basis] = 0.0
        return d

    def _refresh_xB(self):
        rhs = self.T[:, -1].copy()
        nb = np.flatnonzero(~self.in_basis)
        vals = self.xval[nb]
        nz = nb[np.abs(vals) > 0]
        if nz.size:
            rhs -= self.T[:, nz] @ self.xval[nz]
        self.xB = rhs

    def _pick_entering(self, d, bland):
        viol = np.where(self.state == AT_UP, d, -d)
        viol[self.in_basis] = -np.inf
        viol[self.forbidden] = -np.inf
        if bland:
            cand = np.flatnonzero(viol > COST_TOL)
            return int(cand[0]) if cand.size else -1
        # devex pricing: largest violation per unit of reference weight
        score = np.where(viol > COST_TOL, viol * viol / self._devex, -np.inf)
        q = int(np.argmax(score))
        return q if viol[q] > COST_TOL else -1

    def _ratio_test(self, q, dirn, bland):
        col = self.T[:, q]
        delta = dirn * col
        t_best = self.hi[q] - self.lo[q]
        r_best = -1  # -1 means bound flip
        hit_lo = delta > PIVOT_TOL
        hit_hi = delta < -PIVOT_TOL
        lo_b = self.lo[self.basis]
        hi_b = self.hi[self.basis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_rows = np.where(
                hit_lo, (self.xB - lo_b) / delta,
                np.where(hit_hi, (hi_b - self.xB) / (-delta), np.inf))
        t_rows = np.where(np.isnan(t_rows), np.inf, t_rows)
        np.clip(t_rows, 0.0, None, out=t_rows)
        rmin = float(np.min(t_rows, initial=np.inf))
        if rmin < t_best:
            if bland:
                ties = np.flatnonzero(t_rows <= rmin + 1e-15)
                r_best = int(ties[np.argmin(self.basis[ties])])
            else:
                # allow near-ties so we can prefer a numerically safe pivot
                ties = np.flatnonzero(t_rows <= rmin + 1e-9 * (1.0 + rmin))
                r_best = int(ties[np.argmax(np.abs(delta[ties]))])
            t_best = t_rows[r_best]
        return t_best, r_best

    def _apply_pivot(self, q, dirn, t, r):
        self.xB -= t * dirn * self.T[:, q]
        new_val = self.xval[q] + dirn * t
        if r < 0:  # bound flip, no basis change
            self.xval[q] = new_val
            self.state[q] = AT_UP if dirn > 0 else AT_LO
            return
        p = int(self.basis[r])
        lo_p, hi_p = self.lo[p], self.hi[p]
        landed = self.xB[r]
        if not np.isfinite(hi_p) or abs(landed - lo_p) <= abs(hi_p - landed):
            self.xval[p], self.state[p] = lo_p, AT_LO
        else:
            self.xval[p], self.state[p] = hi_p, AT_UP
        self.in_basis[p] = False
        self.basis[r] = q
        self.in_basis[q] = True
        self.xB[r] = new_val
        piv = self.T[r, q]
        kernels.pivot_update(self.T, self.d, r, q)
        # devex reference-weight update (Forrest-Goldfarb recipe)
        gamma = max(self._devex[q], 1.0)
        row = self.T[r, :-1]
        np.maximum(self._devex, row * row * gamma, out=self._devex)
        self._devex[p] = max(gamma / (piv * piv), 1.0)
        if self._devex.max() > 1e10:
            self._devex[:] = 1.0
        self.n_pivots += 1

    def _optimize(self, max_pivots):
        """Run pivots until optimal; returns 'optimal' or 'unbounded'."""
        bland = False
        degen = 0
        since_refresh = 0
        while True:
            q = self._pick_entering(self.d, bland)
            if q < 0:
                if not bland:
                    # confirm with exact reduced costs before declaring done
                    self.d = self._reduced_costs()
                    q = self._pick_entering(self.d, bland)
                    if q < 0:
                        return "optimal"
                else:
                    return "optimal"
            dirn = 1.0 if self.state[q] == AT_LO else -1.0
            t, r = self._ratio_test(q, dirn, bland)
            if not np.isfinite(t):
                return "unbounded"
            self._apply_pivot(q, dirn, t, r)
            since_refresh += 1
            if t <= 1e-11:
                degen += 1
                if degen >= DEGEN_LIMIT:
                    bland = True
            else:
                degen = 0
                bland = False
            if since_refresh >= REFRESH_EVERY:
                self.d = self._reduced_costs()
                self._refresh_xB()
                since_refresh = 0
            if self.n_pivots > max_pivots:
                raise LpError(
                    f"pivot limit exceeded ({max_pivots}); "
                    "possible numerical cycling")

    # ------------------------------------------------------------------
    def solve(self):
        lp = self.lp
        if lp._empty_box:
            return LpResult("infeasible")
        if not self._built:
            self._build()
        max_pivots = 20000 + 60 * (self.m + self.n_struct)

        # phase 1: minimize the artificial mass
        if np.any(self.is_art):
            self.cvec[:] = 0.0
            self.cvec[self.is_art] = 1.0
            self.d = self._reduced_costs()
            status = self._optimize(max_pivots)
            if status == "unbounded":  # cannot happen: objective >= 0
                raise LpError("phase-1 unbounded; inconsistent tableau")
            self._refresh_xB()
            art_mass = float(np.sum(
                np.abs(self.xB[self.is_art[self.basis]])))
            if art_mass > FEAS_TOL * self._scale * 10:
                self._solved = True
                self._last_status = "infeasible"
                return LpResult("infeasible", n_pivots=self.n_pivots)
            self._drive_out_artificials()
        self.forbidden = self.is_art | self._fixed

        # phase 2
        self.cvec[:] = 0.0
        self.cvec[:self.n_struct] = lp.c
        self.d = self._reduced_costs()
        self._devex[:] = 1.0
        status = self._optimize(max_pivots)
        self._solved = True
        self._last_status = status
        if status == "unbounded":
            return LpResult("unbounded", n_pivots=self.n_pivots)
        return self._extract()

    def _drive_out_artificials(self):
        """Degenerate-pivot basic artificials out; dead rows stay pinned."""
        for r in range(self.m):
            p = int(self.basis[r])
            if not self.is_art[p]:
                continue
            row = self.T[r, :-1]
            cand = np.flatnonzero(
                (np.abs(row) > 1e-7) & ~self.is_art & ~self.in_basis
                & ~self._fixed)
            if cand.size == 0:
                continue  # redundant row; artificial stays basic at zero
            q = int(cand[np.argmax(np.abs(row[cand]))])
            self._apply_pivot(q, 1.0 if self.state[q] == AT_LO else -1.0,
                              0.0, r)

    def _extract(self):
        self._refresh_xB()
        x_all = self.xval.copy()
        x_all[self.basis] = self.xB
        x = x_all[:self.n_struct]
        value = float(self.lp.c @ x)
        d = self._reduced_costs()
        # unit columns carry +1 in the scaled system, so y'_r = (c_B B^-1)_r
        y = self.cvec[self.unit_cols] - d[self.unit_cols]
        y = y * self._sigma  # undo row scaling
        return LpResult("optimal", x=x, value=value,
                        dual_ub=-y[:self.m_ub], dual_eq=-y[self.m_ub:],
                        n_pivots=self.n_pivots)

    # ------------------------------------------------------------------
    def resolve(self, new_c):
        """Re-optimize after an objective change, reusing the basis."""
        if not self._solved or getattr(self, "_last_status", "") != "optimal":
            self.lp.c = np.asarray(new_c, dtype=float)
            self._built = False
            self._solved = False
            return self.solve()
        new_c = np.asarray(new_c, dtype=float)
        if new_c.size != self.n_struct:
            raise LpError("objective length mismatch")
        self.lp.c = new_c
        self.cvec[:] = 0.0
        self.cvec[:self.n_struct] = new_c
        self.d = self._reduced_costs()
        max_pivots = self.n_pivots + 20000 + 60 * (self.m + self.n_struct)
        status = self._optimize(max_pivots)
        self._last_status = status
        if status == "unbounded":
            return LpResult("unbounded", n_pivots=self.n_pivots)
        return self._extract()

    def resolve_rhs(self, b_ub=None, b_eq=None):
        """Re-optimize after an rhs change if the basis stays feasible.

        Falls back to a cold solve when the old basis turns infeasible.
        """
        if not self._solved or getattr(self, "_last_status", "") != "optimal":
            if b_ub is not None:
                self.lp.b_ub = np.asarray(b_ub, dtype=float)
            if b_eq is not None:
                self.lp.b_eq = np.asarray(b_eq, dtype=float)
            return self.solve()
        old = np.concatenate([self.lp.b_ub, self.lp.b_eq])
        if b_ub is not None:
            self.lp.b_ub = np.asarray(b_ub, dtype=float)
        if b_eq is not None:
            self.lp.b_eq = np.asarray(b_eq, dtype=float)
        new = np.concatenate([self.lp.b_ub, self.lp.b_eq])
        delta = (new - old) * self._sigma
        if np.any(delta != 0.0):
            self.T[:, -1] += self.T[:, self.unit_cols] @ delta
        self._refresh_xB()
        lo_b, hi_b = self.lo[self.basis], self.hi[self.basis]
        slack = min(np.min(self.xB - lo_b, initial=np.inf),
                    np.min(hi_b - self.xB, initial=np.inf))
        if slack < -FEAS_TOL * self._scale * 10:
            self._built = False
            self._solved = False
            return self.solve()
        return self._extract()


def solve_lp(lp):
    """One-shot solve; see `BoundedSimplex` for reusable instances."""
    return BoundedSimplex(lp).solve()


# ---------------------------------------------------------------------------
# dual vectors and the three flow subproblems
# ---------------------------------------------------------------------------

class DualVector:
    """Named blocks of non-negative multipliers with a common floor.

    The floor keeps the rate oracles bounded (the regions impose no upper
    bounds on individual rates, so strictly positive weights are required).
    """

    def __init__(self, blocks, floor=1e-10):
        self.floor = float(floor)
        self.blocks = {k: np.maximum(np.asarray(v, dtype=float), self.floor)
                       for k, v in blocks.items()}

    def __getitem__(self, key):
        return self.blocks[key]

    def updated(self, deltas):
        """New DualVector stepped by ``deltas`` and projected on the floor."""
        return DualVector(
            {k: self.blocks[k] + deltas.get(k, 0.0) for k in self.blocks},
            floor=self.floor)

    def flat(self):
        keys = sorted(self.blocks)
        return np.concatenate([np.atleast_1d(self.blocks[k]) for k in keys])


class SwFlowSolver:
    """Priced multicast-flow subproblem over an augmented network.

    Minimizes edge costs minus the multiplier-weighted virtual-source flows,
    subject to per-terminal flow conservation at the full session rate and
    the shared physical flow dominating every per-terminal flow.  The
    constraint matrix is fixed, so re-pricing across subgradient iterations
    reuses the previous optimal basis.
    """

    def __init__(self, g, total_rate):
        from . import netmodel

        self.g = g
        self.total_rate = float(total_rate)
        n_e = len(g.edges)
        self.n_e = n_e
        terminals = list(g.terminals)
        self.terminals = terminals
        k_t = len(terminals)

        # infeasibility has a clean witness: some terminal cannot absorb the
        # session rate even with everything saturated
        for t in terminals:
            cut = netmodel.max_flow(g, g.s_star, t)
            if cut < self.total_rate - 1e-7:
                raise netmodel.InfeasibleError(
                    f"terminal {t} min-cut {cut:.6g} below the session rate "
                    f"{self.total_rate:.6g}", witness=(t, cut))

        caps = g.capacities
        n_vars = (1 + k_t) * n_e
        lb = np.zeros(n_vars)
        ub = np.concatenate([caps] * (1 + k_t))
        idx = g.node_index
        n_v = len(g.nodes)

        rows_ub = []
        rhs_ub = []
        for k in range(k_t):
            for e in range(n_e):
                row = np.zeros(n_vars)
                row[(1 + k) * n_e + e] = 1.0
                row[e] = -1.0
                rows_ub.append(row)
                rhs_ub.append(0.0)
        rows_eq = []
        rhs_eq = []
        for k, t in enumerate(terminals):
            for v in g.nodes:
                row = np.zeros(n_vars)
                for e, edge in enumerate(g.edges):
                    if edge.tail == v:
                        row[(1 + k) * n_e + e] += 1.0
                    if edge.head == v:
                        row[(1 + k) * n_e + e] -= 1.0
                if v == g.s_star:
                    rhs = self.total_rate
                elif v == t:
                    rhs = -self.total_rate
                else:
                    rhs = 0.0
                rows_eq.append(row)
                rhs_eq.append(rhs)
        del idx, n_v
        self.base_cost = np.concatenate([g.costs, np.zeros(k_t * n_e)])
        lp = LinearProgram(self.base_cost.copy(),
                           a_ub=np.array(rows_ub), b_ub=np.array(rhs_ub),
                           a_eq=np.array(rows_eq), b_eq=np.array(rhs_eq),
                           lb=lb, ub=ub)
        self.solver = BoundedSimplex(lp)
        self.virt = [g.virtual_edge_index(s) for s in g.sources]

    def evaluate(self, lam):
        """(z, per-terminal x, objective) at multipliers ``lam``.

        ``lam`` maps terminal id -> per-source multiplier array.
        """
        from . import netmodel

        c = self.base_cost.copy()
        for k, t in enumerate(self.terminals):
            lt = np.asarray(lam[t] if not isinstance(lam, DualVector)
                            else lam[t], dtype=float)
            for j, e in enumerate(self.virt):
                c[(1 + k) * self.n_e + e] -= lt[j]
        res = self.solver.resolve(c)
        if res.status != "optimal":
            raise netmodel.InfeasibleError(
                f"flow subproblem {res.status}")
        z = res.x[:self.n_e]
        x = {t: res.x[(1 + k) * self.n_e:(2 + k) * self.n_e]
             for k, t in enumerate(self.terminals)}
        return z, x, res.value


def sw_flow_subproblem(g, lam, total_rate):
    """One-shot evaluation of the priced multicast-flow subproblem."""
    return SwFlowSolver(g, total_rate).evaluate(lam)


class CeoFlowSolver:
    """Priced routing subproblem on the physical graph, single terminal.

    Source and terminal conservation were dualized away, so only relay
    balance and capacities remain; multipliers price net outflow at sources
    and net inflow at the terminal.
    """

    def __init__(self, net):
        if len(net.terminals) != 1:
            raise ValueError("routing subproblem requires a single terminal")
        self.net = net
        self.terminal = net.terminals[0]
        n_e = len(net.edges)
        relays = [v for v in net.nodes
                  if v not in net.sources and v != self.terminal]
        rows_eq = []
        for v in relays:
            row = np.zeros(n_e)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += 1.0
                if edge.head == v:
                    row[e] -= 1.0
            rows_eq.append(row)
        a_eq = np.array(rows_eq) if rows_eq else None
        b_eq = np.zeros(len(rows_eq)) if rows_eq else None
        lp = LinearProgram(net.costs.copy(), a_eq=a_eq, b_eq=b_eq,
                           lb=np.zeros(n_e), ub=net.capacities.copy())
        self.solver = BoundedSimplex(lp)
        self.src_index = {s: i for i, s in enumerate(net.sources)}

    def objective(self, lam_src, lam_t):
        net = self.net
        c = net.costs.copy()
        for e, edge in enumerate(net.edges):
            if edge.tail in self.src_index:
                c[e] -= lam_src[self.src_index[edge.tail]]
            if edge.head in self.src_index:
                c[e] += lam_src[self.src_index[edge.head]]
            if edge.tail == self.terminal:
                c[e] += lam_t
            if edge.head == self.terminal:
                c[e] -= lam_t
        return c

    def evaluate(self, lam_src, lam_t):
        """(x, objective) at source multipliers and terminal multiplier."""
        res = self.solver.resolve(self.objective(lam_src, lam_t))
        if res.status != "optimal":
            raise LpError(f"routing subproblem {res.status}")
        return res.x, res.value


def ceo_flow_subproblem(net, lam_src, lam_t):
    """One-shot evaluation of the priced routing subproblem."""
    return CeoFlowSolver(net).evaluate(np.asarray(lam_src, dtype=float),
                                       float(lam_t))


class LifetimeFlowSolver:
    """Quadratic-in-lifetime subproblem: outer scalar search, inner LP.

    For fixed reciprocal-lifetime the problem is an LP (relay balance,
    capacities, relay energy budgets); the LP value is convex in the
    reciprocal lifetime, so a golden-section search over it nails the joint
    minimizer.  Energy budgets enter only through the rhs, so inner solves
    warm-start off each other.
    """

    GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

    def __init__(self, net, energy, gamma_tol=1e-8):
        if len(net.terminals) != 1:
            raise ValueError("lifetime subproblem requires a single terminal")
        self.net = net
        self.energy = energy
        self.gamma_tol = float(gamma_tol)
        self.terminal = net.terminals[0]
        n_e = len(net.edges)
        self.relays = [v for v in net.nodes if v not in net.sources]
        rows_eq = []
        for v in self.relays:
            if v == self.terminal:
                continue
            row = np.zeros(n_e)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += 1.0
                if edge.head == v:
                    row[e] -= 1.0
            rows_eq.append(row)
        rows_ub = []
        for v in self.relays:
            row = np.zeros(n_e)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += energy.p_tx(edge.tail, edge.head)
                if edge.head == v:
                    row[e] += energy.p_rx(edge.tail, edge.head)
            rows_ub.append(row)
        self.energy_rhs_unit = np.array([energy.battery(v)
                                         for v in self.relays])
        a_eq = np.array(rows_eq) if rows_eq else None
        b_eq = np.zeros(len(rows_eq)) if rows_eq else None
        lp = LinearProgram(net.costs * 0.0,
                           a_ub=np.array(rows_ub),
                           b_ub=self.energy_rhs_unit * 0.0,
                           a_eq=a_eq, b_eq=b_eq,
                           lb=np.zeros(n_e), ub=net.capacities.copy())
        self.solver = BoundedSimplex(lp)
        self.src_index = {s: i for i, s in enumerate(net.sources)}
        self._cost = None

    def _edge_cost(self, lam1_src, lam1_t, lam2_src):
        net, energy = self.net, self.energy
        c = np.zeros(len(net.edges))
        for e, edge in enumerate(net.edges):
            u, v = edge.tail, edge.head
            if u in self.src_index:
                j = self.src_index[u]
                c[e] += -lam1_src[j] + lam2_src[j] * energy.p_tx(u, v)
            if v in self.src_index:
                j = self.src_index[v]
                c[e] += lam1_src[j] + lam2_src[j] * energy.p_rx(u, v)
            if u == self.terminal:
                c[e] += lam1_t
            if v == self.terminal:
                c[e] -= lam1_t
        return c

    def _inner(self, gamma):
        res = self.solver.resolve_rhs(b_ub=self.energy_rhs_unit * gamma)
        if res.status != "optimal":
            raise LpError(f"inner lifetime LP {res.status}")
        return res

    def evaluate(self, lam1_src, lam1_t, lam2_src):
        """(gamma, x, objective) minimizing the priced lifetime subproblem."""
        lam1_src = np.asarray(lam1_src, dtype=float)
        lam2_src = np.asarray(lam2_src, dtype=float)
        battery = np.array([self.energy.battery(s)
                            for s in self.net.sources])
        drain = float(lam2_src @ battery)
        self.solver.resolve(self._edge_cost(lam1_src, float(lam1_t),
                                            lam2_src))

        def phi(gamma):
            return gamma * gamma - drain * gamma + self._inner(gamma).value

        hi = self._gamma_bracket(drain)
        for _ in range(60):
            gamma = self._golden_min(phi, 0.0, hi)
            if gamma < hi * 0.99 or hi == 0.0:
                break
            hi *= 2.0
        else:
            raise LpError("lifetime bracket exhausted")
        res = self._inner(gamma)
        return gamma, res.x.copy(), gamma * gamma - drain * gamma + res.value

    def _gamma_bracket(self, drain):
        caps = float(np.sum(self.net.capacities))
        p_max = self.energy.max_power()
        e_min = min(self.energy.battery(v) for v in self.net.nodes)
        hi = caps * p_max / max(e_min, 1e-12) + 1.0
        return max(hi, drain / 2.0 * 1.25 + 1.0)

    def _golden_min(self, phi, lo, hi):
        inv = self.GOLDEN
        a, b = lo, hi
        c1 = b - inv * (b - a)
        c2 = a + inv * (b - a)
        f1, f2 = phi(c1), phi(c2)
        while b - a > self.gamma_tol:
            if f1 <= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - inv * (b - a)
                f1 = phi(c1)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + inv * (b - a)
                f2 = phi(c2)
        return 0.5 * (a + b)


def lifetime_flow_subproblem(net, energy, lam1_src, lam1_t, lam2_src):
    """One-shot evaluation of the lifetime subproblem."""
    return LifetimeFlowSolver(net, energy).evaluate(lam1_src, lam1_t,
                                                    lam2_src)
