"""Brute-force references: full exponential-constraint programs at small n.

These exist to certify the decomposition solvers, not to scale.  They share
the LP engine with everything else (identical arithmetic, so comparisons
never dispute solver tolerances) but assemble the complete constraint sets
explicitly instead of decomposing, which is what makes them independent.
"""

import itertools
import math

import numpy as np

from . import lpcore, netmodel, regions

#: explicit region assembly refuses to run above this many sources
SW_ORACLE_LIMIT = 10
CEO_ORACLE_LIMIT = 4


class OracleError(ValueError):
    pass


def _region_rows(rank, n_cols, offset, n_sources):
    """-sum_B R <= -g(B) rows for every nonempty subset."""
    rows, rhs = [], []
    for mask in regions.iter_masks(n_sources):
        row = np.zeros(n_cols)
        for i in range(n_sources):
            if mask >> i & 1:
                row[offset + i] = -1.0
        rows.append(row)
        rhs.append(-rank.value_mask(mask))
    return rows, rhs


def full_sw_lp(g, rank, total_rate=None):
    """Authoritative optimum of the lossless multicast program.

    Assembles every coupling, balance, rate-link and region constraint for
    every terminal into one LP.  Exponential in the source count.
    Returns (cost, FlowAssignment); raises on infeasibility.
    """
    n_s = g.n_sources
    if n_s > SW_ORACLE_LIMIT:
        raise OracleError(
            f"explicit region assembly limited to {SW_ORACLE_LIMIT} sources")
    total_rate = float(total_rate if total_rate is not None
                       else rank.value_mask(rank.full_mask()))
    n_e = len(g.edges)
    terminals = list(g.terminals)
    k_t = len(terminals)
    nv = (1 + k_t) * n_e + k_t * n_s

    def x_col(k, e):
        return (1 + k) * n_e + e

    def r_col(k, i):
        return (1 + k_t) * n_e + k * n_s + i

    rows_ub, rhs_ub = [], []
    rows_eq, rhs_eq = [], []
    virt = [g.virtual_edge_index(s) for s in g.sources]
    for k, t in enumerate(terminals):
        for e in range(n_e):
            row = np.zeros(nv)
            row[x_col(k, e)] = 1.0
            row[e] = -1.0
            rows_ub.append(row)
            rhs_ub.append(0.0)
        for i in range(n_s):
            row = np.zeros(nv)
            row[r_col(k, i)] = 1.0
            row[x_col(k, virt[i])] = -1.0
            rows_ub.append(row)
            rhs_ub.append(0.0)
        reg_rows, reg_rhs = _region_rows(rank, nv, r_col(k, 0), n_s)
        rows_ub.extend(reg_rows)
        rhs_ub.extend(reg_rhs)
        for v in g.nodes:
            row = np.zeros(nv)
            for e, edge in enumerate(g.edges):
                if edge.tail == v:
                    row[x_col(k, e)] += 1.0
                if edge.head == v:
                    row[x_col(k, e)] -= 1.0
            rows_eq.append(row)
            if v == g.s_star:
                rhs_eq.append(total_rate)
            elif v == t:
                rhs_eq.append(-total_rate)
            else:
                rhs_eq.append(0.0)

    c = np.zeros(nv)
    c[:n_e] = g.costs
    ub = np.concatenate([np.concatenate([g.capacities] * (1 + k_t)),
                         np.full(k_t * n_s, np.inf)])
    lp = lpcore.LinearProgram(c, a_ub=np.array(rows_ub),
                              b_ub=np.array(rhs_ub),
                              a_eq=np.array(rows_eq),
                              b_eq=np.array(rhs_eq),
                              lb=np.zeros(nv), ub=ub)
    res = lpcore.solve_lp(lp)
    if res.status != "optimal":
        raise netmodel.InfeasibleError(
            f"full-constraint reference LP is {res.status}")
    z = res.x[:n_e]
    x = {t: res.x[x_col(k, 0):x_col(k, 0) + n_e]
         for k, t in enumerate(terminals)}
    rates = {t: res.x[r_col(k, 0):r_col(k, 0) + n_s]
             for k, t in enumerate(terminals)}
    fa = netmodel.FlowAssignment(z, x, rates, total_rate)
    return res.value, fa


def sw_is_feasible(g, rank, total_rate=None):
    """Feasibility status of the full-constraint program (oracle view)."""
    try:
        full_sw_lp(g, rank, total_rate)
        return True
    except netmodel.InfeasibleError:
        return False


# ---------------------------------------------------------------------------
# remote-estimation and lifetime references: nested search over r
# ---------------------------------------------------------------------------

def _ceo_inner_lp(net, model, rank, extra_energy=None):
    """LP skeleton: flows + rates with explicit region rows for a fixed rank.

    When ``extra_energy`` is given (an EnergyParams), a reciprocal-lifetime
    column is appended and energy rows added; the objective then minimizes
    that column instead of flow cost.
    """
    n_e = len(net.edges)
    n_s = net.n_sources
    terminal = net.terminals[0]
    with_energy = extra_energy is not None
    nv = n_e + n_s + (1 if with_energy else 0)
    gamma_col = n_e + n_s

    rows_ub, rhs_ub = [], []
    for j, s in enumerate(net.sources):
        row = np.zeros(nv)
        for e, edge in enumerate(net.edges):
            if edge.tail == s:
                row[e] -= 1.0
            if edge.head == s:
                row[e] += 1.0
        row[n_e + j] = 1.0        # R_j <= net outflow
        rows_ub.append(row)
        rhs_ub.append(0.0)
    row = np.zeros(nv)
    for e, edge in enumerate(net.edges):
        if edge.tail == terminal:
            row[e] += 1.0
        if edge.head == terminal:
            row[e] -= 1.0
    row[n_e:n_e + n_s] = 1.0      # terminal absorbs the sum rate
    rows_ub.append(row)
    rhs_ub.append(0.0)
    reg_rows, reg_rhs = _region_rows(rank, nv, n_e, n_s)
    rows_ub.extend(reg_rows)
    rhs_ub.extend(reg_rhs)
    if with_energy:
        for v in net.nodes:
            row = np.zeros(nv)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += extra_energy.p_tx(edge.tail, edge.head)
                if edge.head == v:
                    row[e] += extra_energy.p_rx(edge.tail, edge.head)
            if v in net.sources:
                row[n_e + net.sources.index(v)] = extra_energy.p_sense(v)
            row[gamma_col] = -extra_energy.battery(v)
            rows_ub.append(row)
            rhs_ub.append(0.0)

    rows_eq = []
    for v in net.nodes:
        if v in net.sources or v == terminal:
            continue
        row = np.zeros(nv)
        for e, edge in enumerate(net.edges):
            if edge.tail == v:
                row[e] += 1.0
            if edge.head == v:
                row[e] -= 1.0
        rows_eq.append(row)

    c = np.zeros(nv)
    if with_energy:
        c[gamma_col] = 1.0
    else:
        c[:n_e] = net.costs
    ub = np.concatenate([net.capacities,
                         np.full(nv - n_e, np.inf)])
    lp = lpcore.LinearProgram(
        c, a_ub=np.array(rows_ub), b_ub=np.array(rhs_ub),
        a_eq=np.array(rows_eq) if rows_eq else None,
        b_eq=np.zeros(len(rows_eq)) if rows_eq else None,
        lb=np.zeros(nv), ub=ub)
    return lp, n_e, n_s


def _ceo_value_at_r(net, model, r, energy=None):
    rank = regions.CeoRank(model, np.maximum(np.asarray(r, dtype=float),
                                             0.0))
    lp, n_e, n_s = _ceo_inner_lp(net, model, rank, extra_energy=energy)
    res = lpcore.solve_lp(lp)
    if res.status != "optimal":
        return None
    return res


class CeoReference:
    def __init__(self, cost, x, rates, r, resolution, coarse_spacing):
        self.cost = cost
        self.x = x
        self.rates = rates
        self.r = r
        #: step tolerance of the local refinement (the value's resolution)
        self.resolution = resolution
        #: spacing of the coarse localization grid
        self.coarse_spacing = coarse_spacing


def _feasible_r(model, r):
    return regions.ceo_distortion_residual(model, r) >= -1e-12


def _nested_r_search(net, model, energy=None, grid_points=12,
                     refine_iters=400):
    """Outer search over the auxiliary vector, inner LP for flows/rates.

    Coarse log-spaced grid (0 and decades up to 5) followed by Nelder-Mead
    refinement from the best grid points.  Infeasible r (distortion not
    reachable) scores infinity.
    """
    from scipy.optimize import minimize

    n = model.n
    if n > CEO_ORACLE_LIMIT:
        raise OracleError(
            f"auxiliary grid search limited to {CEO_ORACLE_LIMIT} sensors")
    axis = np.concatenate([[0.0],
                           np.logspace(-3, math.log10(5.0),
                                       max(2, grid_points - 1))])

    def value(r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        if not _feasible_r(model, r):
            return np.inf, None
        res = _ceo_value_at_r(net, model, r, energy=energy)
        if res is None:
            return np.inf, None
        return res.value, res

    best_v, best_r, best_res = np.inf, None, None
    ranked = []
    for combo in itertools.product(axis, repeat=n):
        v, res = value(np.array(combo))
        if np.isfinite(v):
            ranked.append((v, combo))
        if v < best_v:
            best_v, best_r, best_res = v, np.array(combo), res
    if best_r is None:
        raise netmodel.InfeasibleError(
            "no feasible auxiliary vector on the search grid")
    ranked.sort(key=lambda t: t[0])

    def penalized(r):
        v, _ = value(r)
        return v if np.isfinite(v) else 1e12 + float(np.sum(
            np.maximum(-np.asarray(r), 0.0)))

    xatol = 1e-6
    for _, start in ranked[:3]:
        out = minimize(penalized, np.array(start), method="Nelder-Mead",
                       options={"maxfev": refine_iters, "xatol": xatol,
                                "fatol": 1e-10})
        v, res = value(out.x)
        if v < best_v:
            best_v, best_r, best_res = v, np.maximum(out.x, 0.0), res
    spacing = float(np.max(np.diff(axis)))
    return best_v, best_r, best_res, xatol, spacing


def full_ceo_reference(net, model, grid_points=12, refine_iters=400):
    """Reference optimum of min-cost remote-estimation routing.

    Accuracy is limited by the outer grid/refinement; the spacing is
    reported alongside the value.
    """
    if len(net.terminals) != 1:
        raise OracleError("reference requires a single terminal")
    best_v, best_r, res, xatol, spacing = _nested_r_search(
        net, model, grid_points=grid_points, refine_iters=refine_iters)
    n_e = len(net.edges)
    return CeoReference(best_v, res.x[:n_e], res.x[n_e:n_e + model.n],
                        best_r, xatol, spacing)


def full_lifetime_reference(net, model, energy, grid_points=12,
                            refine_iters=400):
    """Reference optimum (reciprocal lifetime) of the lifetime program."""
    if len(net.terminals) != 1:
        raise OracleError("reference requires a single terminal")
    best_v, best_r, res, xatol, spacing = _nested_r_search(
        net, model, energy=energy, grid_points=grid_points,
        refine_iters=refine_iters)
    n_e = len(net.edges)
    return CeoReference(best_v, res.x[:n_e], res.x[n_e:n_e + model.n],
                        best_r, xatol, spacing)


# ---------------------------------------------------------------------------
# greedy and region checks
# ---------------------------------------------------------------------------

def exhaustive_greedy_check(rank, weights):
    """Minimum of weights'R over the region by explicit enumeration.

    Scans every chain vertex (all orderings of the ground set) and solves
    the full-constraint LP; returns the smaller of the two minima.
    """
    n = rank.n
    if n > 7:
        raise OracleError("vertex enumeration limited to 7 sources")
    w = np.asarray(weights, dtype=float)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        mask = 0
        prev = 0.0
        val = 0.0
        for i in perm:
            mask |= 1 << i
            cur = rank.value_mask(mask)
            val += w[i] * (cur - prev)
            prev = cur
        best = min(best, val)
    # the vertex scan and the LP agree for supermodular ranks; keep the min
    rows, rhs = _region_rows(rank, n, 0, n)
    lp = lpcore.LinearProgram(w, a_ub=np.array(rows), b_ub=np.array(rhs),
                              lb=np.zeros(n))
    res = lpcore.solve_lp(lp)
    if res.status == "optimal":
        best = min(best, res.value)
    return best


def ceo_grid_min(model, weights, span=5.0, coarse_step=0.0625,
                 box_steps=((5e-3, 0.1), (5e-4, 0.01))):
    """Dense-grid minimum of weights'R over the CEO region.

    A full-dimensional coarse grid over [0, span]^n locates the basin (no
    tightness assumption anywhere), then nested local grids shrink the step
    to the final resolution.  Returns (value, r, resolution).  Vectorized;
    intended for n <= 3.
    """
    w = np.asarray(weights, dtype=float)
    n = model.n
    if n > 3:
        raise OracleError("dense grid limited to 3 sensors")
    if np.any(w < 0):
        return -np.inf, None, 0.0
    inv_x = 1.0 / model.sigma_x2
    inv_d = 1.0 / model.distortion
    order = np.argsort(-w, kind="stable")
    ws = w[order]
    sig2 = model.noise_vars[order]

    def batch_values(R):
        """Greedy objective at each row of R (already in sorted order)."""
        phi = (1.0 - np.exp(-2.0 * R)) / sig2
        total = inv_x + phi.sum(axis=1)
        feas = total >= inv_d - 1e-12
        suffix = np.zeros_like(R)
        acc = np.zeros(R.shape[0])
        for j in range(n - 1, -1, -1):
            suffix[:, j] = acc
            acc = acc + phi[:, j]
        chain_prev = np.zeros(R.shape[0])
        vals = np.zeros(R.shape[0])
        run_r = np.zeros(R.shape[0])
        for j in range(n):
            run_r = run_r + R[:, j]
            chain = run_r + 0.5 * (np.log(total)
                                   - np.log(inv_x + suffix[:, j]))
            vals += ws[j] * (chain - chain_prev)
            chain_prev = chain
        vals[~feas] = np.inf
        return vals

    def grid_min(center, half, step):
        axes = [np.arange(max(0.0, c - half), c + half + step / 2, step)
                for c in center]
        best_v, best_r = np.inf, None
        chunks = [np.array(t) for t in itertools.product(*axes[:-1])]
        last = axes[-1]
        block = np.empty((last.size, n))
        for head in chunks:
            block[:, :-1] = head
            block[:, -1] = last
            vals = batch_values(block)
            j = int(np.argmin(vals))
            if vals[j] < best_v:
                best_v, best_r = vals[j], block[j].copy()
        return best_v, best_r

    center = np.full(n, span / 2.0)
    v, r = grid_min(center, span / 2.0, coarse_step)
    res = coarse_step
    for step, half in box_steps:
        v, r = grid_min(r, half, step)
        res = step
    out = np.zeros(n)
    out[order] = r
    return float(v), out, res
