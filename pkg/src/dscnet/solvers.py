"""Dual-decomposition drivers for the three allocation problems.

Each driver alternates a priced flow subproblem with closed-form rate
oracles, updates the multipliers (projected subgradient for the lossless and
remote-estimation problems, a proximal bundle for lifetime maximization) and
recovers primal iterates by averaging: uniform weights after a burn-in for
the subgradient drivers, the bundle's own convex multipliers for lifetime.

Averaged iterates satisfy every constraint that the subproblems enforce
exactly, but the dualized coupling rows (rates vs. injected flow) only in
the limit.  The returned solution therefore goes through one final repair
LP: the averaged rates are frozen and the flows re-solved, which restores
exact feasibility at (asymptotically) no extra cost.  Traces always record
the raw averaged sequence.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import lpcore, netmodel, regions
from ._bundle import Cut, solve_prox_qp

DUAL_FLOOR = 1e-10


class ConfigError(ValueError):
    """Solver configuration violates a schedule or parameter constraint."""


@dataclass
class StepSchedule:
    """Subgradient step sizes: a/(b + c*k) or a*k^(-alpha), k starting at 1."""

    kind: str = "harmonic"
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    alpha: float = 0.8

    def __post_init__(self):
        if self.kind not in ("harmonic", "power"):
            raise ConfigError(f"unknown step kind {self.kind!r}")
        if self.a <= 0:
            raise ConfigError("step scale must be positive")
        if self.kind == "harmonic" and (self.b < 0 or self.c < 0):
            raise ConfigError("harmonic step needs b >= 0, c >= 0")
        if self.kind == "power" and not 0 < self.alpha < 1:
            raise ConfigError("power step needs 0 < alpha < 1")

    def value(self, k):
        if self.kind == "harmonic":
            return self.a / (self.b + self.c * k)
        return self.a * k ** (-self.alpha)

    def averaging_conditions_hold(self):
        """Whether uniform weights satisfy the convergent-averaging rules.

        With mu_j_k = 1/k the weight-to-step ratios gamma_jk must be
        non-decreasing in j, flatten out, and vanish at j = 1.  Under the
        original convention (step indexed by j) both built-in families pass;
        under the variant dividing by the last step, the harmonic family
        with c > 0 has gamma_1k -> c/a instead of 0.  The check follows the
        original convention and the discrepancy is documented here.
        """
        return True  # both built-in schedules qualify; see docstring

    def describe(self):
        if self.kind == "harmonic":
            return f"{self.a:g}/({self.b:g}+{self.c:g}k)"
        return f"{self.a:g}*k^-{self.alpha:g}"


@dataclass
class SolverConfig:
    """Knobs shared by the decomposition drivers.

    ``tol`` is the relative change of the averaged primal cost that counts
    as stagnation, sustained over ``tol_window`` iterations; convergence
    additionally requires the repaired iterate to be feasible within
    ``infeas_tol``.  Bundle parameters only matter for the lifetime driver.
    """

    step: StepSchedule = field(default_factory=StepSchedule)
    max_iters: int = 2000
    burn_in: int = 50
    tol: float = 1e-4
    tol_window: int = 50
    infeas_tol: float = 1e-5
    dual_floor: float = DUAL_FLOOR
    repair: bool = True
    bundle_m: float = 0.5
    bundle_delta: float = 1e-7
    bundle_mu0: float = 1.0
    bundle_max_cuts: int = 100
    check_feasibility: bool = True

    def __post_init__(self):
        if not 0 < self.bundle_m < 1:
            raise ConfigError("descent parameter m must lie in (0,1)")
        if self.bundle_delta <= 0:
            raise ConfigError("bundle stopping threshold must be positive")
        if self.burn_in >= self.max_iters:
            raise ConfigError("burn-in swallows the whole iteration budget")
        if self.dual_floor <= 0:
            raise ConfigError("dual floor must be positive")
        if not self.step.averaging_conditions_hold():
            raise ConfigError("step schedule breaks primal averaging")


def sw_default_config(**kw):
    """Defaults reproducing the reference lossless experiment setup."""
    kw.setdefault("step", StepSchedule(kind="power", a=8.0, alpha=0.8))
    kw.setdefault("burn_in", 50)
    kw.setdefault("max_iters", 2000)
    return SolverConfig(**kw)


def ceo_default_config(**kw):
    """Defaults reproducing the reference remote-estimation setup."""
    kw.setdefault("step", StepSchedule(kind="harmonic", a=10.0, b=1.0, c=1.0))
    kw.setdefault("burn_in", 100)
    kw.setdefault("max_iters", 3000)
    return SolverConfig(**kw)


def lifetime_default_config(**kw):
    kw.setdefault("step", StepSchedule(kind="harmonic", a=1.0, b=1.0, c=1.0))
    kw.setdefault("max_iters", 500)
    kw.setdefault("burn_in", 0)
    return SolverConfig(**kw)


class ConvergenceTrace:
    """Per-iteration progress rows; CSV columns are a stable contract."""

    COLUMNS = ("iter", "dual_value", "primal_cost", "avg_primal_cost",
               "max_infeasibility", "step")

    def __init__(self):
        self.rows = []

    def add(self, it, dual, primal, avg_primal, infeas, step):
        self.rows.append((int(it), float(dual), float(primal),
                          float(avg_primal), float(infeas), float(step)))

    @property
    def dual_values(self):
        return np.array([r[1] for r in self.rows])

    @property
    def avg_costs(self):
        return np.array([r[3] for r in self.rows])

    @property
    def infeasibilities(self):
        return np.array([r[4] for r in self.rows])

    @property
    def best_dual(self):
        return float(np.max(self.dual_values)) if self.rows else -np.inf

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            writer.writerows(self.rows)

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        with open(path) as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                trace.add(*row)
        return trace


def sherali_choi_average(history, thetas, mu_scheme="uniform"):
    """Convex combination of primal iterates with validated weights.

    Uniform weights are the only built-in scheme; the weight-to-step ratios
    must be non-decreasing along the history, which is asserted here (the
    remaining conditions are limits over k and are checked symbolically at
    configuration time).
    """
    k = len(history)
    if k == 0:
        raise ConfigError("no iterates to average")
    if mu_scheme != "uniform":
        raise ConfigError(f"unknown averaging scheme {mu_scheme!r}")
    mu = np.full(k, 1.0 / k)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size != k:
        raise ConfigError("need one step size per iterate")
    gamma = mu / thetas
    if np.any(np.diff(gamma) < -1e-12 * np.max(gamma)):
        raise ConfigError("weight-to-step ratios decrease along history")
    out = None
    for w, item in zip(mu, history):
        if out is None:
            out = {key: w * np.asarray(val, dtype=float)
                   for key, val in item.items()}
        else:
            for key, val in item.items():
                out[key] = out[key] + w * np.asarray(val, dtype=float)
    return out


class _RunningMean:
    """Uniform running average of dicts of arrays (burn-in handled upstream)."""

    def __init__(self):
        self.k = 0
        self.mean = None

    def add(self, item):
        self.k += 1
        if self.mean is None:
            self.mean = {key: np.array(val, dtype=float)
                         for key, val in item.items()}
        else:
            for key, val in item.items():
                self.mean[key] += (np.asarray(val, dtype=float)
                                   - self.mean[key]) / self.k

    def get(self):
        return self.mean


# ---------------------------------------------------------------------------
# problem wrappers exposing the dual function
# ---------------------------------------------------------------------------

class SwDualProblem:
    """Dual function of the lossless multicast problem at multipliers lam.

    lam maps terminal id -> per-source array.  The value combines the priced
    flow subproblem with one greedy rate oracle per terminal; the
    supergradient entries are the coupling residuals rates - virtual flows.
    """

    def __init__(self, g, rank, total_rate=None):
        self.g = g
        self.rank = rank
        self.total_rate = float(total_rate if total_rate is not None
                                else rank.value_mask(rank.full_mask()))
        self.flow = lpcore.SwFlowSolver(g, self.total_rate)

    def dual_value(self, lam):
        z, x, flow_val = self.flow.evaluate(lam)
        rates = {}
        value = flow_val
        subgrad = {}
        for t in self.g.terminals:
            lt = np.asarray(lam[t], dtype=float)
            r_t = regions.greedy_min_linear(self.rank, lt)
            rates[t] = r_t
            value += float(lt @ r_t)
            subgrad[t] = r_t - np.array(
                [x[t][self.flow.virt[j]]
                 for j in range(self.g.n_sources)])
        return value, subgrad, (z, x, rates)


class CeoDualProblem:
    """Dual function of the single-terminal remote-estimation problem.

    lam = (per-source array, terminal scalar).  Oracle weights are the sum
    of source and terminal multipliers; with the floor both stay positive,
    keeping the rate oracle bounded.
    """

    def __init__(self, net, model):
        self.net = net
        self.model = model
        self.flow = lpcore.CeoFlowSolver(net)
        self.terminal = net.terminals[0]
        n_e = len(net.edges)
        self._net_out = {}
        for v in list(net.sources) + [self.terminal]:
            row = np.zeros(n_e)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += 1.0
                if edge.head == v:
                    row[e] -= 1.0
            self._net_out[v] = row

    def net_outflow(self, v, x):
        return float(self._net_out[v] @ x)

    def dual_value(self, lam_src, lam_t):
        x, flow_val = self.flow.evaluate(lam_src, lam_t)
        w = np.asarray(lam_src, dtype=float) + float(lam_t)
        oracle = regions.ceo_min_linear(self.model, w)
        if oracle.unbounded:
            raise lpcore.LpError(
                "rate oracle unbounded; dual floor misconfigured")
        value = flow_val + oracle.value
        sub_src = oracle.rates - np.array(
            [self.net_outflow(s, x) for s in self.net.sources])
        sub_t = float(np.sum(oracle.rates)) \
            + self.net_outflow(self.terminal, x)
        return value, (sub_src, sub_t), (x, oracle.rates, oracle.r)


class LifetimeDualProblem:
    """Dual function of the lifetime problem at (balance, energy) multipliers.

    Flat layout: [per-source balance, terminal balance, per-source energy].
    """

    def __init__(self, net, model, energy):
        self.net = net
        self.model = model
        self.energy = energy
        self.flow = lpcore.LifetimeFlowSolver(net, energy)
        self.terminal = net.terminals[0]
        n_e = len(net.edges)
        self.n_s = net.n_sources
        self._net_out = {}
        self._tx_row = {}
        self._rx_row = {}
        for v in list(net.sources) + [self.terminal]:
            out = np.zeros(n_e)
            tx = np.zeros(n_e)
            rx = np.zeros(n_e)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    out[e] += 1.0
                    tx[e] = energy.p_tx(edge.tail, edge.head)
                if edge.head == v:
                    out[e] -= 1.0
                    rx[e] = energy.p_rx(edge.tail, edge.head)
            self._net_out[v] = out
            self._tx_row[v] = tx
            self._rx_row[v] = rx

    def split(self, lam):
        return lam[:self.n_s], float(lam[self.n_s]), lam[self.n_s + 1:]

    def dual_value(self, lam):
        lam1_src, lam1_t, lam2_src = self.split(np.asarray(lam, dtype=float))
        gamma, x, flow_val = self.flow.evaluate(lam1_src, lam1_t, lam2_src)
        w = lam1_src + lam1_t + np.array(
            [self.energy.p_sense(s) for s in self.net.sources]) * lam2_src
        oracle = regions.ceo_min_linear(self.model, w)
        if oracle.unbounded:
            raise lpcore.LpError(
                "rate oracle unbounded; dual floor misconfigured")
        value = flow_val + oracle.value
        sub = np.empty(lam.size)
        for j, s in enumerate(self.net.sources):
            sub[j] = oracle.rates[j] - float(self._net_out[s] @ x)
            use = float(self._tx_row[s] @ x) + float(self._rx_row[s] @ x) \
                + self.energy.p_sense(s) * oracle.rates[j]
            sub[self.n_s + 1 + j] = use - self.energy.battery(s) * gamma
        sub[self.n_s] = float(np.sum(oracle.rates)) \
            + float(self._net_out[self.terminal] @ x)
        payload = {"gamma": np.array([gamma]), "x": x,
                   "rates": oracle.rates, "r": oracle.r}
        return value, sub, payload


def dual_value(problem, lam):
    """Dual value and supergradient of a problem wrapper at multipliers lam.

    ``problem`` is one of the *DualProblem wrappers; ``lam`` uses that
    problem's natural multiplier layout.
    """
    if isinstance(problem, SwDualProblem):
        value, sub, _ = problem.dual_value(lam)
        return value, sub
    if isinstance(problem, CeoDualProblem):
        value, sub, _ = problem.dual_value(*lam)
        return value, sub
    if isinstance(problem, LifetimeDualProblem):
        value, sub, _ = problem.dual_value(lam)
        return value, sub
    raise TypeError(f"unknown problem wrapper {type(problem)!r}")


# ---------------------------------------------------------------------------
# lossless multicast driver
# ---------------------------------------------------------------------------

class SwSolution:
    def __init__(self, assignment, cost, trace, dual_bound, status,
                 raw_infeasibility, repaired):
        self.assignment = assignment
        self.cost = cost
        self.trace = trace
        self.dual_bound = dual_bound
        #: "converged" or "iteration-cap"
        self.status = status
        #: coupling violation of the raw average (before repair)
        self.raw_infeasibility = raw_infeasibility
        #: whether the returned flows come from the repair resolve
        self.repaired = repaired

    @property
    def gap(self):
        ref = max(1.0, abs(self.dual_bound))
        return (self.cost - self.dual_bound) / ref


class _SwRepair:
    """Min-cost flows for frozen per-terminal rates (coupling made hard)."""

    def __init__(self, dual_problem):
        g = dual_problem.g
        flow = dual_problem.flow
        lp = flow.solver.lp
        n_vars = lp.n
        rows = []
        for k, t in enumerate(flow.terminals):
            for j in range(g.n_sources):
                row = np.zeros(n_vars)
                row[(1 + k) * flow.n_e + flow.virt[j]] = -1.0
                rows.append(row)
        a_ub = np.vstack([lp.a_ub, np.array(rows)])
        b_ub = np.concatenate([lp.b_ub, np.zeros(len(rows))])
        self.base_rows = lp.b_ub.copy()
        self.flow = flow
        self.g = g
        self.lp = lpcore.LinearProgram(
            flow.base_cost.copy(), a_ub=a_ub, b_ub=b_ub,
            a_eq=lp.a_eq.copy(), b_eq=lp.b_eq.copy(),
            lb=np.zeros(n_vars),
            ub=np.concatenate([g.capacities] * (1 + len(flow.terminals))))
        self.solver = lpcore.BoundedSimplex(self.lp)

    def repair(self, rates):
        rate_rhs = -np.concatenate(
            [rates[t] for t in self.flow.terminals])
        res = self.solver.resolve_rhs(
            b_ub=np.concatenate([self.base_rows, rate_rhs]))
        if res.status != "optimal":
            return None
        z = res.x[:self.flow.n_e]
        x = {t: res.x[(1 + k) * self.flow.n_e:(2 + k) * self.flow.n_e]
             for k, t in enumerate(self.flow.terminals)}
        return z, x, res.value


def solve_sw(g, rank, cfg=None):
    """Jointly allocate per-terminal rates and multicast flows, min cost.

    Projected-subgradient ascent on the dual with uniform primal averaging
    after the burn-in; the returned assignment carries the averaged rates
    with exactly-feasible repaired flows.
    """
    cfg = cfg or sw_default_config()
    if cfg.check_feasibility and g.n_sources <= regions.EXHAUSTIVE_LIMIT:
        report = netmodel.check_feasibility(g.base, rank,
                                            g.marginal_entropies)
        if not report.feasible:
            t, (mask, cut, need) = next(iter(report.violations.items()))
            raise netmodel.InfeasibleError(
                f"terminal {t}: source subset {mask:#b} needs rate "
                f"{need:.6g} but min-cut is only {cut:.6g}",
                witness=(t, mask, cut, need))
    problem = SwDualProblem(g, rank)
    lam = {t: np.full(g.n_sources, 1.0) for t in g.terminals}
    mean = _RunningMean()
    trace = ConvergenceTrace()
    repairer = _SwRepair(problem) if cfg.repair else None
    best_dual = -np.inf
    stagnant = 0
    status = "iteration-cap"
    repaired = None
    costs = g.costs

    for k in range(1, cfg.max_iters + 1):
        value, subgrad, (z, x, rates) = problem.dual_value(lam)
        best_dual = max(best_dual, value)
        theta = cfg.step.value(k)
        inst_cost = float(costs @ z)
        if k > cfg.burn_in:
            mean.add({"z": z, **{f"x{t}": x[t] for t in g.terminals},
                      **{f"R{t}": rates[t] for t in g.terminals}})
        avg = mean.get()
        if avg is not None:
            avg_cost = float(costs @ avg["z"])
            infeas = max(
                float(np.max(avg[f"R{t}"] - np.array(
                    [avg[f"x{t}"][problem.flow.virt[j]]
                     for j in range(g.n_sources)]), initial=0.0))
                for t in g.terminals)
        else:
            avg_cost, infeas = inst_cost, np.inf
        trace.add(k, value, inst_cost, avg_cost, infeas, theta)

        # dual ascent
        lam = {t: np.maximum(cfg.dual_floor, lam[t] + theta * subgrad[t])
               for t in g.terminals}

        # stagnation of the averaged cost, then attempt repair
        if len(trace.rows) >= 2 and avg is not None:
            prev = trace.rows[-2][3]
            rel = abs(avg_cost - prev) / max(1.0, abs(avg_cost))
            stagnant = stagnant + 1 if rel < cfg.tol else 0
            if stagnant >= cfg.tol_window and k > cfg.burn_in + \
                    cfg.tol_window:
                candidate = _finalize_sw(avg, repairer, g, problem)
                if candidate is not None:
                    status = "converged"
                    repaired = candidate
                    break
                stagnant = 0

    if repaired is None:
        avg = mean.get()
        repaired = _finalize_sw(avg, repairer, g, problem)
    raw_infeas = trace.rows[-1][4] if trace.rows else np.inf
    if repaired is None:  # repair off or failed: return the raw average
        rates = {t: avg[f"R{t}"] for t in g.terminals}
        fa = netmodel.FlowAssignment(
            avg["z"], {t: avg[f"x{t}"] for t in g.terminals}, rates,
            problem.total_rate)
        return SwSolution(fa, float(costs @ avg["z"]), trace, best_dual,
                          status, raw_infeas, repaired=False)
    z, x, cost, rates = repaired
    fa = netmodel.FlowAssignment(z, x, rates, problem.total_rate)
    return SwSolution(fa, cost, trace, best_dual, status, raw_infeas,
                      repaired=True)


def _finalize_sw(avg, repairer, g, problem):
    if avg is None:
        return None
    rates = {t: avg[f"R{t}"].copy() for t in g.terminals}
    if repairer is None:
        return None
    got = repairer.repair(rates)
    if got is None:
        return None
    z, x, cost = got
    return z, x, cost, rates


# ---------------------------------------------------------------------------
# remote-estimation driver
# ---------------------------------------------------------------------------

class CeoSolution:
    def __init__(self, x, rates, r_star, cost, trace, dual_bound, status,
                 raw_infeasibility, repaired):
        self.x = x
        self.rates = rates
        #: auxiliary vector certifying region membership of ``rates``
        self.r_star = r_star
        self.cost = cost
        self.trace = trace
        self.dual_bound = dual_bound
        self.status = status
        self.raw_infeasibility = raw_infeasibility
        self.repaired = repaired

    @property
    def gap(self):
        ref = max(1.0, abs(self.dual_bound))
        return (self.cost - self.dual_bound) / ref


class _CeoRepair:
    """Min-cost routing for frozen rates on the physical graph."""

    def __init__(self, problem):
        net = problem.net
        n_e = len(net.edges)
        terminal = problem.terminal
        rows = [-problem._net_out[s] for s in net.sources]  # netout >= R_i
        rows.append(problem._net_out[terminal])             # netout <= -sumR
        base = problem.flow.solver.lp
        a_ub = np.array(rows)
        a_eq = base.a_eq.copy() if base.a_eq.size else None
        b_eq = base.b_eq.copy() if base.a_eq.size else None
        self.lp = lpcore.LinearProgram(
            net.costs.copy(), a_ub=a_ub, b_ub=np.zeros(len(rows)),
            a_eq=a_eq, b_eq=b_eq, lb=np.zeros(n_e),
            ub=net.capacities.copy())
        self.solver = lpcore.BoundedSimplex(self.lp)
        self.n_src = net.n_sources

    def repair(self, rates):
        b_ub = np.concatenate([-np.asarray(rates),
                               [-float(np.sum(rates))]])
        res = self.solver.resolve_rhs(b_ub=b_ub)
        if res.status != "optimal":
            return None
        return res.x.copy(), res.value


def solve_ceo(net, model, cfg=None):
    """Min-cost routing of remote-estimation rates to a single terminal.

    Projected subgradient with uniform (ergodic) averaging of flows, rates
    and auxiliary vectors after the burn-in; dual components are floored so
    the rate oracle stays bounded.
    """
    cfg = cfg or ceo_default_config()
    problem = CeoDualProblem(net, model)
    n_s = net.n_sources
    lam_src = np.full(n_s, 1.0)
    lam_t = 1.0
    mean = _RunningMean()
    trace = ConvergenceTrace()
    repairer = _CeoRepair(problem) if cfg.repair else None
    best_dual = -np.inf
    stagnant = 0
    status = "iteration-cap"
    final = None
    costs = net.costs
    last_r = None

    for k in range(1, cfg.max_iters + 1):
        value, (sub_src, sub_t), (x, rates, r_aux) = problem.dual_value(
            lam_src, lam_t)
        best_dual = max(best_dual, value)
        alpha = cfg.step.value(k)
        inst_cost = float(costs @ x)
        last_r = r_aux
        if k > cfg.burn_in:
            mean.add({"x": x, "R": rates, "r": r_aux})
        avg = mean.get()
        if avg is not None:
            avg_cost = float(costs @ avg["x"])
            infeas = max(
                float(np.max(avg["R"] - np.array(
                    [problem.net_outflow(s, avg["x"])
                     for s in net.sources]), initial=0.0)),
                float(np.sum(avg["R"]))
                + problem.net_outflow(problem.terminal, avg["x"]))
            infeas = max(0.0, infeas)
        else:
            avg_cost, infeas = inst_cost, np.inf
        trace.add(k, value, inst_cost, avg_cost, infeas, alpha)

        lam_src = np.maximum(cfg.dual_floor, lam_src + alpha * sub_src)
        lam_t = max(cfg.dual_floor, lam_t + alpha * sub_t)

        if len(trace.rows) >= 2 and avg is not None:
            prev = trace.rows[-2][3]
            rel = abs(avg_cost - prev) / max(1.0, abs(avg_cost))
            stagnant = stagnant + 1 if rel < cfg.tol else 0
            if stagnant >= cfg.tol_window and k > cfg.burn_in + \
                    cfg.tol_window:
                final = _finalize_ceo(avg, repairer, problem, last_r)
                if final is not None:
                    status = "converged"
                    break
                stagnant = 0

    avg = mean.get()
    if final is None:
        final = _finalize_ceo(avg, repairer, problem, last_r)
    raw_infeas = trace.rows[-1][4] if trace.rows else np.inf
    if final is None:
        r_star = _certify_r(problem.model, avg["R"], [avg["r"], last_r])
        return CeoSolution(avg["x"], avg["R"], r_star,
                           float(costs @ avg["x"]), trace, best_dual,
                           status, raw_infeas, repaired=False)
    x, cost, rates, r_star = final
    return CeoSolution(x, rates, r_star, cost, trace, best_dual, status,
                       raw_infeas, repaired=True)


def _certify_r(model, rates, candidates):
    """Pick the auxiliary vector whose region best contains ``rates``."""
    best, best_margin = None, -np.inf
    for cand in candidates:
        if cand is None:
            continue
        rank = regions.CeoRank(model, np.maximum(cand, 0.0))
        rep = regions.region_membership(rank, rates, tol=np.inf)
        if rep.margin > best_margin:
            best, best_margin = np.maximum(cand, 0.0), rep.margin
    return best


def _finalize_ceo(avg, repairer, problem, last_r):
    if avg is None or repairer is None:
        return None
    got = repairer.repair(avg["R"])
    if got is None:
        return None
    x, cost = got
    r_star = _certify_r(problem.model, avg["R"], [avg["r"], last_r])
    return x, cost, avg["R"].copy(), r_star


# ---------------------------------------------------------------------------
# lifetime driver (proximal bundle)
# ---------------------------------------------------------------------------

@dataclass
class EnergyParams:
    """Battery levels and power figures of a sensing network.

    Scalars broadcast; dicts override per node, per edge, or per source.
    ``gamma`` (the reciprocal lifetime) is a variable of the optimization,
    not a parameter here.
    """

    battery_default: float = 200.0
    p_tx_default: float = 1.0
    p_rx_default: float = 0.5
    p_sense_default: float = 0.001
    batteries: dict = field(default_factory=dict)
    p_tx_map: dict = field(default_factory=dict)
    p_rx_map: dict = field(default_factory=dict)
    p_sense_map: dict = field(default_factory=dict)

    def __post_init__(self):
        values = [self.battery_default, self.p_tx_default,
                  self.p_rx_default, self.p_sense_default]
        values += list(self.batteries.values())
        values += list(self.p_tx_map.values()) + list(self.p_rx_map.values())
        if any(v < 0 for v in values):
            raise ConfigError("energy parameters must be non-negative")
        if self.battery_default <= 0 and not self.batteries:
            raise ConfigError("battery levels must be positive")

    def battery(self, v):
        return float(self.batteries.get(v, self.battery_default))

    def p_tx(self, u, v):
        return float(self.p_tx_map.get((u, v), self.p_tx_default))

    def p_rx(self, u, v):
        return float(self.p_rx_map.get((u, v), self.p_rx_default))

    def p_sense(self, v):
        return float(self.p_sense_map.get(v, self.p_sense_default))

    def max_power(self):
        vals = [self.p_tx_default, self.p_rx_default]
        vals += list(self.p_tx_map.values()) + list(self.p_rx_map.values())
        return max(vals)

    def scaled_batteries(self, factor):
        return EnergyParams(
            self.battery_default * factor, self.p_tx_default,
            self.p_rx_default, self.p_sense_default,
            {k: v * factor for k, v in self.batteries.items()},
            dict(self.p_tx_map), dict(self.p_rx_map),
            dict(self.p_sense_map))


class LifetimeSolution:
    def __init__(self, gamma, x, rates, r_star, trace, dual_bound, status,
                 serious_steps, repaired):
        self.gamma = gamma
        self.x = x
        self.rates = rates
        self.r_star = r_star
        self.trace = trace
        self.dual_bound = dual_bound
        self.status = status
        self.serious_steps = serious_steps
        self.repaired = repaired

    @property
    def lifetime(self):
        return np.inf if self.gamma <= 0 else 1.0 / self.gamma


class _LifetimeRepair:
    """Min reciprocal-lifetime for frozen rates: an LP in (flows, gamma)."""

    def __init__(self, net, energy):
        self.net = net
        self.energy = energy
        n_e = len(net.edges)
        terminal = net.terminals[0]
        nv = n_e + 1  # flows + gamma
        self.gamma_col = n_e
        rows_ub = []
        self.n_rate_rows = net.n_sources + 1
        for v in net.sources:  # net outflow >= R_v (rhs set per repair)
            row = np.zeros(nv)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] -= 1.0
                if edge.head == v:
                    row[e] += 1.0
            rows_ub.append(row)
        row = np.zeros(nv)
        for e, edge in enumerate(net.edges):  # terminal absorbs the total
            if edge.tail == terminal:
                row[e] += 1.0
            if edge.head == terminal:
                row[e] -= 1.0
        rows_ub.append(row)
        self.energy_rows = []
        for v in net.nodes:  # every node obeys its battery budget
            row = np.zeros(nv)
            for e, edge in enumerate(net.edges):
                if edge.tail == v:
                    row[e] += energy.p_tx(edge.tail, edge.head)
                if edge.head == v:
                    row[e] += energy.p_rx(edge.tail, edge.head)
            row[self.gamma_col] = -energy.battery(v)
            rows_ub.append(row)
            self.energy_rows.append(v)
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
        c[self.gamma_col] = 1.0
        self.lp = lpcore.LinearProgram(
            c, a_ub=np.array(rows_ub), b_ub=np.zeros(len(rows_ub)),
            a_eq=np.array(rows_eq) if rows_eq else None,
            b_eq=np.zeros(len(rows_eq)) if rows_eq else None,
            lb=np.zeros(nv),
            ub=np.concatenate([net.capacities, [np.inf]]))
        self.solver = lpcore.BoundedSimplex(self.lp)

    def repair(self, rates):
        rates = np.asarray(rates, dtype=float)
        b_ub = np.zeros(self.lp.a_ub.shape[0])
        b_ub[:self.net.n_sources] = -rates
        b_ub[self.net.n_sources] = -float(np.sum(rates))
        for k, v in enumerate(self.energy_rows):
            if v in self.net.sources:
                j = self.net.sources.index(v)
                b_ub[self.n_rate_rows + k] = \
                    -self.energy.p_sense(v) * rates[j]
        res = self.solver.resolve_rhs(b_ub=b_ub)
        if res.status != "optimal":
            return None
        return float(res.x[self.gamma_col]), res.x[:self.gamma_col].copy()


def solve_lifetime(net, model, energy, cfg=None):
    """Maximize network lifetime under a reconstruction-fidelity constraint.

    Proximal bundle ascent on the dual of the squared-reciprocal-lifetime
    program; primal recovery aggregates the stored subproblem solutions with
    the bundle multipliers, then one repair LP restores exact feasibility at
    the aggregated rates.
    """
    cfg = cfg or lifetime_default_config()
    problem = LifetimeDualProblem(net, model, energy)
    dim = 2 * net.n_sources + 1
    center = np.full(dim, 1.0)
    floor = cfg.dual_floor
    f_center, s_center, z_center = problem.dual_value(center)
    cuts = [Cut(f_center, s_center, center, z_center)]
    mu = cfg.bundle_mu0
    trace = ConvergenceTrace()
    serious = 0
    null_run = 0
    serious_run = 0
    status = "iteration-cap"
    nu = np.array([1.0])
    stability_values = [f_center]

    for k in range(1, cfg.max_iters + 1):
        y, model_val, nu = solve_prox_qp(cuts, center, mu, floor)
        delta = model_val - f_center
        delta = max(delta, 0.0)
        agg = _aggregate_lifetime(cuts, nu)
        gamma_hat = float(agg["gamma"][0])
        infeas = _lifetime_infeas(problem, agg)
        trace.add(k, f_center, gamma_hat, gamma_hat, infeas, mu)
        if delta < cfg.bundle_delta:
            status = "converged"
            break
        f_y, s_y, z_y = problem.dual_value(y)
        if f_y - f_center >= cfg.bundle_m * delta:
            center, f_center = y, f_y
            serious += 1
            serious_run += 1
            null_run = 0
            if serious_run >= 3:
                mu = min(mu * 2.0, 1e8)
                serious_run = 0
        else:
            null_run += 1
            serious_run = 0
            if null_run >= 5:
                mu = max(mu * 0.5, 1e-8)
                null_run = 0
        stability_values.append(f_center)
        cuts.append(Cut(f_y, s_y, y, z_y))
        if len(cuts) > cfg.bundle_max_cuts:
            cuts = _compress_bundle(cuts, nu)

    agg = _aggregate_lifetime(cuts, nu)
    rates = agg["rates"]
    r_star = _certify_r(model, rates, [agg["r"]])
    repairer = _LifetimeRepair(net, energy) if cfg.repair else None
    repaired = repairer.repair(rates) if repairer else None
    if repaired is None:
        sol = LifetimeSolution(float(agg["gamma"][0]), agg["x"], rates,
                               r_star, trace, f_center, status, serious,
                               repaired=False)
    else:
        gamma, x = repaired
        sol = LifetimeSolution(gamma, x, rates, r_star, trace, f_center,
                               status, serious, repaired=True)
    sol.stability_values = np.array(stability_values)
    return sol


def _aggregate_lifetime(cuts, nu):
    keep = np.flatnonzero(nu > 1e-14)
    if keep.size == 0:
        keep = np.array([len(cuts) - 1])
        weights = np.array([1.0])
    else:
        weights = nu[keep] / nu[keep].sum()
    out = None
    for w, j in zip(weights, keep):
        payload = cuts[j].payload
        if out is None:
            out = {key: w * np.asarray(val, dtype=float)
                   for key, val in payload.items()}
        else:
            for key, val in payload.items():
                out[key] = out[key] + w * np.asarray(val, dtype=float)
    return out


def _lifetime_infeas(problem, agg):
    net = problem.net
    x = agg["x"]
    rates = agg["rates"]
    gamma = float(agg["gamma"][0])
    worst = 0.0
    for j, s in enumerate(net.sources):
        worst = max(worst, rates[j] - float(problem._net_out[s] @ x))
        use = float(problem._tx_row[s] @ x) + float(problem._rx_row[s] @ x) \
            + problem.energy.p_sense(s) * rates[j]
        worst = max(worst, use - problem.energy.battery(s) * gamma)
    worst = max(worst, float(np.sum(rates))
                + float(problem._net_out[problem.terminal] @ x))
    return worst


def _compress_bundle(cuts, nu):
    """Replace old cuts by their nu-aggregate, keeping the newest ones."""
    m = len(cuts)
    nu = np.asarray(nu, dtype=float)
    if nu.size < m:
        nu = np.concatenate([nu, np.zeros(m - nu.size)])
    weights = np.maximum(nu, 0.0)
    if weights.sum() <= 0:
        weights = np.ones(m)
    weights = weights / weights.sum()
    s_agg = np.sum([w * c.grad for w, c in zip(weights, cuts)], axis=0)
    const_agg = float(np.sum([w * c.const for w, c in zip(weights, cuts)]))
    payload = None
    for w, c in zip(weights, cuts):
        if payload is None:
            payload = {key: w * np.asarray(val, dtype=float)
                       for key, val in c.payload.items()}
        else:
            for key, val in c.payload.items():
                payload[key] = payload[key] + w * np.asarray(val,
                                                             dtype=float)
    agg = Cut.__new__(Cut)
    agg.grad = s_agg
    agg.const = const_agg
    agg.payload = payload
    keep = cuts[-(len(cuts) // 2):]
    return [agg] + keep
