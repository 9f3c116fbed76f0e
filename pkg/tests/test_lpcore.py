"""Unit tests for the bounded-variable simplex."""

import itertools

import numpy as np
import pytest

from dscnet import lpcore


def test_single_variable_lower_bound():
    # min x s.t. x >= 3, x <= 5
    lp = lpcore.LinearProgram(c=[1.0], a_ub=[[-1.0]], b_ub=[-3.0],
                              lb=[0.0], ub=[5.0])
    res = lpcore.solve_lp(lp)
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)
    assert res.value == pytest.approx(3.0, abs=1e-9)


def test_infeasible_bounds():
    lp = lpcore.LinearProgram(c=[1.0], a_ub=[[-1.0]], b_ub=[-5.0],
                              lb=[0.0], ub=[3.0])
    assert lpcore.solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = lpcore.LinearProgram(c=[-1.0])
    assert lpcore.solve_lp(lp).status == "unbounded"


def test_upper_bound_optimum():
    # max x1+x2 within a box intersected with a coupling row
    lp = lpcore.LinearProgram(c=[-1.0, -1.0], a_ub=[[1.0, 2.0]], b_ub=[4.0],
                              ub=[3.0, 3.0])
    res = lpcore.solve_lp(lp)
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(3.0, abs=1e-9)
    assert res.x[1] == pytest.approx(0.5, abs=1e-9)


def test_degenerate_classic_cycle_terminates():
    # Beale's cycling example; value -1/20 at the optimum
    c = [-0.75, 150.0, -0.02, 6.0]
    a_ub = [[0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0]]
    b_ub = [0.0, 0.0, 1.0]
    res = lpcore.solve_lp(lpcore.LinearProgram(c, a_ub=a_ub, b_ub=b_ub))
    assert res.status == "optimal"
    assert res.value == pytest.approx(-0.05, abs=1e-9)


def _random_transportation(rng, n_supply, n_demand):
    supply = rng.random(n_supply) * 4 + 1
    demand = rng.random(n_demand)
    demand *= supply.sum() / demand.sum()
    n = n_supply * n_demand
    a_eq = np.zeros((n_supply + n_demand, n))
    for i in range(n_supply):
        for j in range(n_demand):
            a_eq[i, i * n_demand + j] = 1.0
            a_eq[n_supply + j, i * n_demand + j] = 1.0
    b_eq = np.concatenate([supply, demand])
    c = rng.random(n) * 3 + 0.1
    return lpcore.LinearProgram(c, a_eq=a_eq, b_eq=b_eq)


def _vertex_enumeration_min(lp):
    """Brute-force LP oracle: scan every basic feasible support."""
    a, b, c = lp.a_eq, lp.b_eq, lp.c
    rank = np.linalg.matrix_rank(a)
    best = np.inf
    for cols in itertools.combinations(range(lp.n), rank):
        sub = a[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x_sub, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.max(np.abs(sub @ x_sub - b)) > 1e-8:
            continue
        if np.min(x_sub) < -1e-9:
            continue
        best = min(best, float(c[list(cols)] @ x_sub))
    return best


def test_transportation_matches_vertex_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(5):
        lp = _random_transportation(rng, 2, 5)  # 10 variables
        res = lpcore.solve_lp(lp)
        assert res.status == "optimal"
        oracle = _vertex_enumeration_min(lp)
        assert res.value == pytest.approx(oracle, abs=1e-8)


def test_transportation_dual_certificate_50_vars():
    rng = np.random.default_rng(7)
    lp = _random_transportation(rng, 5, 10)  # 50 variables
    res = lpcore.solve_lp(lp)
    assert res.status == "optimal"
    # primal feasibility
    assert np.max(np.abs(lp.a_eq @ res.x - lp.b_eq)) < 1e-8
    assert np.min(res.x) > -1e-9
    # dual feasibility: reduced costs respect the bound signs
    rc = lp.c + lp.a_eq.T @ res.dual_eq
    at_lb = res.x <= 1e-9
    assert np.all(rc[at_lb] > -1e-8)
    assert np.max(np.abs(rc[~at_lb])) < 1e-8  # interior variables
    # strong duality (duals follow the c + A'lam - mu_lo + mu_up = 0 sign
    # convention, so the dual objective is -b'lam when lb = 0)
    assert res.value == pytest.approx(-float(lp.b_eq @ res.dual_eq), abs=1e-7)


def test_complementary_slackness_inequalities():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, m = 6, 4
        lp = lpcore.LinearProgram(
            c=rng.normal(size=n),
            a_ub=rng.normal(size=(m, n)), b_ub=rng.random(m) * 2 + 0.5,
            ub=np.full(n, 2.0))
        res = lpcore.solve_lp(lp)
        assert res.status == "optimal"
        slack = lp.b_ub - lp.a_ub @ res.x
        assert np.min(slack) > -1e-8
        assert np.min(res.dual_ub) > -1e-8
        assert np.max(np.abs(res.dual_ub * slack)) < 1e-8


def test_warm_resolve_matches_cold_solve():
    rng = np.random.default_rng(11)
    lp = _random_transportation(rng, 4, 6)
    solver = lpcore.BoundedSimplex(lp)
    first = solver.solve()
    assert first.status == "optimal"
    for _ in range(20):
        c_new = rng.random(lp.n) * 3 + 0.1
        warm = solver.resolve(c_new)
        cold = lpcore.solve_lp(lpcore.LinearProgram(
            c_new, a_eq=lp.a_eq, b_eq=lp.b_eq))
        assert warm.status == "optimal"
        assert warm.value == pytest.approx(cold.value, abs=1e-8)


def test_rhs_resolve_matches_cold_solve():
    rng = np.random.default_rng(13)
    n = 5
    a_ub = rng.random((4, n)) + 0.1
    c = rng.random(n) - 2.0  # make the rows bind
    lp = lpcore.LinearProgram(c, a_ub=a_ub, b_ub=np.full(4, 2.0),
                              ub=np.full(n, 5.0))
    solver = lpcore.BoundedSimplex(lp)
    assert solver.solve().status == "optimal"
    for scale in (1.9, 1.5, 1.05, 0.6, 2.5):
        b_new = np.full(4, 2.0) * scale
        warm = solver.resolve_rhs(b_ub=b_new)
        cold = lpcore.solve_lp(lpcore.LinearProgram(
            c, a_ub=a_ub, b_ub=b_new, ub=np.full(n, 5.0)))
        assert warm.value == pytest.approx(cold.value, abs=1e-8)


def test_redundant_equality_rows():
    # duplicated rows leave a pinned artificial behind; solution unaffected
    lp = lpcore.LinearProgram(
        c=[1.0, 2.0],
        a_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[3.0, 6.0])
    res = lpcore.solve_lp(lp)
    assert res.status == "optimal"
    assert res.value == pytest.approx(3.0, abs=1e-9)
