import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from mnldesign.checks import milp_case
from mnldesign.design import init_design
from mnldesign.milp import big_m, build_milp, build_qfip
from mnldesign.oracles import tableau_lp
from mnldesign.simplex import BoundedSimplex, equilibrate, lp_simplex
from mnldesign.sim import gen_instance


def test_single_bounded_variable():
    x, obj, status = lp_simplex([1.0], lower=[3.0], upper=[5.0])
    assert status == "optimal"
    assert x[0] == pytest.approx(3.0) and obj == pytest.approx(3.0)


def test_small_lp_by_hand():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y in [0, 10]: vertex (8/5, 6/5)
    x, obj, status = lp_simplex([-1, -1], A_le=[[1, 2], [3, 1]], b_le=[4, 6],
                                lower=[0, 0], upper=[10, 10])
    assert status == "optimal"
    np.testing.assert_allclose(x, [1.6, 1.2], atol=1e-12)
    assert obj == pytest.approx(-2.8)


def test_infeasible_detected():
    _, _, status = lp_simplex([1, 1], A_eq=[[1, 1]], b_eq=[5], lower=[0, 0], upper=[1, 1])
    assert status == "infeasible"


def _random_lp(seed):
    rng = np.random.default_rng(seed)
    n, me, ml = 6, 2, 4
    x0 = rng.uniform(0, 1, n)
    A_eq = rng.normal(size=(me, n))
    A_le = rng.normal(size=(ml, n))
    return dict(c=rng.normal(size=n), A_eq=A_eq, b_eq=A_eq @ x0, A_le=A_le,
                b_le=A_le @ x0 + rng.uniform(0, 1, ml), lower=np.zeros(n),
                upper=rng.uniform(1, 2, n))


@given(st.integers(0, 100_000))
def test_matches_tableau_oracle(seed):
    lp = _random_lp(seed)
    _, obj, status = lp_simplex(**lp)
    _, ref, ref_status = tableau_lp(**lp)
    assert status == ref_status == "optimal"
    assert obj == pytest.approx(ref, rel=1e-8, abs=1e-8)


@given(st.integers(0, 100_000))
def test_warm_start_matches_cold(seed):
    lp = _random_lp(seed)
    sx = BoundedSimplex(**lp)
    sx.solve_cold()
    state = sx.state()
    lo, hi = lp["lower"].copy(), lp["upper"].copy()
    hi[0] = 0.3
    lo[1] = 0.6
    sx.set_bounds(np.arange(6), lo, hi)
    warm = sx.solve_warm(state)
    cold = BoundedSimplex(**{**lp, "lower": lo, "upper": hi}).solve_cold()
    assert warm.status == cold.status
    if cold.status == "optimal":
        assert warm.objective == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)


def test_equilibrate_ignores_roundoff_entries():
    S = np.array([[1.0, 1e-17], [1e-17, 4.0]])
    r, c = equilibrate(S)
    scaled = np.abs(S * r[:, None] * c[None, :])
    assert scaled.max() == pytest.approx(1.0)
    assert scaled[0, 0] == pytest.approx(1.0) and scaled[1, 1] == pytest.approx(1.0)


def _root_vs_highs(model):
    res = BoundedSimplex(model.c, model.A_eq, model.b_eq, model.A_le, model.b_le,
                         model.lower, model.upper).solve_cold()
    ref = linprog(model.c, A_ub=model.A_le, b_ub=model.b_le, A_eq=model.A_eq, b_eq=model.b_eq,
                  bounds=list(zip(model.lower, model.upper)), method="highs")
    assert res.status == "optimal" and ref.status == 0
    assert res.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)


def test_regression_badly_scaled_case():
    # this instance once made the dual simplex report a feasible node as infeasible
    inst, theta0, Minv = milp_case(41)
    q = build_qfip(inst, theta0, Minv)
    _root_vs_highs(build_milp(q, big_m(q)))


def test_regression_large_root():
    # N = 50 root relaxation used to hit a singular basis in phase one
    inst = gen_instance(50, 3, 5, 1.0, seed=0)
    Minv = np.linalg.inv(init_design(inst, inst.theta_star, seed=0).M)
    q = build_qfip(inst, inst.theta_star, Minv)
    _root_vs_highs(build_milp(q, big_m(q)))
