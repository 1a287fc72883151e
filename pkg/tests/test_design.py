import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mnldesign.design import (frank_wolfe, g_value, init_design, iteration_bound,
                              lift_error, line_search, make_design)
from mnldesign.lmo import lmo_brute
from mnldesign.mnl import all_assortments, fisher_info
from mnldesign.oracles import bisect_lift_error
from mnldesign.sim import gen_instance

from conftest import random_instance


def _multiplicative(inst, theta0, iters=3000):
    # reference D-optimal design: w_S <- w_S tr(M^-1 I_S) / d over every assortment
    atoms = list(all_assortments(inst))
    Is = np.array([fisher_info(inst, S, theta0) for S in atoms])
    w = np.full(len(atoms), 1.0 / len(atoms))
    for _ in range(iters):
        M = np.einsum("s,sij->ij", w, Is)
        g = np.einsum("ij,sji->s", np.linalg.inv(M), Is)
        w *= g / inst.d
        w /= w.sum()
    return np.linalg.slogdet(np.einsum("s,sij->ij", w, Is))[1]


def test_line_search_closed_form():
    # eigenvalues (3, 0): maximize log(1 + 2g) + log(1 - g) -> g = 1/4
    g = line_search(np.eye(2), np.diag([3.0, 0.0]))
    assert g == pytest.approx(0.25, abs=1e-8)


def test_line_search_tie_returns_zero():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert line_search(M, M) == 0.0
    assert line_search(np.eye(2), 0.5 * np.eye(2)) == 0.0


def test_line_search_full_step_when_always_improving():
    assert line_search(np.eye(1), 4.0 * np.eye(1)) == pytest.approx(1 - 1e-9)


@given(st.integers(0, 10_000))
def test_line_search_vs_grid(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(3, 3))
    M = X @ X.T + 0.1 * np.eye(3)
    Y = rng.normal(size=(3, 2))
    I = Y @ Y.T
    g = line_search(M, I)
    grid = np.linspace(0, 1 - 1e-9, 20001)
    vals = [np.linalg.slogdet((1 - t) * M + t * I)[1] for t in grid]
    best = max(vals)
    assert np.linalg.slogdet((1 - g) * M + g * I)[1] >= best - 1e-7


def test_iteration_bound_formula():
    assert iteration_bound(3, 0.1, math.exp(-2)) == 1 + math.ceil(4 * 3 * 2 / 0.1)
    assert iteration_bound(3, 0.1, 2.0) == 1


@pytest.mark.parametrize("seed", range(4))
def test_init_design_is_pd_and_normalized(seed):
    inst = random_instance(seed)
    d0 = init_design(inst, inst.theta_star, seed=seed)
    assert d0.weights.sum() == pytest.approx(1.0)
    assert np.linalg.eigvalsh(d0.M)[0] >= 1e-8
    ref = sum(w * fisher_info(inst, S, inst.theta_star) for S, w in zip(d0.atoms, d0.weights))
    np.testing.assert_allclose(d0.M, ref, atol=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_frank_wolfe_matches_reference_design(seed):
    inst = random_instance(seed, N=6, K=2)
    rep = frank_wolfe(inst, inst.theta_star, eps=0.01)
    assert rep.certified
    d = inst.d
    g_exact = lmo_brute(inst, inst.theta_star, np.linalg.inv(rep.design.M)).value
    assert d - 1e-6 <= g_exact <= 1.01 * d
    # concavity: log det(M*) - log det(M) <= g - d
    ref = _multiplicative(inst, inst.theta_star)
    mine = np.linalg.slogdet(rep.design.M)[1]
    assert mine <= ref + 1e-6
    assert ref - mine <= g_exact - d + 1e-6


def test_frank_wolfe_respects_iteration_bound():
    inst = random_instance(5, N=7, K=3)
    d0 = init_design(inst, inst.theta_star)
    cap = iteration_bound(inst.d, 0.05, np.linalg.eigvalsh(d0.M)[0])
    rep = frank_wolfe(inst, inst.theta_star, eps=0.05)
    assert rep.certified and rep.iterations <= cap


def test_frank_wolfe_milp_certificate():
    inst = gen_instance(8, 2, 3, 1.0, seed=21)
    rep = frank_wolfe(inst, inst.theta_star, eps=0.2, backend="milp", eps_lmo=0.1 * 3 * 0.05)
    assert rep.certified
    g_true = lmo_brute(inst, inst.theta_star, np.linalg.inv(rep.design.M)).value
    assert g_true <= 1.2 * 3


def test_lifted_guarantee():
    inst = gen_instance(10, 3, 3, 1.0, seed=4)
    rep = frank_wolfe(inst, inst.theta_star, eps=0.1, backend="lifted")
    assert rep.certified
    assert rep.eps_lift <= inst.K * math.exp(inst.B)
    g_true = lmo_brute(inst, inst.theta_star, np.linalg.inv(rep.design.M)).value
    assert g_true <= 2 * (1 + rep.eps_lift) * 1.1 * inst.d


@pytest.mark.parametrize("seed", range(3))
def test_lift_error_vs_bisection(seed):
    inst = random_instance(seed, N=7)
    d0 = init_design(inst, inst.theta_star, seed=seed)
    assert lift_error(d0) == pytest.approx(bisect_lift_error(d0.M, d0.Mt), abs=1e-8)


def test_make_design_validates_weights():
    inst = random_instance(0)
    with pytest.raises(ValueError):
        make_design(inst, inst.theta_star, [(0, 1)], [-1.0])


def test_g_value_milp_bound_covers_exact():
    inst = random_instance(6, N=7)
    d0 = init_design(inst, inst.theta_star)
    exact, _ = g_value(d0, inst, inst.theta_star, "brute")
    ub, _ = g_value(d0, inst, inst.theta_star, "milp", eps_lmo=0.1)
    assert exact - 1e-9 <= ub <= exact + 0.1 + 1e-9


def test_unknown_backend():
    inst = random_instance(0)
    with pytest.raises(ValueError):
        frank_wolfe(inst, inst.theta_star, backend="cplex")
