import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mnldesign.estimator import (DesignMatrices, beta, fit_mle, rank_update, uncertainty_width,
                                 uncertainty_widths)
from mnldesign.mnl import OUTSIDE, ChoiceData, Instance, fisher_info, nll_loss_grad_hess
from mnldesign.oracles import dense_width
from mnldesign.rng import CounterRNG
from mnldesign.sim import Environment, gen_instance

from conftest import random_instance


def test_beta_reference_value():
    # 0.1 * (36 sqrt(log 600) + 64), evaluated by hand
    assert beta(0.05, 1.0, 1.0, 30, 0.1) == pytest.approx(15.505175, abs=5e-7)


def test_beta_rejects_bad_arguments():
    with pytest.raises(ValueError):
        beta(0.0, 1.0, 1.0, 10)
    with pytest.raises(ValueError):
        beta(0.1, 0.0, 1.0, 10)


def test_mle_single_item_closed_form():
    # one item, outside option, d = 1, a = 1: with lam -> 0 the MLE solves
    # sigmoid(theta) = wins / n.
    inst = Instance([[1.0]], [0.5], 1, 5.0, outside_option=True)
    data = ChoiceData()
    data.add((0,), 0, 300)
    data.add((0,), OUTSIDE, 100)
    res = fit_mle(inst, data, 1e-9)
    assert res.converged
    assert res.theta_hat[0] == pytest.approx(math.log(3.0), abs=1e-6)


@given(st.integers(0, 10_000))
def test_mle_is_stationary(seed):
    inst = random_instance(seed)
    rng = np.random.default_rng(seed)
    env = Environment(inst, seed=seed)
    sets = [tuple(sorted(rng.choice(8, size=2, replace=False).tolist())) for _ in range(200)]
    ch = env.sample_choices(sets, "A")
    data = ChoiceData()
    for S, c in zip(sets, ch.tolist()):
        data.add(S, c)
    res = fit_mle(inst, data, 1.0)
    assert res.converged
    _, g, _ = nll_loss_grad_hess(inst, data, res.theta_hat, 1.0)
    assert np.linalg.norm(g) <= 1e-8


def test_mle_consistency():
    inst = gen_instance(10, 3, 3, 1.0, seed=11)
    env = Environment(inst, seed=11)
    rng = CounterRNG(6, 99)
    sets = [tuple(sorted(set(rng.integers(10, 3).tolist()))) for _ in range(50_000)]
    ch = env.sample_choices(sets, "A")
    data = ChoiceData()
    for S, c in zip(sets, ch.tolist()):
        data.add(S, c)
    err = np.linalg.norm(fit_mle(inst, data, 1.0).theta_hat - inst.theta_star)
    assert err <= 0.1


@given(st.integers(0, 10_000))
def test_widths_match_dense_inverse(seed):
    inst = random_instance(seed)
    mats = DesignMatrices.initial(3, 0.7)
    for S in [(0, 1), (2, 5, 7), (3,), (4, 6)]:
        mats = rank_update(mats, inst, S, inst.theta_star)
    w = uncertainty_widths(mats, inst.features)
    ref = [dense_width(mats.H, a) for a in inst.features]
    np.testing.assert_allclose(w, ref, rtol=1e-10)
    assert uncertainty_width(mats, inst.features[2]) == pytest.approx(ref[2], rel=1e-10)
    wv = uncertainty_widths(mats, inst.features, which="V")
    np.testing.assert_allclose(wv, [dense_width(mats.V, a) for a in inst.features], rtol=1e-10)


def test_rank_update_matches_batch():
    inst = random_instance(3)
    sets = [(0, 1, 2), (3, 4), (5,), (6, 7), (0, 7)]
    mats = DesignMatrices.initial(3, 1.0)
    for S in sets:
        mats = rank_update(mats, inst, S, inst.theta_star)
    H = np.eye(3) + sum(fisher_info(inst, S, inst.theta_star) for S in sets)
    V = np.eye(3) + sum(inst.features[list(S)].T @ inst.features[list(S)] for S in sets)
    np.testing.assert_allclose(mats.H, H, atol=1e-13)
    np.testing.assert_allclose(mats.V, V, atol=1e-13)
