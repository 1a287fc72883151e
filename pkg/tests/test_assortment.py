import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mnldesign.assortment import (NonUniqueMaximizer, RevenueQuery, best_and_alternative,
                                  best_assortment, revenue, true_gap)
from mnldesign.mnl import Instance
from mnldesign.oracles import brute_revenues

from conftest import random_instance


def test_revenue_by_hand():
    # e^u = (1, 2), r = (0.5, 0.8): (0.5 + 1.6) / 4
    inst = Instance([[0.0], [1.0]], [0.5, 0.8], 2, 1.0, outside_option=True)
    u = np.array([0.0, math.log(2.0)])
    assert revenue(inst, (0, 1), u) == pytest.approx(2.1 / 4, rel=1e-15)
    assert revenue(inst, (1,), u) == pytest.approx(1.6 / 3, rel=1e-15)


def test_revenue_stable_for_large_utilities():
    inst = Instance([[1.0]], [0.7], 1, 1.0, outside_option=True)
    assert revenue(inst, (0,), [800.0]) == pytest.approx(0.7, rel=1e-15)


def test_revenue_requires_outside_option():
    inst = random_instance(0, K=2, outside=False)
    with pytest.raises(ValueError):
        revenue(inst, (0, 1), np.zeros(8))


@given(st.integers(0, 10_000))
def test_best_assortment_vs_enumeration(seed):
    inst = random_instance(seed, N=7, K=1 + seed % 3, B=2.0)
    u = inst.features @ inst.theta_star
    S, v = best_assortment(RevenueQuery(u, inst.revenues, inst.K))
    ref = max(v for _, v in brute_revenues(inst, u))
    assert v == pytest.approx(ref, rel=1e-12)


@given(st.integers(0, 10_000))
def test_alternative_vs_enumeration(seed):
    inst = random_instance(seed, N=7, K=3, B=2.0)
    rng = np.random.default_rng(seed)
    u = inst.features @ inst.theta_star
    rad = rng.uniform(0.0, 0.3, inst.N)
    S_best, S_alt, R_best, R_alt = best_and_alternative(inst, u + rad, u - rad)
    pess = brute_revenues(inst, u - rad)
    assert R_best == pytest.approx(max(v for _, v in pess), rel=1e-12)
    opt = brute_revenues(inst, u + rad, include_empty=True)
    ref = max(v for S, v in opt if S != S_best)
    assert R_alt == pytest.approx(ref, rel=1e-12, abs=1e-15)
    assert S_alt != S_best


def test_empty_set_is_an_alternative():
    # N = 1, K = 1: the only nonempty set is S_best, so the empty set is the alternative
    inst = Instance([[0.5]], [0.4], 1, 1.0, outside_option=True)
    S_best, S_alt, _, R_alt = best_and_alternative(inst, [0.5], [0.5])
    assert S_best == (0,) and S_alt == () and R_alt == 0.0


@given(st.integers(0, 10_000))
def test_true_gap_vs_enumeration(seed):
    inst = random_instance(seed, N=6, K=2, B=2.0)
    u = inst.features @ inst.theta_star
    vals = sorted((v for _, v in brute_revenues(inst, u, include_empty=True)), reverse=True)
    if vals[0] - vals[1] <= 1e-9:
        with pytest.raises(NonUniqueMaximizer):
            true_gap(inst)
        return
    S, gap = true_gap(inst)
    assert gap == pytest.approx(vals[0] - vals[1], rel=1e-10, abs=1e-14)


def test_true_gap_rejects_ties():
    inst = Instance([[0.5], [0.5]], [0.3, 0.3], 1, 1.0, theta_star=[0.2], outside_option=True)
    with pytest.raises(NonUniqueMaximizer):
        true_gap(inst)


def test_forced_constraints():
    u = np.zeros(4)
    r = np.array([0.9, 0.8, 0.1, 0.05])
    S, _ = best_assortment(RevenueQuery(u, r, 2, forced_in=frozenset([3])))
    assert 3 in S
    S, _ = best_assortment(RevenueQuery(u, r, 2, forced_out=frozenset([0])))
    assert 0 not in S
