import csv
import filecmp
import math

import numpy as np
import pytest

from mnldesign.bsi import (CSV_COLUMNS, BsiConfig, WarmupExhausted, _stop_check, run_bsi,
                           run_warmup, warmup_offers, warmup_threshold)
from mnldesign.mnl import fisher_info
from mnldesign.sim import Environment, gen_instance


@pytest.fixture(scope="module")
def inst():
    return gen_instance(10, 2, 3, 1.0, seed=1, gap_margin=0.05)


@pytest.fixture(scope="module")
def trace(inst):
    return run_bsi(Environment(inst, seed=0), BsiConfig(seed=0, stop_check_every=500))


def test_warmup_threshold_by_hand():
    got = warmup_threshold(0.04, 3, 10, 0.05, 1.0, 1.0, 1.0)
    ref = 0.2 / 256 * (1 / math.sqrt(3 * math.log(200)) + 1.0)
    assert got == pytest.approx(ref, rel=1e-14)
    assert warmup_threshold(0.04, 3, 10, 0.05, 1.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        warmup_threshold(0.5, 3, 10, 0.05, 1.0, 1.0)


def test_warmup_leaves_every_width_below_threshold(inst):
    zeta = 0.02
    offers, widths, V = warmup_offers(inst, zeta)
    Vinv = np.linalg.inv(V)
    w = np.sqrt(np.einsum("ij,jk,ik->i", inst.features, Vinv, inst.features))
    assert w.max() <= zeta
    assert np.all(widths > zeta)
    ref = np.eye(3) + sum(inst.features[list(S)].T @ inst.features[list(S)] for S in offers)
    np.testing.assert_allclose(V, ref, rtol=1e-12)
    assert all(1 <= len(S) <= inst.K for S in offers)


def test_warmup_offers_ignore_feedback(inst):
    a = run_warmup(Environment(inst, seed=1), 0.05)
    b = run_warmup(Environment(inst, seed=2), 0.05)
    assert a.offers == b.offers
    assert not np.array_equal(a.choices_a, b.choices_a)
    assert a.data_a.n_obs == a.data_b.n_obs == a.length


def test_warmup_exhausted(inst):
    with pytest.raises(WarmupExhausted):
        warmup_offers(inst, 1e-3, round_cap=10)


def test_identifies_best(trace, inst):
    assert trace.stopped and trace.correct
    assert trace.S_hat == trace.S_star
    assert trace.tau > trace.warmup_len


def test_H_is_batch_sum_over_offers(trace, inst):
    H = np.eye(3) + sum(fisher_info(inst, S, trace.theta0) for S in trace.offers())
    np.testing.assert_allclose(trace.H, H, rtol=1e-9)
    assert len(trace.offers()) == trace.tau


def test_stopping_predicate_is_pure(trace, inst):
    last = trace.checks[-1]
    for _ in range(2):
        S_best, _, R_pess, R_opt, _, _ = _stop_check(inst, trace.H, trace.theta_hat,
                                                     trace.beta, 1.0)
        assert R_pess > R_opt and S_best == last.S_best
        assert R_pess == last.R_pess


def test_csv_is_reproducible(inst, tmp_path):
    cfg = BsiConfig(seed=3, stop_check_every=500)
    for name in ("a.csv", "b.csv"):
        run_bsi(Environment(inst, seed=3), cfg).write_csv(tmp_path / name)
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)
    with open(tmp_path / "a.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_COLUMNS
    assert rows[-1][-1] == "1"
    assert "|" in rows[1][4]


def test_frozen_truth_and_tiny_beta_stop_at_first_check(inst):
    cfg = BsiConfig(seed=0, stop_check_every=50, freeze_theta=inst.theta_star,
                    beta_override=1e-6)
    tr = run_bsi(Environment(inst, seed=0), cfg)
    assert tr.stopped and len(tr.checks) == 1 and tr.correct
    assert tr.honest_at_stop is not None


def test_round_cap_without_stopping(inst):
    cfg = BsiConfig(seed=0, stop_check_every=100, round_cap=10_000)
    tr = run_bsi(Environment(inst, seed=0), cfg)
    assert not tr.stopped
    assert tr.tau == tr.warmup_len + 10_000


def test_backend_swap_keeps_warmup(inst):
    a = run_bsi(Environment(inst, seed=4), BsiConfig(seed=4, stop_check_every=500))
    b = run_bsi(Environment(inst, seed=4), BsiConfig(seed=4, stop_check_every=500,
                                                     backend="milp", eps_lmo=0.1))
    assert a.warmup.offers == b.warmup.offers
    assert np.array_equal(a.warmup.choices_a, b.warmup.choices_a)
    assert 1 / 3 <= a.tau / b.tau <= 3


def test_config_validation():
    with pytest.raises(ValueError):
        BsiConfig(delta=0.0)
    with pytest.raises(ValueError):
        BsiConfig(backend="gurobi")
    with pytest.raises(ValueError):
        BsiConfig(kappa_mode="guess")
    with pytest.raises(ValueError):
        BsiConfig(backend="milp", eps=0.1, eps_lmo=0.5).check_eps(3)
