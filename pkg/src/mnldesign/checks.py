"""Oracle suite behind ``mnldesign check``.

Every check compares a production routine against an independent slow
reference (see :mod:`mnldesign.oracles`) or a hand-derived value, at the
sizes the routines are meant to be trusted on.  A check returns a short
detail string and raises :class:`CheckFailure` on a mismatch.
"""
from __future__ import annotations

import dataclasses
import io
import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracles
from .assortment import (RevenueQuery, best_and_alternative, best_assortment, revenue,
                         true_gap)
from .bsi import BsiConfig, run_bsi, warmup_threshold
from .design import (Design, frank_wolfe, g_value, init_design, lift_error, line_search,
                     make_design)
from .estimator import DesignMatrices, beta, fit_mle, rank_update, uncertainty_width
from .lmo import RatioProblem, dinkelbach, lifted_trace_value, lmo_brute, lmo_lifted
from .milp import big_m, build_milp, build_qfip, export_mps, lmo_milp, read_mps, QfipData
from .mnl import (OUTSIDE, ChoiceData, Instance, all_assortments, choice_probs, fisher_info,
                  kappa, lifted_info, nll_loss_grad_hess)
from .rng import CounterRNG
from .sim import Environment, gen_instance
from .simplex import lp_simplex

# 1/kappa <= KAPPA_C * K^2 e^{3B}; (1 + K)^2 <= 4 K^2 makes 4 safe for K >= 1
KAPPA_C = 4.0
CHECK_STREAM = 7


class CheckFailure(AssertionError):
    pass


def _expect(cond, msg):
    if not cond:
        raise CheckFailure(msg)


@dataclass
class CheckOutcome:
    name: str
    module: str
    passed: bool
    seconds: float
    detail: str


REGISTRY: dict = {}


def check(module: str):
    def wrap(fn):
        REGISTRY[fn.__name__] = (module, fn)
        return fn
    return wrap


# ----------------------------------------------------------------------------
# shared instance families


def milp_case(t: int, B: float = 1.0):
    """Small LMO instance: N in 6..12, K in {2,3}, d in 2..4, theta0 in the B-ball.

    M comes from the random initial design, so it is a realistic FW state.
    """
    r = CounterRNG(t, CHECK_STREAM)
    N = 6 + r.integers(7)
    K = 2 + r.integers(2)
    d = 2 + r.integers(3)
    inst = gen_instance(N, K, d, B, seed=10_000 + t)
    theta0 = r.ball(d, B)
    M = init_design(inst, theta0, seed=t).M
    return inst, theta0, np.linalg.inv(M)


def _random_instance(rng, N, K, d, B=1.0, outside=True):
    feats = np.array([rng.ball(d, 1.0) for _ in range(N)])
    feats /= np.maximum(1.0, np.linalg.norm(feats, axis=1, keepdims=True))
    theta = rng.ball(d, B)
    if np.linalg.norm(theta) > B:
        theta *= B / np.linalg.norm(theta)
    return Instance(feats, rng.uniform(N), K, B, theta, outside_option=outside)


def _random_dataset(inst, rng, n):
    out = []
    for _ in range(n):
        k = 1 + rng.integers(inst.K)
        S = tuple(sorted(rng.integers(inst.N, k).tolist()))
        S = tuple(sorted(set(S)))
        p = choice_probs(inst, S, inst.theta_star)
        j = rng.categorical(p)
        out.append((S, OUTSIDE if j == len(S) else S[j]))
    return out


# ----------------------------------------------------------------------------
# mnl_core


@check("mnl_core")
def choice_probs_by_hand():
    inst = Instance([[0.0], [math.log(2.0)]], [0.5, 0.5], 2, 1.0)
    p = choice_probs(inst, (0, 1), [1.0])
    _expect(np.allclose(p, [1 / 3, 2 / 3], atol=1e-12), f"got {p}")
    return "(1/3, 2/3)"


@check("mnl_core")
def fisher_closed_forms():
    rng = CounterRNG(1, CHECK_STREAM)
    for _ in range(20):
        A = np.array([rng.ball(3) for _ in range(4)])
        inst = Instance(A, np.full(4, 0.5), 2, 1.0)
        diff = A[1] - A[2]
        I = fisher_info(inst, (1, 2), np.zeros(3))
        _expect(np.allclose(I, 0.25 * np.outer(diff, diff), atol=1e-12), "pair formula")
        inst_o = inst.replace(outside_option=True)
        I = fisher_info(inst_o, (2,), np.zeros(3))
        _expect(np.allclose(I, 0.25 * np.outer(A[2], A[2]), atol=1e-12), "singleton formula")
    return "20 pairs and singletons"


@check("mnl_core")
def schur_identity():
    rng = CounterRNG(2, CHECK_STREAM)
    worst = 0.0
    for t in range(200):
        outside = bool(t % 2)
        inst = _random_instance(rng, 8, 3, 4, 2.0, outside)
        S = tuple(sorted(set(rng.integers(8, 3).tolist())))
        if len(S) < inst.min_size:
            S = (0, 1)
        theta = rng.ball(4, 2.0)
        L = lifted_info(inst, S, theta)
        schur = L[:4, :4] - np.outer(L[:4, 4], L[:4, 4]) / L[4, 4]
        worst = max(worst, float(np.abs(schur - fisher_info(inst, S, theta)).max()))
    _expect(worst <= 1e-10, f"max deviation {worst:.3g}")
    return f"max deviation {worst:.2e}"


@check("mnl_core")
def hessian_is_fisher_sum():
    rng = CounterRNG(3, CHECK_STREAM)
    worst = 0.0
    for _ in range(20):
        inst = _random_instance(rng, 7, 3, 3)
        data = _random_dataset(inst, rng, 40)
        theta = rng.ball(3, 1.0)
        _, _, H = nll_loss_grad_hess(inst, data, theta, 0.7)
        ref = 0.7 * np.eye(3) + sum(fisher_info(inst, S, theta) for S, _ in data)
        worst = max(worst, float(np.abs(H - ref).max()))
    _expect(worst <= 1e-10, f"max deviation {worst:.3g}")
    return f"max deviation {worst:.2e}"


@check("mnl_core")
def gradient_hessian_finite_differences():
    rng = CounterRNG(4, CHECK_STREAM)
    worst_g = worst_h = 0.0
    for _ in range(20):
        inst = _random_instance(rng, 7, 3, 3)
        data = _random_dataset(inst, rng, 30)
        theta = rng.ball(3, 1.0)
        _, g, H = nll_loss_grad_hess(inst, data, theta, 1.0)
        fd = oracles.finite_diff_grad(lambda x: nll_loss_grad_hess(inst, data, x, 1.0)[0], theta)
        worst_g = max(worst_g, float(np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g))))
        fdH = np.array([oracles.finite_diff_grad(
            lambda x, k=k: nll_loss_grad_hess(inst, data, x, 1.0)[1][k], theta) for k in range(3)])
        worst_h = max(worst_h, float(np.abs(fdH - H).max() / max(1.0, np.abs(H).max())))
    _expect(worst_g <= 1e-5, f"gradient rel error {worst_g:.3g}")
    _expect(worst_h <= 1e-5, f"Hessian rel error {worst_h:.3g}")
    return f"grad {worst_g:.1e}, Hessian {worst_h:.1e}"


@check("mnl_core")
def kappa_vs_enumeration():
    rng = CounterRNG(5, CHECK_STREAM)
    ratio = 0.0
    for t in range(60):
        N = 3 + t % 6
        K = 1 + t % min(N, 3)
        B = 0.5 + (t % 4)
        inst = _random_instance(rng, N, K, 3, B)
        k0 = kappa(inst, np.zeros(3))
        _expect(abs(k0 - 1 / (K + 1) ** 2) <= 1e-12, f"theta=0 gave {k0}")
        _expect(abs(k0 - oracles.brute_kappa(inst, np.zeros(3))) <= 1e-12, "theta=0 enumeration")
        k = kappa(inst, inst.theta_star)
        kb = oracles.brute_kappa(inst, inst.theta_star)
        _expect(abs(k - kb) <= 1e-12 * max(1.0, kb), f"{k} vs {kb}")
        ratio = max(ratio, 1.0 / (k * K**2 * math.exp(3 * B)))
    _expect(ratio <= KAPPA_C, f"1/kappa constant {ratio:.3g} exceeds {KAPPA_C}")
    return f"60 instances; worst 1/(kappa K^2 e^3B) = {ratio:.3f}"


# ----------------------------------------------------------------------------
# estimator


@check("estimator")
def mle_consistency():
    inst = gen_instance(10, 3, 3, 1.0, seed=11)
    env = Environment(inst, seed=11)
    rng = CounterRNG(6, CHECK_STREAM)
    sets = [tuple(sorted(set(rng.integers(10, 3).tolist()))) for _ in range(50_000)]
    ch = env.sample_choices(sets, "A")
    data = ChoiceData()
    for S, c in zip(sets, ch.tolist()):
        data.add(S, c)
    err = float(np.linalg.norm(fit_mle(inst, data, 1.0).theta_hat - inst.theta_star))
    _expect(err <= 0.1, f"error {err:.3g} at 50000 samples")
    return f"||theta_hat - theta*|| = {err:.4f}"


@check("estimator")
def beta_reference_value():
    got = beta(0.05, 1.0, 1.0, 30, 0.1)
    ref = 0.1 * (36 * math.sqrt(math.log(600)) + 64)
    _expect(abs(got - ref) <= 1e-12, f"{got} vs {ref}")
    return f"{got:.6f}"


@check("estimator")
def widths_vs_dense_inverse():
    rng = CounterRNG(8, CHECK_STREAM)
    worst = 0.0
    for _ in range(100):
        G = rng.normal(16).reshape(4, 4)
        H = G @ G.T + 0.1 * np.eye(4)
        a = rng.normal(4)
        w = uncertainty_width(DesignMatrices(H, H, 1.0), a)
        worst = max(worst, abs(w**2 - oracles.dense_width(H, a) ** 2) / max(1.0, w**2))
    _expect(worst <= 1e-10, f"max deviation {worst:.3g}")
    return f"max deviation {worst:.2e}"


@check("estimator")
def rank_update_vs_batch():
    rng = CounterRNG(9, CHECK_STREAM)
    inst = _random_instance(rng, 9, 3, 3)
    theta = rng.ball(3)
    mats = DesignMatrices.initial(3, 1.0)
    sets = [tuple(sorted(set(rng.integers(9, 3).tolist()))) for _ in range(200)]
    for S in sets:
        mats = rank_update(mats, inst, S, theta)
    ref = np.eye(3) + sum(fisher_info(inst, S, theta) for S in sets)
    dev = float(np.abs(mats.H - ref).max())
    _expect(dev <= 1e-9, f"deviation {dev:.3g}")
    return f"200 updates, deviation {dev:.2e}"


# ----------------------------------------------------------------------------
# lmo


@check("lmo")
def dinkelbach_vs_enumeration():
    rng = CounterRNG(10, CHECK_STREAM)
    for t in range(200):
        N = 2 + t % 13
        K = 1 + rng.integers(min(N, 5))
        w = np.exp(rng.normal(N))
        s = rng.normal(N)
        c = float(rng.uniform() * 2) if t % 3 else 0.0
        lo = 1 if c > 0 else min(2, K)
        S, v = dinkelbach(RatioProblem(w, s, c, K, lo))
        _, vb = oracles.brute_ratio(w, s, c, K, lo)
        _expect(abs(v - vb) <= 1e-12 * max(1.0, abs(vb)), f"case {t}: {v} vs {vb}")
    return "200 random ratio problems, N <= 14"


@check("lmo")
def lifted_lmo_vs_enumeration():
    for t in range(40):
        inst, theta0, _ = milp_case(t)
        Mt = init_design(inst, theta0, seed=t).Mt
        Mt_inv = np.linalg.inv(Mt)
        res = lmo_lifted(inst, theta0, Mt_inv)
        vals = {S: lifted_trace_value(inst, theta0, Mt_inv, S) for S in all_assortments(inst)}
        best = max(vals.values())
        _expect(abs(vals[res.assortment] - best) <= 1e-10 * max(1.0, best), f"case {t}: set")
        _expect(abs(res.value - vals[res.assortment]) <= 1e-10 * max(1.0, best),
                f"case {t}: value {res.value} vs direct {vals[res.assortment]}")
    return "40 instances"


@check("lmo")
def brute_lmo_vs_direct_trace():
    for t in range(40):
        inst, theta0, Minv = milp_case(t)
        res = lmo_brute(inst, theta0, Minv, spot_check=20)
        S, v = oracles.brute_trace_max(inst, theta0, Minv)
        _expect(abs(res.value - v) <= 1e-10 * max(1.0, v), f"case {t}: {res.value} vs {v}")
        Sl = lmo_lifted(inst, theta0, np.linalg.inv(init_design(inst, theta0, seed=t).Mt))
        tv = float(np.trace(Minv @ fisher_info(inst, Sl.assortment, theta0)))
        _expect(tv <= v + 1e-10, "lifted candidate beats the brute maximum")
    return "40 instances"


# ----------------------------------------------------------------------------
# milp


@check("milp")
def qfip_identity():
    rng = CounterRNG(12, CHECK_STREAM)
    inst = _random_instance(rng, 3, 2, 2)
    theta0 = rng.ball(2)
    Minv = np.linalg.inv(init_design(inst, theta0).M)
    q = build_qfip(inst, theta0, Minv)
    n = 0
    for S in all_assortments(inst):
        ref = -float(np.trace(Minv @ fisher_info(inst, S, theta0)))
        _expect(abs(q.ratio(q.encode(S)) - ref) <= 1e-10 * max(1.0, abs(ref)), f"S={S}")
        n += 1
    return f"{n} subsets"


@check("milp")
def big_m_alpha_reference():
    q = QfipData(np.zeros((3, 3)), np.ones((3, 3)), np.ones(3), np.zeros(3), np.zeros(3), 2)
    ab = big_m(q, "tight").alpha_bar
    _expect(abs(ab - 0.25) <= 1e-15, f"alpha_bar {ab}")
    return "alpha_bar = 1/4"


@check("milp")
def milp_objective_at_integral_points():
    worst = 0.0
    for t in range(20):
        inst, theta0, Minv = milp_case(t)
        q = build_qfip(inst, theta0, Minv)
        for mode in ("tight", "coarse"):
            m = build_milp(q, big_m(q, mode))
            for S in list(all_assortments(inst))[:30]:
                z, obj = m.objective_at(S)
                _expect(np.all(m.A_le @ z <= m.b_le + 1e-9), f"case {t} {S}: A_le violated")
                _expect(np.allclose(m.A_eq @ z, m.b_eq, atol=1e-9), f"case {t} {S}: A_eq")
                _expect(np.all(z >= m.lower - 1e-12) and np.all(z <= m.upper + 1e-9),
                        f"case {t} {S}: bounds")
                ref = q.ratio(q.encode(S))
                worst = max(worst, abs(obj - ref) / max(1.0, abs(ref)))
    _expect(worst <= 1e-9, f"objective deviation {worst:.3g}")
    return f"deviation {worst:.2e}"


@check("milp")
def lp_relaxation_feasible():
    for t in range(20):
        inst, theta0, Minv = milp_case(t)
        q = build_qfip(inst, theta0, Minv)
        m = build_milp(q, big_m(q))
        x, obj, status = lp_simplex(m.c, m.A_eq, m.b_eq, m.A_le, m.b_le, m.lower, m.upper)
        _expect(status == "optimal", f"case {t}: relaxation {status}")
    return "20 relaxations solved"


@check("milp")
def simplex_vs_tableau():
    rng = CounterRNG(13, CHECK_STREAM)
    worst, n_opt = 0.0, 0
    for t in range(200):
        n = 2 + rng.integers(7)
        me, ml = rng.integers(3), rng.integers(6)
        c = rng.normal(n)
        x0 = rng.uniform(n)
        Ae = rng.normal(me * n).reshape(me, n)
        Al = rng.normal(ml * n).reshape(ml, n)
        bl = Al @ x0 + rng.uniform(ml) - 0.2
        lo, up = np.full(n, -1.0), np.full(n, 2.0)
        x1, f1, s1 = lp_simplex(c, Ae, Ae @ x0, Al, bl, lo, up)
        x2, f2, s2 = oracles.tableau_lp(c, Ae, Ae @ x0, Al, bl, lo, up)
        _expect(s1 == s2, f"LP {t}: status {s1} vs {s2}")
        if s1 == "optimal":
            n_opt += 1
            worst = max(worst, abs(f1 - f2))
    _expect(worst <= 1e-8, f"objective deviation {worst:.3g}")
    return f"200 LPs ({n_opt} optimal), deviation {worst:.1e}"


def _milp_exactness(n_cases: int, bigm_hook=None):
    worst = 0.0
    for t in range(n_cases):
        inst, theta0, Minv = milp_case(t)
        ref = lmo_brute(inst, theta0, Minv).value
        res = lmo_milp(inst, theta0, Minv, 0.0, bigm_hook=bigm_hook)
        got = float(np.trace(Minv @ fisher_info(inst, res.assortment, theta0)))
        worst = max(worst, ref - got)
        _expect(abs(got - ref) <= 1e-7, f"case {t}: milp {got:.10g} vs brute {ref:.10g}")
    return worst


def corrupt_big_m(seed: int = 0, factor: float = 0.1):
    """Hook that shrinks one big-M constant (chosen by ``seed``) by ``factor``."""
    which = ("m_A", "m_B", "alpha_bar")[CounterRNG(seed, CHECK_STREAM).integers(3)]

    def hook(bm):
        return dataclasses.replace(bm, **{which: getattr(bm, which) * factor})
    hook.which = which
    return hook


@check("milp")
def milp_exactness(bigm_hook=None):
    worst = _milp_exactness(60, bigm_hook)
    return f"60 instances, worst shortfall {worst:.1e}"


@check("milp")
def milp_gap_soundness():
    worst = -np.inf
    for t in range(40):
        inst, theta0, Minv = milp_case(t)
        ref = lmo_brute(inst, theta0, Minv).value
        res = lmo_milp(inst, theta0, Minv, 0.1)
        _expect(res.certified_gap <= 0.1 + 1e-9, f"case {t}: gap {res.certified_gap}")
        short = ref - float(np.trace(Minv @ fisher_info(inst, res.assortment, theta0)))
        worst = max(worst, short)
        _expect(short <= 0.1 + 1e-7, f"case {t}: shortfall {short}")
    return f"40 instances, worst shortfall {worst:.3g}"


@check("milp")
def mps_stable_and_round_trip():
    inst = Instance([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.8], 2, 1.0, outside_option=True)
    theta0 = np.array([0.2, -0.1])
    Minv = np.linalg.inv(init_design(inst, theta0).M)
    q = build_qfip(inst, theta0, Minv)
    m = build_milp(q, big_m(q))
    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = Path(tmp) / "a.mps", Path(tmp) / "b.mps"
        export_mps(m, p1)
        export_mps(m, p2)
        _expect(p1.read_bytes() == p2.read_bytes(), "two exports differ")
        back = read_mps(p1)
    for attr in ("c", "A_eq", "b_eq", "A_le", "b_le", "lower", "upper"):
        _expect(np.array_equal(getattr(back, attr), getattr(m, attr)), f"{attr} changed")
    _expect(np.array_equal(back.integer, m.integer), "integrality changed")
    return "byte-stable, exact round trip"


# ----------------------------------------------------------------------------
# design_fw


@check("design_fw")
def init_design_on_simplex():
    d = 3
    V = np.vstack([np.eye(d), -np.ones(d) / math.sqrt(d)]) * 0.9
    inst = Instance(V, np.full(d + 1, 0.5), 2, 1.0)
    des = init_design(inst, np.zeros(d))
    lam = float(np.linalg.eigvalsh(des.M)[0])
    _expect(lam >= 1e-8 and des.support <= 10 * d * (d + 1) // 2, f"lambda_min {lam}")
    return f"{des.support} atoms, lambda_min {lam:.3g}"


@check("design_fw")
def g_value_soundness():
    rng = CounterRNG(14, CHECK_STREAM)
    for t in range(20):
        inst, theta0, _ = milp_case(t)
        atoms = list(all_assortments(inst))
        pick = sorted(set(rng.integers(len(atoms), 8).tolist()))
        base = init_design(inst, theta0, seed=t)
        des = make_design(inst, theta0, base.atoms + [atoms[i] for i in pick],
                          np.concatenate([base.weights, rng.uniform(len(pick))]))
        Minv = np.linalg.inv(des.M)
        for backend, eps_lmo in (("brute", 0.0), ("milp", 0.05)):
            g_up, _ = g_value(des, inst, theta0, backend, eps_lmo)
            _, g_true = oracles.brute_trace_max(inst, theta0, Minv)
            _expect(g_true <= g_up + 1e-9, f"case {t} {backend}: {g_true} > {g_up}")
    return "20 designs, brute and milp"


@check("design_fw")
def line_search_vs_grid():
    rng = CounterRNG(15, CHECK_STREAM)
    worst = 0.0
    grid = np.linspace(0.0, 1.0 - 1e-9, 1_000_001)
    for _ in range(5):
        G = rng.normal(9).reshape(3, 3)
        M = G @ G.T / 3 + np.eye(3)
        a = rng.normal(3)
        I = 4.0 * np.outer(a, a)
        g = line_search(M, I)
        lam = np.linalg.eigvalsh(np.linalg.solve(np.linalg.cholesky(M),
                                 np.linalg.solve(np.linalg.cholesky(M), I).T))
        vals = np.log1p(np.outer(grid, lam - 1.0)).sum(axis=1)
        g_ref = float(grid[np.argmax(vals)])
        _expect(0.0 < g < 1.0, f"gamma {g} outside (0, 1)")
        worst = max(worst, abs(g - g_ref))
    _expect(worst <= 1e-6, f"gamma deviation {worst:.3g}")
    return f"deviation {worst:.1e}"


@check("design_fw")
def frank_wolfe_brute_certificate():
    inst = gen_instance(8, 2, 3, 1.0, seed=21)
    theta0 = inst.theta_star
    rep = frank_wolfe(inst, theta0, 0.1, "brute")
    _, g = oracles.brute_trace_max(inst, theta0, np.linalg.inv(rep.design.M))
    _expect(rep.certified and g <= 1.1 * 3 + 1e-9, f"g = {g}")
    return f"{rep.iterations} iterations, g = {g:.4f}"


@check("design_fw")
def frank_wolfe_milp_certificate():
    inst = gen_instance(8, 2, 3, 1.0, seed=21)
    theta0 = inst.theta_star
    rep = frank_wolfe(inst, theta0, 0.1, "milp", eps_lmo=0.05 * 3)
    _, g = oracles.brute_trace_max(inst, theta0, np.linalg.inv(rep.design.M))
    _expect(rep.certified and g <= 1.1 * 3 + 1e-9, f"g = {g}")
    return f"{rep.iterations} iterations, g = {g:.4f}"


@check("design_fw")
def lift_error_vs_bisection():
    rng = CounterRNG(16, CHECK_STREAM)
    worst = 0.0
    for t in range(30):
        inst = _random_instance(rng, 6, 3, 3, 1.5)
        atoms = list(all_assortments(inst))
        i, j = rng.integers(len(atoms), 2).tolist()
        base = init_design(inst, inst.theta_star, seed=t)
        wt = rng.uniform()
        des = make_design(inst, inst.theta_star, base.atoms + [atoms[i], atoms[j]],
                          np.concatenate([0.01 * base.weights, [wt, 1 - wt]]))
        e1 = lift_error(des)
        e2 = oracles.bisect_lift_error(des.M, des.Mt)
        worst = max(worst, abs(e1 - e2))
        _expect(e1 <= inst.K * math.exp(inst.B) + 1e-9, f"eps_lift {e1} above K e^B")
    _expect(worst <= 1e-8, f"deviation {worst:.3g}")
    return f"30 designs, deviation {worst:.1e}"


# ----------------------------------------------------------------------------
# assortment


@check("assortment")
def revenue_composition():
    rng = CounterRNG(17, CHECK_STREAM)
    worst = 0.0
    for _ in range(200):
        inst = _random_instance(rng, 8, 4, 3, 3.0)
        S = tuple(sorted(set(rng.integers(8, 4).tolist())))
        p = choice_probs(inst, S, inst.theta_star)
        ref = float(p[:-1] @ inst.revenues[list(S)])
        worst = max(worst, abs(revenue(inst, S, inst.features @ inst.theta_star) - ref))
    _expect(worst <= 1e-12, f"deviation {worst:.3g}")
    return f"deviation {worst:.1e}"


@check("assortment")
def best_assortment_vs_enumeration():
    rng = CounterRNG(18, CHECK_STREAM)
    for t in range(150):
        N = 2 + t % 13
        K = 1 + rng.integers(min(N, 5))
        inst = _random_instance(rng, N, K, 3, 3.0)
        u = inst.features @ inst.theta_star
        S, v = best_assortment(RevenueQuery(u, inst.revenues, K))
        vb = max(val for _, val in oracles.brute_revenues(inst, u))
        _expect(abs(v - vb) <= 1e-12, f"case {t}: {v} vs {vb}")
        S1, _ = best_assortment(RevenueQuery(u, np.ones(N), K))
        top = tuple(sorted(np.argsort(-u, kind="stable")[:K].tolist()))
        _expect(S1 == top, f"case {t}: uniform revenues picked {S1}, expected {top}")
    return "150 queries, N <= 14"


@check("assortment")
def alternative_vs_enumeration():
    rng = CounterRNG(19, CHECK_STREAM)
    for t in range(150):
        N = 2 + t % 11
        K = 1 + rng.integers(min(N, 4))
        inst = _random_instance(rng, N, K, 3, 2.0)
        u = inst.features @ inst.theta_star
        rad = 0.3 * rng.uniform(N)
        S_best, S_alt, Rp, Ro = best_and_alternative(inst, u + rad, u - rad)
        pess = oracles.brute_revenues(inst, u - rad)
        _expect(abs(Rp - max(v for _, v in pess)) <= 1e-12, f"case {t}: pessimistic best")
        opt = [(S, v) for S, v in oracles.brute_revenues(inst, u + rad, include_empty=True)
               if S != S_best]
        vb = max(v for _, v in opt)
        _expect(abs(Ro - vb) <= 1e-12, f"case {t}: alternative {Ro} vs {vb}")
        if len(S_best) == K:
            # supersets of S_best are impossible, so exclusion solves alone suffice
            excl = [best_assortment(RevenueQuery(u + rad, inst.revenues, K,
                                                 forced_out=frozenset([i])))[1]
                    for i in S_best]
            _expect(abs(max(excl + [0.0]) - vb) <= 1e-12, f"case {t}: exclusion-only alternative")
    return "150 instances, N <= 12"


@check("assortment")
def true_gap_vs_enumeration():
    for t in range(40):
        inst = gen_instance(6 + t % 7, 2 + t % 2, 3, 1.0, seed=500 + t)
        S, gap = true_gap(inst)
        vals = sorted((v for _, v in oracles.brute_revenues(
            inst, inst.features @ inst.theta_star, include_empty=True)), reverse=True)
        _expect(abs(gap - (vals[0] - vals[1])) <= 1e-12, f"case {t}: {gap}")
    return "40 instances, N <= 12"


# ----------------------------------------------------------------------------
# bsi and sim_env


@check("bsi")
def warmup_threshold_finite():
    z = warmup_threshold(kappa(gen_instance(10, 2, 3, 1.0, seed=1), np.zeros(3)),
                         3, 10, 0.05, 1.0, 1.0, 10.0)
    _expect(0 < z < math.inf, f"zeta {z}")
    return f"zeta = {z:.4g}"


@check("bsi")
def bsi_identifies_best():
    inst = gen_instance(10, 2, 3, 1.0, seed=1, gap_margin=0.05)
    S_star = true_gap(inst)[0]
    hits, taus = 0, []
    for seed in range(10):
        tr = run_bsi(Environment(inst, seed), BsiConfig(seed=seed, stop_check_every=100))
        hits += tr.S_hat == S_star
        taus.append(tr.tau)
    _expect(hits >= 9, f"{hits}/10 correct")
    return f"{hits}/10 correct, mean tau {np.mean(taus):.0f}"


@check("bsi")
def bsi_backend_swap():
    inst = gen_instance(10, 2, 3, 1.0, seed=1, gap_margin=0.05)
    ratios = []
    for seed in range(3):
        a = run_bsi(Environment(inst, seed), BsiConfig(seed=seed, stop_check_every=100))
        b = run_bsi(Environment(inst, seed),
                    BsiConfig(seed=seed, stop_check_every=100, backend="milp", eps_lmo=0.1))
        _expect(a.warmup.offers == b.warmup.offers
                and np.array_equal(a.warmup.choices_a, b.warmup.choices_a), "warm-ups differ")
        r = b.tau / a.tau
        ratios.append(r)
        _expect(1 / 3 <= r <= 3, f"seed {seed}: tau ratio {r:.3g}")
    return "tau ratios " + ", ".join(f"{r:.2f}" for r in ratios)


@check("sim_env")
def ball_radial_law():
    d, B, n = 3, 1.0, 100_000
    rng = CounterRNG(20, CHECK_STREAM)
    v = np.array([np.linalg.norm(rng.ball(d, B)) ** d for _ in range(n)])
    # ||theta||^d is B^d U, so mean B^d / 2 and sd B^d / sqrt(12)
    z = abs(v.mean() - B**d / 2) / (B**d / math.sqrt(12 * n))
    _expect(z <= 3, f"z = {z:.2f}")
    return f"z = {z:.2f}"


@check("sim_env")
def choice_frequencies():
    inst = gen_instance(10, 3, 3, 1.0, seed=3)
    env = Environment(inst, seed=3)
    S = (1, 4, 7)
    n = 1_000_000
    ch = env.sample_choices([S] * n, "A")
    p = choice_probs(inst, S, inst.theta_star)
    labels = list(S) + [OUTSIDE]
    z = max(abs(np.count_nonzero(ch == lab) / n - pk) / math.sqrt(pk * (1 - pk) / n)
            for lab, pk in zip(labels, p))
    _expect(z <= 4, f"max z = {z:.2f}")
    return f"max z = {z:.2f}"


@check("sim_env")
def stream_independence():
    inst = gen_instance(10, 3, 3, 1.0, seed=3)
    env = Environment(inst, seed=4)
    S = (1, 4, 7)
    n = 200_000
    a = env.sample_choices([S] * n, "A") == OUTSIDE
    b = env.sample_choices([S] * n, "B") == OUTSIDE
    z = abs(np.corrcoef(a, b)[0, 1]) * math.sqrt(n)
    _expect(z <= 4, f"z = {z:.2f}")
    return f"z = {z:.2f}"


# ----------------------------------------------------------------------------
# driver


def run_checks(names=None, bigm_hook=None, log=None) -> list:
    """Run the named checks (all by default); ``bigm_hook`` reaches milp_exactness."""
    names = list(REGISTRY) if names is None else list(names)
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}")
    out = []
    for name in names:
        module, fn = REGISTRY[name]
        t0 = time.perf_counter()
        try:
            detail = fn(bigm_hook=bigm_hook) if name == "milp_exactness" else fn()
            passed = True
        except CheckFailure as exc:
            detail, passed = str(exc), False
        except Exception as exc:  # a crash is a failure too, not an abort
            detail, passed = f"{type(exc).__name__}: {exc}", False
        res = CheckOutcome(name, module, passed, time.perf_counter() - t0, detail)
        out.append(res)
        if log is not None:
            print(f"{'PASS' if passed else 'FAIL'} {module}.{name} "
                  f"({res.seconds:.1f}s) {detail}", file=log, flush=True)
    return out


def manifest(results) -> str:
    buf = io.StringIO()
    json.dump({"passed": all(r.passed for r in results),
               "checks": [dataclasses.asdict(r) for r in results]}, buf, indent=1)
    return buf.getvalue() + "\n"
