"""Slow, independent reference implementations used by tests and ``check``.

Nothing here is tuned for speed; each routine is written to be easy to
audit against its definition.
"""
from __future__ import annotations

import itertools

import numpy as np

from .mnl import Instance, all_assortments, choice_probs, fisher_info


def tableau_lp(c, A_eq=None, b_eq=None, A_le=None, b_le=None, lower=None, upper=None,
               tol: float = 1e-10, max_pivots: int = 50_000):
    """Dense two-phase tableau simplex with Bland's rule.

    Bounds must be finite. The problem is shifted to y = x - lower >= 0 and
    upper bounds become explicit rows, so every pivot is a textbook one.
    Returns ``(x, objective, status)`` with status ``optimal``,
    ``infeasible`` or ``unbounded``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float) if upper is not None else np.full(n, np.inf)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_le = np.zeros((0, n)) if A_le is None else np.asarray(A_le, dtype=float).reshape(-1, n)
    b_le = np.zeros(0) if b_le is None else np.asarray(b_le, dtype=float)
    fin = np.flatnonzero(np.isfinite(upper))
    A_ub = np.vstack([A_le, np.eye(n)[fin]])
    b_ub = np.concatenate([b_le, upper[fin]]) - A_ub @ lower
    b_e = b_eq - A_eq @ lower
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    # columns: y (n) | slacks (m_ub) | artificials (m)
    T = np.zeros((m, n + m_ub + m + 1))
    T[:m_eq, :n] = A_eq
    T[m_eq:, :n] = A_ub
    T[m_eq:, n:n + m_ub] = np.eye(m_ub)
    T[:, -1] = np.concatenate([b_e, b_ub])
    neg = T[:, -1] < 0
    T[neg] *= -1
    T[:, n + m_ub:n + m_ub + m] = np.eye(m)
    basis = list(range(n + m_ub, n + m_ub + m))
    n_art = n + m_ub

    def run(cost, allowed):
        for _ in range(max_pivots):
            cb = cost[basis]
            red = cost - cb @ T[:, :-1]
            enter = next((j for j in range(len(cost)) if allowed[j] and red[j] < -tol), None)
            if enter is None:
                return "optimal"
            col = T[:, enter]
            rows = [i for i in range(m) if col[i] > tol]
            if not rows:
                return "unbounded"
            ratios = [T[i, -1] / col[i] for i in rows]
            best = min(ratios)
            leave = min((i for i, r in zip(rows, ratios) if r <= best + tol), key=lambda i: basis[i])
            T[leave] /= T[leave, enter]
            for i in range(m):
                if i != leave:
                    T[i] -= T[i, enter] * T[leave]
            basis[leave] = enter
        raise RuntimeError("tableau oracle hit its pivot cap")

    total = n + m_ub + m
    c1 = np.zeros(total)
    c1[n_art:] = 1.0
    run(c1, np.ones(total, dtype=bool))
    if T[:, -1] @ c1[basis] > 1e-7 * max(1.0, np.abs(T[:, -1]).max()):
        return None, None, "infeasible"
    # drive remaining zero-level artificials out where possible
    for i in range(m):
        if basis[i] >= n_art:
            j = next((j for j in range(n_art) if abs(T[i, j]) > 1e-9), None)
            if j is not None:
                T[i] /= T[i, j]
                for k in range(m):
                    if k != i:
                        T[k] -= T[k, j] * T[i]
                basis[i] = j
    c2 = np.zeros(total)
    c2[:n] = c
    allowed = np.zeros(total, dtype=bool)
    allowed[:n_art] = True
    status = run(c2, allowed)
    if status != "optimal":
        return None, None, status
    y = np.zeros(total)
    y[basis] = T[:, -1]
    x = y[:n] + lower
    return x, float(c @ x), "optimal"


def brute_trace_max(inst: Instance, theta0, Minv):
    """max over every assortment of tr(Minv I(S)), by direct matrix products."""
    best, arg = -np.inf, None
    for S in all_assortments(inst):
        v = float(np.trace(Minv @ fisher_info(inst, S, theta0)))
        if v > best:
            best, arg = v, S
    return arg, best


def brute_ratio(w, s, denom_const: float, K: int, min_size: int = 1, num_const: float = 0.0):
    """max over subsets of (num_const + sum w_i s_i) / (denom_const + sum w_i)."""
    w, s = np.asarray(w, float), np.asarray(s, float)
    best, arg = -np.inf, None
    for k in range(min_size, K + 1):
        for S in itertools.combinations(range(w.size), k):
            idx = list(S)
            den = denom_const + w[idx].sum()
            if den <= 0:
                continue
            v = (num_const + float(w[idx] @ s[idx])) / den
            if v > best:
                best, arg = v, S
    return arg, best


def brute_revenues(inst: Instance, utilities, revenues=None, include_empty: bool = False):
    """Every (S, expected revenue) pair; the empty set is worth 0."""
    r = inst.revenues if revenues is None else np.asarray(revenues, float)
    out = [((), 0.0)] if include_empty else []
    u = np.asarray(utilities, float)
    for S in all_assortments(inst):
        e = np.exp(u[list(S)])
        den = e.sum() + (1.0 if inst.outside_option else 0.0)
        out.append((S, float(e @ r[list(S)] / den)))
    return out


def brute_kappa(inst: Instance, theta) -> float:
    """min over assortments and items of p(i | S) p(0 | S)."""
    best = np.inf
    for S in all_assortments(inst, min_size=1):
        p = choice_probs(inst, S, theta)
        best = min(best, float(np.min(p[:-1]) * p[-1]))
    return best


def dense_width(H, a) -> float:
    return float(np.sqrt(a @ np.linalg.inv(H) @ a))


def bisect_lift_error(M, Mt, tol: float = 1e-12) -> float:
    """Smallest eps with Delta <= eps M, by bisection on a Cholesky PSD test."""
    d = M.shape[0]
    Bbar, bbar = Mt[:d, :d], Mt[:d, d]
    delta = Bbar - np.outer(bbar, bbar) - M

    def ok(eps):
        try:
            np.linalg.cholesky(eps * M - delta + 1e-14 * np.eye(d))
            return True
        except np.linalg.LinAlgError:
            return False

    lo, hi = 0.0, 1.0
    while not ok(hi):
        hi *= 2.0
    if ok(0.0):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def finite_diff_grad(f, x, h: float = 1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
