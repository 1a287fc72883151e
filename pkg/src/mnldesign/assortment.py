"""Revenue-maximizing assortments under MNL with an outside option."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lmo import RatioProblem, dinkelbach
from .mnl import Instance, as_assortment


class NonUniqueMaximizer(ValueError):
    pass


@dataclass
class RevenueQuery:
    utilities: np.ndarray
    revenues: np.ndarray
    K: int
    forced_in: frozenset = frozenset()
    forced_out: frozenset = frozenset()


def revenue_of(S, utilities, revenues) -> float:
    """sum_S e^{u_i} r_i / (1 + sum_S e^{u_j}), with the outside utility 0 in the shift."""
    if len(S) == 0:
        return 0.0
    idx = list(S)
    u = np.asarray(utilities, dtype=float)[idx]
    m = max(0.0, float(u.max()))
    e = np.exp(u - m)
    return float(e @ np.asarray(revenues, dtype=float)[idx] / (np.exp(-m) + e.sum()))


def revenue(inst: Instance, S, utilities) -> float:
    if not inst.outside_option:
        raise ValueError("expected revenue is defined for the outside-option model")
    S = as_assortment(inst, S)
    return revenue_of(S, utilities, inst.revenues)


def _rank_key(value: float, S: tuple):
    # higher value, then smaller set, then lexicographic items
    return (-value, len(S), S)


def best_assortment(q: RevenueQuery, allow_empty: bool = False):
    """Exact revenue maximizer under cardinality and forced-item constraints.

    Returns ``(S, value)``.  The empty set is only considered when
    ``allow_empty`` is set and nothing is forced in.
    """
    u = np.asarray(q.utilities, dtype=float)
    m = max(0.0, float(u.max()))
    # scaling w and the outside constant by e^{-m} leaves every ratio unchanged
    prob = RatioProblem(
        np.exp(u - m), q.revenues, float(np.exp(-m)), q.K,
        max(1, len(q.forced_in)), q.forced_in, q.forced_out,
    )
    S, _ = dinkelbach(prob)
    value = revenue_of(S, u, q.revenues)
    if allow_empty and not q.forced_in and value <= 0.0:
        return (), 0.0
    return S, value


def best_and_alternative(inst: Instance, utilities_plus, utilities_minus, K: int | None = None):
    """Pessimistic best assortment and the optimistic best alternative.

    ``S_best`` maximizes revenue under ``utilities_minus``.  ``S_alt`` maximizes
    revenue under ``utilities_plus`` over every ``S != S_best``; that family is
    the union of "drop some i in S_best" and "add some j not in S_best", so one
    constrained solve per item covers it.  The empty set (revenue 0) competes
    as an alternative.

    Returns ``(S_best, S_alt, R_pess(S_best), R_opt(S_alt))``.
    """
    K = inst.K if K is None else K
    r = inst.revenues
    S_best, R_best = best_assortment(RevenueQuery(utilities_minus, r, K))
    in_best = set(S_best)
    cands = [((), 0.0)]
    for i in range(inst.N):
        if i in in_best:
            q = RevenueQuery(utilities_plus, r, K, forced_out=frozenset([i]))
        else:
            q = RevenueQuery(utilities_plus, r, K, forced_in=frozenset([i]))
        try:
            cands.append(best_assortment(q))
        except ValueError:
            # e.g. dropping the only item when N == 1
            continue
    S_alt, R_alt = min(cands, key=lambda c: _rank_key(c[1], c[0]))
    return S_best, S_alt, R_best, R_alt


def true_gap(inst: Instance, margin: float = 1e-9):
    """Optimal assortment at theta* and the revenue gap to the runner-up."""
    if inst.theta_star is None:
        raise ValueError("true_gap needs theta_star")
    u = inst.features @ inst.theta_star
    S_star, S_alt, R_star, R_alt = best_and_alternative(inst, u, u)
    gap = R_star - R_alt
    if not gap > margin:
        raise NonUniqueMaximizer(f"revenue gap {gap:.3g} below margin {margin:.3g}")
    return S_star, float(gap)
