"""Linear maximization oracles over the assortment family.

All oracles maximize ``tr(M^{-1} I(S))`` (or its lifted analogue) over valid
assortments.  Three backends exist: exhaustive enumeration (``brute``), the
0-1 MILP in :mod:`mnldesign.milp` (``milp``), and the polynomial-time lifted
surrogate solved as a ratio-of-sums problem (``lifted``).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import chain, combinations

import numpy as np

from .mnl import Instance, fisher_info, lifted_info

BACKENDS = ("brute", "milp", "lifted")
DEFAULT_BUDGET = 10**8


class BudgetExceeded(RuntimeError):
    pass


class LmoTimeout(BudgetExceeded):
    pass


class InfeasibleConstraints(ValueError):
    pass


class IterationCap(RuntimeError):
    pass


@dataclass
class LmoResult:
    assortment: tuple
    value: float
    certified_gap: float = 0.0
    backend: str = "brute"
    stats: dict = field(default_factory=dict)

    @property
    def upper_bound(self) -> float:
        """Certified upper bound on the true maximum."""
        return self.value + self.certified_gap


# ----------------------------------------------------------------------------
# ratio-of-sums engine


@dataclass
class RatioProblem:
    """maximize (num_const + sum_S w_i s_i) / (denom_const + sum_S w_i)

    over S with forced_in <= S, S & forced_out = {}, min_size <= |S| <= K.
    """

    w: np.ndarray
    s: np.ndarray
    denom_const: float
    K: int
    min_size: int = 1
    forced_in: frozenset = frozenset()
    forced_out: frozenset = frozenset()
    num_const: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.forced_in = frozenset(int(i) for i in self.forced_in)
        self.forced_out = frozenset(int(i) for i in self.forced_out)
        if self.forced_in & self.forced_out:
            raise InfeasibleConstraints("forced_in and forced_out overlap")
        if len(self.forced_in) > self.K:
            raise InfeasibleConstraints("more forced items than capacity")
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")
        n_allowed = len(self.w) - len(self.forced_out)
        if max(self.min_size, len(self.forced_in)) > min(self.K, n_allowed):
            raise InfeasibleConstraints("cannot reach the minimum assortment size")

    def ratio(self, S) -> float:
        idx = list(S)
        num = self.num_const + float(self.w[idx] @ self.s[idx])
        den = self.denom_const + float(self.w[idx].sum())
        return num / den

    def inner(self, lam: float):
        """Exact maximizer of num - lam * den over the constrained family."""
        vals = self.w * (self.s - lam)
        forced = sorted(self.forced_in)
        blocked = self.forced_in | self.forced_out
        allowed = np.array([i for i in range(len(vals)) if i not in blocked], dtype=int)
        order = allowed[np.argsort(-vals[allowed], kind="stable")]
        f = len(forced)
        lo = max(0, self.min_size - f)
        hi = self.K - f
        k = int(np.clip(np.count_nonzero(vals[allowed] > 0), lo, hi))
        S = tuple(sorted(forced + order[:k].tolist()))
        obj = self.num_const - lam * self.denom_const + float(vals[list(S)].sum())
        return S, obj


def dinkelbach(p: RatioProblem, max_iter: int = 100, tol: float = 1e-12):
    """Exact maximizer of the ratio-of-sums problem.  Returns ``(S, ratio)``."""
    S, _ = p.inner(0.0)
    lam = p.ratio(S)
    scale = max(1.0, abs(p.num_const) + float(np.abs(p.w * p.s).sum()))
    for it in range(max_iter):
        S_new, F = p.inner(lam)
        if F <= tol * scale:
            return S, lam
        lam_new = p.ratio(S_new)
        assert lam_new > lam - tol * scale, "Dinkelbach sequence decreased"
        S, lam = S_new, lam_new
    raise IterationCap(f"Dinkelbach did not converge in {max_iter} iterations")


# ----------------------------------------------------------------------------
# trace evaluation helpers


def trace_value(inst: Instance, theta0, Minv: np.ndarray, S) -> float:
    """Direct tr(M^{-1} I(S)) through the Fisher matrix."""
    return float(np.sum(Minv * fisher_info(inst, S, theta0)))


def lifted_trace_value(inst: Instance, theta0, Mt_inv: np.ndarray, S) -> float:
    return float(np.sum(Mt_inv * lifted_info(inst, S, theta0)))


def _factor(Minv: np.ndarray) -> np.ndarray:
    Minv = 0.5 * (Minv + Minv.T)
    try:
        return np.linalg.cholesky(Minv)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(Minv)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise ValueError("inverse design matrix is not positive semidefinite")
        return vecs * np.sqrt(np.clip(vals, 0, None))


class TraceEvaluator:
    """Vectorized tr(M^{-1} I(S)) via the expansion

    sum_S w_i s_i / D  -  || sum_S w_i F_i ||^2 / D^2,   D = [1 +] sum_S w_i,

    where F = A L with M^{-1} = L L^T, so s_i = ||F_i||^2 and F_i.F_j = a_i' M^{-1} a_j.
    """

    def __init__(self, inst: Instance, theta0, Minv):
        self.inst = inst
        u = inst.features @ np.asarray(theta0, dtype=float)
        # common rescaling of w leaves every ratio unchanged (D has no constant
        # term) or is undone below (outside option: constant 1 scales too)
        self.shift = 0.0 if inst.outside_option else float(u.max())
        self.w = np.exp(u - self.shift)
        self.F = inst.features @ _factor(Minv)
        self.s = np.einsum("ij,ij->i", self.F, self.F)
        self.const = 1.0 if inst.outside_option else 0.0

    def values(self, idx: np.ndarray) -> np.ndarray:
        ws = self.w[idx]
        D = self.const + ws.sum(axis=1)
        num = (ws * self.s[idx]).sum(axis=1)
        z = np.einsum("ck,ckd->cd", ws, self.F[idx])
        return num / D - np.einsum("cd,cd->c", z, z) / D**2


def n_assortments(N: int, K: int, min_size: int) -> int:
    return sum(math.comb(N, k) for k in range(min_size, K + 1))


def iter_combination_blocks(N: int, k: int, block: int = 200_000):
    """Lexicographic k-subsets of range(N) as int arrays of at most ``block`` rows."""
    it = combinations(range(N), k)
    while True:
        flat = np.fromiter(chain.from_iterable(_take(it, block)), dtype=np.int64)
        if flat.size == 0:
            return
        yield flat.reshape(-1, k)


def _take(it, n):
    for _, x in zip(range(n), it):
        yield x


def lmo_brute(inst: Instance, theta0, Minv: np.ndarray, budget: int = DEFAULT_BUDGET,
              spot_check: int = 0, rng=None, time_limit: float | None = None) -> LmoResult:
    """Exact LMO by enumerating every valid assortment.

    Subsets are visited size by size, lexicographically; exact ties in value
    go to the lexicographically smallest index tuple.
    """
    total = n_assortments(inst.N, inst.K, inst.min_size)
    if total > budget:
        raise BudgetExceeded(f"{total} assortments exceed the enumeration budget {budget}")
    ev = TraceEvaluator(inst, theta0, Minv)
    best_val, best_S = -np.inf, None
    t0 = time.perf_counter()
    for k in range(inst.min_size, inst.K + 1):
        for idx in iter_combination_blocks(inst.N, k):
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                raise LmoTimeout(f"enumeration exceeded {time_limit} s")
            vals = ev.values(idx)
            j = int(np.argmax(vals))
            v = float(vals[j])
            S = tuple(int(i) for i in idx[j])
            if v > best_val or (v == best_val and S < best_S):
                best_val, best_S = v, S
    if spot_check:
        rng = np.random.default_rng(0) if rng is None else rng
        for _ in range(spot_check):
            k = int(rng.integers(inst.min_size, inst.K + 1))
            S = tuple(sorted(rng.choice(inst.N, size=k, replace=False).tolist()))
            fast = float(ev.values(np.array([S]))[0])
            direct = trace_value(inst, theta0, Minv, S)
            if abs(fast - direct) > 1e-10 * max(1.0, abs(direct)):
                raise AssertionError(f"trace expansion mismatch on {S}: {fast} vs {direct}")
    return LmoResult(best_S, best_val, 0.0, "brute", {"evaluated": total})


def lifted_ratio_problem(inst: Instance, theta0, Mt_inv: np.ndarray) -> RatioProblem:
    Mt_inv = np.asarray(Mt_inv, dtype=float)
    lifted = np.hstack([inst.features, np.ones((inst.N, 1))])
    s = np.einsum("ij,jk,ik->i", lifted, Mt_inv, lifted)
    u = inst.features @ np.asarray(theta0, dtype=float)
    if inst.outside_option:
        # outside arm lifts to (0, ..., 0, 1): contributes s_0 = Mt_inv[-1, -1]
        return RatioProblem(np.exp(u), s, 1.0, inst.K, 1, num_const=float(Mt_inv[-1, -1]))
    return RatioProblem(np.exp(u - u.max()), s, 0.0, inst.K, 2)


def lmo_lifted(inst: Instance, theta0, Mt_inv: np.ndarray) -> LmoResult:
    """Polynomial-time lifted LMO: max_S tr(Mt^{-1} lifted_info(S))."""
    try:
        np.linalg.cholesky(0.5 * (Mt_inv + Mt_inv.T))
    except np.linalg.LinAlgError:
        raise ValueError("lifted design matrix is not positive definite") from None
    prob = lifted_ratio_problem(inst, theta0, Mt_inv)
    S, ratio = dinkelbach(prob)
    return LmoResult(S, float(ratio), 0.0, "lifted", {})
