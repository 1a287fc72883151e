"""Dense bounded-variable revised simplex.

Solves  min c'x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  lower <= x <= upper.

Inequalities get slack columns, every row gets an artificial column for the
phase-1 start.  Rows and columns are equilibrated by powers of two before
solving.  The basis inverse is kept explicitly and updated by a rank-one eta
step, with a full refactorization every ``REFACTOR`` pivots and before any
final verdict.  Primal iterations use Dantzig pricing and switch to Bland's
rule after a run of degenerate pivots; both primal and dual ratio tests use
the two-pass Harris rule.  The dual simplex re-optimizes after bound changes
(branch-and-bound children) from a stored basis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REL_PIVOT_TOL = 1e-9
REFACTOR = 50
MAX_VERIFY = 3


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible"
    iterations: int = 0
    message: str = ""


@dataclass
class BasisState:
    basis: np.ndarray
    at_upper: np.ndarray


class NumericalFailure(RuntimeError):
    pass


def _as2d(A, n):
    if A is None:
        return np.zeros((0, n))
    return np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)


def _pow2(v):
    return np.exp2(np.round(np.log2(v)))


def equilibrate(S: np.ndarray, passes: int = 4):
    """Row and column scale factors (powers of two) from geometric-mean scaling."""
    m, n = S.shape
    R, C = np.ones(m), np.ones(n)
    absS = np.abs(S)
    # round-off-sized entries would drag the geometric means; ignore them
    nz = absS > 1e-10 * absS.max(initial=0.0)
    for _ in range(passes):
        T = absS * R[:, None] * C[None, :]
        big = np.where(nz, T, 0.0).max(axis=1, initial=0.0)
        small = np.where(nz, T, np.inf).min(axis=1, initial=np.inf)
        ok = big > 0
        R[ok] /= _pow2(np.sqrt(big[ok] * small[ok]))
        T = absS * R[:, None] * C[None, :]
        big = np.where(nz, T, 0.0).max(axis=0, initial=0.0)
        small = np.where(nz, T, np.inf).min(axis=0, initial=np.inf)
        ok = big > 0
        C[ok] /= _pow2(np.sqrt(big[ok] * small[ok]))
    return R, C


class BoundedSimplex:
    def __init__(self, c, A_eq=None, b_eq=None, A_le=None, b_le=None,
                 lower=None, upper=None, tol: float = FEAS_TOL, scale: bool = True):
        c = np.asarray(c, dtype=float)
        n = c.size
        A_eq, A_le = _as2d(A_eq, n), _as2d(A_le, n)
        b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
        b_le = np.zeros(0) if b_le is None else np.asarray(b_le, dtype=float).ravel()
        if A_eq.shape[0] != b_eq.size or A_le.shape[0] != b_le.size:
            raise ValueError("constraint matrix and right-hand side sizes disagree")
        lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).copy()
        upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).copy()
        if np.any(np.isneginf(lower) & np.isposinf(upper)):
            raise ValueError("free variables are not supported")
        me, ml = A_eq.shape[0], A_le.shape[0]
        m = me + ml
        self.n, self.m = n, m
        self.n_slack = ml
        S = np.vstack([A_eq, A_le])
        R, C = equilibrate(S) if scale and m else (np.ones(m), np.ones(n))
        self.R, self.C = R, C
        # columns: structural | slack | artificial
        A = np.zeros((m, n + ml + m))
        A[:, :n] = S * R[:, None] * C[None, :]
        A[me:, n:n + ml] = np.eye(ml)
        A[:, n + ml:] = np.eye(m)
        self.A = A
        self.b = np.concatenate([b_eq, b_le]) * R
        self.c = np.concatenate([c * C, np.zeros(ml + m)])
        self.lower = np.concatenate([lower / C, np.zeros(ml), np.zeros(m)])
        self.upper = np.concatenate([upper / C, np.full(ml, np.inf), np.zeros(m)])
        self.art = np.arange(n + ml, n + ml + m)
        self.tol = tol
        self.basis = None
        self.at_upper = None
        self.Binv = None
        self.iterations = 0
        self._since_refactor = 0

    # -- state ---------------------------------------------------------------
    @property
    def ntot(self):
        return self.A.shape[1]

    def state(self) -> BasisState:
        return BasisState(self.basis.copy(), self.at_upper.copy())

    def set_state(self, st: BasisState) -> None:
        self.basis = st.basis.copy()
        self.at_upper = st.at_upper.copy()
        self._fix_status()
        self._refactor()

    def _fix_status(self):
        # a nonbasic variable can only sit at a finite bound
        self.at_upper &= np.isfinite(self.upper)
        self.at_upper |= ~np.isfinite(self.lower)

    def set_bounds(self, idx, lower, upper) -> None:
        """Change bounds of structural variables (given in original units)."""
        idx = np.asarray(idx)
        self.lower[idx] = np.asarray(lower, dtype=float) / self.C[idx]
        self.upper[idx] = np.asarray(upper, dtype=float) / self.C[idx]

    def _refactor(self):
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis") from None
        if not np.all(np.isfinite(self.Binv)):
            raise NumericalFailure("singular basis")
        self._since_refactor = 0

    def _nonbasic_values(self):
        x = np.where(self.at_upper, self.upper, self.lower)
        x[self.basis] = 0.0
        return x

    def primal_values(self):
        x = self._nonbasic_values()
        xB = self.Binv @ (self.b - self.A @ x)
        x[self.basis] = xB
        return x, xB

    def _reduced_costs(self, c):
        y = c[self.basis] @ self.Binv
        d = c - y @ self.A
        d[self.basis] = 0.0
        return d

    def _pivot(self, r, q, alpha):
        row = self.Binv[r] / alpha[r]
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.basis[r] = q
        self.at_upper[q] = False
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR:
            self._refactor()

    def _nonbasic_mask(self):
        nb = np.ones(self.ntot, dtype=bool)
        nb[self.basis] = False
        return nb

    def _primal_infeasibility(self):
        _, xB = self.primal_values()
        lB, uB = self.lower[self.basis], self.upper[self.basis]
        return np.maximum(lB - xB, xB - uB), xB

    def _dual_infeasible(self, c):
        d = self._reduced_costs(c)
        nb = self._nonbasic_mask() & (self.upper - self.lower > 0.0)
        return nb & ((~self.at_upper & (d < -OPT_TOL)) | (self.at_upper & (d > OPT_TOL)))

    # -- primal --------------------------------------------------------------
    def _primal(self, c, max_iter):
        tol = self.tol
        degenerate = 0
        bland = False
        for _ in range(max_iter):
            elig = self._dual_infeasible(c)
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal"
            d = self._reduced_costs(c)
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            sigma = -1.0 if self.at_upper[q] else 1.0
            alpha = self.Binv @ self.A[:, q]
            _, xB = self.primal_values()
            lB, uB = self.lower[self.basis], self.upper[self.basis]
            sa = sigma * alpha
            # pivots tiny relative to the column are round-off, not structure
            ptol = max(PIVOT_TOL, REL_PIVOT_TOL * float(np.abs(alpha).max(initial=0.0)))
            dec = sa > ptol
            inc = (sa < -ptol) & np.isfinite(uB)
            # Harris pass 1: largest step keeping every basic within tol of its bounds
            lim = np.full(self.m, np.inf)
            lim[dec] = (xB[dec] - lB[dec] + tol) / sa[dec]
            lim[inc] = (uB[inc] - xB[inc] + tol) / -sa[inc]
            t_max = lim.min() if self.m else np.inf
            t_flip = self.upper[q] - self.lower[q]
            if not np.isfinite(t_max) and not np.isfinite(t_flip):
                return "unbounded"
            if t_flip <= t_max:
                self.at_upper[q] = not self.at_upper[q]
                self.iterations += 1
                continue
            ratio = np.full(self.m, np.inf)
            ratio[dec] = (xB[dec] - lB[dec]) / sa[dec]
            ratio[inc] = (uB[inc] - xB[inc]) / -sa[inc]
            ties = np.flatnonzero(ratio <= t_max)
            if bland:
                big = np.abs(alpha[ties]) >= 1e-3 * np.abs(alpha[ties]).max()
                ties = ties[big]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[r]
            to_upper = sa[r] < 0
            if max(ratio[r], 0.0) <= tol:
                degenerate += 1
                if degenerate > 5 * self.n:
                    bland = True
            self._pivot(r, q, alpha)
            self.at_upper[leaving] = to_upper and np.isfinite(self.upper[leaving])
        return "iteration_limit"

    # -- dual ----------------------------------------------------------------
    def _dual(self, c, max_iter):
        tol = self.tol
        fixed = self.upper - self.lower <= 0.0
        for _ in range(max_iter):
            viol, xB = self._primal_infeasibility()
            if self.m == 0 or viol.max() <= tol:
                return "optimal"
            r = int(np.argmax(viol))
            below = xB[r] < self.lower[self.basis[r]]
            d = self._reduced_costs(c)
            arow = self.Binv[r] @ self.A
            free = self._nonbasic_mask() & ~fixed
            s = -arow if below else arow
            ptol = max(PIVOT_TOL, REL_PIVOT_TOL * float(np.abs(arow[free]).max(initial=0.0)))
            # s_j > 0 means moving x_j off its bound pushes x_r toward feasibility
            elig = free & ((~self.at_upper & (s > ptol)) | (self.at_upper & (s < -ptol)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                self._refactor()
                return "infeasible" if self._row_proves_infeasible(r, below) else "numerical"
            a = np.abs(arow[cand])
            dd = np.abs(d[cand])
            t_max = ((dd + OPT_TOL) / a).min()
            ok = dd / a <= t_max
            q = int(cand[ok][np.argmax(a[ok])])
            leaving = self.basis[r]
            alpha = self.Binv @ self.A[:, q]
            self._pivot(r, q, alpha)
            self.at_upper[leaving] = not below
        return "iteration_limit"

    def _row_proves_infeasible(self, r, below) -> bool:
        """Does row r of B^-1 A x = B^-1 b certify infeasibility over the box?

        With a fresh factorization, the basic variable x_r is an affine function
        of the nonbasics; if its range over their bounds misses [l_r, u_r] by more
        than round-off, no point of the box satisfies the constraints.
        """
        arow = self.Binv[r] @ self.A
        beta = float(self.Binv[r] @ self.b)
        nb = self._nonbasic_mask()
        a, lo, hi = arow[nb], self.lower[nb], self.upper[nb]
        with np.errstate(invalid="ignore"):
            t_lo = np.where(a >= 0, a * lo, a * hi)
            t_hi = np.where(a >= 0, a * hi, a * lo)
        t_lo = np.where(a == 0, 0.0, t_lo)
        t_hi = np.where(a == 0, 0.0, t_hi)
        k = self.basis[r]
        if below:
            reach = beta - t_lo.sum()       # largest attainable x_r
            miss = self.lower[k] - reach
        else:
            reach = beta - t_hi.sum()       # smallest attainable x_r
            miss = reach - self.upper[k]
        if not np.isfinite(miss):
            return False
        terms = np.concatenate([[beta], t_lo[np.isfinite(t_lo)], t_hi[np.isfinite(t_hi)]])
        return miss > 1e-7 * max(1.0, float(np.abs(terms).max()))

    # -- drivers -------------------------------------------------------------
    def _max_iter(self):
        return 50 * (self.m + self.ntot)

    def _result(self, status, message=""):
        x, _ = self.primal_values()
        xs = x[: self.n] * self.C
        if status != "optimal":
            return LpResult(xs, np.inf, "infeasible", self.iterations, message or status)
        return LpResult(xs, float(self.c[: self.n] @ x[: self.n]), "optimal",
                        self.iterations, message)

    def _optimize(self, c, use_dual: bool):
        """Iterate to a verified optimum: refactor and re-check before any verdict."""
        st = "optimal"
        for _ in range(MAX_VERIFY):
            if use_dual:
                st = self._dual(c, self._max_iter())
                if st == "infeasible":
                    self._refactor()
                    st = self._dual(c, self._max_iter())
                if st != "optimal":
                    return st
            st = self._primal(c, self._max_iter())
            if st != "optimal":
                return st
            self._refactor()
            viol, _ = self._primal_infeasibility()
            if viol.max(initial=0.0) <= self.tol and not self._dual_infeasible(c).any():
                return "optimal"
            use_dual = viol.max(initial=0.0) > self.tol and not self._dual_infeasible(c).any()
            if not use_dual and viol.max(initial=0.0) > self.tol:
                return "numerical"
        return st

    def solve_cold(self) -> LpResult:
        self.upper[self.art] = np.inf
        self.at_upper = ~np.isfinite(self.lower)
        self.at_upper[self.art] = False
        x = np.where(self.at_upper, self.upper, self.lower)
        x[self.art] = 0.0
        resid = self.b - self.A @ x
        sign = np.where(resid < 0, -1.0, 1.0)
        self.A[:, self.art] = np.diag(sign)
        self.basis = self.art.copy()
        self.Binv = np.diag(sign)
        self._since_refactor = 0
        c1 = np.zeros(self.ntot)
        c1[self.art] = 1.0
        try:
            st = self._optimize(c1, use_dual=False)
        except NumericalFailure as exc:
            self.upper[self.art] = 0.0
            return self._result("failure", f"numerical failure in phase 1: {exc}")
        xfull, _ = self.primal_values()
        infeas = float(xfull[self.art].sum())
        self.upper[self.art] = 0.0
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if st != "optimal" or infeas > 1e-7 * scale:
            return self._result("infeasible", f"phase 1 ended with infeasibility {infeas:.3g}")
        self.at_upper[self.art] = False
        try:
            return self._result(self._optimize(self.c, use_dual=False))
        except NumericalFailure as exc:
            return self._result("failure", f"numerical failure: {exc}")

    def solve_warm(self, state: BasisState) -> LpResult:
        """Re-optimize from a stored basis after bound changes."""
        try:
            self.set_state(state)
            if not self._dual_infeasible(self.c).any():
                st = self._optimize(self.c, use_dual=True)
            else:
                viol, _ = self._primal_infeasibility()
                if viol.max(initial=0.0) > self.tol:
                    return self.solve_cold()
                st = self._optimize(self.c, use_dual=False)
            if st == "numerical":
                return self.solve_cold()
            return self._result(st)
        except NumericalFailure:
            return self.solve_cold()


def lp_simplex(c, A_eq=None, b_eq=None, A_le=None, b_le=None, lower=None, upper=None):
    """Solve an LP; returns ``(x, objective, status)`` with status optimal or infeasible."""
    res = BoundedSimplex(c, A_eq, b_eq, A_le, b_le, lower, upper).solve_cold()
    return res.x, res.objective, res.status
