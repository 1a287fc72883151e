"""Exact 0-1 MILP form of the trace LMO and a small branch-and-bound solver.

Pipeline: the LMO objective tr(M^{-1} I(S)) is written as a quadratic
fractional program -x'Ax / x'Bx over binary x, linearized with big-M splits,
and made linear by the Charnes-Cooper scaling alpha = 1 / x'Bx.

With an outside option the no-purchase arm is carried as an extra item with
feature 0 whose x is fixed to 1, so the same algebra covers both models.
"""
from __future__ import annotations

import heapq
import itertools
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .lmo import LmoResult, _factor
from .mnl import Instance
from .simplex import BoundedSimplex

INT_TOL = 1e-6
BIGM_MODES = ("coarse", "tight")


@dataclass
class QfipData:
    A: np.ndarray
    B: np.ndarray
    w: np.ndarray
    r: np.ndarray
    s: np.ndarray
    K: int
    min_size: int = 2
    fixed_one: tuple = ()
    n_items: int = 0

    @property
    def n(self) -> int:
        return self.w.size

    def ratio(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x / (x @ self.B @ x))

    def encode(self, S) -> np.ndarray:
        x = np.zeros(self.n)
        x[list(S)] = 1.0
        x[list(self.fixed_one)] = 1.0
        return x

    def decode(self, x) -> tuple:
        on = np.flatnonzero(np.asarray(x) > 0.5)
        return tuple(int(i) for i in on if i < self.n_items)


def build_qfip(inst: Instance, theta0, Minv: np.ndarray) -> QfipData:
    """QFIP data with x'Ax / x'Bx = -tr(M^{-1} I(S)) for every valid S."""
    feats = inst.features
    u = feats @ np.asarray(theta0, dtype=float)
    K = inst.K
    fixed = ()
    if inst.outside_option:
        feats = np.vstack([feats, np.zeros(inst.d)])
        u = np.append(u, 0.0)
        fixed = (inst.N,)
        K += 1
    # the ratio is invariant under a common rescaling of w
    w = np.exp(u - u.max())
    F = (feats @ _factor(Minv)) * w[:, None]
    G = F @ F.T
    r = np.diag(G) / w
    s = r / w
    A = -0.5 * (np.outer(w, r) + np.outer(r, w)) + G
    return QfipData(0.5 * (A + A.T), np.outer(w, w), w, r, s, K, 2, fixed, inst.N)


@dataclass
class BigMConstants:
    m_A: np.ndarray
    m_B: np.ndarray
    alpha_bar: float
    mode: str


def big_m(q: QfipData, mode: str = "tight") -> BigMConstants:
    absA = np.abs(q.A)
    if mode == "coarse":
        n = q.n
        wmin = q.w.min()
        return BigMConstants(np.full(n, absA.sum(axis=1).max()),
                             np.full(n, q.B.sum(axis=1).max()),
                             float(1.0 / (4.0 * wmin * wmin)), "coarse")
    if mode == "tight":
        k = min(q.K, q.n)
        top = -np.sort(-absA, axis=1)[:, :k]
        W_max = np.sort(q.w)[::-1][:k].sum()
        W_min2 = np.sort(q.w)[:2].sum()
        return BigMConstants(top.sum(axis=1), q.w * W_max, float(1.0 / W_min2**2), "tight")
    raise ValueError(f"unknown big-M mode {mode!r}")


@dataclass
class MilpModel:
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_le: np.ndarray
    b_le: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    col_names: list
    eq_names: list
    le_names: list
    qfip: QfipData | None = None
    bigm: BigMConstants | None = None

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def x_index(self) -> np.ndarray:
        return np.flatnonzero(self.integer)

    def objective_at(self, S) -> tuple:
        """Feasible point of the model for assortment S and its objective value."""
        q, bm = self.qfip, self.bigm
        n = q.n
        x = q.encode(S)
        alpha = 1.0 / (x @ q.B @ x)
        y_tot = q.A @ x + bm.m_A
        y1 = y_tot * x
        y0 = y_tot - y1
        z_tot = q.B @ x
        z1 = z_tot * x
        z0 = z_tot - z1
        z = np.concatenate([x, alpha * x, alpha * y0, alpha * y1, alpha * z0, alpha * z1, [alpha]])
        assert z.size == 6 * n + 1
        return z, float(self.c @ z)


def _names(prefix, n):
    return [f"{prefix}{i + 1:04d}" for i in range(n)]


def build_milp(q: QfipData, bigm: BigMConstants) -> MilpModel:
    n = q.n
    mA, mB, ab = bigm.m_A, bigm.m_B, bigm.alpha_bar
    I = np.eye(n)
    Z = np.zeros((n, n))
    zc = np.zeros((n, 1))
    one = np.ones((n, 1))
    # column blocks: x | v | S0 | S1 | U0 | U1 | alpha
    c = np.concatenate([np.zeros(n), -mA, np.zeros(n), np.ones(n), np.zeros(2 * n), [0.0]])
    A_eq = np.vstack([
        np.hstack([Z, q.A, -I, -I, Z, Z, mA[:, None]]),   # Av + m_A alpha = S0 + S1
        np.hstack([Z, q.B, Z, Z, -I, -I, zc]),            # Bv = U0 + U1
        np.concatenate([np.zeros(5 * n), np.ones(n), [0.0]])[None, :],  # 1'U1 = 1
    ])
    b_eq = np.concatenate([np.zeros(2 * n), [1.0]])
    DA, DB = np.diag(mA), np.diag(mB)
    A_le = np.vstack([
        np.hstack([Z, 2 * DA, I, Z, Z, Z, -2 * mA[:, None]]),  # S0 <= 2 m_A (alpha - v)
        np.hstack([Z, -2 * DA, Z, I, Z, Z, zc]),               # S1 <= 2 m_A v
        np.hstack([Z, DB, Z, Z, I, Z, -mB[:, None]]),          # U0 <= m_B (alpha - v)
        np.hstack([Z, -DB, Z, Z, Z, I, zc]),                   # U1 <= m_B v
        np.hstack([Z, I, Z, Z, Z, Z, -one]),                   # v <= alpha
        np.hstack([-ab * I, I, Z, Z, Z, Z, zc]),               # v <= abar x
        np.hstack([ab * I, -I, Z, Z, Z, Z, one]),              # v >= alpha - abar (1 - x)
        np.concatenate([np.ones(n), np.zeros(5 * n + 1)])[None, :],
        np.concatenate([-np.ones(n), np.zeros(5 * n + 1)])[None, :],
    ])
    b_le = np.concatenate([np.zeros(6 * n), np.full(n, ab), [q.K, -q.min_size]])
    lower = np.zeros(6 * n + 1)
    upper = np.concatenate([np.ones(n), np.full(n, ab), np.tile(2 * mA * ab, 2),
                            np.tile(mB * ab, 2), [ab]])
    lower[list(q.fixed_one)] = 1.0
    integer = np.zeros(6 * n + 1, dtype=bool)
    integer[:n] = True
    cols = (_names("X", n) + _names("V", n) + _names("SA", n) + _names("SB", n)
            + _names("UA", n) + _names("UB", n) + ["ALPHA"])
    eqs = _names("EA", n) + _names("EB", n) + ["NORM"]
    les = (_names("LA", n) + _names("LB", n) + _names("LC", n) + _names("LD", n)
           + _names("LE", n) + _names("LF", n) + _names("LG", n) + ["CARDHI", "CARDLO"])
    return MilpModel(c, A_eq, b_eq, A_le, b_le, lower, upper, integer, cols, eqs, les, q, bigm)


@dataclass
class BnbResult:
    x_incumbent: np.ndarray
    UB: float
    LB: float
    nodes: int
    status: str
    lp_iterations: int = 0
    seconds: float = 0.0

    @property
    def gap(self) -> float:
        return self.UB - self.LB


@dataclass(order=True)
class _Node:
    lb: float
    seq: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    basis: object = field(compare=False)


def _round_repair(xf: np.ndarray, q: QfipData) -> np.ndarray:
    x = (xf >= 0.5).astype(float)
    fixed = list(q.fixed_one)
    x[fixed] = 1.0
    free = np.ones(q.n, dtype=bool)
    free[fixed] = False
    while x.sum() > q.K:
        on = np.flatnonzero((x > 0.5) & free)
        x[on[np.argmin(xf[on])]] = 0.0
    while x.sum() < q.min_size:
        off = np.flatnonzero(x < 0.5)
        x[off[np.argmax(xf[off])]] = 1.0
    return x


def solve_bnb(m: MilpModel, eps_lmo: float = 0.0, node_cap: int = 100_000,
              time_limit: float | None = None, verbose: bool = False) -> BnbResult:
    """Best-bound branch-and-bound with an absolute optimality-gap stop.

    The returned interval [LB, UB] always contains the true optimum.
    """
    if not eps_lmo >= 0:
        raise ValueError("eps_lmo must be non-negative")
    q = m.qfip
    t0 = time.perf_counter()
    xi = m.x_index
    sx = BoundedSimplex(m.c, m.A_eq, m.b_eq, m.A_le, m.b_le, m.lower, m.upper)
    root = sx.solve_cold()
    assert root.status == "optimal", f"LP relaxation infeasible: {root.message}"
    seq = itertools.count()
    UB, x_inc = np.inf, None
    nodes = 1
    last_lb = -np.inf
    heap: list = []

    def offer(xf):
        nonlocal UB, x_inc
        xr = _round_repair(xf, q)
        val = q.ratio(xr)
        if val < UB:
            UB, x_inc = val, xr

    def integral(xf):
        return np.all(np.minimum(xf, 1 - xf) <= INT_TOL)

    def consider(res, lo, hi, parent_lb):
        xf = res.x[xi]
        lb = max(res.objective, parent_lb)
        if integral(xf):
            offer(xf)
        else:
            offer(xf)
            if lb < UB:
                heapq.heappush(heap, _Node(lb, next(seq), lo, hi, xf, sx.state()))

    lo0, hi0 = m.lower[xi].copy(), m.upper[xi].copy()
    consider(root, lo0, hi0, -np.inf)
    status = "optimal"
    while True:
        LB = min(heap[0].lb, UB) if heap else UB
        assert LB >= last_lb - 1e-9 * max(1.0, abs(last_lb)), "global lower bound decreased"
        last_lb = max(last_lb, LB)
        gap = UB - LB
        if verbose:
            print(f"node={nodes} LB={LB:.10g} UB={UB:.10g} gap={gap:.3g}", file=sys.stderr)
        if not heap or gap <= 1e-9:
            status = "optimal"
            break
        if gap <= eps_lmo:
            status = "gap_reached"
            break
        if nodes >= node_cap:
            status = "node_cap"
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            status = "time_limit"
            break
        node = heapq.heappop(heap)
        if node.lb >= UB:
            continue
        free = node.hi - node.lo > 0
        frac = np.where(free, np.abs(node.x - 0.5), np.inf)
        j = int(np.argmin(frac))  # argmin returns the lowest index on ties
        for val in (0.0, 1.0):
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[j] = hi[j] = val
            sx.set_bounds(xi, lo, hi)
            res = sx.solve_warm(node.basis)
            nodes += 1
            if res.status == "optimal" and res.objective < UB:
                consider(res, lo, hi, node.lb)
    LB = min(LB, UB)
    return BnbResult(x_inc, float(UB), float(LB), nodes, status, sx.iterations,
                     time.perf_counter() - t0)


def lmo_milp(inst: Instance, theta0, Minv: np.ndarray, eps_lmo: float = 0.0,
             mode: str = "tight", node_cap: int = 100_000, time_limit: float | None = None,
             verbose: bool = False, bigm_hook=None) -> LmoResult:
    """LMO through the MILP; value is the incumbent's trace, gap the certified UB - LB.

    ``bigm_hook`` maps the computed constants to the ones actually used; it
    exists so the oracle suite can confirm that bad constants get caught.
    """
    q = build_qfip(inst, theta0, Minv)
    bm = big_m(q, mode)
    if bigm_hook is not None:
        bm = bigm_hook(bm)
    model = build_milp(q, bm)
    res = solve_bnb(model, eps_lmo, node_cap, time_limit, verbose)
    S = q.decode(res.x_incumbent)
    stats = {"nodes": res.nodes, "status": res.status, "LB": res.LB, "UB": res.UB,
             "lp_iterations": res.lp_iterations, "seconds": res.seconds}
    return LmoResult(S, -res.UB, max(0.0, res.gap), "milp", stats)


# ----------------------------------------------------------------------------
# MPS


def _fmt(v: float) -> str:
    return "%.17g" % v


def export_mps(m: MilpModel, path, name: str = "LMO") -> None:
    """Fixed-format MPS (8-character names) with 17 significant digits."""
    lines = [f"NAME          {name}", "OBJSENSE", "    MIN", "ROWS", " N  COST"]
    lines += [f" E  {r}" for r in m.eq_names]
    lines += [f" L  {r}" for r in m.le_names]
    lines.append("COLUMNS")
    in_int = False
    for j, col in enumerate(m.col_names):
        if m.integer[j] != in_int:
            tag = "'INTORG'" if m.integer[j] else "'INTEND'"
            lines.append(f"    MARKER                 'MARKER'                 {tag}")
            in_int = bool(m.integer[j])
        entries = [("COST", m.c[j])]
        entries += [(r, v) for r, v in zip(m.eq_names, m.A_eq[:, j]) if v != 0.0]
        entries += [(r, v) for r, v in zip(m.le_names, m.A_le[:, j]) if v != 0.0]
        for row, v in entries:
            if row == "COST" and v == 0.0:
                continue
            lines.append(f"    {col:<8}  {row:<8}  {_fmt(v)}")
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    for row, v in itertools.chain(zip(m.eq_names, m.b_eq), zip(m.le_names, m.b_le)):
        if v != 0.0:
            lines.append(f"    RHS       {row:<8}  {_fmt(v)}")
    lines.append("BOUNDS")
    for j, col in enumerate(m.col_names):
        lo, hi = m.lower[j], m.upper[j]
        if lo == hi:
            lines.append(f" FX BND       {col:<8}  {_fmt(lo)}")
            continue
        if lo != 0.0:
            lines.append(f" LO BND       {col:<8}  {_fmt(lo)}")
        lines.append(f" UP BND       {col:<8}  {_fmt(hi)}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mps(path) -> MilpModel:
    """Parse a file written by :func:`export_mps` back into a model."""
    section = None
    eq_names, le_names, cols = [], [], []
    coef: dict = {}
    rhs: dict = {}
    integer_cols = set()
    bounds: dict = {}
    in_int = False
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if not line.startswith(" "):
                section = line.split()[0]
                continue
            tok = line.split()
            if section == "ROWS":
                kind, row = tok
                if kind == "E":
                    eq_names.append(row)
                elif kind == "L":
                    le_names.append(row)
                elif kind != "N":
                    raise ValueError(f"unsupported row type {kind}")
            elif section == "COLUMNS":
                if tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                col = tok[0]
                if not cols or cols[-1] != col:
                    cols.append(col)
                    if in_int:
                        integer_cols.add(col)
                for k in range(1, len(tok), 2):
                    coef[(tok[k], col)] = float(tok[k + 1])
            elif section == "RHS":
                for k in range(1, len(tok), 2):
                    rhs[tok[k]] = float(tok[k + 1])
            elif section == "BOUNDS":
                kind, _, col, val = tok
                lo, hi = bounds.get(col, (0.0, np.inf))
                v = float(val)
                if kind == "FX":
                    lo = hi = v
                elif kind == "LO":
                    lo = v
                elif kind == "UP":
                    hi = v
                else:
                    raise ValueError(f"unsupported bound type {kind}")
                bounds[col] = (lo, hi)
    cidx = {c: j for j, c in enumerate(cols)}
    n = len(cols)

    def matrix(rows):
        M = np.zeros((len(rows), n))
        ridx = {r: i for i, r in enumerate(rows)}
        for (row, col), v in coef.items():
            if row in ridx:
                M[ridx[row], cidx[col]] = v
        return M

    c = np.zeros(n)
    for (row, col), v in coef.items():
        if row == "COST":
            c[cidx[col]] = v
    lower = np.array([bounds.get(col, (0.0, np.inf))[0] for col in cols])
    upper = np.array([bounds.get(col, (0.0, np.inf))[1] for col in cols])
    integer = np.array([col in integer_cols for col in cols])
    return MilpModel(c, matrix(eq_names), np.array([rhs.get(r, 0.0) for r in eq_names]),
                     matrix(le_names), np.array([rhs.get(r, 0.0) for r in le_names]),
                     lower, upper, integer, cols, eq_names, le_names)
