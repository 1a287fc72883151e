"""Frank-Wolfe optimal designs over assortments.

Three variants share one loop:

* ``brute``  -- exact LMO, stop when g <= (1 + eps) d;
* ``milp``   -- LMO with a certified absolute gap eps_lmo, stop when the
  certified upper bound on g is <= (1 + eps) d; requires
  eps - eps_lmo / d in (0, 1];
* ``lifted`` -- polynomial-time LMO on the lifted (d+1)-dimensional design,
  stop when the lifted criterion is <= (1 + eps)(d + 1).
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lmo import BACKENDS, LmoResult, lmo_brute, lmo_lifted
from .mnl import Instance, as_assortment, fisher_info, lifted_info
from .rng import STREAM_DESIGN, CounterRNG

PRUNE_TOL = 1e-12
GAMMA_MAX = 1.0 - 1e-9
GOLDEN_TOL = 1e-10
PD_TOL = 1e-8


class DesignError(RuntimeError):
    pass


@dataclass
class Design:
    atoms: list
    weights: np.ndarray
    M: np.ndarray
    Mt: np.ndarray

    @property
    def support(self) -> int:
        return len(self.atoms)

    def to_dict(self) -> dict:
        return {"atoms": [list(a) for a in self.atoms], "weights": self.weights.tolist()}


class _InfoCache:
    def __init__(self, inst: Instance, theta0):
        self.inst = inst
        self.theta0 = np.asarray(theta0, dtype=float)
        self._I: dict = {}
        self._L: dict = {}

    def fisher(self, S):
        I = self._I.get(S)
        if I is None:
            I = self._I[S] = fisher_info(self.inst, S, self.theta0)
        return I

    def lifted(self, S):
        L = self._L.get(S)
        if L is None:
            L = self._L[S] = lifted_info(self.inst, S, self.theta0)
        return L


def make_design(inst: Instance, theta0, atoms, weights, cache: _InfoCache | None = None) -> Design:
    cache = cache or _InfoCache(inst, theta0)
    atoms = [as_assortment(inst, S) for S in atoms]
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(atoms),) or np.any(weights < 0):
        raise ValueError("weights must be a non-negative vector matching the atoms")
    weights = weights / weights.sum()
    M = sum(w * cache.fisher(S) for S, w in zip(atoms, weights))
    Mt = sum(w * cache.lifted(S) for S, w in zip(atoms, weights))
    return Design(atoms, weights, 0.5 * (M + M.T), 0.5 * (Mt + Mt.T))


def _random_assortment(inst: Instance, rng: CounterRNG) -> tuple:
    k = inst.min_size + rng.integers(inst.K - inst.min_size + 1)
    pool = list(range(inst.N))
    for j in range(k):  # partial Fisher-Yates
        r = j + rng.integers(inst.N - j)
        pool[j], pool[r] = pool[r], pool[j]
    return tuple(sorted(pool[:k]))


def _lambda_min(M):
    return float(np.linalg.eigvalsh(M)[0])


def init_design(inst: Instance, theta0, seed: int = 0, cache: _InfoCache | None = None) -> Design:
    """Uniform mixture of random assortments with lambda_min(M) >= 1e-8."""
    cache = cache or _InfoCache(inst, theta0)
    rng = CounterRNG(seed, STREAM_DESIGN)
    d = inst.d
    cap = 10 * d * (d + 1) // 2
    atoms: list = []
    seen = set()
    M_sum = np.zeros((d, d))
    for _ in range(50 * cap):
        S = _random_assortment(inst, rng)
        if S in seen:
            continue
        seen.add(S)
        atoms.append(S)
        M_sum += cache.fisher(S)
        if _lambda_min(M_sum / len(atoms)) >= PD_TOL:
            m = len(atoms)
            return make_design(inst, theta0, atoms, np.full(m, 1.0 / m), cache)
        if len(atoms) >= cap:
            break
    rank = int(np.linalg.matrix_rank(M_sum, tol=PD_TOL))
    raise DesignError(
        f"could not reach a positive definite design with {len(atoms)} atoms "
        f"(information rank {rank} < d={d})"
    )


def _logdet(M) -> float:
    sign, val = np.linalg.slogdet(M)
    return val if sign > 0 else -np.inf


def line_search(M: np.ndarray, I: np.ndarray, tol: float = GOLDEN_TOL) -> float:
    """argmax over [0, 1 - 1e-9] of log det((1 - g) M + g I), by golden section.

    Works on the eigenvalues of M^{-1/2} I M^{-1/2}, so each evaluation costs O(d).
    Returns 0 when no step improves on the current design.
    """
    lam = scipy.linalg.eigh(0.5 * (I + I.T), 0.5 * (M + M.T), eigvals_only=True)
    lam = np.clip(lam, 0.0, None)

    def phi(g):
        return float(np.sum(np.log1p(g * (lam - 1.0))))

    lo, hi = 0.0, GAMMA_MAX
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    f1, f2 = phi(x1), phi(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = phi(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = phi(x1)
    g = 0.5 * (lo + hi)
    f_end = phi(GAMMA_MAX)
    fg = phi(g)
    if f_end > fg:
        g, fg = GAMMA_MAX, f_end
    if fg <= 0.0:
        return 0.0
    return g


def lift_error(design: Design) -> float:
    """Smallest eps with Delta <= eps M, Delta = Schur(Mt) - M (>= 0 by construction)."""
    d = design.M.shape[0]
    Bbar = design.Mt[:d, :d]
    bbar = design.Mt[:d, d]
    delta = Bbar - np.outer(bbar, bbar) - design.M
    delta = 0.5 * (delta + delta.T)
    try:
        top = scipy.linalg.eigh(delta, design.M, eigvals_only=True)[-1]
    except np.linalg.LinAlgError:
        raise ValueError("design matrix is not positive definite") from None
    return max(0.0, float(top))


def run_lmo(inst: Instance, theta0, design: Design, backend: str,
            eps_lmo: float = 0.0, lmo_options: dict | None = None) -> LmoResult:
    opts = dict(lmo_options or {})
    if backend == "brute":
        return lmo_brute(inst, theta0, np.linalg.inv(design.M), **opts)
    if backend == "milp":
        from .milp import lmo_milp
        return lmo_milp(inst, theta0, np.linalg.inv(design.M), eps_lmo, **opts)
    if backend == "lifted":
        return lmo_lifted(inst, theta0, np.linalg.inv(design.Mt))
    raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def g_value(design: Design, inst: Instance, theta0, backend: str = "brute",
            eps_lmo: float = 0.0, lmo_options: dict | None = None):
    """Certified upper bound on the design criterion and the LMO's candidate.

    ``brute`` gives the exact g, ``milp`` the incumbent plus certified gap,
    ``lifted`` the lifted criterion (a different quantity).
    """
    res = run_lmo(inst, theta0, design, backend, eps_lmo, lmo_options)
    return res.upper_bound, res.assortment


def iteration_bound(d: int, eps_tilde: float, lambda0: float, L: float = 1.0) -> int:
    """1 + ceil(4 d log(L / lambda0) / eps_tilde) FW iterations before certification."""
    return 1 + math.ceil(4 * d * max(0.0, math.log(L / lambda0)) / eps_tilde)


@dataclass
class FwReport:
    design: Design
    iterations: int
    final_g: float
    epsilon_used: float
    eps_lmo_used: float
    backend: str
    status: str
    log: list = field(default_factory=list)
    seconds: float = 0.0
    lmo_seconds: list = field(default_factory=list)
    eps_lift: float = float("nan")

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "status": self.status,
            "iterations": self.iterations,
            "final_g": self.final_g,
            "epsilon": self.epsilon_used,
            "eps_lmo": self.eps_lmo_used,
            "support": self.design.support,
            "eps_lift": self.eps_lift,
            "seconds": self.seconds,
            "design": self.design.to_dict(),
            "log": self.log,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def frank_wolfe(inst: Instance, theta0, eps: float = 0.1, backend: str = "brute",
                eps_lmo: float = 0.0, iter_cap: int = 10_000, seed: int = 0,
                design: Design | None = None, lmo_options: dict | None = None) -> FwReport:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    d = inst.d
    theta0 = np.asarray(theta0, dtype=float)
    lifted = backend == "lifted"
    if backend == "milp":
        eps_tilde = eps - eps_lmo / d
        if not 0 < eps_tilde <= 1:
            raise ValueError(f"eps - eps_lmo/d = {eps_tilde:.4g} must lie in (0, 1]")
    else:
        eps_tilde = eps
        eps_lmo = 0.0
    cache = _InfoCache(inst, theta0)
    t0 = time.perf_counter()
    design = design or init_design(inst, theta0, seed, cache)
    threshold = (1 + eps) * (d + 1) if lifted else (1 + eps) * d
    cap = iter_cap
    if not lifted:
        cap = min(cap, iteration_bound(d, min(eps_tilde, 1.0), _lambda_min(design.M)))
    atoms = list(design.atoms)
    weights = design.weights.copy()
    M, Mt = design.M.copy(), design.Mt.copy()
    objective = lambda: _logdet(Mt if lifted else M)  # noqa: E731
    f_prev = objective()
    log, lmo_secs = [], []
    status, g_up, it = "iter_cap", np.inf, 0
    while True:
        cur = Design(atoms, weights, M, Mt)
        t_l = time.perf_counter()
        res = run_lmo(inst, theta0, cur, backend, eps_lmo, lmo_options)
        lmo_secs.append(time.perf_counter() - t_l)
        g_up = res.upper_bound
        entry = {"iter": it, "g_hat": res.value, "g_upper": g_up,
                 "gap": res.certified_gap, "atom": list(res.assortment)}
        if g_up <= threshold:
            log.append(entry)
            status = "certified"
            break
        if it >= cap:
            log.append(entry)
            break
        S = res.assortment
        I_S = cache.lifted(S) if lifted else cache.fisher(S)
        gamma = line_search(Mt if lifted else M, I_S)
        entry["gamma"] = gamma
        log.append(entry)
        weights = (1.0 - gamma) * weights
        if S in atoms:
            weights[atoms.index(S)] += gamma
        else:
            atoms.append(S)
            weights = np.append(weights, gamma)
        M = (1.0 - gamma) * M + gamma * cache.fisher(S)
        Mt = (1.0 - gamma) * Mt + gamma * cache.lifted(S)
        keep = weights >= PRUNE_TOL
        if not np.all(keep):
            atoms = [a for a, k in zip(atoms, keep) if k]
            rebuilt = make_design(inst, theta0, atoms, weights[keep], cache)
            weights, M, Mt = rebuilt.weights, rebuilt.M, rebuilt.Mt
        f_new = objective()
        assert f_new >= f_prev - 1e-10 * max(1.0, abs(f_prev)), "log det decreased"
        f_prev = f_new
        it += 1
    if not lifted and backend == "milp" and status != "certified" and it >= cap < iter_cap:
        raise AssertionError("Frank-Wolfe exceeded its certified iteration bound")
    final = make_design(inst, theta0, atoms, weights, cache)
    eps_lift = lift_error(final)
    if inst.outside_option and np.linalg.norm(theta0) <= inst.B + 1e-12:
        bound = inst.K * math.exp(inst.B)
        assert eps_lift <= bound * (1 + 1e-9), f"eps_lift {eps_lift:.4g} exceeds K e^B = {bound:.4g}"
    return FwReport(final, it, float(g_up), eps, eps_lmo, backend, status, log,
                    time.perf_counter() - t0, lmo_secs, eps_lift)
