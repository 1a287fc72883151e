"""Best-assortment identification with a design-based sampling rule.

Phases: a doubled-feedback warm-up that covers every arm, a nominal fit on
the second feedback stream, a Frank-Wolfe design at that nominal parameter,
then i.i.d. offers from the design until the pessimistic revenue of the
empirical best beats the optimistic revenue of every alternative.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assortment import best_and_alternative, true_gap
from .design import frank_wolfe
from .estimator import DesignMatrices, beta, fit_mle, uncertainty_widths
from .lmo import BACKENDS
from .mnl import ChoiceData, fisher_info, kappa, kappa_bound
from .rng import STREAM_OFFER, CounterRNG
from .sim import Environment

PHASE_WARMUP, PHASE_MAIN = "warmup", "main"
CSV_COLUMNS = ["seed", "phase", "round", "assortment", "choice", "max_width",
               "R_pess", "R_opt_alt", "stopped"]


class WarmupExhausted(RuntimeError):
    pass


@dataclass
class BsiConfig:
    delta: float = 0.05
    lam: float = 1.0
    eps: float = 0.1
    eps_lmo: float = 0.1
    backend: str = "brute"
    kappa_mode: str = "oracle"
    const_scale: float = 0.1
    warmup_scale: float | None = None
    stop_check_every: int = 1
    round_cap: int = 10_000_000
    seed: int = 0
    lmo_options: dict = field(default_factory=dict)
    # test hooks
    beta_override: float | None = None
    freeze_theta: np.ndarray | None = None

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not self.lam > 0 or not self.const_scale > 0:
            raise ValueError("lam and const_scale must be positive")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.kappa_mode not in ("oracle", "bound"):
            raise ValueError("kappa_mode must be 'oracle' or 'bound'")
        if self.stop_check_every < 1:
            raise ValueError("stop_check_every must be >= 1")

    @property
    def zeta_scale(self) -> float:
        """Multiplier on the warm-up threshold.

        A smaller confidence radius and a larger warm-up threshold are both
        the less conservative direction, so the default is 1 / const_scale.
        """
        return 1.0 / self.const_scale if self.warmup_scale is None else self.warmup_scale

    def check_eps(self, d: int) -> None:
        if self.backend == "milp" and not self.eps - self.eps_lmo / d > 0:
            raise ValueError("eps - eps_lmo / d must be positive for the milp backend")


def warmup_threshold(kappa_: float, d: int, N: int, delta: float, lam: float, B: float,
                     const_scale: float = 1.0) -> float:
    """scale * sqrt(kappa)/256 * (1/sqrt(d log(N/delta)) + 1/(sqrt(lam) B))."""
    if not 0 < kappa_ <= 0.25:
        raise ValueError("kappa must lie in (0, 1/4]")
    if not 0 < delta <= 1 or N / delta <= 1:
        raise ValueError("need 0 < delta <= 1 and N / delta > 1")
    if not lam > 0 or not const_scale > 0 or B < 0:
        raise ValueError("lam and const_scale must be positive, B non-negative")
    if B == 0:
        return math.inf
    return const_scale * math.sqrt(kappa_) / 256.0 * (
        1.0 / math.sqrt(d * math.log(N / delta)) + 1.0 / (math.sqrt(lam) * B))


@dataclass
class Warmup:
    data_a: ChoiceData
    data_b: ChoiceData
    V: np.ndarray
    length: int
    offers: list
    choices_a: np.ndarray
    choices_b: np.ndarray
    widths: np.ndarray
    zeta: float


def warmup_offers(inst, zeta: float, lam: float = 1.0, round_cap: int = 10_000_000):
    """Offer sequence of the warm-up; it depends on V only, never on feedback.

    Each round offers the threshold-violating arms with the largest
    ||a_i||_{V^-1}, up to K of them.
    """
    A = inst.features
    V = lam * np.eye(inst.d)
    Vinv = np.eye(inst.d) / lam
    offers, widths = [], []
    t = 0
    while True:
        w = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, Vinv, A), 0.0))
        viol = np.flatnonzero(w > zeta)
        if viol.size == 0:
            break
        if t >= round_cap:
            raise WarmupExhausted(f"warm-up did not finish within {round_cap} rounds")
        order = viol[np.argsort(-w[viol], kind="stable")]
        S = tuple(sorted(int(i) for i in order[: inst.K]))
        X = A[list(S)]
        V = V + X.T @ X
        # Woodbury keeps V^-1 current; refresh from scratch now and then
        if t % 256 == 255:
            Vinv = np.linalg.inv(V)
        else:
            XV = X @ Vinv
            Vinv = Vinv - XV.T @ np.linalg.solve(np.eye(len(S)) + XV @ X.T, XV)
        offers.append(S)
        widths.append(float(w.max()))
        t += 1
    return offers, np.array(widths), V


def run_warmup(env: Environment, zeta: float, lam: float = 1.0,
               round_cap: int = 10_000_000) -> Warmup:
    """Offer each warm-up assortment twice: once on feedback stream A, once on B."""
    offers, widths, V = warmup_offers(env.instance, zeta, lam, round_cap)
    ch_a = env.sample_choices(offers, "A")
    ch_b = env.sample_choices(offers, "B")
    data_a, data_b = ChoiceData(), ChoiceData()
    for S, ia, ib in zip(offers, ch_a.tolist(), ch_b.tolist()):
        data_a.add(S, ia)
        data_b.add(S, ib)
    return Warmup(data_a, data_b, V, len(offers), offers, ch_a, ch_b, widths, zeta)


@dataclass
class CheckRecord:
    round: int
    max_width: float
    R_pess: float
    R_opt_alt: float
    S_best: tuple
    S_alt: tuple
    stopped: bool


@dataclass
class BsiTrace:
    seed: int
    tau: int
    S_hat: tuple
    warmup: Warmup
    atoms: list
    main_atoms: np.ndarray
    main_choices: np.ndarray
    checks: list
    stopped: bool
    correct: bool | None
    S_star: tuple | None
    theta0: np.ndarray
    theta_hat: np.ndarray
    H: np.ndarray
    design_weights: np.ndarray
    design_status: str
    beta: float
    zeta: float
    kappa: float
    honest_at_stop: bool | None
    seconds: float = 0.0

    @property
    def warmup_len(self) -> int:
        return self.warmup.length

    @property
    def samples(self) -> int:
        """Choice observations consumed; warm-up rounds observe two."""
        return self.tau + self.warmup_len

    def offers(self) -> list:
        """Every offered assortment in round order (warm-up first)."""
        return list(self.warmup.offers) + [self.atoms[k] for k in self.main_atoms]

    def summary(self) -> dict:
        return {
            "seed": self.seed, "tau": self.tau, "samples": self.samples,
            "warmup_len": self.warmup_len, "stopped": self.stopped,
            "S_hat": list(self.S_hat),
            "S_star": None if self.S_star is None else list(self.S_star),
            "correct": self.correct, "checks": len(self.checks), "beta": self.beta,
            "zeta": self.zeta, "kappa": self.kappa, "design_status": self.design_status,
            "design_support": len(self.atoms), "honest_at_stop": self.honest_at_stop,
            "seconds": round(self.seconds, 3),
        }

    def rows(self):
        wu = self.warmup
        for t, S in enumerate(wu.offers):
            yield [self.seed, PHASE_WARMUP, t + 1, _fmt_set(S),
                   f"{wu.choices_a[t]}|{wu.choices_b[t]}", _fmt_num(wu.widths[t]), "", "", 0]
        by_round = {c.round: c for c in self.checks}
        names = [_fmt_set(S) for S in self.atoms]
        for j, (k, ch) in enumerate(zip(self.main_atoms.tolist(), self.main_choices.tolist())):
            r = wu.length + j + 1
            c = by_round.get(r)
            if c is None:
                yield [self.seed, PHASE_MAIN, r, names[k], ch, "", "", "", 0]
            else:
                yield [self.seed, PHASE_MAIN, r, names[k], ch, _fmt_num(c.max_width),
                       _fmt_num(c.R_pess), _fmt_num(c.R_opt_alt), int(c.stopped)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerows(self.rows())

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=1)
            fh.write("\n")


def _fmt_set(S) -> str:
    return " ".join(str(i) for i in S)


def _fmt_num(x) -> str:
    return "" if x is None or math.isnan(x) else repr(float(x))


def _stop_check(inst, H, theta_hat, bet, lam):
    mats = DesignMatrices(H, H, lam)
    widths = uncertainty_widths(mats, inst.features)
    u = inst.features @ theta_hat
    rad = math.sqrt(2.0) * bet * widths
    S_best, S_alt, R_pess, R_opt = best_and_alternative(inst, u + rad, u - rad)
    return S_best, S_alt, R_pess, R_opt, widths, rad


def run_bsi(env: Environment, cfg: BsiConfig) -> BsiTrace:
    inst = env.instance
    d, N, K = inst.d, inst.N, inst.K
    cfg.check_eps(d)
    t_start = time.perf_counter()
    kap = kappa(inst, inst.theta_star) if cfg.kappa_mode == "oracle" else kappa_bound(K, inst.B)
    zeta = warmup_threshold(kap, d, N, cfg.delta, cfg.lam, inst.B, cfg.zeta_scale)
    wu = run_warmup(env, zeta, cfg.lam, cfg.round_cap)

    theta0 = fit_mle(inst, wu.data_b, cfg.lam).theta_hat
    # fitted for fidelity with the listing; the first refit below replaces it
    theta_hat = fit_mle(inst, wu.data_a, cfg.lam).theta_hat
    fw = frank_wolfe(inst, theta0, cfg.eps, cfg.backend,
                     cfg.eps_lmo if cfg.backend == "milp" else 0.0,
                     seed=cfg.seed, lmo_options=cfg.lmo_options)
    atoms, weights = fw.design.atoms, fw.design.weights
    cdf = np.cumsum(weights)
    atom_info = np.array([fisher_info(inst, S, theta0) for S in atoms])

    H = cfg.lam * np.eye(d)
    for S, row in wu.data_a.counts.items():
        H += row.sum() * fisher_info(inst, S, theta0)
    data = wu.data_a.copy()
    bet = beta(cfg.delta, cfg.lam, inst.B, N, cfg.const_scale)
    if cfg.beta_override is not None:
        bet = cfg.beta_override
    try:
        S_star = true_gap(inst, margin=0.0)[0]
    except ValueError:
        S_star = None

    offer_rng = CounterRNG(cfg.seed, STREAM_OFFER)
    t_main = 0
    checks: list = []
    main_atoms, main_choices = [], []
    stopped = False
    honest = None
    S_best = ()
    while t_main < cfg.round_cap:
        n = min(cfg.stop_check_every, cfg.round_cap - t_main)
        u_off = offer_rng.uniform(n)
        ks = np.minimum(np.searchsorted(cdf, u_off * cdf[-1], side="right"), len(atoms) - 1)
        choices = env.sample_choices([atoms[k] for k in ks], "A")
        for k in np.unique(ks):
            S = atoms[k]
            labels, counts = np.unique(choices[ks == k], return_counts=True)
            for c, m in zip(labels.tolist(), counts.tolist()):
                data.add(S, c, m)
        H = H + np.tensordot(np.bincount(ks, minlength=len(atoms)).astype(float), atom_info, 1)
        main_atoms.append(ks)
        main_choices.append(choices)
        t_main += n
        # the refit only matters where the stopping rule reads it
        if cfg.freeze_theta is not None:
            theta_hat = np.asarray(cfg.freeze_theta, dtype=float)
        else:
            theta_hat = fit_mle(inst, data, cfg.lam, theta_init=theta_hat).theta_hat
        S_best, S_alt, R_pess, R_opt, widths, rad = _stop_check(inst, H, theta_hat, bet, cfg.lam)
        stopped = R_pess > R_opt
        checks.append(CheckRecord(wu.length + t_main, float(widths.max()), R_pess, R_opt,
                                  S_best, S_alt, stopped))
        if stopped:
            err = np.abs(inst.features @ (theta_hat - inst.theta_star))
            honest = bool(np.all(err <= rad))
            if honest and S_star is not None:
                assert S_best == S_star, "honest bands stopped on a suboptimal assortment"
            break
    tau = wu.length + t_main
    correct = None if S_star is None else S_best == S_star
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0, dtype=int))
    return BsiTrace(env.seed, tau, S_best, wu, list(atoms), cat(main_atoms), cat(main_choices),
                    checks, stopped, correct, S_star, theta0, theta_hat, H,
                    np.asarray(weights), fw.status, bet, zeta, kap, honest,
                    time.perf_counter() - t_start)
