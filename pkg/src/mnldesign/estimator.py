"""Regularized MLE, design-matrix bookkeeping and confidence radii."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .mnl import Instance, _Packed, _packed_eval, as_choice_data, fisher_info

GRAD_TOL = 1e-8
MAX_NEWTON = 200
ARMIJO_C = 1e-4


@dataclass
class MleResult:
    theta_hat: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool
    loss: float = float("nan")


def fit_mle(inst: Instance, dataset, lam: float, theta_init=None,
            max_iter: int = MAX_NEWTON, tol: float = GRAD_TOL) -> MleResult:
    """Damped Newton on the lambda-regularized negative log-likelihood.

    Backtracking halves the step until the Armijo condition (c = 1e-4) holds.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    pk = _Packed(inst, as_choice_data(inst, dataset))
    theta = np.zeros(inst.d) if theta_init is None else np.array(theta_init, dtype=float)
    loss, grad, hess = _packed_eval(pk, theta, lam)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > tol and it < max_iter:
        step = -cho_solve(cho_factor(hess), grad)
        slope = float(grad @ step)
        t = 1.0
        # below this the loss differences drown in round-off
        noise = 1e-13 * max(1.0, abs(loss))
        while True:
            cand = theta + t * step
            new_loss, new_grad, new_hess = _packed_eval(pk, cand, lam)
            if new_loss <= loss + ARMIJO_C * t * slope:
                break
            if abs(new_loss - loss) <= noise and np.linalg.norm(new_grad) < gnorm:
                break
            t *= 0.5
            if t < 1e-12:
                return MleResult(theta, gnorm, it, False, loss)
        assert new_loss <= loss + noise, "Newton step increased the objective"
        theta, loss, grad, hess = cand, new_loss, new_grad, new_hess
        gnorm = float(np.linalg.norm(grad))
        it += 1
    return MleResult(theta, gnorm, it, gnorm <= tol, float(loss))


def beta(delta: float, lam: float, B: float, N: int, scale: float = 1.0) -> float:
    """Confidence radius scale * (36 sqrt(log(N/delta)) + 64 sqrt(lam) B)."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if not lam > 0 or not scale > 0:
        raise ValueError("lambda and scale must be positive")
    return scale * (36.0 * math.sqrt(math.log(N / delta)) + 64.0 * math.sqrt(lam) * B)


@dataclass
class DesignMatrices:
    """H: Hessian-type information at a reference parameter; V: raw feature Gram."""

    H: np.ndarray
    V: np.ndarray
    lam: float
    chol_H: np.ndarray = None
    chol_V: np.ndarray = None

    def __post_init__(self):
        self.H = 0.5 * (self.H + self.H.T)
        self.V = 0.5 * (self.V + self.V.T)
        self.chol_H = np.linalg.cholesky(self.H)
        self.chol_V = np.linalg.cholesky(self.V)

    @classmethod
    def initial(cls, d: int, lam: float) -> "DesignMatrices":
        return cls(lam * np.eye(d), lam * np.eye(d), lam)

    def add(self, dH=None, dV=None) -> "DesignMatrices":
        H = self.H if dH is None else self.H + dH
        V = self.V if dV is None else self.V + dV
        return DesignMatrices(H, V, self.lam)


def rank_update(mats: DesignMatrices, inst: Instance, S, theta_ref) -> DesignMatrices:
    """H += I(S; theta_ref), V += sum_S a_i a_i^T, both refactorized."""
    X = inst.features[list(S)]
    return mats.add(fisher_info(inst, S, theta_ref), X.T @ X)


def _norms(L: np.ndarray, a: np.ndarray) -> np.ndarray:
    z = solve_triangular(L, np.atleast_2d(a).T, lower=True)
    return np.sqrt(np.einsum("ij,ij->j", z, z))


def uncertainty_width(mats: DesignMatrices, a) -> float:
    """||a||_{H^{-1}} by a triangular solve against the Cholesky factor of H."""
    return float(_norms(mats.chol_H, np.asarray(a, dtype=float))[0])


def uncertainty_widths(mats: DesignMatrices, A: np.ndarray, which: str = "H") -> np.ndarray:
    """Row-wise ||a_i||_{H^{-1}} (or V^{-1}) for a feature matrix."""
    L = mats.chol_H if which == "H" else mats.chol_V
    return _norms(L, np.asarray(A, dtype=float))
