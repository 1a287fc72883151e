"""Multinomial-logit substrate: instances, choice probabilities, information matrices.

Arms are indexed ``0..N-1``.  When the instance carries an outside option, the
no-purchase alternative is materialized as a virtual arm with feature vector
zero; it is reported with the index :data:`OUTSIDE` (``-1``) and always sits
*after* the offered items in probability vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

OUTSIDE = -1

# utilities below max - 50 are clamped; exp(-50) ~ 2e-22 keeps every p > 0
UTILITY_CLAMP = 50.0
SPAN_TOL = 1e-10
NORM_TOL = 1e-12


class InstanceError(ValueError):
    """Instance data violates a modelling assumption."""


class InvalidAssortment(ValueError):
    """Assortment is not a valid offer for the instance."""


@dataclass(frozen=True, eq=False)
class Instance:
    features: np.ndarray
    revenues: np.ndarray
    K: int
    B: float
    theta_star: np.ndarray | None = None
    outside_option: bool = False

    def __post_init__(self):
        feats = np.array(self.features, dtype=float, ndmin=2)
        revs = np.array(self.revenues, dtype=float).reshape(-1)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "revenues", revs)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "B", float(self.B))
        if self.theta_star is not None:
            ts = np.array(self.theta_star, dtype=float).reshape(-1)
            object.__setattr__(self, "theta_star", ts)
        object.__setattr__(self, "outside_option", bool(self.outside_option))
        feats.setflags(write=False)
        revs.setflags(write=False)
        self._validate()

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def min_size(self) -> int:
        return 1 if self.outside_option else 2

    def _validate(self):
        N, d = self.features.shape
        if N == 0 or d == 0:
            raise InstanceError("empty feature matrix")
        if not np.all(np.isfinite(self.features)):
            raise InstanceError("non-finite features")
        norms = np.linalg.norm(self.features, axis=1)
        if np.any(norms > 1.0 + NORM_TOL):
            i = int(np.argmax(norms))
            raise InstanceError(f"arm {i} has feature norm {norms[i]:.6g} > 1")
        if self.revenues.shape != (N,):
            raise InstanceError(f"expected {N} revenues, got {self.revenues.shape}")
        if np.any(self.revenues < 0) or np.any(self.revenues > 1):
            raise InstanceError("revenues must lie in [0, 1]")
        if not 1 <= self.K <= N:
            raise InstanceError(f"K={self.K} outside [1, N={N}]")
        if not self.B >= 0:
            raise InstanceError("B must be non-negative")
        if self.theta_star is not None:
            if self.theta_star.shape != (d,):
                raise InstanceError("theta_star has wrong dimension")
            if np.linalg.norm(self.theta_star) > self.B + NORM_TOL:
                raise InstanceError("||theta_star|| exceeds B")
        if not self.outside_option:
            if self.K < 2:
                raise InstanceError("K >= 2 required without an outside option")
            diffs = self.features[1:] - self.features[0]
            rank = 0
            if diffs.size:
                sv = np.linalg.svd(diffs, compute_uv=False)
                rank = int(np.sum(sv > SPAN_TOL))
            if rank < d:
                raise InstanceError(
                    f"pairwise feature differences span rank {rank} < d={d}; "
                    "project the features onto their identifiable subspace first"
                )

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "revenues": self.revenues.tolist(),
            "K": self.K,
            "B": self.B,
            "theta_star": None if self.theta_star is None else self.theta_star.tolist(),
            "outside_option": self.outside_option,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        missing = {"features", "revenues", "K", "B"} - set(data)
        if missing:
            raise InstanceError(f"instance JSON missing keys: {sorted(missing)}")
        return cls(
            features=data["features"],
            revenues=data["revenues"],
            K=data["K"],
            B=data["B"],
            theta_star=data.get("theta_star"),
            outside_option=data.get("outside_option", False),
        )

    def replace(self, **changes) -> "Instance":
        data = dict(
            features=self.features, revenues=self.revenues, K=self.K, B=self.B,
            theta_star=self.theta_star, outside_option=self.outside_option,
        )
        data.update(changes)
        return Instance(**data)


def load_instance(path: str | Path) -> Instance:
    with open(path) as fh:
        return Instance.from_dict(json.load(fh))


def save_instance(inst: Instance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh, indent=1)
        fh.write("\n")


def as_assortment(inst: Instance, S: Iterable[int]) -> tuple[int, ...]:
    """Validate ``S`` against the instance and return it as a sorted tuple."""
    items = tuple(sorted(int(i) for i in S))
    if len(set(items)) != len(items):
        raise InvalidAssortment(f"duplicate items in {items}")
    if items and (items[0] < 0 or items[-1] >= inst.N):
        raise InvalidAssortment(f"item index out of range in {items}")
    if not inst.min_size <= len(items) <= inst.K:
        raise InvalidAssortment(
            f"|S|={len(items)} outside [{inst.min_size}, {inst.K}]"
        )
    return items


def all_assortments(inst: Instance, min_size: int | None = None):
    """Every valid assortment, lexicographic within each size."""
    lo = inst.min_size if min_size is None else min_size
    for k in range(lo, inst.K + 1):
        yield from combinations(range(inst.N), k)


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite parameter vector")
    return theta


def probs_from_utilities(u: np.ndarray, outside: bool) -> np.ndarray:
    """Shifted, clamped softmax; with ``outside`` a zero utility is appended last."""
    if outside:
        u = np.append(u, 0.0)
    z = np.maximum(u - u.max(), -UTILITY_CLAMP)
    e = np.exp(z)
    return e / e.sum()


def choice_probs(inst: Instance, S: Sequence[int], theta) -> np.ndarray:
    """Choice probabilities over ``S`` (ascending), then the outside option if enabled."""
    S = as_assortment(inst, S)
    theta = _check_theta(theta)
    u = inst.features[list(S)] @ theta
    return probs_from_utilities(u, inst.outside_option)


def _moments(inst: Instance, S, theta):
    p = choice_probs(inst, S, theta)
    X = inst.features[list(as_assortment(inst, S))]
    if inst.outside_option:
        X = np.vstack([X, np.zeros(inst.d)])
    return p, X


def fisher_info(inst: Instance, S: Sequence[int], theta) -> np.ndarray:
    """Centered second moment of features under the MNL choice distribution."""
    p, X = _moments(inst, S, theta)
    C = X - p @ X
    I = (C * p[:, None]).T @ C
    return 0.5 * (I + I.T)


def lifted_info(inst: Instance, S: Sequence[int], theta) -> np.ndarray:
    """Uncentered second moment of the lifted features ``(a_i, 1)``."""
    p, X = _moments(inst, S, theta)
    Xt = np.hstack([X, np.ones((X.shape[0], 1))])
    L = (Xt * p[:, None]).T @ Xt
    L = 0.5 * (L + L.T)
    L[-1, -1] = 1.0
    return L


def kappa(inst: Instance, theta) -> float:
    """min over S and i in S of p(i|S) p(0|S), in O(N log N).

    For a fixed item i the product w_i / (1 + W_S)^2 is smallest when S is
    padded with the K-1 heaviest other items.
    """
    if not inst.outside_option:
        raise ValueError("kappa is defined for the outside-option model only")
    theta = _check_theta(theta)
    u = inst.features @ theta
    w = np.exp(u)
    order = np.argsort(-w, kind="stable")
    top = order[: inst.K]
    best = np.inf
    for i in range(inst.N):
        others = [j for j in top if j != i][: inst.K - 1]
        denom = 1.0 + w[i] + w[others].sum()
        best = min(best, w[i] / denom**2)
    return float(best)


def kappa_bound(K: int, B: float) -> float:
    """Conservative lower bound e^{-B} / (1 + K e^B)^2 on kappa."""
    return float(np.exp(-B) / (1.0 + K * np.exp(B)) ** 2)


# --------------------------------------------------------------------------
# negative log-likelihood over grouped choice data


@dataclass
class ChoiceData:
    """Choice observations grouped by assortment.

    ``counts[S]`` holds one count per position of ``S`` followed by the
    outside-option count (always present; stays zero without an outside option).
    """

    counts: dict = field(default_factory=dict)

    def add(self, S: Sequence[int], choice: int, n: int = 1) -> None:
        S = tuple(S)
        row = self.counts.get(S)
        if row is None:
            row = self.counts[S] = np.zeros(len(S) + 1)
        if choice == OUTSIDE:
            row[-1] += n
        else:
            try:
                row[S.index(choice)] += n
            except ValueError:
                raise InvalidAssortment(f"choice {choice} not offered in {S}") from None

    def extend(self, records) -> None:
        for S, choice in records:
            self.add(S, choice)

    def copy(self) -> "ChoiceData":
        return ChoiceData({S: row.copy() for S, row in self.counts.items()})

    @property
    def n_obs(self) -> int:
        return int(sum(row.sum() for row in self.counts.values()))

    def __len__(self):
        return self.n_obs


def as_choice_data(inst: Instance, dataset) -> ChoiceData:
    if isinstance(dataset, ChoiceData):
        return dataset
    data = ChoiceData()
    for S, choice in dataset:
        S = as_assortment(inst, S)
        if choice == OUTSIDE and not inst.outside_option:
            raise InvalidAssortment("outside choice recorded without an outside option")
        data.add(S, choice)
    return data


class _Packed:
    """Padded arrays for vectorized likelihood evaluation."""

    def __init__(self, inst: Instance, data: ChoiceData):
        sets = list(data.counts)
        U = len(sets)
        width = max((len(S) for S in sets), default=1)
        idx = np.zeros((U, width), dtype=int)
        mask = np.zeros((U, width), dtype=bool)
        cnt = np.zeros((U, width + 1))
        for r, S in enumerate(sets):
            k = len(S)
            idx[r, :k] = S
            mask[r, :k] = True
            row = data.counts[S]
            cnt[r, :k] = row[:k]
            cnt[r, width] = row[k]
        self.X = inst.features[idx] * mask[..., None]  # (U, width, d)
        self.mask = mask
        self.cnt = cnt
        self.totals = cnt.sum(axis=1)
        self.outside = inst.outside_option
        # counts-weighted sum of chosen features (outside has zero features)
        self.chosen = np.einsum("uk,ukd->d", cnt[:, :width], self.X)


def _packed_eval(pk: _Packed, theta, lam, want_hess=True):
    d = theta.shape[0]
    if pk.X.shape[0] == 0:
        loss = 0.5 * lam * theta @ theta
        return loss, lam * theta, lam * np.eye(d)
    u = pk.X @ theta
    u = np.where(pk.mask, u, -np.inf)
    if pk.outside:
        u = np.concatenate([u, np.zeros((u.shape[0], 1))], axis=1)
    else:
        u = np.concatenate([u, np.full((u.shape[0], 1), -np.inf)], axis=1)
    with np.errstate(invalid="ignore"):
        z = u - u.max(axis=1, keepdims=True)
        z = np.where(np.isfinite(u), np.maximum(z, -UTILITY_CLAMP), -np.inf)
        logZ = np.log(np.exp(z).sum(axis=1, keepdims=True))
        logp = z - logZ
        p = np.exp(logp)
        ll = np.where(pk.cnt > 0, pk.cnt * logp, 0.0).sum()
    loss = -ll + 0.5 * lam * theta @ theta
    pi = p[:, :-1]  # outside column carries a zero feature vector
    abar = np.einsum("uk,ukd->ud", pi, pk.X)
    grad = pk.totals @ abar - pk.chosen + lam * theta
    if not want_hess:
        return loss, grad, None
    second = np.einsum("u,uk,ukd,uke->de", pk.totals, pi, pk.X, pk.X)
    hess = second - np.einsum("u,ud,ue->de", pk.totals, abar, abar) + lam * np.eye(d)
    return loss, grad, 0.5 * (hess + hess.T)


def nll_loss_grad_hess(inst: Instance, dataset, theta, lam: float):
    """Regularized negative log-likelihood with its exact gradient and Hessian.

    ``dataset`` is an iterable of ``(assortment, chosen)`` pairs or a
    :class:`ChoiceData`; ``chosen`` is an arm index or :data:`OUTSIDE`.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    theta = _check_theta(theta)
    pk = _Packed(inst, as_choice_data(inst, dataset))
    return _packed_eval(pk, theta, lam)
