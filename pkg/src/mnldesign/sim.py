"""Simulated MNL environments and random instance generation."""
from __future__ import annotations

import numpy as np

from .assortment import NonUniqueMaximizer, true_gap
from .mnl import OUTSIDE, Instance, InstanceError, as_assortment, choice_probs
from .rng import STREAM_FEEDBACK_A, STREAM_FEEDBACK_B, STREAM_INSTANCE, CounterRNG


class GenerationError(RuntimeError):
    pass


def gen_instance(N: int, K: int, d: int, B: float, seed: int,
                 gap_margin: float = 1e-6, max_redraws: int = 1000) -> Instance:
    """Random outside-option instance following the desk-scale experiment protocol.

    theta* is uniform in the radius-B ball, features uniform in the unit ball,
    revenues Unif(0, 1).  Draws whose optimal assortment is not unique by at
    least ``gap_margin`` are rejected and redrawn from the same stream.
    """
    if N < d:
        raise ValueError("need N >= d")
    if not 1 <= K <= N:
        raise ValueError("need 1 <= K <= N")
    rng = CounterRNG(seed, STREAM_INSTANCE)
    for _ in range(max_redraws):
        theta = rng.ball(d, B)
        feats = np.array([rng.ball(d, 1.0) for _ in range(N)])
        revs = rng.uniform(N)
        # guard against round-off pushing a norm past its radius
        feats /= np.maximum(1.0, np.linalg.norm(feats, axis=1, keepdims=True))
        if B > 0 and np.linalg.norm(theta) > B:
            theta *= B / np.linalg.norm(theta)
        try:
            inst = Instance(feats, revs, K, B, theta, outside_option=True)
            true_gap(inst, margin=gap_margin)
        except (InstanceError, NonUniqueMaximizer):
            continue
        return inst
    raise GenerationError(f"no acceptable instance after {max_redraws} draws")


class Environment:
    """MNL choice simulator with two independent feedback streams."""

    def __init__(self, inst: Instance, seed: int):
        if inst.theta_star is None:
            raise ValueError("environment needs theta_star")
        if not inst.outside_option:
            raise ValueError("environment simulates the outside-option model")
        self.instance = inst
        self.seed = seed
        self.streams = {
            "A": CounterRNG(seed, STREAM_FEEDBACK_A),
            "B": CounterRNG(seed, STREAM_FEEDBACK_B),
        }
        self._probs: dict = {}

    def _probs_for(self, S):
        p = self._probs.get(S)
        if p is None:
            p = self._probs[S] = choice_probs(self.instance, S, self.instance.theta_star)
        return p

    def sample_choice(self, S, stream: str = "A") -> int:
        p = self._probs.get(S)
        if p is None:
            S = as_assortment(self.instance, S)
            p = self._probs_for(S)
        k = self.streams[stream].categorical(p)
        return OUTSIDE if k == len(S) else S[k]

    def sample_choices(self, sets, stream: str = "A") -> np.ndarray:
        """``sample_choice`` over a sequence of assortments, consuming the same draws."""
        n = len(sets)
        u = self.streams[stream].uniform(n)
        out = np.empty(n, dtype=np.int64)
        groups: dict = {}
        for j, S in enumerate(sets):
            groups.setdefault(S, []).append(j)
        for S, js in groups.items():
            p = self._probs.get(S)
            if p is None:
                S = as_assortment(self.instance, S)
                p = self._probs_for(S)
            cdf = np.cumsum(p)
            js = np.asarray(js)
            k = np.minimum(np.searchsorted(cdf, u[js] * cdf[-1], side="right"), len(cdf) - 1)
            out[js] = np.array(list(S) + [OUTSIDE])[k]
        return out


def sample_choice(env: Environment, S, stream: str = "A") -> int:
    return env.sample_choice(S, stream)
