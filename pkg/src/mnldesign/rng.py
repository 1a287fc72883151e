"""Counter-based random streams.

Every stream is Philox4x64-10 keyed by ``(seed, stream_id)`` with the counter
starting at zero, so a given ``(seed, stream_id, call sequence)`` yields the
same numbers on any platform.  Derived variates are computed from the raw
64-bit words only:

* uniform: ``((raw >> 11) + 0.5) * 2**-53``, strictly inside ``(0, 1)``;
* standard normal: inverse normal CDF (``scipy.special.ndtri``) of a uniform;
* categorical: first index whose cumulative probability exceeds a uniform.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# stream identifiers; fixed forever, they are part of the reproducibility contract
STREAM_INSTANCE = 0
STREAM_DESIGN = 1
STREAM_OFFER = 2
STREAM_FEEDBACK_A = 3
STREAM_FEEDBACK_B = 4

_MASK64 = (1 << 64) - 1


class CounterRNG:
    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._bitgen = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        self.draws = 0

    def raw(self, n: int) -> np.ndarray:
        self.draws += n
        return self._bitgen.random_raw(n).astype(np.uint64)

    def uniform(self, n: int | None = None):
        m = 1 if n is None else n
        u = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return float(u[0]) if n is None else u

    def normal(self, n: int | None = None):
        m = 1 if n is None else n
        z = ndtri(self.uniform(m))
        return float(z[0]) if n is None else z

    def categorical(self, probs) -> int:
        cdf = np.cumsum(probs)
        u = self.uniform() * cdf[-1]
        k = int(np.searchsorted(cdf, u, side="right"))
        return min(k, len(cdf) - 1)

    def integers(self, high: int, n: int | None = None):
        """Uniform integers in ``[0, high)`` by scaling a uniform."""
        m = 1 if n is None else n
        k = np.minimum((self.uniform(m) * high).astype(np.int64), high - 1)
        return int(k[0]) if n is None else k

    def ball(self, d: int, radius: float = 1.0) -> np.ndarray:
        """Uniform point in the d-dimensional ball: Gaussian direction, U**(1/d) radius."""
        g = self.normal(d)
        nrm = np.linalg.norm(g)
        direction = g / nrm if nrm > 0 else np.eye(d)[0]
        return radius * self.uniform() ** (1.0 / d) * direction
