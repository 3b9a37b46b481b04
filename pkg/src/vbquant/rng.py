"""Deterministic counter-based random numbers for synthetic data.

Synthetic datasets double as regression fixtures, so their noise must be
reproducible bit for bit from a seed alone. Platform generators (random,
numpy default_rng) do not promise that across versions, so this module
implements a fixed, documented scheme instead:

    word(i) = mix64(key + (i + 1) * GAMMA)      (all arithmetic mod 2**64)
    key     = mix64(mix64(seed) ^ stream * STREAM_SALT)

where mix64 is the SplitMix64 finalizer (Steele, Lea, Vigna). Every output
word is a pure function of (seed, stream, counter), and each draw method
consumes a fixed number of words per element, so streams never depend on
call history beyond the running counter.

Derived distributions:

* uniform: top 53 bits of a word, scaled to [0, 1).
* normal: Box-Muller transform on word pairs.
* poisson: single-uniform CDF inversion for mean <= 30, rounded Gaussian
  approximation above (adequate for photon-counting noise at high counts).
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_STREAM_SALT = np.uint64(0xD1342543DE82EF95)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# inversion is exact up to this mean; above it e**-lam starts losing range
_POISSON_INVERSION_MAX = 30.0
_POISSON_K_CAP = 400

_U53 = float(2**-53)


def _mix64(z):
    z = np.uint64(z) if np.isscalar(z) else z.astype(np.uint64)
    # uint64 wraparound is the whole point here
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class CounterRng:
    """SplitMix64 counter generator with a fixed word budget per draw."""

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        key = _mix64(np.uint64(int(seed)))
        with np.errstate(over="ignore"):
            key = key ^ (np.uint64(int(stream) % 2**64) * _STREAM_SALT)
        self._key = _mix64(key)
        self._next = 0

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self._next + 1, self._next + n + 1, dtype=np.uint64)
        self._next += n
        with np.errstate(over="ignore"):
            return _mix64(self._key + idx * _GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles in [0, 1)."""
        return (self._words(n) >> np.uint64(11)).astype(np.float64) * _U53

    def normal(self, n: int) -> np.ndarray:
        """n standard normal deviates. Consumes 2*ceil(n/2) words."""
        pairs = (n + 1) // 2
        w = self._words(2 * pairs)
        # +1 keeps u1 in (0, 1] so the log never sees zero
        u1 = ((w[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
        u2 = (w[pairs:] >> np.uint64(11)).astype(np.float64) * _U53
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:n]

    def poisson(self, lam) -> np.ndarray:
        """One Poisson count per entry of lam. Mean <= 30 inverts the CDF
        with a single uniform; larger means use max(0, round(lam + z*sqrt(lam))).
        """
        lam = np.asarray(lam, dtype=float)
        flat = lam.ravel()
        if np.any(flat < 0) or not np.all(np.isfinite(flat)):
            raise ValueError("poisson means must be finite and non-negative")
        out = np.zeros(flat.size, dtype=np.int64)
        small = flat <= _POISSON_INVERSION_MAX
        # word budget is fixed per element: 1 word small, 2 words large
        u_small = self.uniform(int(small.sum()))
        z_large = self.normal(int((~small).sum()))
        if small.any():
            lam_s = flat[small]
            p = np.exp(-lam_s)
            cdf = p.copy()
            k = np.zeros(lam_s.size, dtype=np.int64)
            unresolved = cdf < u_small
            step = 0
            while unresolved.any() and step < _POISSON_K_CAP:
                step += 1
                p = p * lam_s / step
                cdf = cdf + p
                still = cdf < u_small
                k[unresolved & ~still] = step
                unresolved = unresolved & still
            k[unresolved] = _POISSON_K_CAP
            out[small] = k
        if (~small).any():
            lam_l = flat[~small]
            approx = np.floor(lam_l + np.sqrt(lam_l) * z_large + 0.5)
            out[~small] = np.maximum(approx, 0.0).astype(np.int64)
        return out.reshape(lam.shape)
