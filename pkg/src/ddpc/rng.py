"""Seeded random number generation with cross-platform bit-reproducibility.

Experiments in this package must reproduce bit-for-bit from a 64-bit seed,
independent of numpy version and platform.  numpy's ``Generator`` streams are
not guaranteed stable across releases, so this module fixes its own small
generator: a splitmix64 counter (Steele, Lea & Flood 2014 constants) with
uniform doubles taken from the top 53 bits and Gaussian variates from the
Box-Muller transform.

Conventions, fixed once and documented here:

* ``uniform`` maps each 64-bit word to ``[0, 1)`` via ``(z >> 11) * 2**-53``.
* ``normal`` consumes uniforms in pairs ``(u1, u2)`` producing
  ``sqrt(-2 ln u1') * (cos, sin)(2 pi u2)`` with ``u1' = u1 + 2**-53`` so the
  logarithm never sees zero.  A call for ``k`` variates consumes
  ``2 * ceil(k / 2)`` words; the unused ``sin`` half of an odd draw is
  discarded, never cached across calls.
* ``derive`` builds independent child seeds from ``(seed, index)`` so work
  split across sequences/scenarios is order-independent.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1FE4E7B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


def _mix(z: np.ndarray) -> np.ndarray:
    """splitmix64 output function on an array of uint64 states."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, index: int) -> int:
    """Deterministic child seed for stream `index` of master `seed`."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    k = np.uint64(index & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return int(_mix(s ^ _mix(k * _GAMMA + _GAMMA)))


class Rng:
    """splitmix64 stream; all methods advance the state deterministically."""

    def __init__(self, seed: int):
        self._state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)

    def _words(self, k: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = _GAMMA * np.arange(1, k + 1, dtype=np.uint64)
            words = _mix(self._state + steps)
            self._state = self._state + _GAMMA * np.uint64(k)
        return words

    def uniforms(self, k: int) -> np.ndarray:
        """k doubles uniform on [0, 1)."""
        return (self._words(k) >> np.uint64(11)).astype(np.float64) * _U53

    def uniform(self, lo: float, hi: float, k: int) -> np.ndarray:
        return lo + (hi - lo) * self.uniforms(k)

    def normals(self, k: int) -> np.ndarray:
        """k standard normal variates (Box-Muller, pairwise)."""
        pairs = (k + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2] + _U53))
        theta = (2.0 * math.pi) * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:k]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normals(rows * cols).reshape(rows, cols)
