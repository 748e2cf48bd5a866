"""Portable pseudo-random numbers: splitmix64 seeding a xoshiro256** stream.

Every random draw in the toolkit (cohort textures, corruption choices, weight
initialization, minibatch shuffling) goes through :class:`Xoshiro256`, so a
run is reproducible byte-for-byte from its integer seeds in any language that
implements the same two generators.

Derived quantities
------------------
``random()``     top 53 bits of the next output times 2**-53, in [0, 1).
``integers(n)``  Lemire's multiply-shift with rejection, unbiased in [0, n).
``normal(n)``    Box-Muller on consecutive uniform pairs (u1, u2) with
                 r = sqrt(-2 log(1 - u1)); the pair yields r*cos(2 pi u2)
                 followed by r*sin(2 pi u2).
``shuffle``      Fisher-Yates from the last index down, j = integers(i + 1).
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, *tags: object) -> int:
    """Stable 64-bit child seed from a parent seed and string-able tags."""
    text = ":".join([str(int(seed) & MASK64), *map(str, tags)])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


class Xoshiro256:
    """xoshiro256** generator seeded through splitmix64.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.
    state : sequence of 4 ints, optional
        Raw generator state, bypassing seeding (used by tests and restore).
    """

    def __init__(self, seed: int = 0, state=None):
        if state is not None:
            s = [int(v) & MASK64 for v in state]
            if len(s) != 4 or not any(s):
                raise ValueError("xoshiro256 state must be four words, not all zero")
        else:
            sm = int(seed) & MASK64
            s = []
            for _ in range(4):
                sm, out = splitmix64(sm)
                s.append(out)
        self._s = tuple(s)

    @property
    def state(self) -> tuple[int, int, int, int]:
        return self._s

    def next_u64(self) -> int:
        return self.raw(1)[0]

    def raw(self, n: int) -> list[int]:
        s0, s1, s2, s3 = self._s
        m = MASK64
        out = [0] * n
        for i in range(n):
            x = (s1 * 5) & m
            out[i] = ((((x << 7) | (x >> 57)) & m) * 9) & m
            t = (s1 << 17) & m
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & m
        self._s = (s0, s1, s2, s3)
        return out

    def random(self, n: int | None = None):
        """Uniform doubles in [0, 1); a float if ``n`` is None, else an array."""
        k = 1 if n is None else int(n)
        words = np.array(self.raw(k), dtype=np.uint64) >> np.uint64(11)
        vals = words.astype(np.float64) * (2.0 ** -53)
        return float(vals[0]) if n is None else vals

    def uniform(self, low: float, high: float, n: int | None = None):
        u = self.random(n)
        return low + (high - low) * u

    def integers(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) - n) % n
        while True:
            m = self.raw(1)[0] * n
            if (m & MASK64) >= threshold:
                return m >> 64

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.random(2 * pairs)
        r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n)
        self.shuffle(idx)
        return idx

    def shuffle(self, seq) -> None:
        """In-place Fisher-Yates shuffle of a list or 1-d array."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.integers(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
