"""Deterministic 64-bit PRNG used by training.

xorshift64* seeded through one round of splitmix64. Implemented here on plain
Python ints (masked to 64 bits) and again inside the numba kernels on uint64;
the two produce bit-identical streams, which keeps batch contents and negative
samples independent of the compute backend. Any change here must be mirrored
in ``_kernels.py``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STAR_MULT = 0x2545F4914F6CDD1D
_INV53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """One splitmix64 output for input x (used for seeding, not streaming)."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_to_state(seed: int) -> int:
    """Map an arbitrary integer seed to a nonzero xorshift64* state."""
    state = splitmix64(seed & MASK64)
    return state if state != 0 else GOLDEN


class Rng:
    """xorshift64* stream. Cheap, reproducible, not cryptographic."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed_to_state(seed)

    @classmethod
    def from_state(cls, state: int) -> "Rng":
        rng = cls.__new__(cls)
        rng.state = state & MASK64
        if rng.state == 0:
            rng.state = GOLDEN
        return rng

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x = (x ^ (x << 25)) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * STAR_MULT) & MASK64

    def next_float(self) -> float:
        """Uniform float64 in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n). Consumes no output when n == 1."""
        if n <= 1:
            if n == 1:
                return 0
            raise ValueError(f"below() needs n >= 1, got {n}")
        return self.next_u64() % n
