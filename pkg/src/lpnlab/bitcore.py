"""Bit-string primitives and reproducible random streams.

Packing convention: an n-bit vector lives in the low n bits of a Python
int, with bit j holding coordinate j+1 of the vector.  All text output
(CSV, CLI) renders the same vector big-endian, most significant
coordinate first, so ``BitString(0b110, 3)`` prints as ``"110"`` and
round-trips through :meth:`BitString.from_string`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

# The sign-vector simulator stores 2^n entries, so n is capped where the
# dense representation stays desk-sized (~16M entries at n=24).
MAX_N = 24


@dataclass(frozen=True)
class BitString:
    """Immutable n-bit vector packed into an integer."""

    value: int
    n: int

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_N:
            raise ValueError(f"bit length must be in 1..{MAX_N}, got {self.n}")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError(f"value {self.value} does not fit in {self.n} bits")

    @classmethod
    def zero(cls, n: int) -> "BitString":
        return cls(0, n)

    @classmethod
    def from_string(cls, text: str) -> "BitString":
        """Parse a big-endian '0'/'1' string."""
        return cls(int(text, 2), len(text))

    def bit(self, j: int) -> int:
        """Coordinate j (0-based; bit 0 is the low bit of ``value``)."""
        if not 0 <= j < self.n:
            raise IndexError(f"bit index {j} out of range for n={self.n}")
        return (self.value >> j) & 1

    def bits(self) -> tuple[int, ...]:
        """All coordinates, lowest first."""
        return tuple((self.value >> j) & 1 for j in range(self.n))

    def weight(self) -> int:
        return self.value.bit_count()

    def __xor__(self, other: "BitString") -> "BitString":
        _check_same_length(self, other)
        return BitString(self.value ^ other.value, self.n)

    def __str__(self) -> str:
        return format(self.value, f"0{self.n}b")


Bits = Union[BitString, Sequence[int]]


def _check_same_length(a: BitString, b: BitString) -> None:
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} != {b.n}")


def dot(x: BitString, s: BitString) -> int:
    """Inner product of two bit vectors over GF(2)."""
    _check_same_length(x, s)
    return (x.value & s.value).bit_count() & 1


def xor(a: BitString, b: BitString) -> BitString:
    """Bitwise exclusive-or of two equal-length vectors."""
    return a ^ b


def hamming(a: Bits, b: Bits) -> int:
    """Number of positions where two equal-length bit sequences differ.

    Accepts either two packed :class:`BitString` values (where the count
    is the popcount of their xor) or two plain sequences of 0/1 ints.
    """
    if isinstance(a, BitString) or isinstance(b, BitString):
        if not (isinstance(a, BitString) and isinstance(b, BitString)):
            raise TypeError("cannot mix BitString and plain sequences")
        _check_same_length(a, b)
        return (a.value ^ b.value).bit_count()
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    return sum(1 for u, v in zip(a, b) if (u ^ v) & 1)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream_id)``.

    The same pair always replays the same draw sequence, and distinct
    stream ids give statistically independent streams, so parallel trials
    stay reproducible regardless of how they are scheduled.  Instances
    are meant to be owned by a single trial and never shared.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    @cached_property
    def generator(self) -> np.random.Generator:
        entropy = self.seed & 0xFFFFFFFFFFFFFFFF
        seq = np.random.SeedSequence(entropy=entropy, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def random(self) -> float:
        """One uniform draw from [0, 1)."""
        return float(self.generator.random())

    def uniforms(self, k: int) -> np.ndarray:
        """k uniform draws from [0, 1)."""
        return self.generator.random(k)

    def bernoulli(self, p: float) -> int:
        """One 0/1 draw with P(1) = p."""
        return 1 if self.generator.random() < p else 0

    def bits(self, nbits: int) -> int:
        """One uniform draw over nbits-bit integers."""
        if not 0 < nbits < 64:
            raise ValueError("nbits must be in 1..63")
        return int(self.generator.integers(0, 1 << nbits))

    def integers(self, high: int) -> int:
        """One uniform draw over 0..high-1."""
        return int(self.generator.integers(0, high))
