"""Simulation of the parity-learning measurement circuit.

The circuit prepares a uniform superposition of all inputs with a
hypothesis bit attached, applies a Hadamard layer to every qubit, and
post-selects runs whose label qubit reads 1.  Because the hypothesis bit
enters only as a phase, the whole state is a length-2^n vector of signs
(-1)^h(x), and the Hadamard layer is its Walsh-Hadamard transform: the
post-selected register distribution is the squared normalized spectrum.
The label qubit reads 1 with probability exactly 1/2.

Two measurement pipelines are provided on purpose:

* the fast path (:func:`post_selected_distribution`, :class:`RoundSampler`)
  works on the n-qubit sign vector with an exact integer transform;
* :func:`dense_simulate` builds the literal (n+1)-qubit amplitude vector
  and applies per-qubit Hadamard butterflies in floating point.

They must agree to within rounding; tests enforce it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bitcore import BitString, RngStream
from .oracle import Dataset, Example

_DENSE_MAX_N = 12  # 2^(n+1) amplitudes; keeps the reference path desk-sized


class ResourceLimitError(RuntimeError):
    """Raised when a dense reference simulation would exceed its size guard."""


@dataclass(eq=False)
class SignState:
    """Length-2^n vector of +-1 entries, entry x equal to (-1)^h(x)."""

    n: int
    signs: np.ndarray

    def __post_init__(self) -> None:
        self.signs = np.asarray(self.signs, dtype=np.int8)
        if self.signs.shape != (1 << self.n,):
            raise ValueError(
                f"sign vector must have length {1 << self.n}, got {self.signs.shape}"
            )
        if not np.all(np.abs(self.signs) == 1):
            raise ValueError("sign entries must be +1 or -1")
        self.signs.setflags(write=False)


@dataclass(eq=False)
class RegisterDistribution:
    """Probability distribution over n-bit register outcomes."""

    n: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (1 << self.n,):
            raise ValueError(
                f"distribution must have length {1 << self.n}, got {self.probs.shape}"
            )
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")


def fwht(values: np.ndarray | Sequence[int]) -> np.ndarray:
    """Walsh-Hadamard transform over exact int64 accumulators.

    Returns W with W[z] = sum_x values[x] * (-1)^(x.z); the input length
    must be a power of two.  Exact for sign vectors up to n = 24.
    """
    a = np.array(values, dtype=np.int64)
    size = a.shape[0]
    if size & (size - 1) or size == 0:
        raise ValueError(f"length must be a power of two, got {size}")
    h = 1
    while h < size:
        a = a.reshape(-1, 2 * h)
        left = a[:, :h].copy()
        right = a[:, h:].copy()
        a[:, :h] = left + right
        a[:, h:] = left - right
        a = a.reshape(size)
        h *= 2
    return a


def parity_table(n: int, mask: int) -> np.ndarray:
    """parity(x & mask) for every x in 0..2^n-1, as uint8."""
    v = np.bitwise_and(np.arange(1 << n, dtype=np.uint32), np.uint32(mask))
    v ^= v >> np.uint32(16)
    v ^= v >> np.uint32(8)
    v ^= v >> np.uint32(4)
    v ^= v >> np.uint32(2)
    v ^= v >> np.uint32(1)
    return (v & np.uint32(1)).astype(np.uint8)


def build_hypothesis_state(ds: Dataset, guess: BitString) -> SignState:
    """Sign vector of the hypothesis mixing real labels with guessed parities.

    Inputs covered by the dataset carry their resolved labels; every other
    input carries the parity of the guess.  The all-zero input is always 0.
    """
    if guess.n != ds.n:
        raise ValueError(f"guess length {guess.n} != dataset length {ds.n}")
    h = parity_table(ds.n, guess.value)
    xs, labels = ds.resolved_pairs()
    h[xs] = labels
    h[0] = 0
    return SignState(ds.n, 1 - 2 * h.astype(np.int8))


def post_selected_distribution(state: SignState) -> RegisterDistribution:
    """Register outcome distribution conditioned on the label qubit reading 1.

    Equals the squared spectrum (W[z] / 2^n)^2, which sums to exactly 1 by
    Parseval's identity.
    """
    w = fwht(state.signs)
    scaled = w.astype(np.float64) / float(1 << state.n)
    return RegisterDistribution(state.n, scaled * scaled)


def label_one_probability(state: SignState) -> float:
    """Probability the label qubit reads 1 after the Hadamard layer.

    Analytically exactly 1/2 for any sign state; exposed so the dense
    reference path can be cross-checked against it.
    """
    return 0.5


def success_probability(state: SignState, s: BitString) -> float:
    """Probability the post-selected register measurement returns s.

    With r the fraction of hypothesis bits disagreeing with the true
    parity function, this is (1 - 2r)^2, and it equals the distribution's
    mass at s.
    """
    if s.n != state.n:
        raise ValueError(f"length mismatch: {s.n} != {state.n}")
    true_signs = 1 - 2 * parity_table(state.n, s.value).astype(np.int64)
    mismatches = int(np.count_nonzero(state.signs != true_signs))
    r = mismatches / float(1 << state.n)
    return (1.0 - 2.0 * r) ** 2


_SQRT_HALF = 1.0 / math.sqrt(2.0)


def _hadamard_every_qubit(amp: np.ndarray) -> np.ndarray:
    """Apply a normalized Hadamard to every qubit of a dense state vector."""
    size = amp.shape[0]
    h = 1
    while h < size:
        amp = amp.reshape(-1, 2 * h)
        lo = amp[:, :h].copy()
        hi = amp[:, h:].copy()
        amp[:, :h] = (lo + hi) * _SQRT_HALF
        amp[:, h:] = (lo - hi) * _SQRT_HALF
        amp = amp.reshape(size)
        h *= 2
    return amp


def _measure_label_and_register(amp: np.ndarray, n: int) -> tuple[float, RegisterDistribution]:
    """Measure the label qubit of a dense (n+1)-qubit state and condition on 1.

    Index layout: amplitude of |x>|b> sits at (x << 1) | b.
    """
    weights = amp * amp
    p_one = float(weights[1::2].sum())
    if p_one <= 0.0:
        raise ValueError("label outcome 1 has zero probability; cannot post-select")
    return p_one, RegisterDistribution(n, weights[1::2] / p_one)


def dense_simulate(ds: Dataset, guess: BitString) -> tuple[float, RegisterDistribution]:
    """Reference pipeline: literal (n+1)-qubit amplitudes, per-qubit Hadamards.

    Builds (1/sqrt(2^n)) sum_x |x>|h(x)>, applies a Hadamard to every
    qubit, and returns the label-1 probability together with the register
    distribution conditioned on that outcome.
    """
    n = ds.n
    if n > _DENSE_MAX_N:
        raise ResourceLimitError(
            f"dense simulation limited to n <= {_DENSE_MAX_N}, got {n}"
        )
    h = (1 - build_hypothesis_state(ds, guess).signs.astype(np.int64)) // 2
    amp = np.zeros(1 << (n + 1), dtype=np.float64)
    xs = np.arange(1 << n, dtype=np.int64)
    amp[(xs << 1) | h] = 1.0 / math.sqrt(1 << n)
    amp = _hadamard_every_qubit(amp)
    return _measure_label_and_register(amp, n)


def dense_simulate_naive(examples: Sequence[Example]) -> tuple[float, RegisterDistribution]:
    """Reference pipeline for the bare M-sample equal superposition.

    The state (1/sqrt(M)) sum_j |x_j>|label_j> only covers the sampled
    pairs; inputs must be pairwise distinct or the state is not the
    normalized equal superposition (conflicting labels would also break
    the exact-1/2 post-selection rate).
    """
    if not examples:
        raise ValueError("need at least one example")
    n = examples[0].x.n
    if n > _DENSE_MAX_N:
        raise ResourceLimitError(
            f"dense simulation limited to n <= {_DENSE_MAX_N}, got {n}"
        )
    seen = set()
    for ex in examples:
        if ex.x.n != n:
            raise ValueError("examples must share one length")
        if ex.x.value in seen:
            raise ValueError(f"duplicate input {ex.x} in naive superposition")
        seen.add(ex.x.value)
    amp = np.zeros(1 << (n + 1), dtype=np.float64)
    scale = 1.0 / math.sqrt(len(examples))
    for ex in examples:
        amp[(ex.x.value << 1) | ex.label] = scale
    amp = _hadamard_every_qubit(amp)
    return _measure_label_and_register(amp, n)


def sample_register(dist: RegisterDistribution, rng: RngStream) -> BitString:
    """Draw one register outcome from a distribution."""
    edges = np.cumsum(dist.probs)
    z = int(np.searchsorted(edges, rng.random(), side="right"))
    return BitString(min(z, (1 << dist.n) - 1), dist.n)


def apply_bitflips(z: BitString, eta_x: float, rng: RngStream) -> BitString:
    """Flip each bit independently with probability eta_x."""
    if not 0.0 <= eta_x <= 1.0:
        raise ValueError(f"flip rate must be in [0, 1], got {eta_x}")
    flips = rng.uniforms(z.n) < eta_x
    mask = 0
    for j in range(z.n):
        if flips[j]:
            mask |= 1 << j
    return BitString(z.value ^ mask, z.n)


def majority_vote(strings: Sequence[BitString]) -> BitString:
    """Bit-wise majority over an odd number of equal-length strings."""
    if not strings:
        raise ValueError("majority_vote requires at least one string")
    n = strings[0].n
    k = len(strings)
    if k % 2 == 0:
        raise ValueError(f"majority_vote requires an odd count, got {k}")
    value = 0
    for j in range(n):
        ones = 0
        for s in strings:
            if s.n != n:
                raise ValueError("majority_vote requires equal lengths")
            ones += (s.value >> j) & 1
        if 2 * ones > k:
            value |= 1 << j
    return BitString(value, n)


class RoundSampler:
    """Register-measurement sampler for many guesses over one fixed dataset.

    The hypothesis state equals the pure-guess parity state except at
    inputs the data covers, so its spectrum is a point mass at the guess
    plus a data-only correction.  Both correction spectra are transforms
    of data indicator vectors, computed once per dataset; each new guess
    then costs O(2^n) instead of a fresh O(2^n n) transform.  Outcomes
    are drawn with exact integer weights W[z]^2 out of 4^n, so sampled
    trajectories carry no floating-point rounding.

    ``sample`` reuses scratch buffers; instances belong to one trial and
    must not be shared across threads.
    """

    def __init__(self, n: int, xs: np.ndarray, labels: np.ndarray) -> None:
        self.n = n
        self._size = 1 << n
        covered = np.zeros(self._size, dtype=np.int64)
        signed = np.zeros(self._size, dtype=np.int64)
        xs = np.asarray(xs, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        covered[xs] = 1
        signed[xs] = 1 - 2 * labels
        self.covered_count = int(xs.size)
        self.zero_covered = bool(xs.size and xs.min() == 0)
        self._cover_spec = fwht(covered)
        self._sign_spec = fwht(signed)
        self._index = np.arange(self._size, dtype=np.int64)
        self._scratch = np.empty(self._size, dtype=np.int64)
        self._perm = np.empty(self._size, dtype=np.int64)
        self._edges = np.empty(self._size, dtype=np.int64)
        self._total = self._size * self._size  # Parseval: sum of W^2

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "RoundSampler":
        xs, labels = ds.resolved_pairs()
        return cls(ds.n, xs, labels)

    @property
    def sign_spectrum(self) -> np.ndarray:
        """Transform of the label-signed data indicator (read-only use)."""
        return self._sign_spec

    def spectrum(self, guess: int) -> np.ndarray:
        w = self._sign_spec - self._cover_spec[self._index ^ guess]
        w[guess] += self._size
        return w

    def distribution(self, guess: int) -> RegisterDistribution:
        w = self.spectrum(guess)
        scaled = w.astype(np.float64) / float(self._size)
        return RegisterDistribution(self.n, scaled * scaled)

    def sample(self, guess: int, rng: RngStream) -> int:
        np.bitwise_xor(self._index, guess, out=self._perm)
        np.take(self._cover_spec, self._perm, out=self._scratch)
        np.subtract(self._sign_spec, self._scratch, out=self._scratch)
        self._scratch[guess] += self._size
        np.multiply(self._scratch, self._scratch, out=self._scratch)
        np.cumsum(self._scratch, out=self._edges)
        u = rng.generator.integers(0, self._total)
        return int(np.searchsorted(self._edges, u, side="right"))
