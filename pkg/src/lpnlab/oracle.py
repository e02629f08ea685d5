"""Noisy parity example oracle, span combination, and occurrence filtering.

The oracle draws uniform inputs and labels them with a hidden parity
function, flipping each label independently with rate eta < 1/2.  A
:class:`Dataset` accumulates the draws together with per-pair occurrence
tallies; those tallies drive the label-resolution rule (majority per
input, ties to the most recent draw) and the occurrence filter that
discards rarely-seen pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bitcore import BitString, RngStream, dot

# draw_index used for examples synthesised by span_combine rather than
# drawn from the oracle.
SYNTHETIC_DRAW = -1


@dataclass(frozen=True)
class ParityInstance:
    """A hidden parity function together with its classification-noise rate."""

    s: BitString
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta < 0.5:
            raise ValueError(f"eta must be in [0, 0.5), got {self.eta}")

    @property
    def n(self) -> int:
        return self.s.n


@dataclass(frozen=True)
class Example:
    """One labelled pair; ``draw_index`` is the oracle query number, or
    ``SYNTHETIC_DRAW`` for combined examples."""

    x: BitString
    label: int
    draw_index: int = 0

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


class Dataset:
    """Ordered example sequence plus per-(input, label) occurrence tallies.

    ``resolved_label(x)`` collapses repeated draws of the same input to a
    single label: the majority label among its occurrences, with ties
    going to the most recently drawn label.  The all-zero input always
    resolves to 0, since every parity function maps it there.

    Owned and mutated by a single trial; safe to share read-only once a
    round's collection is complete.
    """

    def __init__(self, n: int, examples: Iterable[Example] = ()) -> None:
        self.n = n
        self._examples: list[Example] = []
        self._tally: dict[int, list[int]] = {}
        self._last_label: dict[int, int] = {}
        self._pairs_cache: tuple[np.ndarray, np.ndarray] | None = None
        for ex in examples:
            self.add(ex)

    def add(self, ex: Example) -> None:
        if ex.x.n != self.n:
            raise ValueError(f"example length {ex.x.n} != dataset length {self.n}")
        self._examples.append(ex)
        counts = self._tally.setdefault(ex.x.value, [0, 0])
        counts[ex.label] += 1
        self._last_label[ex.x.value] = ex.label
        self._pairs_cache = None

    @property
    def examples(self) -> tuple[Example, ...]:
        return tuple(self._examples)

    def __len__(self) -> int:
        return len(self._examples)

    def tallies(self) -> dict[int, tuple[int, int]]:
        """Occurrence counts per input value as (label-0 count, label-1 count)."""
        return {x: (c[0], c[1]) for x, c in self._tally.items()}

    def pair_counts(self) -> dict[tuple[int, int], int]:
        """Occurrence count per (input value, label) pair actually present."""
        out = {}
        for x, (c0, c1) in self.tallies().items():
            if c0:
                out[(x, 0)] = c0
            if c1:
                out[(x, 1)] = c1
        return out

    def resolved_label(self, x: int) -> int:
        if x == 0:
            return 0
        c0, c1 = self._tally[x]
        if c0 > c1:
            return 0
        if c1 > c0:
            return 1
        return self._last_label[x]

    def resolved_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct inputs (ascending) with their resolved labels, as arrays."""
        if self._pairs_cache is None:
            xs = np.array(sorted(self._tally), dtype=np.uint32)
            labels = np.array([self.resolved_label(int(x)) for x in xs], dtype=np.uint8)
            self._pairs_cache = (xs, labels)
        return self._pairs_cache

    def distinct_count(self) -> int:
        return len(self._tally)


def draw_example(inst: ParityInstance, rng: RngStream, draw_index: int = 0) -> Example:
    """One oracle query: uniform input, parity label flipped with rate eta."""
    x = BitString(rng.bits(inst.n), inst.n)
    e = rng.bernoulli(inst.eta)
    return Example(x, dot(x, inst.s) ^ e, draw_index)


def span_combine(examples: Sequence[Example]) -> Example:
    """Combine examples by xor-ing inputs and labels.

    Produces a synthetic example consistent with the same hidden parity
    function; with d independent noisy inputs the combined label error
    rate rises to ``span_error_rate(eta, d)``.  Linear independence is
    not checked here; use :func:`lpnlab.learners.gf2_rank` when the
    combination must genuinely extend the data span.
    """
    if not examples:
        raise ValueError("span_combine requires at least one example")
    n = examples[0].x.n
    value = 0
    label = 0
    for ex in examples:
        if ex.x.n != n:
            raise ValueError("span_combine requires equal-length examples")
        value ^= ex.x.value
        label ^= ex.label
    return Example(BitString(value, n), label, SYNTHETIC_DRAW)


def span_error_rate(eta: float, d: int) -> float:
    """Label error rate of an example combined from d independent draws."""
    if not 0.0 <= eta < 0.5:
        raise ValueError(f"eta must be in [0, 0.5), got {eta}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return (1.0 - (1.0 - 2.0 * eta) ** d) / 2.0


def filtering_coefficient(d_hamming: float) -> float:
    """Filter strength from the current guess-vs-data Hamming distance.

    Empirical rule: the further the working guess sits from the observed
    labels, the more aggressively rare pairs are discarded.
    """
    if d_hamming < 0:
        raise ValueError("Hamming distance cannot be negative")
    return 0.4 * math.sqrt(d_hamming) + 0.8


def filter_dataset(ds: Dataset, w: float) -> Dataset:
    """Keep only pairs whose occurrence count reaches w/2 of the maximum.

    A pair (x, label) seen o_k times survives iff ``o_k >= w * max_j(o_j) / 2``.
    Repeated draws make erroneous labels rarer than correct ones, so the
    filter preferentially discards noise.  Tallies are rebuilt from the
    surviving examples; idempotent for fixed w.
    """
    if w < 0:
        raise ValueError("filter coefficient must be non-negative")
    counts = ds.pair_counts()
    if not counts:
        return Dataset(ds.n)
    threshold = w * max(counts.values()) / 2.0
    kept = [ex for ex in ds.examples if counts[(ex.x.value, ex.label)] >= threshold]
    return Dataset(ds.n, kept)
