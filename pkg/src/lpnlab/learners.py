"""Learning loops and classical baseline solvers.

The iterative loop feeds each round's register measurement straight back
into the next state preparation.  The reward-guided loop instead scores
every stored guess by how well its parity bits match the observed labels
(negated Hamming distance, the all-zero input excluded) and lets a policy
pick the guess that seeds the next preparation:

* greedy over the full per-round guess list,
* a Markov variant keeping only the previous selection and the newest
  measurement, or
* epsilon-greedy exploration on top of the full greedy choice.

Classical baselines: exhaustive maximum-likelihood decoding, block
collision solving, and a subset-xor sample amplifier feeding the block
solver.  All run at desk scale with explicit parameter choices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .bitcore import BitString, RngStream
from .oracle import (
    Dataset,
    Example,
    ParityInstance,
    draw_example,
    filter_dataset,
    filtering_coefficient,
    span_combine,
)
from .qsim import RoundSampler, fwht


class PolicyKind(Enum):
    GREEDY_FULL = "greedy-full"
    GREEDY_MARKOV = "greedy-markov"
    EPSILON_GREEDY = "epsilon-greedy"


@dataclass(frozen=True)
class Policy:
    """Action-selection rule for the reward-guided loop."""

    kind: PolicyKind
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kind is PolicyKind.EPSILON_GREEDY:
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise ValueError("epsilon-greedy needs epsilon in [0, 1]")
        elif self.epsilon is not None:
            raise ValueError(f"{self.kind.value} takes no epsilon")


GREEDY_FULL = Policy(PolicyKind.GREEDY_FULL)
GREEDY_MARKOV = Policy(PolicyKind.GREEDY_MARKOV)
DEFAULT_EPSILON = 0.1


@dataclass(frozen=True)
class LearnerConfig:
    n: int
    epochs: int
    policy: Policy
    rng: RngStream
    max_samples: int
    filtering: bool = False

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 1 <= self.max_samples <= (1 << self.n) * 64:
            raise ValueError(
                f"max_samples must be in 1..{(1 << self.n) * 64}, got {self.max_samples}"
            )


@dataclass
class LearnRecord:
    """Outcome of one learner run: per-round selections and their rewards."""

    guesses: list[BitString] = field(default_factory=list)
    rewards: list[int] = field(default_factory=list)
    final_guess: BitString | None = None
    samples_used: int = 0
    success: bool = False


def _scoring_arrays(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Resolved pairs with the all-zero input dropped, ready for scoring."""
    xs, labels = ds.resolved_pairs()
    if xs.size and xs[0] == 0:
        return xs[1:], labels[1:]
    return xs, labels


def _parity_bits(xs: np.ndarray, cand: np.ndarray | int) -> np.ndarray:
    v = np.bitwise_and(xs.astype(np.uint32), np.asarray(cand, dtype=np.uint32))
    v = v ^ (v >> np.uint32(16))
    v = v ^ (v >> np.uint32(8))
    v = v ^ (v >> np.uint32(4))
    v = v ^ (v >> np.uint32(2))
    v = v ^ (v >> np.uint32(1))
    return v & np.uint32(1)


def _score_one(xs: np.ndarray, labels: np.ndarray, cand: int) -> int:
    """Negated Hamming distance between a candidate's parities and the labels."""
    if xs.size == 0:
        return 0
    return -int(np.count_nonzero(_parity_bits(xs, cand) != labels))


def _score_many(xs: np.ndarray, labels: np.ndarray, cands: Sequence[int]) -> list[int]:
    if xs.size == 0 or not cands:
        return [0] * len(cands)
    bits = _parity_bits(xs[None, :], np.asarray(cands, dtype=np.uint32)[:, None])
    mismatches = (bits != labels[None, :]).sum(axis=1)
    return [-int(v) for v in mismatches]


def reward(guess: BitString, ds: Dataset) -> int:
    """Negated Hamming distance between guess parities and resolved labels.

    The all-zero input is excluded: its parity is 0 for every candidate,
    so it carries no information about the guess.
    """
    xs, labels = _scoring_arrays(ds)
    return _score_one(xs, labels, guess.value)


class _SpectrumScores:
    """Rewards as O(1) lookups in a round's label-signed data spectrum.

    For the signed indicator spectrum B, a candidate z disagrees with the
    resolved labels on (|D| - B[z]) / 2 inputs, so its reward needs no
    per-candidate parity pass.  The all-zero input contributes +1 to
    every B[z] and is excluded from scoring, hence the offset.
    """

    def __init__(self, sampler: RoundSampler) -> None:
        offset = 1 if sampler.zero_covered else 0
        self._spec = sampler.sign_spectrum
        self._offset = offset
        self._count = sampler.covered_count - offset

    def one(self, cand: int) -> int:
        return -((self._count - (int(self._spec[cand]) - self._offset)) >> 1)

    def many(self, cands: Sequence[int]) -> list[int]:
        if not cands:
            return []
        vals = self._spec[np.asarray(cands, dtype=np.int64)] - self._offset
        return [-(int(self._count - v) >> 1) for v in vals]


def _argmax_latest(values: Sequence[int]) -> int:
    """Index of the maximum; ties go to the latest entry."""
    best = 0
    for i in range(1, len(values)):
        if values[i] >= values[best]:
            best = i
    return best


def select_action(history: LearnRecord, policy: Policy, rng: RngStream) -> BitString:
    """Pick the next oracle guess from recorded (guess, reward) history."""
    if not history.guesses:
        raise ValueError("history is empty")
    n = history.guesses[0].n
    if policy.kind is PolicyKind.EPSILON_GREEDY and rng.random() < policy.epsilon:
        return BitString(rng.bits(n), n)
    if policy.kind is PolicyKind.GREEDY_MARKOV:
        window = history.rewards[-2:]
        offset = len(history.rewards) - len(window)
        return history.guesses[offset + _argmax_latest(window)]
    return history.guesses[_argmax_latest(history.rewards)]


def _collect(ds: Dataset, inst: ParityInstance, rng: RngStream, index: int) -> None:
    """Draw one oracle example; the all-zero input is stored with label 0."""
    ex = draw_example(inst, rng, index)
    if ex.x.value == 0:
        ex = Example(ex.x, 0, index)
    ds.add(ex)


def _round_dataset(ds: Dataset, seed_guess: int, filtering: bool) -> Dataset:
    """Dataset used for this round's state preparation and rewards.

    When filtering is on, the coefficient comes from the seeding guess's
    current distance to the (unfiltered) resolved labels.
    """
    if not filtering:
        return ds
    xs, labels = _scoring_arrays(ds)
    w = filtering_coefficient(-_score_one(xs, labels, seed_guess))
    return filter_dataset(ds, w)


def run_ilpn(cfg: LearnerConfig, inst: ParityInstance) -> LearnRecord:
    """Iterative loop: every epoch's measurement becomes the next guess."""
    n, rng = cfg.n, cfg.rng
    record = LearnRecord()
    ds = Dataset(n)
    sel = 0
    for m in range(1, cfg.max_samples + 1):
        _collect(ds, inst, rng, m - 1)
        ds_round = _round_dataset(ds, sel, cfg.filtering)
        sampler = RoundSampler.from_dataset(ds_round)
        for _ in range(cfg.epochs):
            sel = sampler.sample(sel, rng)
        record.guesses.append(BitString(sel, n))
    record.final_guess = BitString(sel, n)
    record.samples_used = cfg.max_samples
    record.success = sel == inst.s.value
    return record


def run_rlpn(cfg: LearnerConfig, inst: ParityInstance) -> LearnRecord:
    """Reward-guided loop.

    Round m keeps a list of m guess slots.  Each epoch measures a fresh
    string into slot m, scores it against the observed labels, lets the
    policy pick among the slots (ties to the newest), and writes the
    selection back into slot m-1, which also seeds the next preparation.
    After the last epoch the selection is stored as the round's guess.

    Rewards for slots 1..m-1 are recomputed once per round (the dataset
    only changes between rounds); each epoch then scores only the new
    measurement.  With the Markov policy just the previous selection and
    the newest measurement compete.

    Per-epoch draw order: one register sample, then (epsilon-greedy only)
    one uniform for the explore coin and, when exploring, one random
    string.
    """
    n, rng = cfg.n, cfg.rng
    policy = cfg.policy
    markov = policy.kind is PolicyKind.GREEDY_MARKOV
    epsilon = policy.epsilon if policy.kind is PolicyKind.EPSILON_GREEDY else None
    record = LearnRecord()
    ds = Dataset(n)
    sel = 0
    sel_reward = 0
    slot_values: list[int] = []
    slot_rewards: list[int] = []
    for m in range(1, cfg.max_samples + 1):
        _collect(ds, inst, rng, m - 1)
        ds_round = _round_dataset(ds, sel, cfg.filtering)
        sampler = RoundSampler.from_dataset(ds_round)
        scores = _SpectrumScores(sampler)
        if markov:
            sel_reward = scores.one(sel)
        else:
            slot_values.append(sel)
            slot_rewards.append(0)
            if m > 1:
                slot_rewards[: m - 1] = scores.many(slot_values[: m - 1])
        # The running (sel, sel_reward) dominates every older slot after a
        # greedy selection, so later epochs only compare it with the new
        # measurement; a full rescan is needed at round start and after an
        # exploration overwrote slot m-1.
        full_scan = True
        for _ in range(cfg.epochs):
            z = sampler.sample(sel, rng)
            z_reward = scores.one(z)
            if markov:
                if z_reward >= sel_reward:
                    sel, sel_reward = z, z_reward
                continue
            slot_values[m - 1] = z
            slot_rewards[m - 1] = z_reward
            if m == 1:
                # single slot: the newest measurement is the only candidate
                chosen, chosen_reward = z, z_reward
            elif full_scan:
                best = _argmax_latest(slot_rewards)
                chosen, chosen_reward = slot_values[best], slot_rewards[best]
                full_scan = False
            elif z_reward >= sel_reward:
                chosen, chosen_reward = z, z_reward
            else:
                chosen, chosen_reward = sel, sel_reward
            # epsilon == 0 draws nothing, exactly reproducing pure greedy
            if epsilon and rng.random() < epsilon:
                chosen = rng.bits(n)
                chosen_reward = scores.one(chosen)
                full_scan = True
            sel, sel_reward = chosen, chosen_reward
            if m >= 2:
                slot_values[m - 2] = chosen
                slot_rewards[m - 2] = chosen_reward
        if not markov:
            slot_values[m - 1] = sel
            slot_rewards[m - 1] = sel_reward
        record.guesses.append(BitString(sel, n))
        record.rewards.append(sel_reward)
    record.final_guess = BitString(sel, n)
    record.samples_used = cfg.max_samples
    record.success = sel == inst.s.value
    return record


# ---------------------------------------------------------------------------
# Classical baselines
# ---------------------------------------------------------------------------


def al_solve(ds: Dataset) -> BitString:
    """Maximum-likelihood decoding by scoring every candidate string.

    The mismatch count of candidate c is (m - T[c]) / 2 where T is the
    Walsh-Hadamard transform of the label-signed input histogram, so one
    O(2^n n) transform scores all 2^n candidates at once.  Ties resolve
    to the lexicographically smallest candidate.
    """
    signed = np.zeros(1 << ds.n, dtype=np.int64)
    for ex in ds.examples:
        signed[ex.x.value] += 1 - 2 * ex.label
    agreement = fwht(signed)
    return BitString(int(np.argmax(agreement)), ds.n)


class BkwIncompleteWarning(UserWarning):
    """Too few collision survivors to vote every secret bit."""


def _bkw_blocks(n: int, a: int, b: int) -> list[tuple[int, int]]:
    if a < 1 or b < 1 or a * b < n:
        raise ValueError(f"need a*b >= n, got a={a} b={b} n={n}")
    return [(i * b, min((i + 1) * b, n)) for i in range(a) if i * b < n]


def _collide_block(xs: np.ndarray, ys: np.ndarray, lo: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pair samples sharing a block value and xor the pairs.

    Every sample is paired (zero-valued blocks included), so each
    survivor is the xor of exactly two inputs; after a-1 rounds every
    survivor combines 2^(a-1) distinct original samples and its label
    error rate follows the span formula at that depth.
    """
    keys = (xs >> np.uint32(lo)) & np.uint32((1 << width) - 1)
    order = np.argsort(keys, kind="stable")
    xs, ys, keys = xs[order], ys[order], keys[order]
    boundaries = np.nonzero(np.diff(keys))[0] + 1
    out_x, out_y = [], []
    start = 0
    for stop in list(boundaries) + [len(keys)]:
        size = stop - start
        pairs = size // 2
        if pairs:
            left = slice(start, start + pairs)
            right = slice(start + pairs, start + 2 * pairs)
            out_x.append(xs[left] ^ xs[right])
            out_y.append(ys[left] ^ ys[right])
        start = stop
    if not out_x:
        empty = np.array([], dtype=np.uint32)
        return empty, empty.astype(np.uint8)
    return np.concatenate(out_x), np.concatenate(out_y)


def _bkw_recover_block(
    xs: np.ndarray, ys: np.ndarray, n: int, blocks: list[tuple[int, int]], target: int
) -> tuple[int, bool]:
    """Zero out all non-target blocks, then majority-vote the target bits."""
    for i, (lo, hi) in enumerate(blocks):
        if i == target:
            continue
        xs, ys = _collide_block(xs, ys, lo, hi - lo)
    lo, hi = blocks[target]
    value = 0
    complete = True
    for j in range(lo, hi):
        votes = ys[xs == (1 << j)]
        ones = int(votes.sum())
        zeros = votes.size - ones
        if votes.size == 0 or ones == zeros:
            complete = False
        elif ones > zeros:
            value |= 1 << j
    return value, complete


def bkw_default_params(n: int) -> tuple[int, int]:
    """Desk-scale block layout: width ceil(sqrt(n)), count ceil(n / width)."""
    b = int(np.ceil(np.sqrt(n)))
    a = -(-n // b)
    return a, b


def bkw_solve(
    inst: ParityInstance,
    samples: int,
    rng: RngStream,
    a: int | None = None,
    b: int | None = None,
) -> BitString:
    """Block collision solver drawing its own examples.

    The sample budget is split evenly across one recovery pass per block;
    each pass eliminates the other blocks by pairwise collisions and
    majority-votes the surviving unit vectors.  Bits that cannot be voted
    are left 0 and flagged with :class:`BkwIncompleteWarning`.
    """
    n = inst.n
    if a is None or b is None:
        a, b = bkw_default_params(n)
    blocks = _bkw_blocks(n, a, b)
    per_pass = samples // len(blocks)
    value = 0
    complete = True
    for target in range(len(blocks)):
        xs = rng.generator.integers(0, 1 << n, size=per_pass, dtype=np.uint32)
        noise = (rng.generator.random(per_pass) < inst.eta).astype(np.uint8)
        ys = _parity_bits(xs, inst.s.value).astype(np.uint8) ^ noise
        part, ok = _bkw_recover_block(xs, ys, n, blocks, target)
        value |= part
        complete = complete and ok
    if not complete:
        warnings.warn(
            "not enough collision survivors to vote every bit", BkwIncompleteWarning
        )
    return BitString(value, n)


def lyu_solve(
    ds: Dataset,
    rng: RngStream,
    k: int = 3,
    pool_size: int = 4096,
    a: int | None = None,
    b: int | None = None,
) -> BitString:
    """Subset-xor amplification feeding the block collision solver.

    Synthesises a large pool by xor-ing random k-subsets of the real
    samples (k odd), raising the label error rate to the span value at
    depth k, then runs one block-solver pass per block on a fresh pool.
    A desk-scale rendition; report as ``lyu-approx``.
    """
    if k % 2 == 0:
        raise ValueError(f"subset size must be odd, got {k}")
    n = ds.n
    if len(ds) < k:
        warnings.warn(
            f"fewer than k={k} examples; nothing to amplify", BkwIncompleteWarning
        )
        return BitString.zero(n)
    if a is None or b is None:
        a, b = bkw_default_params(n)
    blocks = _bkw_blocks(n, a, b)
    base = ds.examples
    value = 0
    complete = True
    for target in range(len(blocks)):
        xs = np.empty(pool_size, dtype=np.uint32)
        ys = np.empty(pool_size, dtype=np.uint8)
        for i in range(pool_size):
            picks = rng.generator.choice(len(base), size=k, replace=False)
            combined = span_combine([base[j] for j in picks])
            xs[i] = combined.x.value
            ys[i] = combined.label
        part, ok = _bkw_recover_block(xs, ys, n, blocks, target)
        value |= part
        complete = complete and ok
    if not complete:
        warnings.warn(
            "not enough collision survivors to vote every bit", BkwIncompleteWarning
        )
    return BitString(value, n)


def amplified_pool(
    ds: Dataset, rng: RngStream, k: int, pool_size: int
) -> list[Example]:
    """The subset-xor pool used by :func:`lyu_solve`, exposed for analysis."""
    if k % 2 == 0:
        raise ValueError(f"subset size must be odd, got {k}")
    base = ds.examples
    out = []
    for _ in range(pool_size):
        picks = rng.generator.choice(len(base), size=k, replace=False)
        out.append(span_combine([base[j] for j in picks]))
    return out


# ---------------------------------------------------------------------------
# GF(2) helpers (span checks and test oracles)
# ---------------------------------------------------------------------------


def gf2_rank(rows: Iterable[int], n_cols: int) -> int:
    """Rank of int-bitset rows over GF(2) via Gaussian elimination."""
    work = list(rows)
    rank = 0
    row_idx = 0
    for col in range(n_cols):
        pivot = None
        for r in range(row_idx, len(work)):
            if (work[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[row_idx], work[pivot] = work[pivot], work[row_idx]
        for r in range(len(work)):
            if r != row_idx and ((work[r] >> col) & 1):
                work[r] ^= work[row_idx]
        rank += 1
        row_idx += 1
        if row_idx == len(work):
            break
    return rank


def gf2_solve(xs: Sequence[int], ys: Sequence[int], n: int) -> int | None:
    """Solve x_j . s = y_j over GF(2); None unless uniquely determined.

    Rows are packed as (x << 1) | y so label bits ride along through the
    elimination.
    """
    pivots: dict[int, int] = {}
    for x, y in zip(xs, ys):
        row = (x << 1) | (y & 1)
        for col in range(n, 0, -1):
            if not (row >> col) & 1:
                continue
            if col in pivots:
                row ^= pivots[col]
            else:
                pivots[col] = row
                break
        else:
            if row & 1:
                return None  # inconsistent labels
    if len(pivots) < n:
        return None  # underdetermined
    for col in sorted(pivots):
        for other in pivots:
            if other != col and (pivots[other] >> col) & 1:
                pivots[other] ^= pivots[col]
    value = 0
    for col, row in pivots.items():
        if row & 1:
            value |= 1 << (col - 1)
    return value
