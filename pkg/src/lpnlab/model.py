"""Closed-form recursive error models for the two learning loops.

Both models track r(M), the expected fraction of hypothesis bits that
disagree with the true parity function after M samples, and the success
probability (1 - 2 r(M))^2 of measuring the hidden string from the
corresponding state.  No 2^n storage is used, so n may exceed the
simulator's cap (up to 64 here).

Numerical care: near the uninformed regime r sits within ~2^-n of 1/2,
far below float64 resolution around 0.5.  The recursions therefore track
q = 1 - 2r directly (q has an exact product form M(1-2*eta)/2^n for the
wrong-guess branch) and keep the answer-absent probability of the greedy
model in log space, so nothing underflows before it should.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_MODEL_N = 64


@dataclass(frozen=True)
class ModelParams:
    n: int
    eta: float
    epochs: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_MODEL_N:
            raise ValueError(f"n must be in 1..{MAX_MODEL_N}, got {self.n}")
        if not 0.0 <= self.eta < 0.5:
            raise ValueError(f"eta must be in [0, 0.5), got {self.eta}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")


@dataclass(eq=False)
class ErrorCurve:
    """Per-sample-count error rates and success probabilities.

    Entry i corresponds to M = m[i].  ``p_success`` is always the exact
    square (1 - 2 r)^2 of the stored ``r``.  The greedy-model curve also
    records the probability that the hidden string has not yet appeared
    among the measured guesses (``p_absent``), the same-parity collision
    probability ``c``, and the noisy-misselection estimate ``beta``.
    """

    m: np.ndarray
    r: np.ndarray
    p_success: np.ndarray
    eta0: np.ndarray
    eta1: np.ndarray
    p_absent: np.ndarray | None = None
    c: np.ndarray | None = None
    beta: np.ndarray | None = None


def round_half_away(x: float) -> int:
    """Nearest integer with halves rounded away from zero (non-negative x)."""
    return math.floor(x + 0.5)


def eta_tildes(n: int, m: int, eta: float) -> tuple[float, float]:
    """Expected hypothesis error rates with a right and a wrong guess.

    With m real samples out of 2^n inputs, a correct guess leaves only
    the m*eta expected label errors, while a wrong guess additionally
    corrupts half of the 2^n - m guessed bits on average.
    """
    if not 1 <= m <= (1 << n):
        raise ValueError(f"m must be in 1..2^{n}, got {m}")
    full = float(1 << n)
    t0 = m * eta / full
    t1 = (m * eta + ((1 << n) - m) / 2.0) / full
    return t0, t1


def _wrong_branch_q(n: int, m: int, eta: float) -> float:
    # 1 - 2*eta1 in exact product form; the subtraction form loses all
    # precision once m << 2^n.
    return m * (1.0 - 2.0 * eta) / float(1 << n)


def _right_branch_q(n: int, m: int, eta: float) -> float:
    return 1.0 - 2.0 * m * eta / float(1 << n)


def _initial_q(n: int, eta: float) -> float:
    # First round: the all-zero initial guess is right with prior 2^-n.
    full = float(1 << n)
    return (1.0 / full) * (1.0 - 2.0 * eta / full) + (1.0 - 1.0 / full) * _wrong_branch_q(
        n, 1, eta
    )


def ilpn_curve(params: ModelParams, m_max: int) -> ErrorCurve:
    """Error curve for the plain iterative loop.

    Each round mixes the right-guess and wrong-guess error rates with the
    previous round's success probability; additional epochs reapply the
    same fixed-M update, which drives the rate toward its fixed point.
    """
    n, eta, epochs = params.n, params.eta, params.epochs
    if not 1 <= m_max <= (1 << n):
        raise ValueError(f"m_max must be in 1..2^{n}, got {m_max}")
    r_out = np.empty(m_max)
    eta0_out = np.empty(m_max)
    eta1_out = np.empty(m_max)
    p_right = 2.0 ** -n
    for m in range(1, m_max + 1):
        u0 = _right_branch_q(n, m, eta)
        u1 = _wrong_branch_q(n, m, eta)
        q = None
        for _ in range(epochs):
            q_new = p_right * u0 + (1.0 - p_right) * u1
            p_right = q_new * q_new
            if q is not None and abs(q_new - q) < 1e-17:
                q = q_new
                break
            q = q_new
        r_out[m - 1] = (1.0 - q) / 2.0
        eta0_out[m - 1], eta1_out[m - 1] = eta_tildes(n, m, eta)
    m_axis = np.arange(1, m_max + 1)
    return ErrorCurve(m_axis, r_out, (1.0 - 2.0 * r_out) ** 2, eta0_out, eta1_out)


def _collision_fraction(n: int, m: int) -> float:
    """Probability a wrong guess reproduces m independent noiseless parity bits.

    ceil(2^(n-m)) guesses match the observed parity string; excluding the
    answer leaves (ceil(2^(n-m)) - 1) of 2^n - 1 wrong candidates.  Zero
    once m >= n.
    """
    if m >= n:
        return 0.0
    return ((1 << (n - m)) - 1) / float((1 << n) - 1)


def _misselection_beta(n: int, m: int, eta: float, c: float) -> float:
    """Chance of picking a wrong guess when up to round(m*eta) labels are bad.

    Exact integer binomial sum scaled by the collision fraction, clamped
    to [0, 1]; the sum only matters while m < n, where it stays well
    inside int range.
    """
    if c == 0.0 or eta == 0.0:
        return 0.0
    errors = round_half_away(m * eta)
    if errors <= 0:
        return 0.0
    total = sum(math.comb(m, k) for k in range(1, min(errors, m) + 1))
    numer = total * ((1 << (n - m)) - 1)
    return min(1.0, numer / float((1 << n) - 1))


def rlpn_curve(params: ModelParams, m_max: int) -> ErrorCurve:
    """Error curve for the greedy (reward-selected) loop.

    Tracks the probability the hidden string is still absent from the
    measured-guess pool; each epoch is one more measurement chance, so
    the absent-probability picks up a factor (1 - (1-2r)^2) per epoch.
    Conditioned on the answer being present, the selection still errs via
    parity collisions (error-free labels) or the binomial misselection
    estimate (noisy labels).  When the remaining epochs of a round cannot
    move the rate by a relative 1e-9, their absent-probability factors
    are applied in closed form.
    """
    n, eta, epochs = params.n, params.eta, params.epochs
    if m_max < 1:
        raise ValueError(f"m_max must be positive, got {m_max}")
    if n <= 24 and m_max > (1 << n):
        raise ValueError(f"m_max must be within 1..2^{n}, got {m_max}")
    full_f = float(1 << n)
    r_out = np.empty(m_max)
    eta0_out = np.empty(m_max)
    eta1_out = np.empty(m_max)
    p_out = np.empty(m_max)
    c_out = np.empty(m_max)
    beta_out = np.empty(m_max)
    log_absent = 0.0
    for m in range(1, m_max + 1):
        u1 = _wrong_branch_q(n, m, eta)
        c = _collision_fraction(n, m)
        beta = _misselection_beta(n, m, eta, c)
        clean = (1.0 - eta) ** m
        # 1 - 2*bracket assembled from positive stable pieces: the
        # error-free branch loses c*(2^n - m)/2^n, the noisy branch mixes
        # the right/wrong rates with weight beta.
        x_clean = 1.0 - c * ((1 << n) - m) / full_f
        y_noisy = (1.0 - beta) * _right_branch_q(n, m, eta) + beta * u1
        q_present = clean * x_clean + (1.0 - clean) * y_noisy
        q = None
        i = 0
        while i < epochs:
            p_absent = math.exp(log_absent)
            frac_present = -math.expm1(log_absent)
            if m == 1 and i == 0:
                q_new = _initial_q(n, eta)
            else:
                q_new = frac_present * q_present + p_absent * u1
            p_hit = q_new * q_new
            remaining = epochs - i
            if (
                q is not None
                and remaining * p_hit < 1e-9 * max(q_new, 1e-300)
            ):
                # q cannot drift measurably; compound the remaining
                # measurement chances at the frozen rate.
                q = q_new
                log_absent += remaining * math.log1p(-p_hit)
                break
            q = q_new
            if p_hit >= 1.0:
                log_absent = -math.inf
            else:
                log_absent += math.log1p(-p_hit)
            i += 1
        r_out[m - 1] = (1.0 - q) / 2.0
        eta0_out[m - 1], eta1_out[m - 1] = eta_tildes(n, m, eta)
        p_out[m - 1] = math.exp(log_absent)
        c_out[m - 1] = c
        beta_out[m - 1] = beta
    m_axis = np.arange(1, m_max + 1)
    return ErrorCurve(
        m_axis,
        r_out,
        (1.0 - 2.0 * r_out) ** 2,
        eta0_out,
        eta1_out,
        p_absent=p_out,
        c=c_out,
        beta=beta_out,
    )


def m_two_thirds(curve: ErrorCurve) -> int | None:
    """Smallest sample count whose success probability exceeds 2/3."""
    above = np.nonzero(curve.p_success > 2.0 / 3.0)[0]
    if above.size == 0:
        return None
    return int(curve.m[above[0]])
