"""Closed-form optimal guessing under the tunable loss family.

An adversary gets ``k`` distinct guesses at a symbol drawn from a known
finite distribution and pays the loss of the total probability mass its
guess set places on the truth.  The optimum has a threshold structure: the
``r - 1`` most likely symbols are guessed outright, and the remaining
budget is spread over the tail in proportion to tilted probabilities.
This module computes that threshold rank, the minimal expected loss, and
the per-symbol coverage probabilities, all in closed form.

Everything runs on log-domain suffix sums, so large orders and long tails
stay numerically stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Alpha,
    BudgetError,
    DegenerateColumnError,
    DomainError,
    JointPmf,
    KGuessError,
    Pmf,
    SUM_TOL,
    as_alpha,
    as_joint,
    as_pmf,
    conditional_pmf,
)

__all__ = [
    "SortedPmf",
    "CoverageVector",
    "LossReport",
    "threshold_rank",
    "minimal_loss",
    "optimal_coverage",
    "minimal_loss_conditional",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SortedPmf:
    """Positive probabilities in nonincreasing order plus the sort permutation.

    ``perm[r]`` is the original index of the symbol at sorted rank ``r``.
    Zero atoms are stripped; ``size`` remembers the original length so
    results can be embedded back.  Ties sort by ascending original index
    (the sort is stable), which makes downstream tie-breaking deterministic.
    """

    probs: np.ndarray
    perm: np.ndarray
    size: int

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        perm = np.asarray(self.perm, dtype=np.intp)
        if p.ndim != 1 or perm.shape != p.shape:
            raise DomainError("sorted pmf needs matching 1-d probs and perm")
        if p.size == 0 or np.any(p <= 0.0):
            raise DomainError("sorted pmf entries must be strictly positive")
        if np.any(np.diff(p) > 0.0):
            raise DomainError("sorted pmf entries must be nonincreasing")
        if self.size < p.size:
            raise DomainError("original size smaller than positive support")
        object.__setattr__(self, "probs", _freeze(p))
        object.__setattr__(self, "perm", _freeze(perm).astype(np.intp))

    @property
    def support_size(self) -> int:
        return int(self.probs.size)

    @property
    def dropped_zeros(self) -> int:
        return int(self.size - self.probs.size)

    @classmethod
    def from_pmf(cls, pmf: "Pmf | object") -> "SortedPmf":
        pmf = as_pmf(pmf)
        pos = np.flatnonzero(pmf.probs > 0.0)
        # stable argsort of the negated values keeps ties in ascending
        # original-index order
        order = pos[np.argsort(-pmf.probs[pos], kind="stable")]
        return cls(pmf.probs[order], order, pmf.n)


@dataclass(frozen=True, eq=False)
class CoverageVector:
    """Per-symbol probability of appearing in the guess set.

    Indexed like the original pmf.  Entries live in [0, 1] (a slack of
    1e-12 is clipped) and the total equals the number of guesses actually
    spent, an integer no larger than ``k``, within 1e-9.
    """

    t: np.ndarray
    k: int

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise DomainError("coverage must be a nonempty 1-d array")
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise DomainError(f"guess budget must be a positive integer, got {self.k!r}")
        if np.any(~np.isfinite(t)) or np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
            raise DomainError("coverage entries must lie in [0, 1]")
        t = np.clip(t, 0.0, 1.0)
        total = float(t.sum())
        spent = round(total)
        if abs(total - spent) > SUM_TOL or not 1 <= spent <= self.k:
            raise DomainError(
                f"coverage sums to {total!r}, not an integer budget in [1, {self.k}]"
            )
        object.__setattr__(self, "t", _freeze(t))
        object.__setattr__(self, "k", int(self.k))

    @property
    def spent(self) -> int:
        """Guesses actually used; less than ``k`` only when support is short."""
        return int(round(float(self.t.sum())))


@dataclass(frozen=True, eq=False)
class LossReport:
    """Everything the closed form knows about one instance.

    ``threshold_rank`` is the 1-based sorted rank at which deterministic
    guessing stops; entries of the sorted coverage before it equal one.
    ``multiplier`` is the positive threshold from the stationarity
    conditions (informational; coverage equals min((p / multiplier) ** a, 1)
    on the support for finite orders).
    """

    value: float
    threshold_rank: int
    coverage: CoverageVector
    alpha: Alpha
    multiplier: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v):
            raise KGuessError("loss computed as NaN")
        if v < 0.0:
            if v < -1e-12:
                raise KGuessError(f"minimal loss came out negative: {v!r}")
            v = 0.0
        if not 1 <= self.threshold_rank <= self.coverage.k:
            raise KGuessError(
                f"threshold rank {self.threshold_rank} outside [1, {self.coverage.k}]"
            )
        if not self.multiplier > 0.0:
            raise KGuessError(f"multiplier must be positive, got {self.multiplier!r}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "threshold_rank", int(self.threshold_rank))


def _suffix_logsumexp(x: np.ndarray) -> np.ndarray:
    """suffix[r] = log sum(exp(x[r:])), computed tail-first for accuracy."""
    return np.logaddexp.accumulate(x[::-1])[::-1]


def _check_budget(k: int, support: int) -> int:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise DomainError(f"guess budget must be a positive integer, got {k!r}")
    return int(k)


def _threshold_from_logs(a_logp: np.ndarray, suffix: np.ndarray, k: int) -> int:
    """First 1-based rank r in [1, k] where (k - r + 1) * w_r <= sum(w_r:)."""
    factors = np.log(np.arange(k, 0, -1, dtype=np.float64))
    sat = np.flatnonzero(factors + a_logp[:k] - suffix[:k] <= 0.0)
    if sat.size == 0:
        # A satisfying rank provably exists for k below the support size;
        # treat a miss as an internal contract violation, not clamp it.
        raise KGuessError("no valid threshold rank found; this is a bug")
    return int(sat[0]) + 1


def threshold_rank(
    sorted_pmf: SortedPmf, k: int, alpha: "Alpha | float | str"
) -> int:
    """Rank where deterministic guessing hands over to randomized coverage.

    Returns the smallest 1-based rank ``r`` in [1, k] at which spreading
    the remaining ``k - r + 1`` guesses over the tail keeps every coverage
    entry at most one.  Infinite order returns ``k`` by convention (the
    top-k indicator is the limiting optimum).  Requires ``k`` below the
    positive support size.
    """
    if not isinstance(sorted_pmf, SortedPmf):
        sorted_pmf = SortedPmf.from_pmf(sorted_pmf)
    a = as_alpha(alpha)
    k = _check_budget(k, sorted_pmf.support_size)
    if k >= sorted_pmf.support_size:
        raise BudgetError(
            f"budget {k} not below positive support {sorted_pmf.support_size}"
        )
    if a.is_inf:
        return k
    logp = np.log(sorted_pmf.probs)
    a_logp = a.value * logp
    return _threshold_from_logs(a_logp, _suffix_logsumexp(a_logp), k)


def _solve_sorted(
    sp: SortedPmf, k: int, a: Alpha
) -> tuple[float, int, np.ndarray, float]:
    """Core engine on stripped, sorted probabilities with k < support."""
    p = sp.probs
    n = p.size
    if a.is_inf:
        t = np.zeros(n)
        t[:k] = 1.0
        value = max(1.0 - float(p[:k].sum()), 0.0)
        return value, k, t, float(p[k - 1])

    logp = np.log(p)
    a_logp = a.value * logp
    suffix = _suffix_logsumexp(a_logp)
    rank = _threshold_from_logs(a_logp, suffix, k)
    s0 = rank - 1  # 0-based start of the randomized tail
    m = k - s0  # guesses left for the tail
    log_t_tail = math.log(m) + a_logp[s0:] - suffix[s0]
    t = np.ones(n)
    t[s0:] = np.exp(np.minimum(log_t_tail, 0.0))
    multiplier = math.exp((suffix[s0] - math.log(m)) / a.value)

    if a.is_one:
        # expected log-loss of the coverage: sum over the tail of p * ln(1/t)
        value = float(np.dot(p[s0:], -log_t_tail))
    else:
        beta = (a.value - 1.0) / a.value
        value = -float(np.dot(p[s0:], np.expm1(beta * log_t_tail))) / beta
    return value, rank, t, multiplier


def minimal_loss(
    pmf: "Pmf | object", k: int, alpha: "Alpha | float | str"
) -> LossReport:
    """Minimal expected loss over all strategies making ``k`` distinct guesses.

    Parameters
    ----------
    pmf : Pmf or array-like
        Distribution of the secret symbol.
    k : int
        Number of guesses, at least one.
    alpha : Alpha or float or str
        Loss order.  Order one evaluates the expected log-loss of the
        optimal coverage, infinite order the probability of missing the
        top-k set, and finite orders the tilted-tail closed form.

    Returns
    -------
    LossReport
        Value, threshold rank, coverage over the original indices (zero
        atoms get coverage zero), order, and the stationarity multiplier.

    Notes
    -----
    When the budget covers the whole positive support the loss is zero and
    every positive atom gets coverage one.
    """
    pmf = as_pmf(pmf)
    a = as_alpha(alpha)
    sp = SortedPmf.from_pmf(pmf)
    k = _check_budget(k, sp.support_size)

    if k >= sp.support_size:
        t_sorted = np.ones(sp.support_size)
        value, rank, multiplier = 0.0, sp.support_size, float(sp.probs[-1])
    else:
        value, rank, t_sorted, multiplier = _solve_sorted(sp, k, a)

    t = np.zeros(sp.size)
    t[sp.perm] = t_sorted
    return LossReport(
        value=value,
        threshold_rank=rank,
        coverage=CoverageVector(t, k),
        alpha=a,
        multiplier=multiplier,
    )


def optimal_coverage(
    pmf: "Pmf | object", k: int, alpha: "Alpha | float | str"
) -> CoverageVector:
    """Coverage vector attaining the minimal expected loss."""
    return minimal_loss(pmf, k, alpha).coverage


def minimal_loss_conditional(
    joint: "JointPmf | object", k: int, alpha: "Alpha | float | str"
) -> tuple[float, list[LossReport | None]]:
    """Minimal expected loss when the adversary observes the side variable.

    Decomposes over the observation: each column is solved on its own and
    the values are averaged under the observation's marginal.  Columns of
    probability zero are skipped and reported as None.  Summation follows
    ascending column order, so the result is deterministic.
    """
    joint = as_joint(joint)
    a = as_alpha(alpha)
    py = joint.probs.sum(axis=0)
    total = 0.0
    reports: list[LossReport | None] = []
    for y in range(joint.probs.shape[1]):
        if py[y] <= 0.0:
            reports.append(None)
            continue
        rep = minimal_loss(conditional_pmf(joint, y), k, a)
        reports.append(rep)
        total += float(py[y]) * rep.value
    return total, reports
