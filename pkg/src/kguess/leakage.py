"""Information leakage measured through the multi-guess adversary.

How much easier does observing a side variable make the guessing game?
The measure compares the adversary's best attainable expectation with and
without the observation, on a logarithmic scale calibrated by the loss
order.  A sufficient flatness condition on tilted distributions tells when
extra guesses do not change the measured leakage at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Alpha,
    DomainError,
    JointPmf,
    KGuessError,
    Pmf,
    as_alpha,
    as_joint,
    as_pmf,
    conditional_pmf,
    tilted,
)
from .guessing import minimal_loss

__all__ = [
    "RobustnessResult",
    "LeakageReport",
    "max_expectation",
    "alpha_leakage",
    "robustness_condition",
]

_CLAMP = 1e-9


@dataclass(frozen=True)
class RobustnessResult:
    """Whether every tilted entry (marginal and conditionals) is <= 1/k.

    When the condition holds, the leakage measured with k guesses equals
    the single-guess leakage.  ``location`` points at the largest tilted
    entry: ("marginal", x) or ("conditional", y, x).
    """

    ok: bool
    max_entry: float
    threshold: float
    location: tuple

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class LeakageReport:
    value: float
    k: int
    alpha: Alpha
    numerator_exponent: float
    denominator_exponent: float
    robust: bool

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v):
            raise KGuessError("leakage computed as NaN")
        if v < 0.0:
            if v < -_CLAMP:
                raise KGuessError(f"leakage came out negative: {v!r}")
            v = 0.0
        object.__setattr__(self, "value", v)


def max_expectation(
    pmf: "Pmf | object", k: int, alpha: "Alpha | float | str"
) -> float:
    """Best attainable expected score of a k-guess strategy.

    Equals one minus the minimal expected loss rescaled by (a - 1) / a.
    Only finite orders other than one are in this functional's contract.
    For a point mass it is one regardless of k; for a uniform distribution
    over n symbols it is (k / n) ** ((a - 1) / a).
    """
    a = as_alpha(alpha)
    if a.is_one or a.is_inf:
        raise DomainError("max expectation requires a finite order other than one")
    report = minimal_loss(pmf, k, a)
    beta = (a.value - 1.0) / a.value
    return 1.0 - beta * report.value


def alpha_leakage(
    joint: "JointPmf | object", k: int, alpha: "Alpha | float | str"
) -> LeakageReport:
    """Leakage about X from observing Y, measured by a k-guess adversary.

    The value is (a / (a - 1)) * ln(N / D) where N averages the per-column
    best expectations under the observation's marginal and D is the best
    expectation with no observation.  Nonnegative; tiny negative rounding
    (within 1e-9) is clamped to zero.  Requires a finite order other than
    one.
    """
    joint = as_joint(joint)
    a = as_alpha(alpha)
    if a.is_one or a.is_inf:
        raise DomainError("leakage requires a finite order other than one")
    py = joint.probs.sum(axis=0)
    numerator = 0.0
    for y in range(joint.probs.shape[1]):
        if py[y] <= 0.0:
            continue
        numerator += float(py[y]) * max_expectation(conditional_pmf(joint, y), k, a)
    denominator = max_expectation(joint.marginal_x(), k, a)
    value = a.value / (a.value - 1.0) * (math.log(numerator) - math.log(denominator))
    robust = robustness_condition(joint, k, a).ok
    return LeakageReport(
        value=value,
        k=int(k),
        alpha=a,
        numerator_exponent=math.log(numerator),
        denominator_exponent=math.log(denominator),
        robust=robust,
    )


def robustness_condition(
    joint: "JointPmf | object", k: int, alpha: "Alpha | float | str"
) -> RobustnessResult:
    """Check the flatness condition under which extra guesses change nothing.

    Requires every entry of the tilted marginal of X and of each tilted
    conditional (columns of positive mass) to be at most 1/k, with a slack
    of 1e-12.  Finite orders only.
    """
    joint = as_joint(joint)
    a = as_alpha(alpha)
    if a.is_inf:
        raise DomainError("robustness condition requires a finite order")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise DomainError(f"guess budget must be a positive integer, got {k!r}")
    threshold = 1.0 / k
    best = -1.0
    where: tuple = ()
    marg = tilted(joint.marginal_x(), a).probs
    x = int(np.argmax(marg))
    best, where = float(marg[x]), ("marginal", x)
    py = joint.probs.sum(axis=0)
    for y in range(joint.probs.shape[1]):
        if py[y] <= 0.0:
            continue
        cond = tilted(conditional_pmf(joint, y), a).probs
        x = int(np.argmax(cond))
        if float(cond[x]) > best:
            best, where = float(cond[x]), ("conditional", y, x)
    return RobustnessResult(
        ok=best <= threshold + 1e-12,
        max_entry=best,
        threshold=threshold,
        location=where,
    )
