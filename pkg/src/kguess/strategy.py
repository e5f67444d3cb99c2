"""Turning coverage vectors into explicit randomized guess strategies.

A coverage vector says how often each symbol should appear among the k
guesses; this module checks that such a vector is realizable, builds an
explicit finite mixture of k-subsets achieving it, draws guesses from a
mixture, and evaluates the expected loss any mixture incurs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AdmissibilityError,
    Alpha,
    DomainError,
    KGuessError,
    Pmf,
    SUM_TOL,
    as_alpha,
    as_pmf,
)
from .guessing import CoverageVector

__all__ = [
    "Admissibility",
    "SubsetMixture",
    "is_admissible",
    "realize_coverage",
    "sample_guesses",
    "strategy_loss",
]

_BOUND_SLACK = 1e-12
_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class Admissibility:
    """Verdict on whether a coverage vector is realizable with budget k.

    ``violation`` is ``"bounds"`` (with the first offending ``index``) when
    an entry leaves [0, 1], or ``"sum"`` when the total misses the budget.
    """

    ok: bool
    violation: str | None = None
    index: int | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def is_admissible(values: "np.ndarray | object", k: int) -> Admissibility:
    """Check realizability: entries in [0, 1] and total equal to ``k``.

    Bounds carry a slack of 1e-12, the sum a slack of 1e-9.  Those two
    conditions characterize exactly the vectors obtainable as per-symbol
    inclusion probabilities of k-subset mixtures.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("admissibility needs a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("admissibility needs finite entries")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise DomainError(f"guess budget must be a positive integer, got {k!r}")
    bad = np.flatnonzero((arr < -_BOUND_SLACK) | (arr > 1.0 + _BOUND_SLACK))
    if bad.size:
        i = int(bad[0])
        return Admissibility(
            ok=False,
            violation="bounds",
            index=i,
            detail=f"entry {i} is {float(arr[i]):g}, outside [0, 1]",
        )
    total = float(arr.sum())
    if abs(total - k) > SUM_TOL:
        return Admissibility(
            ok=False,
            violation="sum",
            detail=f"entries sum to {total!r}, need {k}",
        )
    return Admissibility(ok=True)


@dataclass(frozen=True, eq=False)
class SubsetMixture:
    """A finite mixture of guess sets, each of the same size.

    ``subsets[j]`` lists the symbol indices of component ``j`` (distinct
    within a component) and ``weights[j]`` its probability.  Weights are
    positive and sum to one within 1e-9 (renormalized exactly on
    construction).
    """

    subsets: tuple[tuple[int, ...], ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        if not self.subsets:
            raise DomainError("mixture needs at least one component")
        k = len(self.subsets[0])
        cleaned = []
        for s in self.subsets:
            s = tuple(int(i) for i in s)
            if len(s) != k or len(set(s)) != k or k == 0:
                raise DomainError(
                    "every component must hold the same number of distinct indices"
                )
            if min(s) < 0:
                raise DomainError("subset members must be nonnegative indices")
            cleaned.append(s)
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(cleaned),):
            raise DomainError("one weight per component required")
        if np.any(~np.isfinite(w)) or np.any(w <= 0.0):
            raise DomainError("component weights must be positive")
        total = float(w.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise DomainError(f"weights sum to {total!r}, outside 1 +/- {SUM_TOL}")
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "subsets", tuple(cleaned))
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return len(self.subsets[0])

    @property
    def n_components(self) -> int:
        return len(self.subsets)

    def coverage(self, n: int) -> np.ndarray:
        """Per-symbol inclusion probability induced over alphabet size n."""
        out = np.zeros(n)
        for subset, weight in zip(self.subsets, self.weights):
            for i in subset:
                if i >= n:
                    raise DomainError(
                        f"subset member {i} outside alphabet of size {n}"
                    )
                out[i] += weight
        return out


def realize_coverage(cov: CoverageVector) -> SubsetMixture:
    """Build an explicit mixture whose inclusion probabilities equal ``cov``.

    Walks the cumulative sums of the coverage entries (largest first) and
    cuts the unit interval at their fractional parts; each cell then picks
    one symbol per whole-number window, which yields at most n distinct
    subsets whose weighted union reproduces the coverage exactly.  Symbols
    with zero coverage never appear.  The output is deterministic: cells
    are emitted left to right and duplicate subsets are merged.
    """
    if not isinstance(cov, CoverageVector):
        raise DomainError("realize_coverage expects a CoverageVector")
    k = cov.k
    verdict = is_admissible(cov.t, k)
    if not verdict:
        raise AdmissibilityError(f"coverage not realizable: {verdict.detail}")

    support = np.flatnonzero(cov.t > 0.0)
    order = support[np.argsort(-cov.t[support], kind="stable")]
    t = np.clip(cov.t[order], 0.0, 1.0)
    t = t * (k / float(t.sum()))
    cums = np.cumsum(t)
    cums[-1] = float(k)

    fracs = cums - np.floor(cums)
    fracs[fracs >= 1.0 - _MERGE_TOL] = 0.0
    cuts = np.unique(np.concatenate(([0.0], fracs)))
    keep = np.concatenate(([True], np.diff(cuts) > _MERGE_TOL))
    cuts = cuts[keep]
    edges = np.append(cuts, 1.0)

    offsets = np.arange(k, dtype=np.float64)
    collected: dict[tuple[int, ...], float] = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        width = hi - lo
        if width <= _MERGE_TOL:
            continue
        u = 0.5 * (lo + hi)
        ranks = np.searchsorted(cums, u + offsets, side="right")
        ranks = np.minimum(ranks, len(order) - 1)
        subset = tuple(int(i) for i in order[ranks])
        if len(set(subset)) != k:
            raise KGuessError("decomposition produced a repeated guess; bug")
        collected[subset] = collected.get(subset, 0.0) + width

    mix = SubsetMixture(
        subsets=tuple(collected.keys()),
        weights=np.fromiter(collected.values(), dtype=np.float64),
    )
    induced = mix.coverage(cov.t.size)
    if float(np.max(np.abs(induced - cov.t))) > SUM_TOL:
        raise KGuessError("decomposition failed to reproduce the coverage; bug")
    return mix


def sample_guesses(
    mix: SubsetMixture,
    seed: "int | np.random.Generator",
    pmf: "Pmf | object | None" = None,
) -> list[int]:
    """Draw one guess set from the mixture.

    Picks a component with probability equal to its weight using the seeded
    generator and returns its indices.  Components are stored most-probable
    symbol first when built by :func:`realize_coverage`; passing ``pmf``
    re-sorts the drawn set by decreasing probability (ties by index).
    Identical seeds give identical draws.
    """
    rng = np.random.default_rng(seed)
    cum = np.cumsum(mix.weights)
    j = int(np.searchsorted(cum, rng.random(), side="right"))
    subset = mix.subsets[min(j, mix.n_components - 1)]
    if pmf is not None:
        p = as_pmf(pmf).probs
        subset = tuple(sorted(subset, key=lambda i: (-p[i], i)))
    return list(subset)


def strategy_loss(
    mix: SubsetMixture, pmf: "Pmf | object", alpha: "Alpha | float | str"
) -> float:
    """Expected loss the mixture incurs against the given distribution.

    Charges each symbol the loss of its inclusion probability, weighted by
    its mass.  Symbols of positive mass that no component ever guesses make
    the result infinite for orders at most one, matching the loss at zero
    coverage.
    """
    pmf = as_pmf(pmf)
    a = as_alpha(alpha)
    for subset in mix.subsets:
        if max(subset) >= pmf.n:
            raise DomainError(
                f"subset member {max(subset)} outside alphabet of size {pmf.n}"
            )
    cover = mix.coverage(pmf.n)
    p = pmf.probs
    pos = p > 0.0
    if a.is_inf:
        losses = 1.0 - cover[pos]
    elif a.is_one:
        with np.errstate(divide="ignore"):
            losses = -np.log(cover[pos])
    else:
        beta = (a.value - 1.0) / a.value
        with np.errstate(divide="ignore"):
            logc = np.log(cover[pos])
        if a.value > 1.0:
            losses = -np.expm1(beta * logc) / beta
        else:
            # at zero coverage the tail term blows up; expm1(inf) handles it
            losses = np.where(
                cover[pos] > 0.0, -np.expm1(beta * logc) / beta, math.inf
            )
    return float(np.dot(p[pos], losses))
