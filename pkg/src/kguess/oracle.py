"""Independent numerical verification of the closed forms.

Two oracles live here.  ``minimize_expected_loss`` solves the coverage
optimization directly, as a convex program over the capped simplex
{ t : 0 <= t_i <= 1, sum t_i = k }, using projected descent with a
diagonal preconditioner and a duality-gap stopping certificate.  It never
looks at the threshold structure the closed form exploits, so agreement
between the two is real evidence.

``lp_feasible`` decides, in exact rational arithmetic, whether a coverage
vector is a nonnegative combination of k-subset indicator columns, and on
rejection produces a separating vector certifying the answer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    Alpha,
    BudgetError,
    ConvergenceError,
    DomainError,
    KGuessError,
    Pmf,
    SizeError,
    as_alpha,
    as_pmf,
)

__all__ = [
    "CappedSimplex",
    "OracleSolution",
    "FeasibilityResult",
    "project_capped_simplex",
    "minimize_expected_loss",
    "lp_feasible",
]

_SCALE = 10**9  # common denominator for exact feasibility inputs
_MAX_COLUMNS = 100_000
_MAX_ROWS = 20


@dataclass(frozen=True)
class CappedSimplex:
    """The feasible set { t in R^n : 0 <= t_i <= 1, sum t_i = k }."""

    n: int
    k: int

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise DomainError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


@dataclass(frozen=True, eq=False)
class OracleSolution:
    """Feasible point, objective value, and the certified optimality gap."""

    value: float
    t: np.ndarray
    gap: float
    iterations: int


def _project(v: np.ndarray, k: int, weights: np.ndarray | None = None) -> np.ndarray:
    """Euclidean (optionally diagonally weighted) projection onto the cap.

    The projection has the form t_i = clip(v_i - lam / w_i, 0, 1) where the
    scalar lam makes the coordinates sum to k.  The sum is nonincreasing in
    lam, so bisection on a bracketing interval converges unconditionally.
    """
    w = np.ones_like(v) if weights is None else weights
    lo = float(np.min(w * (v - 1.0))) - 1.0
    hi = float(np.max(w * v)) + 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        total = float(np.sum(np.clip(v - mid / w, 0.0, 1.0)))
        if total > k:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, abs(hi)):
            break
    t = np.clip(v - 0.5 * (lo + hi) / w, 0.0, 1.0)
    # polish the residual left by the bisection: spread it over the free
    # coordinates (a local refinement of the same multiplier)
    for _ in range(4):
        residual = k - float(t.sum())
        if abs(residual) <= 1e-15 * k:
            break
        free = (t < 1.0) if residual > 0.0 else (t > 0.0)
        if not np.any(free):
            break
        winv = 1.0 / w[free]
        t[free] = np.clip(t[free] + residual * winv / winv.sum(), 0.0, 1.0)
    return t


def project_capped_simplex(v: "np.ndarray | object", domain: CappedSimplex) -> np.ndarray:
    """Closest point of the capped simplex to ``v`` in Euclidean norm."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != domain.n:
        raise DomainError(f"expected a vector of length {domain.n}")
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project a non-finite vector")
    t = _project(v, domain.k)
    if abs(float(t.sum()) - domain.k) > 1e-10:
        raise KGuessError("projection failed to hit the budget; this is a bug")
    return t


def minimize_expected_loss(
    pmf: "Pmf | object",
    k: int,
    alpha: "Alpha | float | str",
    tol: float = 1e-9,
    rel_tol: float | None = None,
    max_iter: int = 100_000,
) -> OracleSolution:
    """Minimize the expected loss over the capped simplex numerically.

    Parameters
    ----------
    pmf, k, alpha
        Instance to solve; the order must be finite and the budget below
        the positive support size.
    tol : float
        Absolute certificate target: iteration stops once the linearized
        duality gap (an upper bound on objective suboptimality) drops
        below it.
    rel_tol : float, optional
        Additional relative target; when given, a gap below
        rel_tol * |objective| also stops the iteration.
    max_iter : int
        Iteration cap; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    OracleSolution
        Feasible coverage over the original indices, its objective value,
        the final certified gap, and the iteration count.

    Notes
    -----
    Descent is monotone by construction (backtracking halves the step until
    the objective decreases), starting from the interior point k/n.  The
    stopping certificate is the smaller of two convexity bounds: the
    linearization gap against the best vertex (unit coverage on the k most
    attractive coordinates) and the weak-duality floor from box-minimizing
    the Lagrangian.  Neither relies on structural knowledge of the optimum.
    """
    pmf = as_pmf(pmf)
    a = as_alpha(alpha)
    if a.is_inf:
        raise DomainError("numerical oracle handles finite orders only")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise DomainError(f"guess budget must be a positive integer, got {k!r}")
    if tol <= 0.0:
        raise DomainError("tolerance must be positive")
    pos = np.flatnonzero(pmf.probs > 0.0)
    if k >= pos.size:
        raise BudgetError(f"budget {k} not below positive support {pos.size}")
    p = pmf.probs[pos]
    n = p.size
    av = a.value
    # iterates are kept above a small floor so t ** (-1/a) stays finite;
    # the floor must sit well below k/n or it would distort the problem
    floor = 1e-18 if av >= 1.0 else 10.0 ** (-250.0 * av)
    if floor >= 0.25 * k / n:
        raise DomainError(
            f"order {av:g} is too small for a float64 descent oracle at "
            f"support size {n}; the gradient would overflow"
        )

    beta = 0.0 if a.is_one else (av - 1.0) / av

    if a.is_one:
        def objective(t: np.ndarray) -> float:
            return -float(np.dot(p, np.log(t)))
    else:
        def objective(t: np.ndarray) -> float:
            return -float(np.dot(p, np.expm1(beta * np.log(t)))) / beta

    def gradient(t: np.ndarray) -> np.ndarray:
        return -p * t ** (-1.0 / av)

    ln_p = np.log(p)

    def _piece_values(ln_s: np.ndarray) -> np.ndarray:
        if beta == 0.0:
            return -p * ln_s
        return -(p / beta) * np.expm1(beta * ln_s)

    def _dual_floor() -> float:
        """Weak-duality lower bound on the constrained minimum.

        For any multiplier lam > 0, minimizing f(s) + lam * (sum(s) - k)
        over the unit box splits per coordinate; elementary calculus puts
        each 1-d minimizer at min(1, (p_i / lam) ** a).  Bisection picks
        the lam whose box minimizer spends the budget, which makes the
        bound tight, but any lam yields a valid floor.
        """
        lo = math.log(float(-np.partition(-p, k - 1)[k - 1]))
        hi = math.log(float(p.max())) + math.log(n / k) / av
        if hi <= lo:
            hi = lo + 1e-9
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            spent = float(np.exp(np.minimum(av * (ln_p - mid), 0.0)).sum())
            if spent >= k:
                lo = mid
            else:
                hi = mid
        lam = math.exp(0.5 * (lo + hi))
        ln_s = np.minimum(av * (ln_p - math.log(lam)), 0.0)
        spent = float(np.exp(ln_s).sum())
        return float(_piece_values(ln_s).sum()) + lam * (spent - k)

    dual_floor: float | None = None

    def certified_gap(t: np.ndarray, f_t: float, g: np.ndarray) -> float:
        """Upper bound on f(t) - min f, from convexity alone.

        The plain linearization gap (minimized over the feasible set by
        loading the k smallest gradient coordinates) certifies well in the
        interior but turns loose when optimal coordinates sit near zero,
        so the duality floor backs it up.
        """
        nonlocal dual_floor
        linear = float(np.dot(g, t) - np.partition(g, k - 1)[:k].sum())
        if linear <= 0.0:
            return max(linear, 0.0)
        if dual_floor is None:
            dual_floor = _dual_floor()
        return min(linear, max(f_t - dual_floor, 0.0))

    t = np.full(n, k / n)
    f_t = objective(t)
    gap = certified_gap(t, f_t, gradient(t))
    step = 1.0
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if gap <= tol or (rel_tol is not None and gap <= rel_tol * abs(f_t)):
            break
        g = gradient(t)
        curvature = np.clip(p * (1.0 / av) * t ** (-1.0 - 1.0 / av), 1e-8, 1e18)

        def try_steps(candidate_at) -> bool:
            """Backtracking line search over one direction family."""
            nonlocal t, f_t, gap, step
            size = 1.0
            for _ in range(60):
                cand = np.maximum(candidate_at(size), floor)
                f_cand = objective(cand)
                # monotone acceptance; once objective differences fall
                # below float resolution (a few ulps), a strictly
                # shrinking certificate breaks the tie
                slack = 4.0 * np.finfo(np.float64).eps * max(1.0, abs(f_t))
                if f_cand < f_t:
                    accept = True
                elif f_cand <= f_t + slack:
                    accept = certified_gap(cand, f_cand, gradient(cand)) < gap
                else:
                    accept = False
                if accept:
                    t, f_t = cand, f_cand
                    gap = certified_gap(t, f_t, gradient(t))
                    return True
                size *= 0.5
            return False

        # preconditioned first; where the curvature clip saturates (floored
        # coordinates) that move degenerates, so two scale-free directions
        # back it up before the loop may declare a stall
        scale = max(1.0, float(np.max(np.abs(g))))
        vertex = np.zeros(n)
        vertex[np.argpartition(g, k - 1)[:k]] = 1.0
        moved = (
            try_steps(
                lambda s: _project(t - step * s * g / curvature, k, weights=curvature)
            )
            or try_steps(lambda s: _project(t - s * g / scale, k))
            or try_steps(lambda s: t + s * (vertex - t))
        )
        if moved:
            step = min(step * 2.0, 1.0)
        else:
            # stationary at float resolution; the gap decides the verdict
            break
    if gap > tol and (rel_tol is None or gap > rel_tol * abs(f_t)):
        raise ConvergenceError(
            f"no certificate below tol after {iteration} iterations (gap {gap:.3e})"
        )

    t_full = np.zeros(pmf.n)
    t_full[pos] = t
    t_full.flags.writeable = False
    return OracleSolution(value=f_t, t=t_full, gap=gap, iterations=iteration)


# ---------------------------------------------------------------------------
# exact feasibility of coverage vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    """Outcome of the exact feasibility test.

    On rejection, ``certificate`` holds a rational separating vector y with
    sum(y over S) >= 0 for every k-subset S and y . t < 0, and
    ``certificate_valid`` records that both facts were re-checked exactly.
    On acceptance, ``witness`` lists (subset, weight) pairs whose indicator
    combination reproduces the scaled input exactly.
    """

    feasible: bool
    certificate: tuple[Fraction, ...] | None = None
    certificate_valid: bool | None = None
    witness: tuple[tuple[tuple[int, ...], Fraction], ...] | None = None

    def __bool__(self) -> bool:
        return self.feasible


def _phase_one(
    columns: list[tuple[int, ...]], b: list[Fraction], m: int
) -> tuple[bool, list[Fraction], list[tuple[int, Fraction]]]:
    """Exact phase-one simplex for A q = b, q >= 0 with incidence columns.

    Returns (feasible, y, basic) where y is the final simplex multiplier
    vector in the sign-flipped space and basic lists (column index, value)
    pairs of the final basis restricted to real columns.
    """
    sign = [1 if bi >= 0 else -1 for bi in b]
    x_b = [abs(bi) for bi in b]
    # basis entries: column index j in [0, ncols) or artificial m-coded as
    # ncols + row
    ncols = len(columns)
    basis = [ncols + i for i in range(m)]
    b_inv = [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    col_sets = [frozenset(c) for c in columns]

    for _ in range(200_000):
        # simplex multipliers for phase-one costs (1 on artificials)
        y = [Fraction(0)] * m
        for i in range(m):
            if basis[i] >= ncols:
                row = b_inv[i]
                for r in range(m):
                    y[r] += row[r]
        entering = -1
        for j in range(ncols):
            rc = Fraction(0)
            for r in col_sets[j]:
                rc -= sign[r] * y[r]
            if rc < 0:
                entering = j
                break
        if entering < 0:
            objective = sum(x_b[i] for i in range(m) if basis[i] >= ncols)
            basic = [
                (basis[i], x_b[i]) for i in range(m) if basis[i] < ncols
            ]
            return objective == 0, y, basic
        d = [
            sum(b_inv[i][r] * sign[r] for r in col_sets[entering])
            for i in range(m)
        ]
        ratio = None
        leave = -1
        for i in range(m):
            if d[i] > 0:
                r = x_b[i] / d[i]
                if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leave]):
                    ratio, leave = r, i
        if leave < 0:
            raise KGuessError("phase-one simplex unbounded; this is a bug")
        piv = d[leave]
        b_inv[leave] = [v / piv for v in b_inv[leave]]
        x_b[leave] = x_b[leave] / piv
        for i in range(m):
            if i != leave and d[i] != 0:
                di = d[i]
                b_inv[i] = [u - di * v for u, v in zip(b_inv[i], b_inv[leave])]
                x_b[i] -= di * x_b[leave]
        basis[leave] = entering
    raise ConvergenceError("phase-one simplex exceeded its iteration cap")


def lp_feasible(t: "np.ndarray | object", k: int) -> FeasibilityResult:
    """Exact test that ``t`` is a nonnegative combination of k-subset columns.

    The input is snapped to the rational grid with denominator 10**9 and the
    linear system is solved in exact arithmetic, so the verdict carries no
    floating-point doubt.  Limited to n <= 20 and at most 10**5 subsets.
    Under the usual normalization sum(t) = k, feasibility here coincides
    with coverage admissibility.
    """
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("feasibility test needs a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("feasibility test needs finite entries")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise DomainError(f"guess budget must be a positive integer, got {k!r}")
    n = arr.size
    if n > _MAX_ROWS:
        raise SizeError(f"exact feasibility limited to n <= {_MAX_ROWS}, got {n}")
    ncols = math.comb(n, k)
    if ncols > _MAX_COLUMNS:
        raise SizeError(
            f"exact feasibility limited to {_MAX_COLUMNS} subsets, got {ncols}"
        )
    b = [Fraction(round(float(v) * _SCALE), _SCALE) for v in arr]
    columns = list(itertools.combinations(range(n), k))
    if ncols == 0:
        feasible = all(bi == 0 for bi in b)
        return FeasibilityResult(feasible=feasible)

    sign = [1 if bi >= 0 else -1 for bi in b]
    feasible, y_flipped, basic = _phase_one(columns, b, n)

    if feasible:
        witness = tuple(
            (columns[j], val) for j, val in sorted(basic) if val != 0
        )
        # re-derive the right-hand side from the witness, exactly
        recon = [Fraction(0)] * n
        for subset, weight in witness:
            for i in subset:
                recon[i] += weight
        if recon != b:
            raise KGuessError("feasibility witness failed verification; bug")
        return FeasibilityResult(feasible=True, witness=witness)

    # map the separating vector back through the row sign flips
    y = [-y_flipped[i] * sign[i] for i in range(n)]
    # y . S >= 0 for every k-subset S iff the k smallest entries sum >= 0
    smallest = sorted(y)[:k]
    cert_ok = sum(smallest) >= 0 and sum(yi * bi for yi, bi in zip(y, b)) < 0
    if not cert_ok:
        raise KGuessError("infeasibility certificate failed verification; bug")
    return FeasibilityResult(
        feasible=False, certificate=tuple(y), certificate_valid=True
    )
