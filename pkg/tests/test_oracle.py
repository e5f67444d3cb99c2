"""Tests for the numerical oracle and the exact feasibility test."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kguess.core import (
    Alpha,
    BudgetError,
    ConvergenceError,
    DomainError,
    Pmf,
    SizeError,
)
from kguess.guessing import minimal_loss
from kguess.oracle import (
    CappedSimplex,
    lp_feasible,
    minimize_expected_loss,
    project_capped_simplex,
)

pmf_raws = st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=3, max_size=9)
orders = st.sampled_from([0.3, 0.5, 0.9, 1.5, 2.0, 5.0, 20.0])


def make_pmf(raw: list[float]) -> Pmf:
    arr = np.array(raw, dtype=float)
    return Pmf(arr / arr.sum())


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


class TestProjection:
    def test_corner_case(self):
        t = project_capped_simplex(np.array([2.0, 2.0, -1.0]), CappedSimplex(3, 2))
        assert t.tolist() == pytest.approx([1.0, 1.0, 0.0], abs=1e-12)

    def test_already_feasible_is_fixed_point(self):
        v = np.array([0.9, 0.5, 0.6])
        t = project_capped_simplex(v, CappedSimplex(3, 2))
        assert t == pytest.approx(v, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            project_capped_simplex(np.array([0.5, 0.5]), CappedSimplex(3, 2))
        with pytest.raises(DomainError):
            project_capped_simplex(np.array([np.nan, 0.5]), CappedSimplex(2, 1))

    @given(
        st.lists(st.floats(min_value=-5, max_value=5), min_size=2, max_size=12),
        st.integers(min_value=1, max_value=11),
    )
    @settings(max_examples=200)
    def test_kkt_characterization(self, raw, k):
        v = np.array(raw)
        if k > v.size:
            return
        t = project_capped_simplex(v, CappedSimplex(v.size, k))
        assert abs(t.sum() - k) <= 1e-10
        assert np.all(t >= 0.0) and np.all(t <= 1.0)
        interior = (t > 1e-9) & (t < 1.0 - 1e-9)
        if np.any(interior):
            # one shared shift on all interior coordinates
            lam = v[interior] - t[interior]
            assert np.max(lam) - np.min(lam) <= 1e-8
            shift = float(np.mean(lam))
            rebuilt = np.clip(v - shift, 0.0, 1.0)
            assert t == pytest.approx(rebuilt, abs=1e-7)


# ---------------------------------------------------------------------------
# minimize_expected_loss
# ---------------------------------------------------------------------------


class TestDescentOracle:
    def test_uniform_four_frozen(self):
        sol = minimize_expected_loss(Pmf.uniform(4), 2, 2, tol=1e-12)
        assert sol.value == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-10)
        assert sol.t == pytest.approx([0.5] * 4, abs=1e-6)
        assert sol.gap <= 1e-12

    def test_main_example(self):
        sol = minimize_expected_loss(Pmf([0.7, 0.2, 0.1]), 2, 2, tol=1e-12)
        assert sol.value == pytest.approx(0.15278640450004208, abs=1e-10)
        assert sol.t == pytest.approx([1.0, 0.8, 0.2], abs=1e-5)

    def test_order_one(self):
        sol = minimize_expected_loss(Pmf.uniform(4), 2, 1, tol=1e-12)
        assert sol.value == pytest.approx(math.log(2.0), abs=1e-10)

    def test_zeros_are_stripped(self):
        sol = minimize_expected_loss(Pmf([0.7, 0.0, 0.2, 0.1]), 2, 2, tol=1e-12)
        assert sol.t[1] == 0.0

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            minimize_expected_loss(Pmf.uniform(4), 2, Alpha.infinity())
        with pytest.raises(BudgetError):
            minimize_expected_loss(Pmf.uniform(4), 4, 2)
        with pytest.raises(DomainError):
            minimize_expected_loss(Pmf.uniform(4), 2, 2, tol=0.0)
        with pytest.raises(DomainError):
            minimize_expected_loss(Pmf.uniform(4), 0, 2)

    def test_refuses_orders_beyond_float_range(self):
        with pytest.raises(DomainError):
            minimize_expected_loss(Pmf.uniform(200), 1, 0.01)

    def test_non_convergence_is_reported(self):
        with pytest.raises(ConvergenceError):
            minimize_expected_loss(
                Pmf([0.4, 0.3, 0.2, 0.1]), 2, 2, tol=1e-300, max_iter=1
            )

    @given(pmf_raws, orders)
    @settings(max_examples=60, deadline=None)
    def test_matches_closed_form(self, raw, alpha):
        pmf = make_pmf(raw)
        k = max(1, pmf.support_size // 2)
        if k >= pmf.support_size:
            return
        closed = minimal_loss(pmf, k, alpha)
        sol = minimize_expected_loss(pmf, k, alpha, tol=1e-13)
        denom = max(abs(closed.value), 1e-12)
        assert abs(sol.value - closed.value) / denom <= 1e-6
        assert np.max(np.abs(sol.t - closed.coverage.t)) <= 1e-4


# ---------------------------------------------------------------------------
# lp_feasible
# ---------------------------------------------------------------------------


class TestLpFeasible:
    def test_optimal_coverage_is_feasible(self):
        result = lp_feasible(np.array([1.0, 0.8, 0.2]), 2)
        assert result.feasible
        assert bool(result)
        assert result.witness is not None

    def test_witness_reconstructs_exactly(self):
        result = lp_feasible(np.array([1.0, 0.8, 0.2]), 2)
        total = {}
        for subset, weight in result.witness:
            for i in subset:
                total[i] = total.get(i, Fraction(0)) + weight
        assert total[0] == Fraction(1)
        assert total[1] == Fraction(8, 10)
        assert total[2] == Fraction(2, 10)

    def test_sum_deficit_rejected_with_certificate(self):
        result = lp_feasible(np.array([0.5, 0.4]), 2)
        assert not result.feasible
        assert result.certificate_valid
        y = result.certificate
        b = [Fraction(1, 2), Fraction(2, 5)]
        assert sum(sorted(y)[:2]) >= 0
        assert sum(yi * bi for yi, bi in zip(y, b)) < 0

    def test_overweight_entry_rejected(self):
        result = lp_feasible(np.array([1.5, 0.5]), 2)
        assert not result.feasible
        assert result.certificate_valid

    def test_budget_above_size_needs_zero(self):
        assert lp_feasible(np.zeros(2), 3).feasible
        assert not lp_feasible(np.array([0.5, 0.5]), 3).feasible

    def test_size_guard(self):
        with pytest.raises(SizeError):
            lp_feasible(np.full(30, 0.5), 15)

    def test_capped_simplex_type(self):
        cs = CappedSimplex(4, 2)
        assert cs.n == 4 and cs.k == 2
        with pytest.raises(DomainError):
            CappedSimplex(2, 3)

    @given(
        st.integers(min_value=2, max_value=7),
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_agrees_with_box_sum_test_on_slice(self, n, k, seed):
        """On vectors with the right total, the two tests must agree."""
        if k > n:
            return
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, 1.0, size=n)
        t *= k / t.sum()
        if np.any(t > 1.0):
            # renormalization pushed an entry over the cap: inadmissible,
            # and the cone test must reject it too
            from kguess.strategy import is_admissible

            assert not is_admissible(t, k).ok
            result = lp_feasible(t, k)
            assert not result.feasible
            assert result.certificate_valid
        else:
            from kguess.strategy import is_admissible

            assert is_admissible(t, k).ok
            assert lp_feasible(t, k).feasible
