"""Tests for the closed-form guessing engine."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kguess.core import Alpha, BudgetError, DomainError, Pmf, JointPmf
from kguess.guessing import (
    CoverageVector,
    SortedPmf,
    minimal_loss,
    minimal_loss_conditional,
    optimal_coverage,
    threshold_rank,
)

MAIN_PMF = Pmf([0.7, 0.2, 0.1])

pmf_raws = st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=2, max_size=10)
orders = st.sampled_from([0.3, 0.5, 0.9, 1.5, 2.0, 5.0, 20.0])


def make_pmf(raw: list[float]) -> Pmf:
    arr = np.array(raw, dtype=float)
    return Pmf(arr / arr.sum())


def make_tie_free(raw: list[float]) -> Pmf | None:
    arr = np.unique(np.array(raw, dtype=float))
    if arr.size < 2:
        return None
    return Pmf(arr / arr.sum())


# ---------------------------------------------------------------------------
# SortedPmf
# ---------------------------------------------------------------------------


class TestSortedPmf:
    def test_orders_descending_and_remembers_positions(self):
        sp = SortedPmf.from_pmf(Pmf([0.2, 0.7, 0.1]))
        assert sp.probs.tolist() == pytest.approx([0.7, 0.2, 0.1], abs=1e-15)
        assert sp.perm.tolist() == [1, 0, 2]

    def test_drops_zeros_keeps_size(self):
        sp = SortedPmf.from_pmf(Pmf([0.3, 0.0, 0.7]))
        assert sp.probs.tolist() == [0.7, 0.3]
        assert sp.size == 3

    def test_ties_break_by_original_index(self):
        sp = SortedPmf.from_pmf(Pmf([0.25, 0.25, 0.25, 0.25]))
        assert sp.perm.tolist() == [0, 1, 2, 3]


# ---------------------------------------------------------------------------
# CoverageVector
# ---------------------------------------------------------------------------


class TestCoverageVector:
    def test_accepts_and_clips_noise(self):
        cov = CoverageVector(np.array([1.0 + 5e-13, 0.8, 0.2 - 5e-13]), 2)
        assert cov.t.max() <= 1.0
        assert cov.spent == 2

    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            CoverageVector(np.array([1.5, 0.5]), 2)

    def test_rejects_non_integer_total(self):
        with pytest.raises(DomainError):
            CoverageVector(np.array([0.7, 0.7]), 2)

    def test_spent_below_budget(self):
        cov = CoverageVector(np.array([1.0, 1.0, 0.0]), 5)
        assert cov.spent == 2


# ---------------------------------------------------------------------------
# threshold rank
# ---------------------------------------------------------------------------


class TestThresholdRank:
    def test_uniform_is_rank_one(self):
        sp = SortedPmf.from_pmf(Pmf.uniform(4))
        assert threshold_rank(sp, 2, 2) == 1

    def test_main_example_is_rank_two(self):
        sp = SortedPmf.from_pmf(MAIN_PMF)
        assert threshold_rank(sp, 2, 2) == 2

    def test_budget_must_be_below_support(self):
        sp = SortedPmf.from_pmf(Pmf.uniform(3))
        with pytest.raises(BudgetError):
            threshold_rank(sp, 3, 2)

    def test_infinite_order_uses_full_budget(self):
        sp = SortedPmf.from_pmf(MAIN_PMF)
        assert threshold_rank(sp, 2, Alpha.infinity()) == 2

    @given(pmf_raws, orders)
    @settings(max_examples=100)
    def test_single_guess_is_rank_one(self, raw, alpha):
        pmf = make_pmf(raw)
        if pmf.support_size < 2:
            return
        sp = SortedPmf.from_pmf(pmf)
        assert threshold_rank(sp, 1, alpha) == 1


# ---------------------------------------------------------------------------
# minimal_loss: frozen examples
# ---------------------------------------------------------------------------


class TestMinimalLossExamples:
    def test_main_example(self):
        report = minimal_loss(MAIN_PMF, 2, 2)
        assert report.value == pytest.approx(0.15278640450004208, abs=1e-14)
        assert report.threshold_rank == 2
        assert report.multiplier == pytest.approx(math.sqrt(0.05), abs=1e-14)
        assert report.coverage.t == pytest.approx([1.0, 0.8, 0.2], abs=1e-12)

    def test_uniform_four_order_two(self):
        report = minimal_loss(Pmf.uniform(4), 2, 2)
        assert report.value == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-14)
        assert report.coverage.t == pytest.approx([0.5] * 4, abs=1e-12)
        assert report.threshold_rank == 1

    def test_uniform_four_order_one(self):
        report = minimal_loss(Pmf.uniform(4), 2, 1)
        assert report.value == pytest.approx(math.log(2.0), abs=1e-14)

    def test_order_infinity(self):
        report = minimal_loss(Pmf([0.5, 0.3, 0.2]), 2, Alpha.infinity())
        assert report.value == pytest.approx(0.2, abs=1e-14)
        assert report.threshold_rank == 2
        assert report.coverage.t == pytest.approx([1.0, 1.0, 0.0], abs=0)
        assert report.multiplier == pytest.approx(0.3, abs=1e-14)

    def test_infinity_tie_takes_lowest_index(self):
        report = minimal_loss(Pmf([0.25, 0.25, 0.25, 0.25]), 2, Alpha.infinity())
        assert report.coverage.t.tolist() == [1.0, 1.0, 0.0, 0.0]

    def test_budget_covers_support(self):
        report = minimal_loss(Pmf([0.6, 0.4, 0.0]), 5, 2)
        assert report.value == 0.0
        assert report.coverage.t.tolist() == [1.0, 1.0, 0.0]
        assert report.coverage.spent == 2
        assert report.threshold_rank == 2
        assert report.multiplier == pytest.approx(0.4)

    def test_zero_symbols_never_covered(self):
        report = minimal_loss(Pmf([0.5, 0.0, 0.3, 0.2]), 2, 2)
        assert report.coverage.t[1] == 0.0

    def test_rejects_bad_budget(self):
        with pytest.raises(DomainError):
            minimal_loss(MAIN_PMF, 0, 2)
        with pytest.raises(DomainError):
            minimal_loss(MAIN_PMF, -1, 2)

    def test_optimal_coverage_matches_report(self):
        cov = optimal_coverage(MAIN_PMF, 2, 2)
        assert cov.t == pytest.approx([1.0, 0.8, 0.2], abs=1e-12)


# ---------------------------------------------------------------------------
# minimal_loss: structural properties
# ---------------------------------------------------------------------------


class TestMinimalLossProperties:
    @given(pmf_raws, orders)
    @settings(max_examples=150)
    def test_coverage_spends_budget(self, raw, alpha):
        pmf = make_pmf(raw)
        for k in range(1, pmf.support_size):
            cov = minimal_loss(pmf, k, alpha).coverage
            assert abs(cov.t.sum() - k) <= 1e-9
            assert np.all(cov.t >= 0.0) and np.all(cov.t <= 1.0)

    @given(pmf_raws, orders)
    @settings(max_examples=150)
    def test_nonincreasing_in_budget(self, raw, alpha):
        pmf = make_pmf(raw)
        values = [
            minimal_loss(pmf, k, alpha).value
            for k in range(1, pmf.support_size + 1)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(0.0, abs=1e-12)

    @given(pmf_raws, orders)
    @settings(max_examples=100)
    def test_kkt_shape(self, raw, alpha):
        """Interior coverage entries follow the stationarity power law."""
        pmf = make_pmf(raw)
        if pmf.support_size < 3:
            return
        k = pmf.support_size // 2
        report = minimal_loss(pmf, k, alpha)
        lam = report.multiplier
        t, p = report.coverage.t, pmf.probs
        interior = (t > 1e-9) & (t < 1.0 - 1e-9)
        if not np.any(interior):
            return
        expected = np.exp(alpha * (np.log(p[interior]) - math.log(lam)))
        assert t[interior] == pytest.approx(expected, rel=1e-7, abs=1e-9)

    @given(pmf_raws, orders, st.randoms(use_true_random=False))
    @settings(max_examples=100)
    def test_permutation_invariance(self, raw, alpha, rng):
        pmf = make_tie_free(raw)
        if pmf is None:
            return
        k = max(1, pmf.support_size // 2)
        base = minimal_loss(pmf, k, alpha)
        perm = list(range(pmf.n))
        rng.shuffle(perm)
        shuffled = minimal_loss(Pmf(pmf.probs[perm]), k, alpha)
        assert shuffled.value == pytest.approx(base.value, abs=1e-12)
        assert shuffled.threshold_rank == base.threshold_rank
        assert shuffled.multiplier == pytest.approx(base.multiplier, abs=1e-12)
        assert shuffled.coverage.t == pytest.approx(base.coverage.t[perm], abs=1e-9)

    @given(pmf_raws, orders)
    @settings(max_examples=100)
    def test_coverage_ordered_like_probabilities(self, raw, alpha):
        pmf = make_tie_free(raw)
        if pmf is None:
            return
        k = max(1, pmf.support_size // 2)
        t, p = minimal_loss(pmf, k, alpha).coverage.t, pmf.probs
        order = np.argsort(-p, kind="stable")
        assert np.all(np.diff(t[order]) <= 1e-9)

    @given(pmf_raws)
    @settings(max_examples=60)
    def test_limits_match_special_orders(self, raw):
        pmf = make_pmf(raw)
        k = max(1, pmf.support_size // 2)
        if k >= pmf.support_size:
            return
        at_one = minimal_loss(pmf, k, 1).value
        assert minimal_loss(pmf, k, 1 + 1e-6).value == pytest.approx(at_one, abs=1e-4)
        assert minimal_loss(pmf, k, 1 - 1e-6).value == pytest.approx(at_one, abs=1e-4)
        at_inf = minimal_loss(pmf, k, Alpha.infinity()).value
        assert minimal_loss(pmf, k, 1e6).value == pytest.approx(at_inf, abs=1e-4)

    @given(pmf_raws, orders, st.integers(min_value=1, max_value=9))
    @settings(max_examples=100)
    def test_entropy_identity_at_rank_one(self, raw, alpha, k):
        """With no saturated symbols the loss is a pure entropy expression."""
        pmf = make_pmf(raw)
        if k >= pmf.support_size:
            return
        report = minimal_loss(pmf, k, alpha)
        if report.threshold_rank != 1:
            return
        from kguess.core import renyi_entropy

        h = float(renyi_entropy(pmf, alpha))
        beta = (alpha - 1.0) / alpha
        expected = -math.expm1(beta * (math.log(k) - h)) / beta
        assert report.value == pytest.approx(expected, abs=1e-10)


# ---------------------------------------------------------------------------
# conditional decomposition
# ---------------------------------------------------------------------------


class TestConditional:
    def test_frozen_example(self):
        joint = JointPmf([[0.4, 0.1], [0.1, 0.4]])
        value, columns = minimal_loss_conditional(joint, 1, 2)
        assert value == pytest.approx(0.3507577497529358, abs=1e-14)
        assert value == pytest.approx(2.0 * (1.0 - math.sqrt(0.68)), abs=1e-14)
        assert len(columns) == 2
        assert columns[0].value == pytest.approx(columns[1].value, abs=1e-14)

    def test_zero_column_reported_as_none(self):
        joint = JointPmf([[0.5, 0.0], [0.5, 0.0]])
        value, columns = minimal_loss_conditional(joint, 1, 2)
        assert columns[1] is None
        assert value == pytest.approx(2.0 * (1.0 - math.sqrt(0.5)), abs=1e-12)

    @given(
        st.lists(
            st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=3, max_size=6),
            min_size=2,
            max_size=4,
        ),
        orders,
    )
    @settings(max_examples=60)
    def test_matches_weighted_columns(self, raw, alpha):
        width = min(len(row) for row in raw)
        mat = np.array([row[:width] for row in raw]).T
        joint = JointPmf(mat / mat.sum())
        value, columns = minimal_loss_conditional(joint, 1, alpha)
        weights = joint.probs.sum(axis=0)
        total = sum(
            w * col.value for w, col in zip(weights, columns) if col is not None
        )
        assert value == pytest.approx(total, abs=1e-12)
