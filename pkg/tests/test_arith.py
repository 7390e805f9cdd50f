#!/usr/bin/env python3
"""
Tests for the Mobius/Liouville sieves and the averages built on them
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.services.arith import (
    check_gap, compensated_cumsum, cross_check, ep_average, eventually_periodic, factorize,
    gap_sequence, holed_average, linear_sieve, mertens, progression_average, running_averages, sieve,
)
from src.services.errors import DomainError, GapConditionError

MU_1_TO_10 = [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]
LAMBDA_1_TO_10 = [1, -1, -1, 1, -1, 1, -1, -1, 1, 1]


@pytest.fixture(scope="module")
def table():
    return sieve(100_000)


class TestSieve:

    def test_small_values(self):
        small = sieve(10)
        assert [small.mobius(n) for n in range(1, 11)] == MU_1_TO_10
        assert [small.liouville(n) for n in range(1, 11)] == LAMBDA_1_TO_10

    def test_mertens_values(self, table):
        assert mertens(table, 10) == -1
        assert mertens(table, 100) == 1
        assert mertens(table, 1000) == 2
        assert table.mertens_series(100)[-1] == 1

    @pytest.mark.parametrize("N", [1, 2, 97, 5000, 100_000])
    def test_matches_linear_sieve(self, N):
        fast, slow = sieve(N), linear_sieve(N)
        assert np.array_equal(fast.mu, slow.mu)
        assert np.array_equal(fast.lam, slow.lam)

    def test_linear_sieve_matches_factorization(self):
        assert cross_check(linear_sieve(3000), range(1, 3001)) == []

    def test_cross_check_sample(self, table):
        assert cross_check(table, [1, 2, 30, 97, 360, 9973, 99_991, 100_000]) == []

    def test_builtin_cross_check(self):
        sieve(20_000, check=200, seed=7)

    def test_bound_validation(self):
        with pytest.raises(DomainError):
            sieve(0)
        with pytest.raises(DomainError):
            sieve(10).mobius(11)
        with pytest.raises(DomainError):
            mertens(sieve(10), 11)

    def test_factorize(self):
        assert factorize(360) == {2: 3, 3: 2, 5: 1}
        assert factorize(1) == {}

    @settings(max_examples=60, deadline=None)
    @given(m=st.integers(1, 300), n=st.integers(1, 300))
    def test_multiplicativity(self, table, m, n):
        assert table.liouville(m * n) == table.liouville(m) * table.liouville(n)
        if np.gcd(m, n) == 1:
            assert table.mobius(m * n) == table.mobius(m) * table.mobius(n)


class TestRunningSums:

    def test_compensated_cumsum_small_blocks(self):
        values = np.full(10, 0.1)
        sums = compensated_cumsum(values, block=3)
        assert sums[-1] == pytest.approx(1.0, abs=1e-15)
        assert sums[2] == pytest.approx(0.3)

    def test_running_averages(self):
        assert list(running_averages(np.array([1.0, -1.0, 2.0]))) == pytest.approx([1.0, 0.0, 2 / 3])

    def test_eventually_periodic(self):
        assert list(eventually_periodic([5, 6], [1, 2, 3], 7)) == [5, 6, 1, 2, 3, 1, 2]
        assert list(eventually_periodic([5, 6], [1], 1)) == [5]
        with pytest.raises(DomainError):
            eventually_periodic([], [], 3)


class TestPeriodicAverages:

    def test_constant_one_is_mertens_over_N(self, table):
        series = ep_average(table, [], [1.0], 1000)
        assert series.final == pytest.approx(mertens(table, 1000) / 1000)
        assert series.N == 1000

    def test_progression_form_agrees(self, table):
        pre, cycle = [0.5, 1.0, 0.0], [1.0, -1.0, 0.25, 0.0]
        series = ep_average(table, pre, cycle, 50_000)
        assert progression_average(table, pre, cycle, 50_000) == pytest.approx(series.final, abs=1e-12)

    def test_averages_are_small(self, table):
        series = ep_average(table, [], [1.0, 0.0, -1.0], 100_000)
        assert series.decade_max < 0.02

    def test_horizon_beyond_table(self):
        with pytest.raises(DomainError):
            ep_average(sieve(10), [], [1.0], 11)


class TestGapAverages:

    def test_gap_violation_names_pair(self):
        with pytest.raises(GapConditionError) as err:
            check_gap(np.array([1.0, 0.0, 1.0]), 3)
        assert err.value.pair == (1, 3)

    def test_gap_sequence_respects_gap(self):
        a = gap_sequence(10_000, 7, seed=3)
        check_gap(a, 7)
        assert np.all((a >= 0) & (a <= 1))
        assert np.count_nonzero(a) > 100

    def test_finite_form_with_unit_weights(self):
        a = gap_sequence(5000, 5, seed=1, values="ones")
        result = holed_average(None, a, 5)
        assert result.finite_form_ok
        assert result.bound == pytest.approx(0.2)

    def test_every_fifth_term(self):
        N = 1000
        a = np.zeros(N)
        a[4::5] = 1.0
        result = holed_average(None, a, 5)
        n = np.arange(1, N + 1)
        assert np.all(result.averages <= 0.2 + 1.0 / n)
        assert np.all(result.averages <= 0.2)
        assert result.averages[-1] == pytest.approx(0.2)
        assert result.max_excess == pytest.approx(0.0, abs=1e-15)
        assert result.finite_form_ok

    def test_mobius_weights(self, table):
        a = gap_sequence(100_000, 10, seed=11)
        result = holed_average(table, a, 10, start=1000)
        assert result.sup <= result.bound
        assert len(result.running_sup) == 100_000 - 999

    def test_invalid_values(self):
        with pytest.raises(DomainError):
            holed_average(None, [0.0, 2.0], 1)
        with pytest.raises(DomainError):
            holed_average([1, 2], [1.0, 0.0], 1)
