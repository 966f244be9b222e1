import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from younghydro.diagrams import Partition, StrictPartition
from younghydro.ensembles import EnsembleParams, mean_area
from younghydro.oracle import (
    OracleError,
    build_truncated_chain,
    count_distinct_partitions,
    count_partitions,
    detailed_balance_violation,
    enumerate_states,
    exact_mean_area_truncated,
    generating_function_gap,
    intertwining_mismatches,
    oracle_report,
    restricted_weights,
    stationary_distribution,
    stationary_error,
)


def brute_force(n, distinct):
    """Partitions of n by filtering all multisets; independent of the DP."""
    count = 0
    for k in range(n + 1):
        pool = range(1, n + 1)
        combos = itertools.combinations(pool, k) if distinct else itertools.combinations_with_replacement(pool, k)
        count += sum(1 for c in combos if sum(c) == n)
    return count


class TestCounting:
    def test_examples(self):
        assert count_partitions(0) == 1 and count_distinct_partitions(0) == 1
        assert count_partitions(5) == 7 and count_distinct_partitions(5) == 3
        assert count_partitions(10) == 42 and count_distinct_partitions(10) == 10

    @pytest.mark.parametrize("n", range(13))
    def test_against_brute_force(self, n):
        assert count_partitions(n) == brute_force(n, False)
        assert count_distinct_partitions(n) == brute_force(n, True)

    def test_known_large(self):
        assert count_partitions(100) == 190569292
        assert count_distinct_partitions(100) == 444793

    def test_overflow(self):
        count_partitions(400)
        with pytest.raises(OverflowError):
            count_partitions(500)
        with pytest.raises(ValueError):
            count_partitions(-1)

    def test_euler_pentagonal_recurrence(self):
        p = [count_partitions(n) for n in range(60)]
        for n in range(1, 60):
            total, k = 0, 1
            while True:
                g1, g2 = k * (3 * k - 1) // 2, k * (3 * k + 1) // 2
                if g1 > n:
                    break
                sign = 1 if k % 2 else -1
                total += sign * (p[n - g1] + (p[n - g2] if g2 <= n else 0))
                k += 1
            assert p[n] == total

    def test_generating_function(self):
        assert generating_function_gap(0.3, 60) < 1e-12


class TestEnumeration:
    def test_examples(self):
        assert enumerate_states("U", 2) == [
            Partition(), Partition.from_parts([1]), Partition.from_parts([2]), Partition.from_parts([1, 1])]
        assert set(enumerate_states("RU", 3)) == {
            StrictPartition(), StrictPartition((1,)), StrictPartition((2,)),
            StrictPartition((3,)), StrictPartition((2, 1))}
        assert enumerate_states("U", 0) == [Partition()]

    @pytest.mark.parametrize("stat,M", [("U", 12), ("RU", 20)])
    def test_cardinality(self, stat, M):
        states = enumerate_states(stat, M)
        assert len(set(states)) == len(states)
        count = count_partitions if stat == "U" else count_distinct_partitions
        assert len(states) == sum(count(n) for n in range(M + 1))
        assert all(s.area <= M for s in states)

    def test_caps(self):
        with pytest.raises(ValueError):
            enumerate_states("U", 41)
        with pytest.raises(ValueError):
            enumerate_states("RU", 61)
        assert len(enumerate_states("U", 41, cap=41)) > 0


class TestChains:
    @pytest.mark.parametrize("stat", ["U", "RU"])
    def test_M1(self, stat):
        eps = Fraction(1, 3)
        chain = build_truncated_chain(stat, 1, eps)
        assert chain.size == 2
        assert sorted(chain.transitions) == [(0, 1, eps), (1, 0, 1)]
        pi = stationary_distribution(build_truncated_chain(stat, 1, 0.3))
        assert pi == pytest.approx([1 / 1.3, 0.3 / 1.3], rel=1e-14)

    @pytest.mark.parametrize("stat", ["U", "RU"])
    def test_row_sums_exact(self, stat):
        chain = build_truncated_chain(stat, 8, Fraction(1, 2))
        assert all(r == 0 for r in chain.exact_row_sums())
        Q = chain.generator()
        assert np.max(np.abs(np.asarray(Q.sum(axis=1)))) < 1e-14

    def test_state_counts(self):
        assert build_truncated_chain("U", 8, 0.5).size == 67
        assert build_truncated_chain("RU", 8, 0.5).size == 25

    @pytest.mark.parametrize("stat", ["U", "RU"])
    @pytest.mark.parametrize("eps", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
    def test_detailed_balance_exact(self, stat, eps):
        chain = build_truncated_chain(stat, 8, eps)
        assert detailed_balance_violation(chain) == 0
        assert stationary_error(build_truncated_chain(stat, 8, float(eps))) <= 1e-10

    def test_irreducible(self):
        from scipy.sparse.csgraph import connected_components
        chain = build_truncated_chain("U", 10, 0.5)
        n, _ = connected_components(chain.generator(), directed=True, connection="strong")
        assert n == 1

    def test_missing_reverse_detected(self):
        chain = build_truncated_chain("U", 2, Fraction(1, 2))
        broken = type(chain)(chain.statistics, chain.M, chain.epsilon, chain.states, chain.transitions[:-1])
        with pytest.raises(OracleError):
            detailed_balance_violation(broken)

    def test_restricted_weights(self):
        chain = build_truncated_chain("RU", 5, 0.5)
        w = restricted_weights(chain)
        assert w.sum() == pytest.approx(1.0)
        assert w[0] / w[1] == pytest.approx(2.0)

    def test_report(self):
        rep = oracle_report("U", 6, 0.25)
        assert rep["epsilon"] == "1/4"
        assert rep["max_detailed_balance_violation"] == 0.0
        assert rep["max_row_sum"] == 0.0
        assert rep["stationary_max_rel_error"] < 1e-10


class TestMeanArea:
    @pytest.mark.parametrize("stat", ["U", "RU"])
    def test_matches_series(self, stat):
        exact = exact_mean_area_truncated(0.5, 120, stat)
        assert abs(exact - mean_area(EnsembleParams(0.5, stat))) <= 1e-9

    @given(st.floats(1e-6, 1e-3))
    def test_small_eps(self, eps):
        # sum_k k eps^k / (1 - eps^k) = eps + 3 eps^2 + O(eps^3)
        assert exact_mean_area_truncated(eps, 40, "U") == pytest.approx(eps + 3 * eps**2, abs=10 * eps**3)

    def test_adequacy(self):
        with pytest.raises(OracleError):
            exact_mean_area_truncated(0.5, 20, "U")
        with pytest.raises(ValueError):
            exact_mean_area_truncated(0.8, 400, "U")


class TestIntertwining:
    @pytest.mark.parametrize("stat", ["U", "RU"])
    def test_no_mismatches(self, stat):
        assert intertwining_mismatches(stat, 6) == []
