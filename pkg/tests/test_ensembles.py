import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from younghydro.diagrams import Partition, StrictPartition
from younghydro.dynamics import make_rng
from younghydro.ensembles import (
    ALPHA,
    BETA,
    EnsembleParams,
    SeriesControl,
    SeriesError,
    Statistics,
    log_partition_function,
    log_weight,
    mean_area,
    sample,
    sampler_cutoff,
    solve_epsilon,
)
from younghydro.oracle import count_distinct_partitions, count_partitions


def params(eps, stat="U"):
    return EnsembleParams(eps, stat)


class TestParams:
    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
    def test_epsilon_range(self, eps):
        with pytest.raises(ValueError):
            EnsembleParams(eps)

    def test_statistics_parse(self):
        assert EnsembleParams(0.5, "ru").statistics is Statistics.RU

    def test_series_control(self):
        with pytest.raises(ValueError):
            SeriesControl(abs_tol=0)


class TestLogWeight:
    def test_examples(self):
        assert log_weight(Partition(), params(0.3)) == 0.0
        assert log_weight(Partition.from_parts([2, 1]), params(0.5)) == pytest.approx(3 * math.log(0.5))
        assert log_weight(StrictPartition((3,)), params(0.9, "RU")) == pytest.approx(3 * math.log(0.9))

    def test_type_mismatch(self):
        with pytest.raises(TypeError):
            log_weight(StrictPartition((3,)), params(0.5, "U"))


class TestPartitionFunction:
    def test_small_eps_limit(self):
        assert log_partition_function(params(1e-9)) == pytest.approx(1e-9, rel=1e-6)

    @pytest.mark.parametrize("stat,count", [("U", count_partitions), ("RU", count_distinct_partitions)])
    def test_against_counting(self, stat, count):
        # truncated where c(n) 0.5^n < 1e-15
        total = 0.0
        n = 0
        while True:
            term = count(n) * 0.5**n
            total += term
            if n > 10 and term < 1e-15:
                break
            n += 1
        assert log_partition_function(params(0.5, stat)) == pytest.approx(math.log(total), abs=1e-13)

    def test_max_terms_enforced(self):
        with pytest.raises(SeriesError):
            log_partition_function(params(0.999999), SeriesControl(max_terms=10))


class TestMeanArea:
    def test_frozen_values(self):
        # independent cross-check against exact enumeration lives in test_oracle
        assert mean_area(params(0.5)) == pytest.approx(2.7440338887594744, abs=1e-12)
        assert mean_area(params(0.5, "RU")) == pytest.approx(1.6701907046195996, abs=1e-12)

    def test_small_eps(self):
        eps = 1e-6
        assert mean_area(params(eps)) == pytest.approx(eps, rel=1e-5)
        assert mean_area(params(eps, "RU")) == pytest.approx(eps, rel=1e-5)

    @pytest.mark.parametrize("stat", ["U", "RU"])
    def test_increasing(self, stat):
        grid = np.linspace(0.01, 0.99, 60)
        vals = [mean_area(params(e, stat)) for e in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_ru_below_u(self):
        for e in (0.2, 0.6, 0.95):
            assert mean_area(params(e, "RU")) < mean_area(params(e, "U"))


class TestSampler:
    def test_cutoff_tail(self):
        for eps in (0.3, 0.9, 0.999):
            K = sampler_cutoff(eps)
            assert eps ** (K + 1) / (1 - eps) < 1e-12

    def test_tiny_eps_gives_empty(self):
        rng = make_rng(0)
        assert all(sample(params(1e-9), rng) == Partition() for _ in range(100))

    def test_empty_frequency(self):
        rng = make_rng(11)
        n = 100_000
        empty = sum(sample(params(0.5), rng).area == 0 for _ in range(n))
        p0 = math.exp(-log_partition_function(params(0.5)))
        assert abs(empty / n - p0) < 3 * math.sqrt(p0 * (1 - p0) / n)

    @pytest.mark.parametrize("stat", ["U", "RU"])
    @pytest.mark.parametrize("eps", [0.3, 0.5, 0.7])
    def test_mean_area_consistency(self, stat, eps):
        rng = make_rng(int(eps * 100) + (0 if stat == "U" else 1000))
        areas = np.array([sample(params(eps, stat), rng).area for _ in range(100_000)])
        se = areas.std(ddof=1) / math.sqrt(areas.size)
        assert abs(areas.mean() - mean_area(params(eps, stat))) < 3 * se

    @given(st.floats(0.05, 0.95), st.integers(0, 2**32))
    def test_types(self, eps, seed):
        rng = make_rng(seed)
        assert isinstance(sample(params(eps, "U"), rng), Partition)
        assert isinstance(sample(params(eps, "RU"), rng), StrictPartition)

    def test_reproducible(self):
        a = [sample(params(0.9), make_rng(5)) for _ in range(3)]
        b = [sample(params(0.9), make_rng(5)) for _ in range(3)]
        assert a == b


class TestSolveEpsilon:
    @pytest.mark.parametrize("stat", ["U", "RU"])
    @pytest.mark.parametrize("N", [1, 3, 10, 100])
    def test_residual(self, stat, N):
        eps = solve_epsilon(N, stat)
        assert abs(mean_area(params(eps, stat)) - N**2) <= 1e-10 * N**2

    def test_limits_at_100(self):
        assert abs(100 * (1 - solve_epsilon(100, "U")) - ALPHA) <= 0.1
        assert abs(100 * (1 - solve_epsilon(100, "RU")) - BETA) <= 0.1

    def test_invalid(self):
        with pytest.raises(ValueError):
            solve_epsilon(0, "U")

    def test_constants(self):
        assert ALPHA == pytest.approx(1.28255, abs=1e-5)
        assert BETA == pytest.approx(0.90690, abs=1e-5)
