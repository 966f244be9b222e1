import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from younghydro.diagrams import (
    ConfigN,
    ConfigZ,
    Partition,
    StrictPartition,
    configN_to_strict,
    configZ_to_partition,
    from_json,
    height_at,
    height_profile,
    partition_to_configZ,
    scaled_height,
    strict_to_configN,
    to_json,
    zeta_config,
)

from strategies import configs_N, partitions, strict_partitions

P31 = Partition.from_parts([3, 1])


class TestTypes:
    def test_partition_caches(self):
        p = Partition.from_parts([4, 2, 2, 1])
        assert p.area == 9
        assert p.rows == 4
        assert p.distinct == 3
        assert p.multiplicities() == {4: 1, 2: 2, 1: 1}
        assert p.parts == (4, 2, 2, 1)

    def test_partition_rejects_bad_blocks(self):
        with pytest.raises(ValueError):
            Partition(((2, 1), (3, 1)))
        with pytest.raises(ValueError):
            Partition(((0, 1),))
        with pytest.raises(ValueError):
            Partition(((2, 0),))

    def test_overflow_rejected(self):
        with pytest.raises(OverflowError):
            Partition(((2**62, 2),))

    def test_strict_partition_rejects_ties(self):
        with pytest.raises(ValueError):
            StrictPartition((3, 3))
        with pytest.raises(ValueError):
            StrictPartition((1, 2))
        assert StrictPartition((4, 2, 1)).area == 7

    def test_configZ_requires_sign_ranges(self):
        with pytest.raises(ValueError):
            ConfigZ((1,), (2,))
        with pytest.raises(ValueError):
            ConfigZ((0,), (0,))

    def test_states_hashable(self):
        assert len({P31, Partition.from_parts([3, 1]), Partition()}) == 2


class TestHeight:
    @pytest.mark.parametrize("u,expected", [(0, 2), (1, 1), (0.5, 2), (2.999, 1), (3, 0)])
    def test_height_at(self, u, expected):
        assert height_at(P31, u) == expected

    def test_empty(self):
        assert height_at(Partition(), 5.0) == 0
        assert scaled_height(Partition(), 10, 1.0) == 0.0

    def test_scaled_height(self):
        # height_at(p, 1) = 1, divided by N = 2
        assert scaled_height(P31, 2, 0.5) == 0.5
        assert scaled_height(P31, 1, 0.0) == 2.0

    def test_strict_partition_height(self):
        assert height_at(StrictPartition((4, 2, 1)), 1) == 2

    @given(partitions)
    def test_profile_monotone_and_area(self, p):
        u = np.arange(0, 200, 0.5)
        h = height_profile(p, u)
        assert np.all(np.diff(h) <= 0)
        assert h[0] == p.rows
        # integral of a right-continuous step function with integer jumps
        grid = np.arange(0, 200)
        assert int(height_profile(p, grid).sum()) == p.area

    @given(partitions, st.floats(0, 200))
    def test_profile_matches_pointwise(self, p, u):
        assert height_profile(p, np.array([u]))[0] == height_at(p, u)


class TestBijectionZ:
    def test_examples(self):
        assert partition_to_configZ(Partition()) == ConfigZ((), ())
        assert partition_to_configZ(Partition.from_parts([1])) == ConfigZ((0,), (1,))
        assert partition_to_configZ(P31) == ConfigZ((-1,), (3,))
        assert configZ_to_partition(ConfigZ((), ())) == Partition()
        assert configZ_to_partition(ConfigZ((-1,), (3,))) == P31
        assert configZ_to_partition(ConfigZ((0,), (1,))) == Partition.from_parts([1])

    def test_zeta_examples(self):
        c = ConfigZ((-1,), (3,))
        assert zeta_config(ConfigZ((), ()), 0, "-") == 0
        assert zeta_config(c, 0, "-") == 1
        assert zeta_config(c, 0, "+") == 1

    def test_rejects_uncentered(self):
        with pytest.raises(ValueError):
            configZ_to_partition(ConfigZ((-2, -1), (3,)))

    @given(partitions)
    def test_round_trip(self, p):
        c = partition_to_configZ(p)
        assert c.centered
        assert configZ_to_partition(c) == p

    @given(partitions)
    def test_occupied_set(self, p):
        c = partition_to_configZ(p)
        parts = list(p.parts) + [0] * 5
        expected = {v - i for i, v in enumerate(parts)}
        lo = min(expected)
        occ = {x for x in range(lo, max(expected) + 1) if c.occupied(x)}
        assert occ == expected

    @given(partitions, st.integers(-200, 200))
    def test_zeta_matches_direct_count(self, p, x):
        c = partition_to_configZ(p)
        lo, hi = min(c.window()[0], x) - 2, max(c.window()[1], x) + 2
        occ = c.to_array(lo, hi)
        sites = np.arange(lo, hi + 1)
        minus = int(np.sum((1 - occ)[(sites <= x)]))
        plus = int(np.sum(occ[sites >= x + 1]))
        assert zeta_config(c, x, "-") == minus
        assert zeta_config(c, x, "+") == plus

    @given(partitions)
    def test_centering_is_zeta_balance(self, p):
        c = partition_to_configZ(p)
        assert zeta_config(c, 0, "-") == zeta_config(c, 0, "+")


class TestBijectionN:
    def test_examples(self):
        assert strict_to_configN(StrictPartition()) == ConfigN(())
        assert strict_to_configN(StrictPartition((4, 2, 1))).occupied == (1, 2, 4)
        assert configN_to_strict(ConfigN((1, 2, 4))) == StrictPartition((4, 2, 1))

    @given(strict_partitions)
    def test_round_trip(self, q):
        c = strict_to_configN(q)
        assert len(c.occupied) == len(q.parts)
        assert configN_to_strict(c) == q

    @given(configs_N)
    def test_inverse_round_trip(self, c):
        assert strict_to_configN(configN_to_strict(c)) == c

    def test_array_layout(self):
        c = ConfigN((1, 3))
        arr = c.to_array(6)
        assert arr.tolist() == [0, 1, 0, 1, 0, 0]
        assert ConfigN.from_array(arr) == c


class TestJson:
    @given(partitions)
    def test_partition(self, p):
        assert from_json(json.dumps(to_json(p)), "Partition") == p

    @given(strict_partitions)
    def test_strict(self, q):
        assert from_json(to_json(q), "StrictPartition") == q

    @given(partitions)
    def test_configZ(self, p):
        c = partition_to_configZ(p)
        assert from_json(json.dumps(to_json(c)), "ConfigZ") == c

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            from_json([1, 3], "Partition")
