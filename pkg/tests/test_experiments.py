import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from younghydro import experiments
from younghydro.diagrams import Partition, StrictPartition
from younghydro.dynamics import scaled_height_snapshot
from younghydro.experiments import (
    ROW_FIELDS,
    ConvergenceRow,
    ExperimentConfig,
    PdeSettings,
    build_initial_microstate,
    bump,
    emit,
    micro_initial,
    read_rows_csv,
    replica_seeds,
    rows_to_csv,
    run_convergence,
    run_replica,
    strict_repair,
    sup_distance_window,
    weak_distance,
)
from younghydro.grid import GridField
from younghydro.pde import reference_profile, vershik_R, vershik_U


class TestMicrostate:
    def test_vershik_U_N64(self):
        N = 64
        psi0 = GridField.from_function(vershik_U, 0.5 / N, 12, 1e-3)
        p = build_initial_microstate(psi0, N, "U")
        height = scaled_height_snapshot(p, N, (0.2, 0.01, 281))
        assert np.max(np.abs(height.values - vershik_U(height.x))) <= 0.08

    def test_vershik_R_N64(self):
        N = 64
        psi0 = GridField.from_function(vershik_R, 0.0, 25, 1e-3)
        q = build_initial_microstate(psi0, N, "RU")
        assert isinstance(q, StrictPartition)
        height = scaled_height_snapshot(q, N, (0.0, 0.01, 301))
        assert np.max(np.abs(height.values - vershik_R(height.x))) <= 0.08

    def test_single_row(self):
        psi0 = GridField.from_function(lambda u: 1.5 - u, 0.5, 1.5, 0.01)
        assert psi0.values[0] == pytest.approx(1.0)
        assert build_initial_microstate(psi0, 1, "U") == Partition.from_parts([1])

    def test_strictness_repair(self):
        assert strict_repair((5, 5, 3)) == (5, 4, 3)
        assert strict_repair((4, 4, 4, 1)) == (4, 3, 2, 1)
        assert strict_repair((2, 2, 2)) == (2, 1)

    def test_repair_applied_to_rounding_ties(self):
        # slope -1 puts every quantile on a half-integer, so rounding creates ties
        psi0 = GridField.from_function(lambda u: np.maximum(0.6 - u, 0.0), 0.0, 1.0, 0.01)
        raw = build_initial_microstate(psi0, 10, "U").parts
        assert len(set(raw)) < len(raw)
        q = build_initial_microstate(psi0, 10, "RU")
        assert q.parts == strict_repair(raw) == (5, 4, 3, 2, 1)

    @given(st.lists(st.integers(1, 30), max_size=20))
    def test_repair_properties(self, rows):
        rows = sorted(rows, reverse=True)
        out = strict_repair(rows)
        assert all(a > b for a, b in zip(out, out[1:]))
        # every kept row moves down by at most the length of its duplicate run
        for i, x in enumerate(out):
            assert 0 <= rows[i] - x <= i

    def test_rejections(self):
        with pytest.raises(ValueError):
            build_initial_microstate(GridField(0.0, 0.1, np.array([1.0, 2.0])), 4, "U")
        with pytest.raises(ValueError):
            build_initial_microstate(GridField(0.0, 0.1, np.array([1.0, 0.5])), 4, "RU")

    def test_empty(self):
        assert build_initial_microstate(GridField(0.0, 0.1, np.zeros(5)), 4, "U") == Partition()

    @given(st.integers(8, 200), st.sampled_from(["vershik", "dilated-1.2", "dilated-0.8", "bumped"]))
    def test_error_is_order_one_over_N(self, N, kind):
        f = reference_profile("U", kind)
        psi0 = GridField.from_function(f, 0.5 / N, 12, min(1e-3, 0.05 / N))
        p = build_initial_microstate(psi0, N, "U")
        height = scaled_height_snapshot(p, N, (1.0, 0.01, 301))
        # quantile rounding costs 1/(2N) vertically plus the slope times 1/(2N)
        slope = np.max(np.abs(np.diff(f(np.linspace(0.9, 4.1, 400))))) / (3.2 / 399)
        assert np.max(np.abs(height.values - f(height.x))) <= (1 + slope) / N + 1e-9


class TestWeakDistance:
    def grid(self, f=vershik_U):
        return GridField.from_function(f, 0.1, 4.5, 0.01)

    def test_identical(self):
        assert weak_distance(self.grid(), self.grid()) == 0.0

    def test_constant_shift(self):
        g = self.grid()
        shifted = GridField.like(g, g.values + 0.1)
        assert weak_distance(shifted, g) == pytest.approx(0.1, rel=1e-12)

    def test_bump_normalisation(self):
        for a, b in experiments.BUMP_SUPPORTS:
            x = np.linspace(a, b, 2001)
            assert np.all(bump(x, a, b) >= 0)
            assert bump(np.array([a, b]), a, b).tolist() == [0.0, 0.0]

    def test_coverage(self):
        short = GridField.from_function(vershik_U, 0.5, 4.5, 0.01)
        with pytest.raises(ValueError):
            weak_distance(short, self.grid())
        with pytest.raises(ValueError):
            weak_distance(self.grid(), self.grid(), family="bumps-v0")

    @given(st.floats(-1, 1), st.floats(0.01, 2))
    def test_properties(self, shift, scale):
        g = self.grid()
        other = GridField.like(g, g.values * scale + shift)
        d = weak_distance(other, g)
        assert d >= 0
        assert d == pytest.approx(weak_distance(g, other), abs=1e-12)
        assert d <= sup_distance_window(other, g) + 1e-12


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig(statistics="RU", N_list=[16, 32], replicas=3, T=0.5,
                               record_times=[0.5], initial="perturbed:bumped",
                               pde={"h": 0.01, "dt": 1e-3, "L": 20.0}, seed=7, out="x")
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg
        assert isinstance(cfg.pde, PdeSettings)

    def test_hash_ignores_runtime_fields(self):
        a = ExperimentConfig(seed=3)
        assert a.hash() == dataclasses.replace(a, out="elsewhere", threads=4).hash()
        assert a.hash() != dataclasses.replace(a, seed=4).hash()

    @pytest.mark.parametrize("bad", [
        {"N_list": []}, {"replicas": 0}, {"T": 0}, {"record_times": [0.5, 0.25]},
        {"record_times": [2.0]}, {"initial": "random"}, {"family": "other"}, {"threads": 0},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"replica": 3})

    def test_micro_grid_starts_near_zero(self):
        cfg = ExperimentConfig(initial="vershik")
        g = micro_initial(cfg, 100)
        assert g.xmin == pytest.approx(0.005) and g.h == pytest.approx(5e-4)


class TestRows:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ConvergenceRow(8, 0.5, -0.1, 0.0, 0.0, 0.0, 1, 0, 10.0)

    def test_empty_table(self, tmp_path):
        path = tmp_path / "rows.csv"
        emit([], str(path))
        assert path.read_text() == ",".join(ROW_FIELDS) + "\n"

    def test_csv_round_trip(self, tmp_path):
        rows = [ConvergenceRow(8, 0.25, 0.1 / 3, 0.01, 0.2, 0.02, 3, 0, 1234.5, 9.9),
                ConvergenceRow(8, 0.5, 1e-17, 0.0, math.pi, 0.5, 2, 1, 1e6, 1.0)]
        assert read_rows_csv(rows_to_csv(rows)) == rows
        path = tmp_path / "rows.json"
        emit(rows, str(path), meta={"seed": 1})
        data = json.loads(path.read_text())
        assert data["schema"] == experiments.SCHEMA_VERSION
        assert data["rows"][0]["weak_median"] == 0.1 / 3
        assert "wall_clock" not in data["rows"][0]

    def test_grid_field_csv(self, tmp_path):
        g = GridField(0.0, 0.5, np.array([1.0, 1 / 3]))
        path = tmp_path / "g.csv"
        emit(g, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "u,value" and len(lines) == 3
        assert GridField.from_csv(path.read_text()).values.tolist() == [1.0, 1 / 3]

    def test_emit_errors(self, tmp_path):
        with pytest.raises(ValueError):
            emit({"a": 1}, str(tmp_path / "x.csv"))
        with pytest.raises(ValueError):
            emit([], str(tmp_path / "x.txt"))
        with pytest.raises(OSError, match="missing"):
            emit({"a": 1}, str(tmp_path / "missing" / "x.json"))


SMALL = dict(N_list=(8, 16), replicas=3, T=0.25, record_times=(0.125, 0.25),
             pde={"h": 0.02, "dt": 0.005}, seed=11)


class TestSweep:
    def test_replica_seeds_distinct(self):
        seeds = {s for N in (32, 64) for r in range(50) for s in replica_seeds(5, N, r)}
        assert len(seeds) == 200

    @pytest.mark.parametrize("stat,initial", [("U", "stationary"), ("RU", "perturbed:bumped")])
    def test_deterministic(self, stat, initial, tmp_path):
        cfg = ExperimentConfig(statistics=stat, initial=initial, **SMALL)
        texts = []
        for k in range(2):
            rows, failures = run_convergence(cfg)
            assert failures == []
            assert len(rows) == 4 and all(r.replicas_ok == 3 for r in rows)
            emit(rows, str(tmp_path / f"{k}.csv"))
            emit(rows, str(tmp_path / f"{k}.json"), meta=experiments.metadata(cfg))
            texts.append(((tmp_path / f"{k}.csv").read_bytes(), (tmp_path / f"{k}.json").read_bytes()))
        assert texts[0] == texts[1]

    def test_threads_do_not_change_results(self):
        cfg = ExperimentConfig(**SMALL)
        a, _ = run_convergence(cfg)
        b, _ = run_convergence(dataclasses.replace(cfg, threads=3))
        assert a == b

    def test_replica_permutation(self):
        cfg = ExperimentConfig(**SMALL)
        refs = experiments.reference_solutions(cfg)
        results = [run_replica(cfg, 8, r, 0.8, refs) for r in range(5)]
        weak = [res.weak[0] for res in results]
        assert np.median(weak) == np.median(weak[::-1]) == np.median(weak[2:] + weak[:2])

    def test_failures_reported(self, monkeypatch):
        cfg = ExperimentConfig(**SMALL)
        real = experiments.simulate

        def flaky(run, initial):
            if run.seed == replica_seeds(cfg.seed, 8, 1)[1]:
                raise RuntimeError("boom")
            return real(run, initial)
        monkeypatch.setattr(experiments, "simulate", flaky)
        rows, failures = run_convergence(cfg)
        assert failures == [{"N": 8, "replica": 1, "error": "RuntimeError: boom"}]
        assert [r.replicas_ok for r in rows] == [2, 2, 3, 3]
        assert rows[0].failures == 1
