"""Convergence experiments: microscopic height profiles against the limit equations."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .diagrams import Partition, StrictPartition
from .dynamics import RNG_ALGORITHM, Process, SimRun, make_rng, replica_seed, simulate
from .ensembles import BETA, EnsembleParams, Statistics, sample, solve_epsilon
from .grid import GridField
from .pde import (
    PdeConfig,
    check_XR,
    check_XU,
    reference_profile,
    solve_bhydro,
    solve_fhydro,
)

SCHEMA_VERSION = 1

# Test functions for the weak distance.  Changing them changes every reported
# distance, so the family carries a version id.
FAMILY_ID = "bumps-v1"
BUMP_SUPPORTS = ((0.2, 1.0), (0.5, 2.0), (1.0, 4.0))

# Observation window for scaled heights and the sup-distance.
OBS_UMAX = 4.5
SUP_WINDOW = (0.2, 4.0)


def bump(u, a: float, b: float) -> np.ndarray:
    """Unnormalised smooth bump ``exp(-1/(1-s^2))`` on ``(a, b)``."""
    u = np.asarray(u, dtype=float)
    s = (2 * u - (a + b)) / (b - a)
    out = np.zeros_like(u)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def weak_distance(psi_tilde: GridField, psi_ref: GridField, family: str = FAMILY_ID) -> float:
    """``max_f |int f psi_tilde - int f psi_ref|`` over the bump family.

    Integrals are trapezoidal on the nodes of ``psi_tilde``; each bump is
    normalised to unit integral on those nodes.
    """
    if family != FAMILY_ID:
        raise ValueError(f"unknown test-function family {family!r}")
    lo = min(a for a, _ in BUMP_SUPPORTS)
    hi = max(b for _, b in BUMP_SUPPORTS)
    for g, name in ((psi_tilde, "profile"), (psi_ref, "reference")):
        if g.xmin > lo + 1e-12 or g.xmax < hi - 1e-12:
            raise ValueError(f"{name} grid [{g.xmin:g}, {g.xmax:g}] does not cover [{lo:g}, {hi:g}]")
    worst = 0.0
    for a, b in BUMP_SUPPORTS:
        part = psi_tilde.restrict(a, b)
        x = part.x
        f = bump(x, a, b)
        norm = np.trapezoid(f, x)
        diff = part.values - _values_at(psi_ref, part)
        worst = max(worst, abs(float(np.trapezoid(f * diff, x) / norm)))
    return worst


def _values_at(ref: GridField, part: GridField) -> np.ndarray:
    """``ref`` on the nodes of ``part``; exact slicing when the grids align."""
    offset = (part.xmin - ref.xmin) / ref.h
    k = int(round(offset))
    if part.h == ref.h and abs(offset - k) < 1e-9 and 0 <= k and k + len(part) <= len(ref):
        return ref.values[k:k + len(part)]
    return ref.interp(part.x)


def sup_distance_window(psi_tilde: GridField, psi_ref: GridField, window=SUP_WINDOW) -> float:
    part = psi_tilde.restrict(*window)
    return float(np.max(np.abs(part.values - _values_at(psi_ref, part))))


# --- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class PdeSettings:
    h: float = 5e-3
    dt: float = 5e-4
    L: float | None = None  # defaults: 15 (U, density line half-width), 25 (RU)


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence sweep.

    ``initial`` is ``stationary`` (ensemble sample, Vershik reference),
    ``vershik`` (deterministic quantiles of the Vershik curve),
    ``perturbed:<kind>`` with ``kind`` from ``pde.PERTURBATIONS``, or
    ``profile:<path>`` for a two-column CSV height profile.
    """

    statistics: Statistics = Statistics.U
    N_list: tuple[int, ...] = (32, 64, 128)
    replicas: int = 10
    T: float = 1.0
    record_times: tuple[float, ...] = (0.25, 0.5, 1.0)
    initial: str = "stationary"
    family: str = FAMILY_ID
    pde: PdeSettings = field(default_factory=PdeSettings)
    obs_h: float = 0.01
    seed: int = 0
    out: str | None = None
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        object.__setattr__(self, "N_list", tuple(int(n) for n in self.N_list))
        object.__setattr__(self, "record_times", tuple(float(t) for t in self.record_times))
        if isinstance(self.pde, dict):
            object.__setattr__(self, "pde", PdeSettings(**self.pde))
        if not self.N_list or min(self.N_list) < 1:
            raise ValueError("N_list must be a non-empty list of positive integers")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.T <= 0:
            raise ValueError("T must be positive")
        rt = self.record_times
        if not rt or list(rt) != sorted(rt) or rt[0] < 0 or rt[-1] > self.T:
            raise ValueError("record_times must be sorted inside [0, T]")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.family != FAMILY_ID:
            raise ValueError(f"unknown test-function family {self.family!r}")
        kind = self.initial.split(":", 1)[0]
        if kind not in ("stationary", "vershik", "perturbed", "profile"):
            raise ValueError(f"unknown initial condition {self.initial!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["statistics"] = self.statistics.value
        d["N_list"] = list(self.N_list)
        d["record_times"] = list(self.record_times)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def hash(self) -> str:
        """SHA-256 of the canonical JSON, ignoring the output path and thread count."""
        d = self.to_dict()
        d.pop("out", None)
        d.pop("threads", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    t: float
    weak_median: float
    weak_iqr: float
    sup_median: float
    sup_iqr: float
    replicas_ok: int
    failures: int
    events_median: float
    wall_clock: float = field(default=0.0, compare=False)

    def __post_init__(self):
        for name in ("weak_median", "weak_iqr", "sup_median", "sup_iqr"):
            v = getattr(self, name)
            if not (v >= 0 or math.isnan(v)):
                raise ValueError(f"{name} must be >= 0")


ROW_FIELDS = tuple(f.name for f in dataclasses.fields(ConvergenceRow) if f.name != "wall_clock")


# --- initial data ------------------------------------------------------------

def build_initial_microstate(psi0: GridField, N: int, statistics):
    """Diagram whose scaled height follows ``psi0`` by quantiles.

    Row ``i`` (1-based) has length ``round(N * psi0^{-1}((i - 1/2) / N))`` for
    ``i <= ceil(N * psi0(u_min))``.  RU rows are then made strictly
    decreasing by pushing duplicates down by one.
    """
    stat = Statistics.parse(statistics)
    v = psi0.values
    if np.any(np.diff(v) > 0):
        raise ValueError("psi0 must be non-increasing")
    if stat is Statistics.RU and np.any(np.diff(v) / psi0.h < -1 - 1e-9):
        raise ValueError("RU profile slope must be >= -1")
    if np.any(v < 0):
        raise ValueError("psi0 must be non-negative")
    rows = math.ceil(N * v[0] - 1e-12)
    if rows <= 0:
        return StrictPartition() if stat is Statistics.RU else Partition()
    y = (np.arange(1, rows + 1) - 0.5) / N
    u = np.interp(y, v[::-1], psi0.x[::-1])
    parts = np.minimum.accumulate(np.rint(N * u).astype(np.int64))
    if stat is Statistics.U:
        return Partition.from_parts(parts[parts > 0].tolist())
    return StrictPartition(strict_repair(parts))


def strict_repair(parts) -> tuple[int, ...]:
    """Make non-increasing rows strictly decreasing by pushing duplicates down.

    Each row in a run of equal rows drops one below its predecessor; rows that
    reach zero are discarded.
    """
    out = [int(x) for x in parts]
    for i in range(1, len(out)):
        if out[i] >= out[i - 1]:
            out[i] = out[i - 1] - 1
    return tuple(x for x in out if x > 0)


def _initial_callable(cfg: ExperimentConfig):
    kind, _, arg = cfg.initial.partition(":")
    if kind in ("stationary", "vershik"):
        return reference_profile(cfg.statistics, "vershik")
    if kind == "perturbed":
        return reference_profile(cfg.statistics, arg)
    return None


def _profile_from_csv(cfg: ExperimentConfig) -> GridField:
    path = cfg.initial.partition(":")[2]
    try:
        with open(path) as fh:
            return GridField.from_csv(fh.read())
    except OSError as exc:
        raise OSError(f"cannot read initial profile {path}: {exc}") from exc


def pde_initial(cfg: ExperimentConfig) -> GridField:
    """Initial height profile on the grid the matching PDE is solved on."""
    f = _initial_callable(cfg)
    h = cfg.pde.h
    if f is None:
        return _profile_from_csv(cfg)
    if cfg.statistics is Statistics.U:
        return GridField.from_function(f, 0.1, 8.0, h)
    L = cfg.pde.L or 25.0
    return GridField.from_function(f, 0.0, L, h)


def micro_initial(cfg: ExperimentConfig, N: int) -> GridField:
    """Fine grid of the initial profile used for the quantile construction."""
    f = _initial_callable(cfg)
    if f is None:
        return _profile_from_csv(cfg)
    h = min(1e-3, 0.05 / N)
    if cfg.statistics is Statistics.U:
        return GridField.from_function(f, 0.5 / N, 12.0, h)
    return GridField.from_function(f, 0.0, 25.0, h)


def pde_config(cfg: ExperimentConfig) -> PdeConfig:
    L = cfg.pde.L or (15.0 if cfg.statistics is Statistics.U else 25.0)
    return PdeConfig(L=L, h=cfg.pde.h, dt=cfg.pde.dt)


def reference_solutions(cfg: ExperimentConfig) -> list[GridField]:
    """PDE solution at each record time, from the matched initial profile."""
    psi0 = pde_initial(cfg)
    pcfg = pde_config(cfg)
    times = list(cfg.record_times)
    if cfg.statistics is Statistics.U:
        check_XU(psi0)
        sols = solve_bhydro(psi0, cfg.T, pcfg, times=times)
    else:
        check_XR(psi0)
        sols = solve_fhydro(psi0, cfg.T, pcfg, times=times)
    return sols


def observation_grid(cfg: ExperimentConfig) -> tuple[float, float, int]:
    umin = 0.1 if cfg.statistics is Statistics.U else 0.0
    n = int(round((OBS_UMAX - umin) / cfg.obs_h)) + 1
    return (umin, cfg.obs_h, n)


# --- sweep -------------------------------------------------------------------

def replica_seeds(master: int, N: int, r: int) -> tuple[int, int]:
    """Independent seeds for the initial sample and the dynamics of one replica."""
    index = (int(N) << 24) | int(r)
    return replica_seed(master, index), replica_seed(master, index | (1 << 62))


@dataclass
class ReplicaResult:
    weak: list[float] | None
    sup: list[float] | None
    events: int
    seconds: float
    error: str | None = None


def run_replica(cfg: ExperimentConfig, N: int, r: int, eps: float, refs: list[GridField]) -> ReplicaResult:
    start = time.perf_counter()
    sample_seed, dyn_seed = replica_seeds(cfg.seed, N, r)
    try:
        if cfg.initial == "stationary":
            initial = sample(EnsembleParams(eps, cfg.statistics), make_rng(sample_seed))
        else:
            initial = build_initial_microstate(micro_initial(cfg, N), N, cfg.statistics)
        process = Process.P_U if cfg.statistics is Statistics.U else Process.Q_RU
        run = SimRun(N, eps, cfg.T, cfg.record_times, dyn_seed, process,
                     ("scaled_height",), observation_grid(cfg))
        series = simulate(run, initial)
    except Exception as exc:  # reported per replica, the sweep goes on
        return ReplicaResult(None, None, 0, time.perf_counter() - start, f"{type(exc).__name__}: {exc}")
    heights = series.values["scaled_height"]
    weak = [weak_distance(hgt, ref, cfg.family) for hgt, ref in zip(heights, refs)]
    sup = [sup_distance_window(hgt, ref) for hgt, ref in zip(heights, refs)]
    return ReplicaResult(weak, sup, int(series.meta["events"]), time.perf_counter() - start)


def _median_iqr(values) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return float(med), float(q3 - q1)


def run_convergence(cfg: ExperimentConfig, progress=None) -> tuple[list[ConvergenceRow], list[dict]]:
    """Sweep over ``cfg.N_list``; returns the rows and the per-replica failures."""
    refs = reference_solutions(cfg)
    rows: list[ConvergenceRow] = []
    failures: list[dict] = []
    for N in cfg.N_list:
        eps = solve_epsilon(N, cfg.statistics)
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda r: run_replica(cfg, N, r, eps, refs), range(cfg.replicas)))
        wall = time.perf_counter() - t0
        ok = [res for res in results if res.error is None]
        for r, res in enumerate(results):
            if res.error is not None:
                failures.append({"N": N, "replica": r, "error": res.error})
        events = float(np.median([res.events for res in ok])) if ok else float("nan")
        for k, t in enumerate(cfg.record_times):
            wm, wi = _median_iqr([res.weak[k] for res in ok])
            sm, si = _median_iqr([res.sup[k] for res in ok])
            rows.append(ConvergenceRow(N, t, wm, wi, sm, si, len(ok), len(results) - len(ok), events, wall))
        if progress is not None:
            progress(N, wall)
    return rows, failures


# --- output ------------------------------------------------------------------

def metadata(cfg: ExperimentConfig) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "seed": int(cfg.seed),
        "rng": RNG_ALGORITHM,
        "config_hash": cfg.hash(),
        "family": cfg.family,
        "tolerances": "pilot-calibrated; the limit theorems give no convergence rate",
    }


def rows_to_csv(rows: list[ConvergenceRow], fields=ROW_FIELDS) -> str:
    """CSV with one row per (N, record time); floats in shortest round-trip form."""
    out = []
    buf_fields = list(fields)
    out.append(",".join(buf_fields))
    for row in rows:
        out.append(",".join(repr(getattr(row, f)) for f in buf_fields))
    return "\n".join(out) + "\n"


def emit(obj, path: str, fmt: str | None = None, meta: dict | None = None) -> None:
    """Write rows, a grid field or a plain dict as CSV or JSON."""
    fmt = fmt or os.path.splitext(path)[1].lstrip(".")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")
    if isinstance(obj, GridField):
        text = obj.to_csv() if fmt == "csv" else json.dumps(
            {"schema": SCHEMA_VERSION, "meta": meta or {}, "field": json.loads(obj.to_json())}, indent=2)
    elif isinstance(obj, list) and all(isinstance(r, ConvergenceRow) for r in obj):
        if fmt == "csv":
            text = rows_to_csv(obj)
        else:
            text = json.dumps({"schema": SCHEMA_VERSION, "meta": meta or {},
                               "rows": [{f: getattr(r, f) for f in ROW_FIELDS} for r in obj]}, indent=2)
    else:
        if fmt == "csv":
            raise ValueError("only rows and grid fields have a CSV form")
        text = json.dumps({"schema": SCHEMA_VERSION, "meta": meta or {}, "data": obj}, indent=2)
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_rows_csv(text: str) -> list[ConvergenceRow]:
    rows = []
    for rec in csv.DictReader(text.splitlines()):
        rows.append(ConvergenceRow(
            N=int(rec["N"]), t=float(rec["t"]),
            weak_median=float(rec["weak_median"]), weak_iqr=float(rec["weak_iqr"]),
            sup_median=float(rec["sup_median"]), sup_iqr=float(rec["sup_iqr"]),
            replicas_ok=int(rec["replicas_ok"]), failures=int(rec["failures"]),
            events_median=float(rec["events_median"]),
        ))
    return rows
