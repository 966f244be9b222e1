"""Exact event-driven simulation of the diagram dynamics.

Four continuous-time Markov chains are covered:

* ``P_U``: partitions, rows grow at rate ``eps`` and shrink at rate 1 wherever
  the result is still a partition (creation of a row of length 1 at rate
  ``eps``).
* ``Q_RU``: the same moves restricted to strict partitions.
* ``ETA_BAR_Z``: the exclusion process on Z obtained from ``P_U`` through the
  map ``p -> {p_i - i + 1}``.  Right jumps have rate ``eps``, left jumps rate 1.
* ``ETA_N``: the exclusion process on the positive integers obtained from
  ``Q_RU``; site 1 is fed by a reservoir (creation ``eps``, absorption 1).

Each chain runs at speed ``N**2``.  Small-state move lists (``enumerate_moves_*``,
``step``) are kept as a plain reference implementation; long runs go through the
compiled kernel in :mod:`younghydro._kernel`, which works in the exclusion
picture for all four processes.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernel as K
from .diagrams import (
    ConfigN,
    ConfigZ,
    Partition,
    StrictPartition,
    configN_to_strict,
    configZ_to_partition,
    height_profile,
    partition_to_configZ,
    strict_to_configN,
)
from .grid import GridField

RNG_ALGORITHM = "numpy.random.Philox-4x64-10"
DEFAULT_EVENT_CAP = 10**9


class AbsorbingState(RuntimeError):
    """No move is available (only possible when ``eps == 0``)."""


class EventCapExceeded(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every simulation stream."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def replica_seed(master: int, index: int) -> int:
    """Seed of replica stream ``index``: ``master XOR index``."""
    return (int(master) ^ int(index)) & (2**64 - 1)


# --- reference move lists ------------------------------------------------

class Move(NamedTuple):
    direction: str  # up/down/create/annihilate (diagrams), right/left (exclusion)
    target: int  # block value, or left site of the edge
    rate: float


@dataclass(frozen=True)
class MoveList:
    entries: tuple[Move, ...]
    total_rate: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_rate", sum((m.rate for m in self.entries), 0 * 1))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def enumerate_moves_U(p: Partition, eps) -> MoveList:
    moves = []
    for value, _ in p.blocks:
        moves.append(Move("up", value, eps))
    moves.append(Move("create", 0, eps))
    for value, _ in p.blocks:
        moves.append(Move("annihilate" if value == 1 else "down", value, 1))
    return MoveList(tuple(moves))


def enumerate_moves_R(q: StrictPartition, eps) -> MoveList:
    parts = q.parts
    n = len(parts)
    up, down = [], []
    for i, v in enumerate(parts):
        prev = parts[i - 1] if i > 0 else math.inf
        if prev > v + 1:
            up.append(Move("up", v, eps))
        nxt = parts[i + 1] if i + 1 < n else 0
        if v == 1:
            down.append(Move("annihilate", 1, 1))
        elif v > nxt + 1:
            down.append(Move("down", v, 1))
    if n == 0 or parts[-1] > 1:
        up.append(Move("create", 0, eps))
    return MoveList(tuple(up + down))


def enumerate_moves_Z(c: ConfigZ, eps) -> MoveList:
    lo, hi = c.window()
    right, left = [], []
    occ = c.to_array(lo - 1, hi + 1)
    for j in range(len(occ) - 1):
        x = lo - 1 + j
        if occ[j] == 1 and occ[j + 1] == 0:
            right.append(Move("right", x, eps))
        elif occ[j] == 0 and occ[j + 1] == 1:
            left.append(Move("left", x, 1))
    return MoveList(tuple(right + left))


def enumerate_moves_N(c: ConfigN, eps) -> MoveList:
    occupied = set(c.occupied)
    right, left = [], []
    for x in c.occupied:
        if x + 1 not in occupied:
            right.append(Move("right", x, eps))
        if x >= 2 and x - 1 not in occupied:
            left.append(Move("left", x - 1, 1))
    if 1 in occupied:
        left.append(Move("annihilate", 0, 1))
    else:
        right.append(Move("create", 0, eps))
    return MoveList(tuple(right + left))


def enumerate_moves(state, eps) -> MoveList:
    if isinstance(state, Partition):
        return enumerate_moves_U(state, eps)
    if isinstance(state, StrictPartition):
        return enumerate_moves_R(state, eps)
    if isinstance(state, ConfigZ):
        return enumerate_moves_Z(state, eps)
    if isinstance(state, ConfigN):
        return enumerate_moves_N(state, eps)
    raise TypeError(f"unsupported state {type(state).__name__}")


def apply_move(state, move: Move):
    d, v = move.direction, move.target
    if isinstance(state, Partition):
        mult = state.multiplicities()
        if d in ("up", "create"):
            if v:
                mult[v] -= 1
            mult[v + 1] = mult.get(v + 1, 0) + 1
        else:
            mult[v] -= 1
            if v > 1:
                mult[v - 1] = mult.get(v - 1, 0) + 1
        return Partition.from_multiplicities(mult)
    if isinstance(state, StrictPartition):
        parts = list(state.parts)
        if d == "create":
            parts.append(1)
        elif d == "annihilate":
            parts.remove(1)
        else:
            i = parts.index(v)
            parts[i] = v + 1 if d == "up" else v - 1
        return StrictPartition(tuple(parts))
    if isinstance(state, ConfigZ):
        a, b = state.occupied(v), state.occupied(v + 1)
        holes = set(state.holes_left)
        parts = set(state.particles_right)
        for x, new in ((v, b), (v + 1, a)):
            if x <= 0:
                (holes.discard if new else holes.add)(x)
            else:
                (parts.add if new else parts.discard)(x)
        return ConfigZ(tuple(holes), tuple(parts))
    if isinstance(state, ConfigN):
        occ = set(state.occupied)
        if d == "create":
            occ.add(1)
        elif d == "annihilate":
            occ.discard(1)
        elif d == "right":
            occ.discard(v)
            occ.add(v + 1)
        else:
            occ.discard(v + 1)
            occ.add(v)
        return ConfigN(tuple(occ))
    raise TypeError(f"unsupported state {type(state).__name__}")


def step(state, moves: MoveList, rng, speed: float = 1.0):
    """One Gillespie step: returns ``(new_state, waiting_time)``.

    The waiting time is drawn first (``rng.exponential``), then the move with
    ``rng.random() * total_rate`` against the cumulative rates in list order.
    """
    total = float(moves.total_rate)
    if total <= 0.0:
        raise AbsorbingState("no move available")
    wait = rng.exponential(1.0 / (total * speed))
    u = rng.random() * total
    acc = 0.0
    chosen = moves.entries[-1]
    for m in moves.entries:
        acc += float(m.rate)
        if u < acc:
            chosen = m
            break
    return apply_move(state, chosen), wait


# --- simulation ----------------------------------------------------------

class Process(str, Enum):
    P_U = "P_U"
    Q_RU = "Q_RU"
    ETA_BAR_Z = "ETA_BAR_Z"
    ETA_N = "ETA_N"

    @property
    def reservoir(self) -> bool:
        return self in (Process.Q_RU, Process.ETA_N)


_STATE_TYPES = {
    Process.P_U: Partition,
    Process.Q_RU: StrictPartition,
    Process.ETA_BAR_Z: ConfigZ,
    Process.ETA_N: ConfigN,
}

OBSERVABLES = (
    "state",
    "area",
    "scaled_height",
    "total_mass",
    "boundary_occupation",
    "boundary_time",
    "hopf_cole",
)


@dataclass(frozen=True)
class SimRun:
    N: int
    epsilon: float
    T: float
    record_times: tuple[float, ...]
    seed: int
    process: Process = Process.P_U
    observables: tuple[str, ...] = ("state",)
    grid: tuple[float, float, int] | None = None  # (umin, h, n) for profile observables
    max_events: int = DEFAULT_EVENT_CAP

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        rt = tuple(float(t) for t in self.record_times)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.T < 0:
            raise ValueError("horizon must be non-negative")
        if list(rt) != sorted(rt) or (rt and (rt[0] < 0 or rt[-1] > self.T)):
            raise ValueError("record_times must be sorted inside [0, T]")
        for name in self.observables:
            if name not in OBSERVABLES:
                raise ValueError(f"unknown observable {name!r}")
        if self.grid is None and {"scaled_height", "hopf_cole"} & set(self.observables):
            raise ValueError("profile observables need a grid")
        object.__setattr__(self, "record_times", rt)


@dataclass
class ObservableSeries:
    times: list[float]
    values: dict[str, list]
    events: list[int]
    meta: dict = field(default_factory=dict)


class Engine:
    """Owns one trajectory: occupation window, move sets, clock and RNG stream."""

    def __init__(self, occ: np.ndarray, offset: int, reservoir: bool, eps: float,
                 speed: float, rng: np.random.Generator, max_events: int = DEFAULT_EVENT_CAP,
                 buffer_size: int = 1 << 14):
        self.occ = np.ascontiguousarray(occ, dtype=np.uint8)
        self.offset = int(offset)
        self.reservoir = bool(reservoir)
        self.eps = float(eps)
        self.speed = float(speed)
        self.rng = rng
        self.max_events = int(max_events)
        self.buffer_size = buffer_size
        self.counts = np.zeros(4, dtype=np.int64)
        self.clock = np.zeros(3, dtype=np.float64)
        self._alloc()
        self.counts[K.RAND_IDX] = buffer_size  # forces a refill before the first event
        self.exps = np.empty(buffer_size)
        self.unifs = np.empty(buffer_size)
        total = self.total_rate()
        wait = rng.standard_exponential()
        self.clock[K.T_NEXT] = wait / (total * self.speed) if total > 0 else np.inf

    def _alloc(self):
        W = self.occ.shape[0]
        self.up_list = np.empty(W, dtype=np.int64)
        self.up_pos = np.empty(W, dtype=np.int64)
        self.down_list = np.empty(W, dtype=np.int64)
        self.down_pos = np.empty(W, dtype=np.int64)
        K.rebuild(self.occ, self.reservoir, self.up_list, self.up_pos,
                  self.down_list, self.down_pos, self.counts)

    @property
    def t(self) -> float:
        return float(self.clock[K.T_NOW])

    @property
    def events(self) -> int:
        return int(self.counts[K.EVENTS])

    @property
    def occupation_integral(self) -> float:
        return float(self.clock[K.OCC_INT])

    def total_rate(self) -> float:
        return self.eps * int(self.counts[K.N_UP]) + int(self.counts[K.N_DOWN])

    def recount(self) -> tuple[int, int]:
        """Move-set sizes recomputed from the occupation array."""
        n_up = n_down = 0
        for k in range(self.occ.shape[0] - 1):
            kind = K.edge_kind(self.occ, k, self.reservoir)
            n_up += kind == 1
            n_down += kind == 2
        return n_up, n_down

    def _grow(self):
        W = self.occ.shape[0]
        if self.reservoir:
            new = np.zeros(2 * W, dtype=np.uint8)
            new[:W] = self.occ
        else:
            left = W // 2
            new = np.zeros(2 * W, dtype=np.uint8)
            new[:left] = 1
            new[left:left + W] = self.occ
            self.offset -= left
        self.occ = new
        self._alloc()

    def advance(self, t_stop: float) -> None:
        while True:
            if self.counts[K.RAND_IDX] >= self.buffer_size:
                self.exps = self.rng.standard_exponential(self.buffer_size)
                self.unifs = self.rng.random(self.buffer_size)
                self.counts[K.RAND_IDX] = 0
            status = K.run_events(
                self.occ, self.up_list, self.up_pos, self.down_list, self.down_pos,
                self.counts, self.clock, self.eps, self.speed, float(t_stop),
                self.exps, self.unifs, self.reservoir, 4, self.max_events,
            )
            if status == K.DONE:
                return
            if status == K.NEED_GROW:
                self._grow()
            elif status == K.EVENT_CAP:
                raise EventCapExceeded(f"event cap {self.max_events} reached at t={self.t:.6g}")

    # --- state extraction ---

    def parts(self) -> np.ndarray:
        """Row lengths in non-increasing order (zeros dropped)."""
        if self.reservoir:
            return (np.flatnonzero(self.occ[1:]) + 1)[::-1]
        holes_cum = np.cumsum(1 - self.occ.astype(np.int64))
        idx = np.flatnonzero(self.occ)
        parts = holes_cum[idx][::-1]
        return parts[parts > 0]

    def config(self):
        if self.reservoir:
            return ConfigN.from_array(self.occ)
        return ConfigZ.from_array(self.occ, self.offset)


def _partition_from_sorted(parts: np.ndarray) -> Partition:
    if parts.size == 0:
        return Partition()
    vals, counts = np.unique(parts, return_counts=True)
    return Partition(tuple(zip(vals[::-1].tolist(), counts[::-1].tolist())))


def engine_for(process: Process, state, eps: float, speed: float, rng, max_events=DEFAULT_EVENT_CAP):
    process = Process(process)
    expected = _STATE_TYPES[process]
    if not isinstance(state, expected):
        raise TypeError(f"{process.value} expects a {expected.__name__}, got {type(state).__name__}")
    if process is Process.P_U:
        state = partition_to_configZ(state)
    elif process is Process.Q_RU:
        state = strict_to_configN(state)
    if process.reservoir:
        top = state.occupied[-1] if state.occupied else 1
        size = top + max(64, top) + 2
        occ = state.to_array(size)
        return Engine(occ, 0, True, eps, speed, rng, max_events)
    lo, hi = state.window()
    pad = max(64, (hi - lo) // 2)
    occ = state.to_array(lo - pad, hi + pad)
    return Engine(occ, lo - pad, False, eps, speed, rng, max_events)


def engine_state(engine: Engine, process: Process):
    process = Process(process)
    if process is Process.P_U:
        return _partition_from_sorted(engine.parts())
    if process is Process.Q_RU:
        return StrictPartition(tuple(engine.parts().tolist()))
    return engine.config()


def _grid_points(grid) -> np.ndarray:
    umin, h, n = grid
    return umin + h * np.arange(int(n))


def _snapshot(engine: Engine, run: SimRun) -> dict:
    out = {}
    parts = engine.parts()
    for name in run.observables:
        if name == "state":
            out[name] = engine_state(engine, run.process)
        elif name == "area":
            out[name] = int(parts.sum())
        elif name == "scaled_height":
            u = _grid_points(run.grid)
            asc = parts[::-1].astype(float)
            h = parts.size - np.searchsorted(asc, run.N * u, side="right")
            out[name] = GridField(run.grid[0], run.grid[1], h / run.N)
        elif name == "total_mass":
            out[name] = parts.size / run.N
        elif name == "boundary_occupation":
            out[name] = int(engine.occ[1]) if engine.reservoir else None
        elif name == "boundary_time":
            out[name] = engine.occupation_integral
        elif name == "hopf_cole":
            out[name] = _hopf_cole_from_sites(parts[::-1], run.epsilon, run.N, run.grid)
    return out


def simulate(run: SimRun, initial) -> ObservableSeries:
    """Exact trajectory at speed ``N**2``, sampled at ``run.record_times``."""
    rng = make_rng(run.seed)
    engine = engine_for(run.process, initial, run.epsilon, float(run.N) ** 2, rng, run.max_events)
    series = ObservableSeries([], {name: [] for name in run.observables}, [],
                              meta={"rng": RNG_ALGORITHM, "seed": int(run.seed),
                                    "process": run.process.value, "N": run.N,
                                    "epsilon": run.epsilon})
    for t in run.record_times:
        engine.advance(t)
        series.times.append(t)
        series.events.append(engine.events)
        for name, value in _snapshot(engine, run).items():
            series.values[name].append(value)
    engine.advance(run.T)
    series.meta["final_time"] = engine.t
    series.meta["events"] = engine.events
    return series


def simulate_exclusion_Z(run: SimRun, initial: ConfigZ) -> ObservableSeries:
    if run.process is not Process.ETA_BAR_Z:
        raise ValueError("simulate_exclusion_Z needs process ETA_BAR_Z")
    return simulate(run, initial)


def simulate_exclusion_N(run: SimRun, initial: ConfigN) -> ObservableSeries:
    if run.process is not Process.ETA_N:
        raise ValueError("simulate_exclusion_N needs process ETA_N")
    return simulate(run, initial)


# --- observables -----------------------------------------------------------

def _as_diagram(state):
    if isinstance(state, ConfigZ):
        return configZ_to_partition(state)
    if isinstance(state, ConfigN):
        return configN_to_strict(state)
    return state


def scaled_height_snapshot(state, N: int, grid: GridField | tuple) -> GridField:
    """Scaled height ``(1/N) * height(N u)`` on the nodes of ``grid``."""
    if isinstance(grid, GridField):
        grid = (grid.xmin, grid.h, len(grid))
    u = _grid_points(grid)
    return GridField(grid[0], grid[1], height_profile(_as_diagram(state), N * u) / N)


def empirical_mass(state, N: int, g=None) -> float:
    """``<pi, g> = (1/N) sum_x eta(x) g(x/N)`` for finitely supported configurations.

    For a ConfigZ, ``g`` must vanish on the left tail; only sites from the
    leftmost hole onward enter the sum.
    """
    if isinstance(state, StrictPartition):
        state = strict_to_configN(state)
    if isinstance(state, ConfigN):
        x = np.asarray(state.occupied, dtype=float)
    elif isinstance(state, ConfigZ):
        lo, hi = state.window()
        occ = state.to_array(lo, hi)
        x = (lo + np.flatnonzero(occ)).astype(float)
    else:
        raise TypeError("empirical_mass expects a particle configuration")
    if g is None:
        return x.size / N
    return float(np.sum(g(x / N))) / N


def total_mass(state, N: int) -> float:
    """``X = (1/N) sum_x eta(x)`` of a configuration on the positive integers."""
    if isinstance(state, StrictPartition):
        return len(state.parts) / N
    return len(state.occupied) / N


def boundary_occupation(state) -> int:
    if isinstance(state, StrictPartition):
        return int(1 in state.parts)
    return int(1 in state)


def _hopf_cole_from_sites(sites_asc: np.ndarray, eps: float, N: int, grid) -> GridField:
    u = _grid_points(grid)
    sites = np.asarray(sites_asc, dtype=np.int64)
    m = np.floor(N * u + 1e-12).astype(np.int64)
    tail = sites.size - np.searchsorted(sites, m, side="right")  # sites >= m + 1
    occ_m = np.isin(m, sites).astype(float)
    frac = np.where(u >= 1.0 / N - 1e-15, (m + 1 - N * u) * occ_m, 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    log_eps = math.log(eps) if eps > 0 else -math.inf
    return GridField(grid[0], grid[1], np.exp(-log_eps * (tail + frac)))


def hopf_cole_profile(eta, eps: float, N: int, grid: GridField | tuple) -> GridField:
    """Interpolated microscopic Hopf-Cole field ``zeta(t, u)`` on ``grid``.

    ``zeta(x) = eps ** (-sum_{y >= x} eta(y))``, linearly interpolated in the
    exponent between lattice points ``x / N``.
    """
    if isinstance(eta, StrictPartition):
        eta = strict_to_configN(eta)
    if isinstance(grid, GridField):
        grid = (grid.xmin, grid.h, len(grid))
    return _hopf_cole_from_sites(np.asarray(eta.occupied), eps, N, grid)


def mass_drift(eta: ConfigN, eps, N: int):
    """``N**2 * L X`` evaluated from the move list (exact for rational ``eps``)."""
    total = 0
    for m in enumerate_moves_N(eta, eps):
        if m.direction == "create":
            total += m.rate
        elif m.direction == "annihilate":
            total -= m.rate
    return N * total


def time_averaged_boundary(series: ObservableSeries, T1: float | None = None,
                           T2: float | None = None) -> float:
    """Exact occupation-time average of site 1 between two record times."""
    if "boundary_time" not in series.values:
        raise ValueError("series does not record boundary_time")
    times = series.times
    T1 = times[0] if T1 is None else T1
    T2 = times[-1] if T2 is None else T2
    if T2 <= T1:
        raise ValueError("need T2 > T1")
    i1, i2 = times.index(T1), times.index(T2)
    acc = series.values["boundary_time"]
    return (acc[i2] - acc[i1]) / (T2 - T1)


# --- trajectory output -------------------------------------------------------

def _payload(value):
    if isinstance(value, GridField):
        return {"xmin": value.xmin, "h": value.h, "values": value.values.tolist()}
    if isinstance(value, Partition | StrictPartition):
        return list(value.parts)
    if isinstance(value, ConfigZ):
        return {"holes_left": list(value.holes_left), "particles_right": list(value.particles_right)}
    if isinstance(value, ConfigN):
        return {"occupied": list(value.occupied)}
    return value


def write_jsonl(series: ObservableSeries, fh) -> None:
    """Stream ``{t, observable, payload}`` records, one per line."""
    fh.write(json.dumps({"t": None, "observable": "meta", "payload": series.meta}, sort_keys=True) + "\n")
    for i, t in enumerate(series.times):
        for name in sorted(series.values):
            rec = {"t": t, "observable": name, "payload": _payload(series.values[name][i])}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_binary(series: ObservableSeries, name: str, fh) -> None:
    """Little-endian column records: f64 time, u32 length, length x f64 values."""
    for t, value in zip(series.times, series.values[name]):
        if isinstance(value, GridField):
            arr = value.values
        else:
            arr = np.atleast_1d(np.asarray(value, dtype=float))
        fh.write(struct.pack("<dI", float(t), arr.size))
        fh.write(np.asarray(arr, dtype="<f8").tobytes())


def read_binary(fh) -> list[tuple[float, np.ndarray]]:
    out = []
    while True:
        head = fh.read(12)
        if not head:
            return out
        t, n = struct.unpack("<dI", head)
        out.append((t, np.frombuffer(fh.read(8 * n), dtype="<f8").copy()))
