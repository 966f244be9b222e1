"""Grandcanonical ensembles over partitions.

Both ensembles weight a diagram by ``eps ** area``.  Under U-statistics the
multiplicity of each part value ``k`` is an independent geometric variable
with ``P(m_k = j) = (1 - eps**k) eps**(k j)``; under RU-statistics each value
is present independently with probability ``eps**k / (1 + eps**k)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diagrams import Partition, StrictPartition

ALPHA = math.pi / math.sqrt(6.0)
BETA = math.pi / math.sqrt(12.0)

SAMPLER_TAIL = 1e-12
_CHUNK = 65536


class Statistics(str, Enum):
    U = "U"
    RU = "RU"

    @classmethod
    def parse(cls, value) -> "Statistics":
        if isinstance(value, cls):
            return value
        return cls(str(value).upper())


class SeriesError(RuntimeError):
    """A truncated series failed to reach its tolerance."""


@dataclass(frozen=True)
class EnsembleParams:
    epsilon: float
    statistics: Statistics = Statistics.U

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))


@dataclass(frozen=True)
class SeriesControl:
    abs_tol: float = 1e-13
    max_terms: int = 50_000_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


def limit_constant(statistics) -> float:
    """``alpha`` for U, ``beta`` for RU."""
    return ALPHA if Statistics.parse(statistics) is Statistics.U else BETA


def log_weight(state, params: EnsembleParams) -> float:
    if params.statistics is Statistics.U and not isinstance(state, Partition):
        raise TypeError("U-statistics weight expects a Partition")
    if params.statistics is Statistics.RU and not isinstance(state, StrictPartition):
        raise TypeError("RU-statistics weight expects a StrictPartition")
    return state.area * math.log(params.epsilon)


def _terms_needed(eps: float, bound_scale: float, tol: float, ctl: SeriesControl) -> int:
    """Smallest K with ``eps**(K+1) * bound_scale < tol``."""
    need = math.log(tol / bound_scale) / math.log(eps) - 1.0
    K = max(1, int(math.ceil(need)))
    if K > ctl.max_terms:
        raise SeriesError(
            f"series needs {K} terms to reach tolerance {tol:g}; max_terms={ctl.max_terms}"
        )
    return K


def _chunked_sum(fn, K: int) -> float:
    total = 0.0
    for start in range(1, K + 1, _CHUNK):
        k = np.arange(start, min(K, start + _CHUNK - 1) + 1, dtype=np.float64)
        total += math.fsum(fn(k))
    return total


def log_partition_function(params: EnsembleParams, ctl: SeriesControl = SeriesControl()) -> float:
    """``log Z``: ``-sum log(1 - eps^k)`` (U) or ``sum log(1 + eps^k)`` (RU)."""
    eps = params.epsilon
    le = math.log(eps)
    if params.statistics is Statistics.U:
        K = _terms_needed(eps, 1.0 / (1.0 - eps) ** 2, ctl.abs_tol, ctl)
        return _chunked_sum(lambda k: -np.log1p(-np.exp(k * le)), K)
    K = _terms_needed(eps, 1.0 / (1.0 - eps), ctl.abs_tol, ctl)
    return _chunked_sum(lambda k: np.log1p(np.exp(k * le)), K)


def _area_terms(k: np.ndarray, le: float) -> np.ndarray:
    x = np.exp(k * le)
    return x / (-np.expm1(k * le)) ** 2


def mean_area(params: EnsembleParams, ctl: SeriesControl = SeriesControl()) -> float:
    """Expected area ``E[n]`` from the Lambert-type series.

    U: ``sum_m eps^m / (1 - eps^m)^2``.  RU: the same terms with alternating
    signs, accumulated separately over odd and even ``m``.
    """
    eps = params.epsilon
    le = math.log(eps)
    # each term is at most eps^m / (1-eps)^2
    K = _terms_needed(eps, 1.0 / (1.0 - eps) ** 3, ctl.abs_tol, ctl)
    if params.statistics is Statistics.U:
        return _chunked_sum(lambda k: _area_terms(k, le), K)
    sigma_odd = 0.0
    sigma_even = 0.0
    for start in range(1, K + 1, _CHUNK):
        k = np.arange(start, min(K, start + _CHUNK - 1) + 1, dtype=np.float64)
        t = _area_terms(k, le)
        odd = (k.astype(np.int64) % 2) == 1
        sigma_odd += math.fsum(t[odd])
        sigma_even += math.fsum(t[~odd])
    return sigma_odd - sigma_even


def sampler_cutoff(eps: float, tail: float = SAMPLER_TAIL) -> int:
    """Largest part value K such that values > K are nonzero with probability < ``tail``."""
    # P(any value > K present) <= sum_{k>K} eps^k = eps^(K+1) / (1 - eps)
    return max(1, int(math.ceil(math.log(tail * (1.0 - eps)) / math.log(eps))))


def sample(params: EnsembleParams, rng: np.random.Generator):
    """Exact draw from the grandcanonical ensemble (up to the 1e-12 value cutoff)."""
    eps = params.epsilon
    K = sampler_cutoff(eps)
    k = np.arange(1, K + 1, dtype=np.float64)
    pk = np.exp(k * math.log(eps))
    if params.statistics is Statistics.U:
        mult = rng.geometric(1.0 - pk) - 1
        nz = np.flatnonzero(mult)
        values = nz + 1
        return Partition(tuple(zip(values[::-1].tolist(), mult[nz][::-1].tolist())))
    present = rng.random(K) < pk / (1.0 + pk)
    values = np.flatnonzero(present) + 1
    return StrictPartition(tuple(values[::-1].tolist()))


def _check_monotone(f, lo: float, hi: float, points: int = 33) -> None:
    grid = np.linspace(lo, hi, points)
    vals = [f(d) for d in grid]
    # grid runs over 1-eps, so the mean area must strictly decrease
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise SeriesError("mean area is not monotone on the bisection bracket")


def solve_epsilon(N: int, statistics, ctl: SeriesControl = SeriesControl(),
                  rel_tol: float = 1e-10) -> float:
    """Solve ``mean_area(eps) = N**2`` by bisection on ``delta = 1 - eps``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    stat = Statistics.parse(statistics)
    target = float(N) ** 2
    c = limit_constant(stat)

    def area(delta: float) -> float:
        return mean_area(EnsembleParams(1.0 - delta, stat), ctl)

    # mean area behaves like (c / delta)^2 for small delta
    hi = min(0.999, 4.0 * c / N)
    lo = 0.25 * c / N
    while area(hi) > target:
        if hi >= 0.999:
            raise SeriesError(f"no bracket encloses N^2={target:g}")
        hi = min(0.999, 2.0 * hi)
    while area(lo) < target:
        lo *= 0.5
        if lo < 1e-12:
            raise SeriesError(f"no bracket encloses N^2={target:g}")
    if stat is Statistics.RU:
        _check_monotone(area, lo, hi)

    tol = rel_tol * target
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = area(mid)
        if abs(value - target) <= tol:
            return 1.0 - mid
        if value > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps:
            break
    mid = 0.5 * (lo + hi)
    if abs(area(mid) - target) > tol:
        raise SeriesError(f"bisection stalled before reaching residual {tol:g}")
    return 1.0 - mid
