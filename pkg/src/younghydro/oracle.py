"""Exact small-scale checks: partition counts, truncated chains, stationarity.

A truncated chain keeps every diagram of area at most ``M`` and drops the
transitions that would leave this set.  Both dynamics are reversible for
``eps ** area``, so dropping exits keeps the restricted measure invariant and
the stationary vector is exactly proportional to ``eps ** area``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .diagrams import (
    Partition,
    StrictPartition,
    partition_to_configZ,
    strict_to_configN,
)
from .dynamics import apply_move, enumerate_moves
from .ensembles import Statistics

INT64_MAX = 2**63 - 1
DEFAULT_CAPS = {Statistics.U: 40, Statistics.RU: 60}


class OracleError(RuntimeError):
    """An exactness or adequacy check failed."""


# --- counting ----------------------------------------------------------------

def _count(n: int, distinct: bool) -> int:
    if n < 0:
        raise ValueError("n must be >= 0")
    table = [0] * (n + 1)
    table[0] = 1
    for k in range(1, n + 1):
        if distinct:
            # each part value used at most once: sweep downwards
            for m in range(n, k - 1, -1):
                table[m] += table[m - k]
        else:
            for m in range(k, n + 1):
                table[m] += table[m - k]
    if table[n] > INT64_MAX:
        raise OverflowError(f"count for n={n} exceeds the 64-bit range")
    return table[n]


def count_partitions(n: int) -> int:
    """Number of partitions of ``n`` (bounded-part dynamic program)."""
    return _count(n, distinct=False)


def count_distinct_partitions(n: int) -> int:
    """Number of partitions of ``n`` into distinct parts."""
    return _count(n, distinct=True)


def _counts_upto(M: int, distinct: bool) -> list[int]:
    table = [0] * (M + 1)
    table[0] = 1
    for k in range(1, M + 1):
        rng = range(M, k - 1, -1) if distinct else range(k, M + 1)
        for m in rng:
            table[m] += table[m - k]
    return table


# --- state enumeration -------------------------------------------------------

def _parts_upto(n: int, largest: int, distinct: bool):
    """All partitions of ``n`` with parts <= ``largest``, as descending tuples."""
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        nxt = first - 1 if distinct else first
        for rest in _parts_upto(n - first, nxt, distinct):
            yield (first,) + rest


def enumerate_states(statistics, M: int, cap: int | None = None) -> list:
    """Every diagram of area ``<= M``, ordered by area."""
    stat = Statistics.parse(statistics)
    cap = DEFAULT_CAPS[stat] if cap is None else cap
    if M < 0:
        raise ValueError("M must be >= 0")
    if M > cap:
        raise ValueError(f"M={M} exceeds the enumeration cap {cap} for {stat.value}")
    distinct = stat is Statistics.RU
    out = []
    for n in range(M + 1):
        for parts in _parts_upto(n, n, distinct):
            out.append(StrictPartition(parts) if distinct else Partition.from_parts(parts))
    return out


# --- truncated chain ---------------------------------------------------------

@dataclass(frozen=True)
class TruncatedChain:
    statistics: Statistics
    M: int
    epsilon: object
    states: tuple
    transitions: tuple  # (from, to, rate)

    @property
    def size(self) -> int:
        return len(self.states)

    def generator(self) -> sp.csr_matrix:
        n = self.size
        rows = [i for i, _, _ in self.transitions]
        cols = [j for _, j, _ in self.transitions]
        vals = [float(r) for _, _, r in self.transitions]
        Q = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        out = np.asarray(Q.sum(axis=1)).ravel()
        return (Q - sp.diags(out)).tocsr()

    def exact_rows(self) -> list[dict]:
        """Generator rows ``{column: rate}`` in the arithmetic of the rates, diagonal included."""
        rows = [dict() for _ in range(self.size)]
        for i, j, r in self.transitions:
            rows[i][j] = rows[i].get(j, 0) + r
        for i, row in enumerate(rows):
            row[i] = row.get(i, 0) - sum(v for k, v in row.items() if k != i)
        return rows

    def exact_row_sums(self) -> list:
        return [sum(row.values()) for row in self.exact_rows()]

    def areas(self) -> np.ndarray:
        return np.array([s.area for s in self.states])


def build_truncated_chain(statistics, M: int, eps, cap: int | None = None) -> TruncatedChain:
    """Generator restricted to area ``<= M``; transitions leaving the set are dropped.

    ``eps`` may be a ``Fraction`` for exact rates.
    """
    stat = Statistics.parse(statistics)
    states = enumerate_states(stat, M, cap)
    index = {s: i for i, s in enumerate(states)}
    trans = []
    for i, s in enumerate(states):
        for move in enumerate_moves(s, eps):
            target = apply_move(s, move)
            if target.area > M:
                continue
            trans.append((i, index[target], move.rate))
    return TruncatedChain(stat, M, eps, tuple(states), tuple(trans))


def stationary_distribution(chain: TruncatedChain, residual_tol: float = 1e-12) -> np.ndarray:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` directly."""
    Q = chain.generator()
    A = Q.T.tolil()
    A[0, :] = np.ones(chain.size)
    b = np.zeros(chain.size)
    b[0] = 1.0
    pi = np.atleast_1d(spsolve(A.tocsc(), b))
    if not np.all(np.isfinite(pi)):
        raise OracleError("singular stationary solve")
    residual = float(np.max(np.abs(Q.T @ pi)))
    if residual > residual_tol:
        raise OracleError(f"stationary residual {residual:.3g} exceeds {residual_tol:g}")
    return pi


def restricted_weights(chain: TruncatedChain) -> np.ndarray:
    eps = float(chain.epsilon)
    w = np.array([eps ** s.area for s in chain.states])
    return w / w.sum()


def stationary_error(chain: TruncatedChain) -> float:
    """Max relative error of the solved stationary vector against ``eps ** area``."""
    pi = stationary_distribution(chain)
    w = restricted_weights(chain)
    return float(np.max(np.abs(pi - w) / w))


def detailed_balance_violation(chain: TruncatedChain):
    """Max of ``|eps^n(s) r - eps^n(s') r'|`` over all transitions.

    Exact (a ``Fraction``) when ``eps`` is rational.  A transition without a
    reverse raises ``OracleError``.
    """
    eps = chain.epsilon
    rate = {}
    for i, j, r in chain.transitions:
        rate[(i, j)] = rate.get((i, j), 0) + r
    worst = 0
    for (i, j), r in rate.items():
        back = rate.get((j, i))
        if back is None:
            raise OracleError(f"no reverse transition for {chain.states[i]} -> {chain.states[j]}")
        gap = abs(eps ** chain.states[i].area * r - eps ** chain.states[j].area * back)
        worst = max(worst, gap)
    return worst


def oracle_report(statistics, M: int, eps) -> dict:
    """Summary used by the command-line ``oracle`` subcommand."""
    eps_exact = Fraction(eps).limit_denominator(10**6) if not isinstance(eps, Fraction) else eps
    chain = build_truncated_chain(statistics, M, eps_exact)
    row = chain.exact_row_sums()
    return {
        "statistics": chain.statistics.value,
        "M": M,
        "epsilon": str(eps_exact),
        "states": chain.size,
        "transitions": len(chain.transitions),
        "max_row_sum": float(max(abs(x) for x in row)),
        "max_detailed_balance_violation": float(detailed_balance_violation(chain)),
        "stationary_max_rel_error": stationary_error(chain),
    }


# --- mean area by exact enumeration ------------------------------------------

def exact_mean_area_truncated(eps: float, M: int, statistics, adequacy: float = 1e-15) -> float:
    """``sum n c(n) eps^n / sum c(n) eps^n`` over ``n <= M``."""
    stat = Statistics.parse(statistics)
    if not 0 < eps <= 0.7:
        raise ValueError("exact truncated mean area needs 0 < eps <= 0.7")
    counts = _counts_upto(M, distinct=stat is Statistics.RU)
    if counts[M] * eps**M >= adequacy:
        raise OracleError(f"truncation at M={M} inadequate: c(M) eps^M = {counts[M] * eps**M:.3g}")
    num = math.fsum(n * c * eps**n for n, c in enumerate(counts))
    den = math.fsum(c * eps**n for n, c in enumerate(counts))
    return num / den


def generating_function_gap(eps: float, M: int) -> float:
    """``|prod_k (1 - eps^k)^-1 - sum_{n<=M} p(n) eps^n|`` with the product truncated at ``M``."""
    counts = _counts_upto(M, distinct=False)
    series = math.fsum(c * eps**n for n, c in enumerate(counts))
    product = math.exp(-math.fsum(math.log1p(-eps**k) for k in range(1, M + 1)))
    return abs(product - series)


# --- generator intertwining --------------------------------------------------

def _outcomes(state, eps) -> Counter:
    out = Counter()
    for move in enumerate_moves(state, eps):
        out[apply_move(state, move)] += move.rate
    return out


def intertwining_mismatches(statistics, max_area: int, eps=Fraction(1, 3)) -> list:
    """States whose diagram moves do not map rate-for-rate onto exclusion moves.

    U diagrams map to ``ConfigZ``, RU diagrams to ``ConfigN``.  Returns the
    offending diagrams (empty when the generators intertwine).
    """
    stat = Statistics.parse(statistics)
    to_particles = partition_to_configZ if stat is Statistics.U else strict_to_configN
    bad = []
    for s in enumerate_states(stat, max_area, cap=max(max_area, DEFAULT_CAPS[stat])):
        mapped = Counter()
        for target, rate in _outcomes(s, eps).items():
            mapped[to_particles(target)] += rate
        if mapped != _outcomes(to_particles(s), eps):
            bad.append(s)
    return bad
