"""Young-diagram states, height functions and particle-picture bijections.

A partition ``p`` is read as a family of particles: ``p_i`` is the position of
the ``i``-th particle counted from the right.  Two encodings into 0/1 particle
configurations are provided:

* U-statistics: ``p -> eta_bar`` on the integers, occupied set
  ``{p_i - i + 1 : i >= 1}`` (with ``p_i = 0`` beyond the last row).  The
  configuration is stored as its finite deviation from the step profile
  ``1{x <= 0}``.
* RU-statistics: ``q -> eta`` on the positive integers, occupied set equal to
  the set of parts.
"""
from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

INT64_MAX = 2**63 - 1


def _check_width(value: int, what: str) -> None:
    if value > INT64_MAX:
        raise OverflowError(f"{what} {value} exceeds the signed 64-bit range")


@dataclass(frozen=True)
class Partition:
    """Partition stored as distinct part values with multiplicities.

    ``blocks`` holds ``(value, multiplicity)`` pairs sorted by decreasing value.
    """

    blocks: tuple[tuple[int, int], ...] = ()
    area: int = field(init=False)
    rows: int = field(init=False)

    def __post_init__(self):
        prev = None
        area = 0
        rows = 0
        for value, mult in self.blocks:
            if value < 1 or mult < 1:
                raise ValueError(f"invalid block ({value}, {mult})")
            if prev is not None and value >= prev:
                raise ValueError("blocks must have strictly decreasing values")
            prev = value
            area += value * mult
            rows += mult
        _check_width(area, "area")
        object.__setattr__(self, "area", area)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_parts(cls, parts: Iterable[int]) -> "Partition":
        counts = Counter(int(v) for v in parts if v != 0)
        if any(v < 0 for v in counts):
            raise ValueError("parts must be non-negative")
        return cls(tuple(sorted(counts.items(), reverse=True)))

    @classmethod
    def from_multiplicities(cls, mult: dict[int, int]) -> "Partition":
        return cls(tuple(sorted(((v, m) for v, m in mult.items() if m > 0), reverse=True)))

    @property
    def parts(self) -> tuple[int, ...]:
        out: list[int] = []
        for value, mult in self.blocks:
            out.extend([value] * mult)
        return tuple(out)

    @property
    def distinct(self) -> int:
        return len(self.blocks)

    def multiplicities(self) -> dict[int, int]:
        return dict(self.blocks)

    def __len__(self) -> int:
        return self.rows

    def __repr__(self) -> str:
        return f"Partition{self.parts}"


@dataclass(frozen=True)
class StrictPartition:
    """Partition into distinct parts, ``parts`` strictly decreasing."""

    parts: tuple[int, ...] = ()
    area: int = field(init=False)

    def __post_init__(self):
        parts = tuple(int(v) for v in self.parts)
        for a, b in zip(parts, parts[1:]):
            if a <= b:
                raise ValueError(f"parts must be strictly decreasing: {parts}")
        if parts and parts[-1] < 1:
            raise ValueError("parts must be positive")
        area = sum(parts)
        _check_width(area, "area")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "area", area)

    @property
    def rows(self) -> int:
        return len(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __repr__(self) -> str:
        return f"StrictPartition{self.parts}"


@dataclass(frozen=True)
class ConfigZ:
    """Exclusion configuration on Z, kept as deviations from ``1{x <= 0}``.

    ``holes_left`` are the empty sites ``x <= 0``; ``particles_right`` are the
    occupied sites ``x >= 1``.  Both are sorted increasingly.
    """

    holes_left: tuple[int, ...] = ()
    particles_right: tuple[int, ...] = ()

    def __post_init__(self):
        holes = tuple(sorted(set(int(x) for x in self.holes_left)))
        parts = tuple(sorted(set(int(x) for x in self.particles_right)))
        if holes and holes[-1] > 0:
            raise ValueError("holes_left must lie at sites <= 0")
        if parts and parts[0] < 1:
            raise ValueError("particles_right must lie at sites >= 1")
        object.__setattr__(self, "holes_left", holes)
        object.__setattr__(self, "particles_right", parts)

    @property
    def centered(self) -> bool:
        return len(self.holes_left) == len(self.particles_right)

    def occupied(self, x: int) -> int:
        if x <= 0:
            i = bisect_left(self.holes_left, x)
            return 0 if i < len(self.holes_left) and self.holes_left[i] == x else 1
        i = bisect_left(self.particles_right, x)
        return 1 if i < len(self.particles_right) and self.particles_right[i] == x else 0

    def window(self) -> tuple[int, int]:
        """Smallest ``[lo, hi]`` containing every deviation and the origin edge."""
        lo = min(self.holes_left[0] if self.holes_left else 0, 0)
        hi = max(self.particles_right[-1] if self.particles_right else 1, 1)
        return lo, hi

    def to_array(self, lo: int, hi: int) -> np.ndarray:
        """Occupation of sites ``lo..hi`` as a uint8 array."""
        x = np.arange(lo, hi + 1)
        occ = (x <= 0).astype(np.uint8)
        if self.holes_left:
            h = np.asarray(self.holes_left)
            h = h[(h >= lo) & (h <= hi)]
            occ[h - lo] = 0
        if self.particles_right:
            p = np.asarray(self.particles_right)
            p = p[(p >= lo) & (p <= hi)]
            occ[p - lo] = 1
        return occ

    @classmethod
    def from_array(cls, occ: np.ndarray, lo: int) -> "ConfigZ":
        """Inverse of :meth:`to_array`; sites outside the window follow the step profile."""
        x = np.arange(lo, lo + len(occ))
        holes = x[(x <= 0) & (occ == 0)]
        parts = x[(x >= 1) & (occ == 1)]
        return cls(tuple(holes.tolist()), tuple(parts.tolist()))


@dataclass(frozen=True)
class ConfigN:
    """Exclusion configuration on the positive integers (finite occupied set)."""

    occupied: tuple[int, ...] = ()

    def __post_init__(self):
        occ = tuple(sorted(set(int(x) for x in self.occupied)))
        if occ and occ[0] < 1:
            raise ValueError("occupied sites must be >= 1")
        object.__setattr__(self, "occupied", occ)

    def __contains__(self, x: int) -> bool:
        i = bisect_left(self.occupied, x)
        return i < len(self.occupied) and self.occupied[i] == x

    def to_array(self, size: int) -> np.ndarray:
        """Occupation of sites ``0..size-1``; index 0 is the reservoir slot and stays 0."""
        occ = np.zeros(size, dtype=np.uint8)
        if self.occupied:
            occ[np.asarray(self.occupied)] = 1
        return occ

    @classmethod
    def from_array(cls, occ: np.ndarray) -> "ConfigN":
        sites = np.flatnonzero(occ[1:]) + 1
        return cls(tuple(sites.tolist()))


State = Union[Partition, StrictPartition]


def _parts_desc(p) -> Sequence[int]:
    return p.parts


def height_at(p: State, u: float) -> int:
    """Number of parts strictly greater than ``u`` (right-continuous in ``u``)."""
    if u < 0:
        raise ValueError("u must be non-negative")
    if isinstance(p, Partition):
        return sum(m for v, m in p.blocks if u < v)
    return sum(1 for v in p.parts if u < v)


def height_profile(p: State, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`height_at` over an array of positions."""
    parts = np.asarray(p.parts, dtype=float)
    if parts.size == 0:
        return np.zeros(np.shape(u), dtype=np.int64)
    asc = parts[::-1]
    # parts > u  <=>  count - (# parts <= u)
    return parts.size - np.searchsorted(asc, np.asarray(u, dtype=float), side="right")


def scaled_height(p: State, N: int, u: float) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    return height_at(p, N * u) / N


def partition_to_configZ(p: Partition) -> ConfigZ:
    n = p.rows
    positions = [v - i for i, v in enumerate(p.parts)]  # p_i - i + 1 with 0-based i
    right = [x for x in positions if x >= 1]
    left_occupied = {x for x in positions if x <= 0}
    holes = [x for x in range(-n + 1, 1) if x not in left_occupied]
    return ConfigZ(tuple(holes), tuple(right))


def zeta_config(c: ConfigZ, x: int, sign: str) -> int:
    """Counting functions of a ConfigZ.

    ``sign='-'``: number of empty sites ``z <= x``.
    ``sign='+'``: number of occupied sites ``z >= x + 1``.
    """
    holes, parts = c.holes_left, c.particles_right
    if sign == "-":
        if x <= 0:
            return bisect_right(holes, x)
        # sites 1..x are empty unless occupied by a right particle
        return len(holes) + x - bisect_right(parts, x)
    if sign == "+":
        if x >= 0:
            return len(parts) - bisect_right(parts, x)
        # sites x+1..0 are occupied unless they are holes
        return len(parts) + (-x) - (len(holes) - bisect_right(holes, x))
    raise ValueError("sign must be '+' or '-'")


def configZ_to_partition(c: ConfigZ) -> Partition:
    if not c.centered:
        raise ValueError(
            f"ConfigZ violates centering: {len(c.holes_left)} holes vs "
            f"{len(c.particles_right)} particles"
        )
    holes = c.holes_left
    parts: list[int] = []
    # particles x >= 1, from the right
    for x in reversed(c.particles_right):
        parts.append(zeta_config(c, x, "-"))
    # particles x <= 0, from the right, until no hole lies to their left
    if holes:
        x = 0
        lowest = holes[0]
        while x > lowest:
            if c.occupied(x):
                parts.append(bisect_right(holes, x))
            x -= 1
    return Partition.from_parts(parts)


def strict_to_configN(q: StrictPartition) -> ConfigN:
    return ConfigN(q.parts)


def configN_to_strict(c: ConfigN) -> StrictPartition:
    return StrictPartition(tuple(reversed(c.occupied)))


# --- JSON snapshots -------------------------------------------------------

def to_json(state) -> object:
    if isinstance(state, (Partition, StrictPartition)):
        return list(state.parts)
    if isinstance(state, ConfigZ):
        return {"holes_left": list(state.holes_left), "particles_right": list(state.particles_right)}
    if isinstance(state, ConfigN):
        return {"occupied": list(state.occupied)}
    raise TypeError(f"cannot serialise {type(state).__name__}")


def from_json(obj, kind: str):
    """Rebuild a state; ``kind`` is one of Partition, StrictPartition, ConfigZ, ConfigN."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if kind == "Partition":
        parts = list(obj)
        if parts != sorted(parts, reverse=True):
            raise ValueError("parts must be listed in non-increasing order")
        return Partition.from_parts(parts)
    if kind == "StrictPartition":
        return StrictPartition(tuple(obj))
    if kind == "ConfigZ":
        return ConfigZ(tuple(obj["holes_left"]), tuple(obj["particles_right"]))
    if kind == "ConfigN":
        return ConfigN(tuple(obj["occupied"]))
    raise ValueError(f"unknown state kind {kind!r}")
