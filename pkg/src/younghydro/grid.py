"""Uniform 1D grid fields with CSV/JSON serialisation."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class GridField:
    """Values at ``xmin + k * h`` for ``k = 0 .. len(values) - 1``.

    Values are float64 unless given as ``np.longdouble``, which is kept so that
    finite-difference checks can run below float64 rounding.
    """

    xmin: float
    h: float
    values: np.ndarray

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing h must be positive")
        vals = np.asarray(self.values)
        if vals.dtype != np.longdouble:
            vals = vals.astype(np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a non-empty 1D array")
        object.__setattr__(self, "xmin", float(self.xmin))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, f, xmin: float, xmax: float, h: float, dtype=np.float64) -> "GridField":
        n = int(round((xmax - xmin) / h)) + 1
        x = dtype(xmin) + dtype(h) * np.arange(n, dtype=dtype)
        return cls(xmin, h, f(x))

    @classmethod
    def like(cls, other: "GridField", values) -> "GridField":
        return cls(other.xmin, other.h, values)

    @property
    def x(self) -> np.ndarray:
        dt = self.values.dtype
        return dt.type(self.xmin) + dt.type(self.h) * np.arange(self.values.size, dtype=dt)

    @property
    def xmax(self) -> float:
        return self.xmin + self.h * (self.values.size - 1)

    def __len__(self) -> int:
        return self.values.size

    def restrict(self, a: float, b: float) -> "GridField":
        """Sub-field on the nodes inside ``[a, b]`` (with a half-spacing slack)."""
        x = self.x
        keep = np.flatnonzero((x >= a - 0.5 * self.h) & (x <= b + 0.5 * self.h))
        if keep.size == 0:
            raise ValueError(f"no grid nodes inside [{a}, {b}]")
        return GridField(x[keep[0]], self.h, self.values[keep])

    def interp(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.values)

    def sup_distance(self, other: "GridField") -> float:
        return float(np.max(np.abs(self.values - other.interp(self.x))))

    # --- serialisation ------------------------------------------------

    def to_json(self) -> str:
        vals = self.values.astype(np.float64).tolist()
        return json.dumps({"xmin": self.xmin, "h": self.h, "values": vals})

    @classmethod
    def from_json(cls, text) -> "GridField":
        obj = json.loads(text) if isinstance(text, str) else text
        return cls(obj["xmin"], obj["h"], np.asarray(obj["values"], dtype=float))

    def to_csv(self, header=("u", "value")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        x = self.x.astype(np.float64).tolist()
        for xi, vi in zip(x, self.values.astype(np.float64).tolist()):
            w.writerow([repr(xi), repr(vi)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridField":
        rows = list(csv.reader(io.StringIO(text)))
        body = [r for r in rows[1:] if r]
        x = np.array([float(r[0]) for r in body])
        v = np.array([float(r[1]) for r in body])
        if x.size < 2:
            raise ValueError("CSV field needs at least two rows")
        h = float(np.mean(np.diff(x)))
        if not np.allclose(np.diff(x), h, rtol=1e-6, atol=1e-12):
            raise ValueError("CSV grid is not uniform")
        return cls(x[0], h, v)
