"""Limit equations: Vershik curves, solvers and the height/density transforms.

Height-picture equations::

    U :  psi_t = (psi_u / (1 - psi_u))_u + alpha * psi_u / (1 - psi_u)
    RU:  psi_t = psi_uu + beta * psi_u * (1 + psi_u)

They are never stepped directly.  The U equation is solved through the density
``rho = Phi_U(psi)`` on the whole line, where it becomes a viscous Burgers
equation ``rho_t = rho_vv + alpha (rho (1 - rho))_v``.  The RU equation is
solved through ``omega = exp(beta psi)``, which satisfies the linear equation
``omega_t = omega_uu + beta omega_u`` with the Robin condition
``2 omega_u + beta omega = 0`` at ``u = 0`` and ``omega(inf) = 1``.

Time stepping is second-order IMEX BDF (SBDF2): implicit diffusion, explicit
extrapolated nonlinear flux.  The linear omega equation is fully implicit BDF2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .ensembles import ALPHA, BETA, Statistics
from .grid import GridField

__all__ = [
    "ALPHA", "BETA", "ModelConstants", "PdeConfig", "Scheme", "NumericalError",
    "vershik_U", "vershik_R", "reference_profile", "PERTURBATIONS",
    "solve_burgers_Z", "solve_omega", "robin_residual",
    "hopf_cole_macro", "inverse_hopf_cole", "density_from_height",
    "phi_U", "psi_from_rho", "solve_bhydro", "solve_fhydro", "residual_stationary",
    "check_XU", "check_XR", "check_YU",
]


class NumericalError(RuntimeError):
    """Solver produced non-finite values or broke a hard numerical contract."""


@dataclass(frozen=True)
class ModelConstants:
    alpha: float = ALPHA
    beta: float = BETA

    def __post_init__(self):
        if abs(self.alpha**2 - math.pi**2 / 6) > 1e-15 or abs(self.beta**2 - self.alpha**2 / 2) > 1e-15:
            raise ValueError("inconsistent model constants")


class Scheme(str, Enum):
    SEMI_IMPLICIT = "semi-implicit"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class PdeConfig:
    L: float = 15.0
    h: float = 1e-2
    dt: float = 1e-3
    scheme: Scheme = Scheme.SEMI_IMPLICIT

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.L > 0 and self.h > 0 and self.dt > 0):
            raise ValueError("L, h and dt must be positive")
        if self.scheme is Scheme.EXPLICIT and self.dt > self.h**2 / 2:
            raise ValueError(f"explicit scheme needs dt <= h^2/2 = {self.h**2 / 2:g}")

    @staticmethod
    def domain_length(rate: float, tail: float = 1e-8) -> float:
        """Smallest L with ``exp(-rate L) < tail``."""
        return -math.log(tail) / rate


# --- Vershik curves and reference profiles ----------------------------------

def _as_real(u) -> np.ndarray:
    u = np.asarray(u)
    return u if u.dtype == np.longdouble else u.astype(np.float64)


def vershik_U(u):
    u = _as_real(u)
    if np.any(u <= 0):
        raise ValueError("vershik_U is defined for u > 0 only")
    a = u.dtype.type(ALPHA)
    return -np.log(-np.expm1(-a * u)) / a


def vershik_R(u):
    u = _as_real(u)
    if np.any(u < 0):
        raise ValueError("vershik_R is defined for u >= 0")
    b = u.dtype.type(BETA)
    return np.log1p(np.exp(-b * u)) / b


# Documented perturbations of the Vershik profiles.  All stay in the
# respective profile classes (decreasing; for RU slope in [-1, 0] with
# slope -1/2 at the origin).
PERTURBATIONS = ("dilated-1.2", "dilated-0.8", "bumped")


def reference_profile(statistics, kind: str = "vershik"):
    """Callable ``u -> psi(u)`` for a Vershik curve or one of its perturbations.

    ``dilated-s``: ``s * psi(u / s)`` (area scaled by ``s**2``).
    ``bumped``: U adds ``0.3 / (1 + exp((u - 1.5) / 0.3))``;
    RU adds ``0.4 u^2 exp(-u)``.
    """
    stat = Statistics.parse(statistics)
    base = vershik_U if stat is Statistics.U else vershik_R
    if kind == "vershik":
        return base
    if kind.startswith("dilated-"):
        s = float(kind.split("-", 1)[1])
        return lambda u: s * base(_as_real(u) / s)
    if kind == "bumped":
        if stat is Statistics.U:
            return lambda u: base(u) + 0.3 / (1.0 + np.exp((_as_real(u) - 1.5) / 0.3))
        return lambda u: base(u) + 0.4 * _as_real(u) ** 2 * np.exp(-_as_real(u))
    raise ValueError(f"unknown profile {kind!r}")


# --- grid helpers -------------------------------------------------------------

def _derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference first derivative (one-sided at the ends)."""
    n = f.size
    if n < 5:
        return np.gradient(f, h, edge_order=2 if n >= 3 else 1)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def _cumtrapz(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
    return out


def _check_finite(values: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values in {where}")


def _segments(T: float, dt: float, times) -> list[float]:
    if T < 0:
        raise ValueError("T must be non-negative")
    stops = sorted(set([float(t) for t in (times or [])] + [float(T)]))
    if stops and (stops[0] < 0 or stops[-1] > T + 1e-12):
        raise ValueError("record times must lie in [0, T]")
    return stops


# --- class predicates ---------------------------------------------------------

def check_XU(psi: GridField, tie_tol: float = 1e-14) -> None:
    v = psi.values
    if np.any(v <= 0):
        raise ValueError("X_U profile must be positive")
    if np.any(np.diff(v) >= -tie_tol):
        raise ValueError("X_U profile must be strictly decreasing")
    if v[0] < 1.0 or v[-1] > 1e-2:
        raise ValueError("X_U profile must be large (>=1) at the left edge and small (<=1e-2) at the right edge")


def check_XR(psi: GridField, slope_tol: float = 1e-2, edge_tol: float = 1e-4) -> None:
    v = psi.values
    d = _derivative(v, psi.h)
    if np.any(v < -edge_tol):
        raise ValueError("X_R profile must be non-negative")
    if np.any(d < -1 - slope_tol) or np.any(d > slope_tol):
        raise ValueError("X_R profile slope must lie in [-1, 0]")
    if psi.xmin != 0.0:
        raise ValueError("X_R profile must start at u = 0")
    if abs(d[0] + 0.5) > slope_tol:
        raise ValueError(f"X_R profile slope at 0 must be -1/2, got {d[0]:.4g}")
    if abs(v[-1]) > edge_tol:
        raise ValueError("X_R profile must vanish at the right edge")


def check_YU(rho: GridField, centering_tol: float = 1e-3) -> None:
    v = rho.values
    if np.any(v <= 0) or np.any(v >= 1):
        raise ValueError("Y_U density must lie in (0, 1)")
    zm, zp = _zeta_pair(rho)
    mismatch = abs(np.interp(0.0, rho.x, zm) - np.interp(0.0, rho.x, zp))
    if mismatch > centering_tol:
        raise ValueError(f"Y_U centering mismatch {mismatch:.3g} exceeds {centering_tol:g}")


# --- whole-line Burgers equation ---------------------------------------------

def _laplacian(n: int, h: float) -> sp.csc_matrix:
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc") / h**2


def solve_burgers_Z(rho0: GridField, T: float, cfg: PdeConfig, times=None, alpha: float = ALPHA):
    """Evolve ``rho_t = rho_vv + alpha (rho(1-rho))_v`` with fixed end values.

    Returns the field at ``T``, or a list of fields at ``times`` when given.
    """
    rho = rho0.values.copy()
    if np.any(rho < -1e-12) or np.any(rho > 1 + 1e-12):
        raise ValueError("initial density must lie in [0, 1]")
    h = rho0.h
    n = rho.size
    if n < 3:
        raise ValueError("grid too short")
    left, right = rho[0], rho[-1]
    m = n - 2
    D2 = _laplacian(m, h)
    bc = np.zeros(m)
    bc[0] = left / h**2
    bc[-1] = right / h**2
    I = sp.identity(m, format="csc")

    def flux_div(r):
        f = r * (1.0 - r)
        return alpha * (f[2:] - f[:-2]) / (2 * h)

    stops = _segments(T, cfg.dt, times)
    out = {}
    t = 0.0
    for stop in stops:
        span = stop - t
        if span <= 0:
            out[stop] = GridField.like(rho0, rho.copy())
            continue
        steps = max(1, math.ceil(span / cfg.dt - 1e-9))
        dt = span / steps
        if cfg.scheme is Scheme.EXPLICIT:
            if dt > h**2 / 2:
                raise ValueError(f"explicit scheme needs dt <= h^2/2 = {h**2 / 2:g}")
            for _ in range(steps):
                lap = (rho[2:] - 2 * rho[1:-1] + rho[:-2]) / h**2
                rho[1:-1] += dt * (lap + flux_div(rho))
                _check_finite(rho, "solve_burgers_Z")
        else:
            lu1 = splu((I / dt - D2).tocsc())
            lu2 = splu((1.5 * I / dt - D2).tocsc())
            prev_N = None
            prev_rho = None
            for k in range(steps):
                cur_N = flux_div(rho)
                if prev_N is None:
                    inner = lu1.solve(rho[1:-1] / dt + cur_N + bc)
                else:
                    rhs = (2.0 * rho[1:-1] - 0.5 * prev_rho) / dt + 2.0 * cur_N - prev_N + bc
                    inner = lu2.solve(rhs)
                prev_N, prev_rho = cur_N, rho[1:-1].copy()
                rho[1:-1] = inner
                if k % 64 == 0:
                    _check_finite(rho, "solve_burgers_Z")
            _check_finite(rho, "solve_burgers_Z")
        t = stop
        out[stop] = GridField.like(rho0, rho.copy())
    lo, hi = rho.min(), rho.max()
    if lo < -1e-12 or hi > 1 + 1e-12:
        warnings.warn(f"density left [0, 1]: range [{lo:.3g}, {hi:.3g}]", RuntimeWarning)
    if times is None:
        return out[float(T)]
    return [out[float(s)] for s in times]


# --- linear equation with Robin boundary ------------------------------------

def robin_residual(omega: GridField, beta: float = BETA) -> float:
    """``2 omega_u(0) + beta omega(0)`` with a one-sided second-order derivative."""
    w = omega.values
    d0 = (-3 * w[0] + 4 * w[1] - w[2]) / (2 * omega.h)
    return float(2 * d0 + beta * w[0])


def _omega_operator(n: int, h: float, beta: float) -> tuple[sp.csc_matrix, np.ndarray]:
    """Discrete ``d_uu + beta d_u`` on nodes ``0..n-2`` (node ``n-1`` held at 1).

    Node 0 eliminates the ghost value through ``omega_{-1} = omega_1 + h beta omega_0``.
    """
    m = n - 1
    lower = np.full(m - 1, 1.0 / h**2 - beta / (2 * h))
    upper = np.full(m - 1, 1.0 / h**2 + beta / (2 * h))
    main = np.full(m, -2.0 / h**2)
    upper[0] = 2.0 / h**2
    main[0] = -2.0 / h**2 + beta / h - beta**2 / 2
    A = sp.diags([lower, main, upper], [-1, 0, 1], format="csc")
    bc = np.zeros(m)
    bc[-1] = 1.0 / h**2 + beta / (2 * h)  # times the Dirichlet value 1
    return A, bc


def solve_omega(omega0: GridField, T: float, cfg: PdeConfig, times=None, beta: float = BETA):
    """Evolve ``omega_t = omega_uu + beta omega_u`` on ``[0, L]``.

    Robin condition ``2 omega_u + beta omega = 0`` at 0, ``omega = 1`` at the
    right end.  An initial Robin residual is reported through a warning.
    """
    w = omega0.values.copy()
    if omega0.xmin != 0.0:
        raise ValueError("omega must be given on [0, L]")
    if np.any(w < 1 - 1e-9):
        raise ValueError("omega0 must be >= 1")
    L = omega0.xmax
    if abs(w[-1] - 1.0) > max(math.exp(-beta * L), 1e-12) * 1.0001:
        raise ValueError("omega0(L) must be within exp(-beta L) of 1")
    res0 = robin_residual(omega0, beta)
    if abs(res0) > 1e-6:
        warnings.warn(f"initial Robin residual {res0:.6g}", RuntimeWarning)
    h = omega0.h
    n = w.size
    A, bc = _omega_operator(n, h, beta)
    m = n - 1
    I = sp.identity(m, format="csc")
    w[-1] = 1.0

    stops = _segments(T, cfg.dt, times)
    out = {}
    t = 0.0
    for stop in stops:
        span = stop - t
        if span <= 0:
            out[stop] = GridField.like(omega0, w.copy())
            continue
        steps = max(1, math.ceil(span / cfg.dt - 1e-9))
        dt = span / steps
        if cfg.scheme is Scheme.EXPLICIT:
            if dt > h**2 / 2:
                raise ValueError(f"explicit scheme needs dt <= h^2/2 = {h**2 / 2:g}")
            for _ in range(steps):
                w[:-1] += dt * (A @ w[:-1] + bc)
                _check_finite(w, "solve_omega")
        else:
            lu1 = splu((I / dt - A).tocsc())
            lu2 = splu((1.5 * I / dt - A).tocsc())
            prev = None
            for k in range(steps):
                cur = w[:-1].copy()
                if prev is None:
                    w[:-1] = lu1.solve(cur / dt + bc)
                else:
                    w[:-1] = lu2.solve((2.0 * cur - 0.5 * prev) / dt + bc)
                prev = cur
            _check_finite(w, "solve_omega")
        t = stop
        out[stop] = GridField.like(omega0, w.copy())
    if w.min() < 1 - 1e-10:
        warnings.warn(f"omega dropped below 1: min {w.min():.12g}", RuntimeWarning)
    if times is None:
        return out[float(T)]
    return [out[float(s)] for s in times]


# --- Hopf-Cole ---------------------------------------------------------------

def hopf_cole_macro(rho: GridField, beta: float = BETA, tail: float = 0.0) -> GridField:
    """``omega(u) = exp(beta * int_u^inf rho)``; mass beyond the grid is ``tail``."""
    r = rho.values
    if np.any(r < -1e-12) or np.any(r > 1 + 1e-12):
        raise ValueError("density must lie in [0, 1]")
    integral = _cumtrapz(r[::-1], rho.h)[::-1] + tail
    return GridField.like(rho, np.exp(beta * integral))


def inverse_hopf_cole(omega: GridField, beta: float = BETA) -> GridField:
    """``psi = log(omega) / beta``."""
    w = omega.values
    if np.any(w < 1 - 1e-9):
        raise ValueError(f"omega must be >= 1, min is {w.min():.12g}")
    return GridField.like(omega, np.log(np.maximum(w, 1.0)) / beta)


def density_from_height(psi: GridField) -> GridField:
    """``rho = -psi'`` by fourth-order differences."""
    return GridField.like(psi, -_derivative(psi.values, psi.h))


# --- U transform pair --------------------------------------------------------

def _tail_rate(x0: float, y0: float, x1: float, y1: float, fallback: float) -> float:
    if y0 > 0 and y1 > 0 and x1 != x0:
        rate = abs(math.log(y1 / y0) / (x1 - x0))
        if np.isfinite(rate) and rate > 0:
            return rate
    return fallback


def phi_U(psi: GridField, h_out: float | None = None, v_range=None,
          alpha: float = ALPHA, tie_tol: float = 1e-14) -> GridField:
    """Density ``rho(v) = -psi'/(1 - psi')`` at ``v = u - psi(u)``.

    The result lives on a uniform ``v`` grid of spacing ``h_out``.  Outside
    ``[G(u_first), G(u_last)]`` the density is continued by logistic tails
    ``1 / (1 + exp(r (v - c)))``, whose two parameters match the edge value and
    make the tail masses equal ``u_first`` (of ``1 - rho``, on the left) and
    ``psi(u_last)`` (of ``rho``, on the right).  These are the values the
    inverse transform must reproduce, and the fit is exact for the Vershik
    curve and its dilations.
    """
    v = psi.values
    if np.any(np.diff(v) >= -tie_tol):
        raise ValueError("psi must be strictly decreasing")
    d = _derivative(v, psi.h)
    if np.any(d >= 0):
        raise ValueError("psi must have negative slope everywhere")
    G = psi.x - v
    rho_nodes = -d / (1.0 - d)
    if np.any(np.diff(G) <= tie_tol):
        raise ValueError("G = u - psi(u) is not strictly increasing")
    h_out = psi.h if h_out is None else h_out
    if v_range is None:
        a = math.ceil(G[0] / h_out) * h_out
        b = math.floor(G[-1] / h_out) * h_out
    else:
        a, b = v_range
    n = int(round((b - a) / h_out)) + 1
    vg = a + h_out * np.arange(n)
    out = np.empty(n)
    inside = (vg >= G[0]) & (vg <= G[-1])
    out[inside] = np.interp(vg[inside], G, rho_nodes)
    left = vg < G[0]
    if np.any(left):
        if psi.xmin <= 0:
            raise ValueError("left tail needs u_first > 0")
        r = -math.log(rho_nodes[0]) / psi.xmin
        out[left] = 1.0 - _logistic_tail(vg[left] - G[0], 1.0 - rho_nodes[0], r)
    right = vg > G[-1]
    if np.any(right):
        r = -math.log1p(-rho_nodes[-1]) / v[-1]
        out[right] = _logistic_tail(G[-1] - vg[right], rho_nodes[-1], r)
    return GridField(a, h_out, out)


def _logistic_tail(dist: np.ndarray, y0: float, rate: float) -> np.ndarray:
    """Logistic ``1 / (1 + z exp(-rate * dist))`` with value ``y0`` at ``dist = 0``.

    ``dist`` is negative going away from the grid.  With
    ``rate = -log(1 - y0) / m`` the mass beyond the edge is ``m``.
    """
    z0 = (1.0 - y0) / y0
    return 1.0 / (1.0 + z0 * np.exp(-rate * dist))


def _zeta_pair(rho: GridField, alpha: float = ALPHA) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative ``int_{-inf}^v (1 - rho)`` and ``int_v^inf rho`` on the grid.

    Contributions beyond the grid use exponential tails fitted at the ends.
    """
    r = rho.values
    h = rho.h
    x = rho.x
    rate_l = _tail_rate(x[0], 1 - r[0], x[1], 1 - r[1], alpha)
    rate_r = _tail_rate(x[-1], r[-1], x[-2], r[-2], alpha)
    zm = (1 - r[0]) / rate_l + _cumtrapz(1.0 - r, h)
    zp = r[-1] / rate_r + _cumtrapz(r[::-1], h)[::-1]
    return zm, zp


def psi_from_rho(rho: GridField, u_grid: tuple[float, float, float],
                 alpha: float = ALPHA, centering_tol: float = 1e-3,
                 tie_tol: float = 1e-14) -> GridField:
    """Height profile ``psi(u) = zeta_plus(zeta_minus^{-1}(u))`` on ``u_grid``.

    ``u_grid`` is ``(umin, umax, h)``.
    """
    r = rho.values
    if np.any(r <= 0) or np.any(r >= 1):
        raise ValueError("density must lie strictly inside (0, 1)")
    zm, zp = _zeta_pair(rho, alpha)
    if np.any(np.diff(zm) <= tie_tol):
        raise ValueError("zeta_minus is not strictly increasing")
    if rho.xmin < 0 < rho.xmax:
        mismatch = abs(np.interp(0.0, rho.x, zm) - np.interp(0.0, rho.x, zp))
        if mismatch > centering_tol:
            raise ValueError(f"centering mismatch {mismatch:.3g} exceeds {centering_tol:g}")
    umin, umax, h = u_grid
    n = int(round((umax - umin) / h)) + 1
    u = umin + h * np.arange(n)
    if u[0] < zm[0] or u[-1] > zm[-1]:
        raise ValueError(
            f"u range [{u[0]:.4g}, {u[-1]:.4g}] not covered by zeta_minus [{zm[0]:.4g}, {zm[-1]:.4g}]"
        )
    psi = np.interp(u, zm, zp)
    return GridField(umin, h, psi)


# --- height-picture solvers --------------------------------------------------

def solve_bhydro(psi0: GridField, T: float, cfg: PdeConfig, times=None):
    """U-statistics height equation via ``Phi_U`` -> Burgers on the line -> ``Psi_U``."""
    check_XU(psi0)
    rho0 = phi_U(psi0, h_out=cfg.h, v_range=(-cfg.L, cfg.L))
    u_grid = (psi0.xmin, psi0.xmax, psi0.h)
    if T == 0 and times is None:
        return psi_from_rho(rho0, u_grid)
    fields = solve_burgers_Z(rho0, T, cfg, times=times)
    if times is None:
        return psi_from_rho(fields, u_grid)
    return [psi_from_rho(f, u_grid) for f in fields]


def solve_fhydro(psi0: GridField, T: float, cfg: PdeConfig, times=None):
    """RU-statistics height equation via ``omega = exp(beta psi)``."""
    check_XR(psi0)
    omega0 = GridField.like(psi0, np.exp(BETA * np.maximum(psi0.values, 0.0)))
    omega0 = GridField.like(omega0, np.concatenate([omega0.values[:-1], [1.0]]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fields = solve_omega(omega0, T, cfg, times=times)
    if times is None:
        return inverse_hopf_cole(fields)
    return [inverse_hopf_cole(f) for f in fields]


class Equation(str, Enum):
    BHYDRO = "bhydro"
    FHYDRO = "fhydro"


def residual_stationary(psi: GridField, equation) -> GridField:
    """Right-hand side of the height equation by centred differences (interior nodes).

    Arithmetic follows the dtype of ``psi.values`` (float64 or longdouble).
    """
    eq = Equation(equation)
    v = psi.values
    if v.size < 3:
        raise ValueError("grid too short for centred differences")
    real = v.dtype.type
    h = real(psi.h)
    d1 = (v[2:] - v[:-2]) / (2 * h)
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    if eq is Equation.BHYDRO:
        res = d2 / (1 - d1) ** 2 + real(ALPHA) * d1 / (1 - d1)
    else:
        res = d2 + real(BETA) * d1 * (1 + d1)
    return GridField(psi.xmin + h, h, res)
