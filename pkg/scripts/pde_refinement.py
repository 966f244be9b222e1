"""Grid-refinement ratios for the four solvers and the stationarity residuals.

A ratio near 4 under h -> h/2 indicates second-order convergence.
"""
import argparse
import warnings

import numpy as np

from younghydro.grid import GridField
from younghydro.pde import (
    ALPHA,
    BETA,
    PdeConfig,
    reference_profile,
    residual_stationary,
    solve_bhydro,
    solve_burgers_Z,
    solve_fhydro,
    solve_omega,
    vershik_R,
    vershik_U,
)


def ratio(solve, hs):
    sols = [solve(h) for h in hs]
    d = [np.max(np.abs(f.interp(c.x) - c.values)) for c, f in zip(sols[:-1], sols[1:])]
    return d[0] / d[1], d


def burgers(h, T):
    rho0 = GridField.from_function(lambda v: 1 / (1 + np.exp(ALPHA * v / 1.5)), -10, 10, h)
    return solve_burgers_Z(rho0, T, PdeConfig(h=h, dt=h / 4))


def omega(h, T):
    f = reference_profile("RU", "dilated-0.8")
    w0 = GridField.from_function(lambda u: np.exp(BETA * f(u)), 0.0, 25, h)
    w0 = GridField.like(w0, np.concatenate([w0.values[:-1], [1.0]]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve_omega(w0, T, PdeConfig(h=h, dt=h / 4))


def bhydro(h, T):
    psi0 = GridField.from_function(reference_profile("U", "dilated-1.2"), 0.2, 8, h)
    return solve_bhydro(psi0, T, PdeConfig(h=h, dt=h / 4))


def fhydro(h, T):
    psi0 = GridField.from_function(reference_profile("RU", "bumped"), 0.0, 25, h)
    return solve_fhydro(psi0, T, PdeConfig(h=h, dt=h / 4))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--h", type=float, nargs=3, default=[0.04, 0.02, 0.01])
    args = ap.parse_args()
    for name, fn in (("burgers", burgers), ("omega", omega), ("bhydro", bhydro), ("fhydro", fhydro)):
        hs = [h / 2 for h in args.h] if name == "bhydro" else args.h
        r, d = ratio(lambda h: fn(h, args.T), hs)
        print(f"{name:8s} h={hs}  diffs {d[0]:.3e} {d[1]:.3e}  ratio {r:.3f}")
    for f, eq, a, b in ((vershik_U, "bhydro", 0.05, 8.0), (vershik_R, "fhydro", 0.0, 10.0)):
        for h in (2e-3, 1e-3, 5e-4):
            g = GridField.from_function(f, a, b, h, dtype=np.longdouble)
            print(f"residual {eq} h={h:g}: {float(np.max(np.abs(residual_stationary(g, eq).values))):.3e}")


if __name__ == "__main__":
    main()
