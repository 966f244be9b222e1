"""Tabulate eps(N) and the scaled gap N(1 - eps) against its limit for both statistics."""
import argparse
import math

from younghydro.ensembles import ALPHA, BETA, EnsembleParams, mean_area, solve_epsilon


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, nargs="+", default=[10, 20, 50, 100, 200, 500, 1000, 2000])
    args = ap.parse_args()
    print("stat      N                 eps     N(1-eps)        gap   gap*N/logN    residual")
    for stat, c in (("U", ALPHA), ("RU", BETA)):
        for N in args.N:
            eps = solve_epsilon(N, stat)
            gap = N * (1 - eps) - c
            resid = mean_area(EnsembleParams(eps, stat)) - N**2
            print(f"{stat:4s} {N:6d} {eps:19.16f} {N * (1 - eps):12.8f} {gap:10.3e} "
                  f"{abs(gap) * N / math.log(N):12.5f} {resid:11.2e}")


if __name__ == "__main__":
    main()
