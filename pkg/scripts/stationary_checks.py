"""Microscopic stationarity checks: area law under the dynamics and boundary occupation."""
import argparse
import math

import numpy as np
from scipy.stats import ks_2samp

from younghydro.dynamics import Process, SimRun, make_rng, replica_seed, simulate, time_averaged_boundary
from younghydro.ensembles import EnsembleParams, sample, solve_epsilon


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()

    N, R = args.N, args.replicas
    eps = solve_epsilon(N, "U")
    before, after = [], []
    for r in range(R):
        p0 = sample(EnsembleParams(eps, "U"), make_rng(replica_seed(args.seed, 2 * r)))
        run = SimRun(N, eps, args.T, (args.T,), replica_seed(args.seed, 2 * r + 1), Process.P_U, ("area",))
        before.append(p0.area / N**2)
        after.append(simulate(run, p0).values["area"][0] / N**2)
    res = ks_2samp(before, after)
    crit = math.sqrt(-math.log(0.005) / 2) * math.sqrt(2 / R)
    print(f"U area law: KS {res.statistic:.4f} (1% critical {crit:.4f}), "
          f"means {np.mean(before):.4f} -> {np.mean(after):.4f}")

    eps = solve_epsilon(N, "RU")
    avgs = []
    for r in range(R // 4):
        q0 = sample(EnsembleParams(eps, "RU"), make_rng(replica_seed(args.seed + 1, 2 * r)))
        run = SimRun(N, eps, 1.0, (0.0, 1.0), replica_seed(args.seed + 1, 2 * r + 1), Process.Q_RU, ("boundary_time",))
        avgs.append(time_averaged_boundary(simulate(run, q0)))
    print(f"RU boundary occupation over [0, 1]: mean {np.mean(avgs):.4f}, sd {np.std(avgs):.4f}, "
          f"stationary value eps/(1+eps) = {eps / (1 + eps):.4f}")


if __name__ == "__main__":
    main()
