"""Command-line harness: ``younghydro <subcommand> [options]``.

Every subcommand accepts ``--config <json>`` whose keys provide defaults for
the subcommand options; explicit flags override them.  The effective settings
are echoed into the metadata block of every output file.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .diagrams import to_json as state_to_json
from .dynamics import (
    RNG_ALGORITHM,
    AbsorbingState,
    EventCapExceeded,
    Process,
    SimRun,
    make_rng,
    simulate,
    write_binary,
    write_jsonl,
)
from .ensembles import EnsembleParams, SeriesError, Statistics, limit_constant, mean_area, sample, solve_epsilon
from .experiments import (
    ExperimentConfig,
    build_initial_microstate,
    emit,
    metadata,
    micro_initial,
    observation_grid,
    pde_config,
    pde_initial,
    run_convergence,
)
from .grid import GridField
from .oracle import OracleError, oracle_report
from .pde import (
    NumericalError,
    residual_stationary,
    solve_bhydro,
    solve_fhydro,
    vershik_R,
    vershik_U,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (NumericalError, SeriesError, OracleError, EventCapExceeded, AbsorbingState)

# Subcommand defaults; ``--config`` keys and flags override these.
DEFAULTS = {
    "epsilon": {"statistics": "U", "N": [10, 20, 50, 100, 200, 500, 1000]},
    "sample": {"statistics": "U", "N": 64, "count": 1},
    "simulate": {"statistics": "U", "N": 64, "T": 1.0, "record_times": [0.25, 0.5, 1.0],
                 "initial": "stationary", "observables": ["area", "scaled_height"],
                 "format": "jsonl", "obs_h": 0.01},
    "pde": {"statistics": "U", "initial": "vershik", "T": 1.0, "h": 5e-3, "dt": 5e-4, "L": None},
    "oracle": {"statistics": "U", "M": 8, "epsilon": 0.5},
    "vershik": {"h": 1e-2, "umax": 8.0},
    "converge": {},
}


class ConfigError(ValueError):
    pass


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _settings(args, name: str) -> dict:
    """Defaults, then config-file values, then explicit flags."""
    eff = dict(DEFAULTS[name])
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if name != "converge":
            unknown = set(loaded) - set(eff) - {"seed"}
            if unknown:
                raise ConfigError(f"unknown config keys for {name}: {sorted(unknown)}")
        eff.update(loaded)
    for key in list(DEFAULTS[name]):
        value = getattr(args, key, None)
        if value is not None:
            eff[key] = value
    if args.seed is not None:
        eff["seed"] = args.seed
    eff.setdefault("seed", 0)
    return eff


def _meta(eff: dict, command: str) -> dict:
    blob = json.dumps(eff, sort_keys=True, default=str)
    return {
        "command": command,
        "version": __version__,
        "seed": int(eff.get("seed", 0)),
        "rng": RNG_ALGORITHM,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "settings": eff,
    }


def _write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, default=str)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# --- subcommands -------------------------------------------------------------

def cmd_epsilon(args) -> int:
    eff = _settings(args, "epsilon")
    stat = Statistics.parse(eff["statistics"])
    c = limit_constant(stat)
    rows = []
    for N in eff["N"]:
        eps = solve_epsilon(int(N), stat)
        resid = mean_area(EnsembleParams(eps, stat)) - float(N) ** 2
        rows.append({"N": int(N), "epsilon": eps, "scaled_gap": N * (1 - eps),
                     "limit": c, "residual": resid})
    out = _out_dir(args)
    _write_json(os.path.join(out, "epsilon.json"), {"meta": _meta(eff, "epsilon"), "rows": rows})
    for r in rows:
        print(f"N={r['N']:5d}  eps={r['epsilon']!r}  N(1-eps)={r['scaled_gap']:.6f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    eff = _settings(args, "sample")
    stat = Statistics.parse(eff["statistics"])
    eps = solve_epsilon(int(eff["N"]), stat)
    rng = make_rng(eff["seed"])
    states = [sample(EnsembleParams(eps, stat), rng) for _ in range(int(eff["count"]))]
    payload = {"meta": _meta(eff, "sample"), "epsilon": eps,
               "samples": [{"area": s.area, "state": state_to_json(s)} for s in states]}
    _write_json(os.path.join(_out_dir(args), "samples.json"), payload)
    print(f"{len(states)} samples, mean area / N^2 = {np.mean([s.area for s in states]) / eff['N'] ** 2:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    eff = _settings(args, "simulate")
    N = int(eff["N"])
    cfg = ExperimentConfig(statistics=eff["statistics"], N_list=(N,), T=float(eff["T"]),
                           record_times=tuple(eff["record_times"]), initial=eff["initial"],
                           obs_h=float(eff["obs_h"]), seed=int(eff["seed"]))
    eps = solve_epsilon(N, cfg.statistics)
    if cfg.initial == "stationary":
        initial = sample(EnsembleParams(eps, cfg.statistics), make_rng(cfg.seed))
    else:
        initial = build_initial_microstate(micro_initial(cfg, N), N, cfg.statistics)
    process = Process.P_U if cfg.statistics is Statistics.U else Process.Q_RU
    run = SimRun(N, eps, cfg.T, cfg.record_times, cfg.seed, process,
                 tuple(eff["observables"]), observation_grid(cfg))
    series = simulate(run, initial)
    series.meta.update(_meta(eff, "simulate"))
    out = _out_dir(args)
    if eff["format"] == "jsonl":
        with open(os.path.join(out, "series.jsonl"), "w") as fh:
            write_jsonl(series, fh)
    elif eff["format"] == "binary":
        for name in series.values:
            with open(os.path.join(out, f"{name}.bin"), "wb") as fh:
                write_binary(series, name, fh)
        _write_json(os.path.join(out, "meta.json"), {"meta": series.meta})
    else:
        raise ConfigError(f"unknown format {eff['format']!r}")
    print(f"{series.meta['events']} events up to t={cfg.T}")
    return EXIT_OK


def cmd_pde(args) -> int:
    eff = _settings(args, "pde")
    cfg = ExperimentConfig(statistics=eff["statistics"], N_list=(1,), T=float(eff["T"]),
                           record_times=(float(eff["T"]),), initial=eff["initial"],
                           pde={"h": eff["h"], "dt": eff["dt"], "L": eff["L"]})
    psi0 = pde_initial(cfg)
    pcfg = pde_config(cfg)
    solver = solve_bhydro if cfg.statistics is Statistics.U else solve_fhydro
    psi = solver(psi0, cfg.T, pcfg)
    out = _out_dir(args)
    emit(psi, os.path.join(out, "psi.csv"))
    _write_json(os.path.join(out, "psi_meta.json"), {"meta": _meta(eff, "pde")})
    print(f"solved to T={cfg.T} on {len(psi)} nodes")
    return EXIT_OK


def cmd_oracle(args) -> int:
    eff = _settings(args, "oracle")
    report = oracle_report(eff["statistics"], int(eff["M"]), float(eff["epsilon"]))
    _write_json(os.path.join(_out_dir(args), "oracle.json"), {"meta": _meta(eff, "oracle"), "report": report})
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_vershik(args) -> int:
    eff = _settings(args, "vershik")
    h, umax = float(eff["h"]), float(eff["umax"])
    pu = GridField.from_function(vershik_U, h, umax, h)
    pr = GridField.from_function(vershik_R, 0.0, umax, h)
    ru = residual_stationary(pu, "bhydro")
    rr = residual_stationary(pr, "fhydro")
    out = _out_dir(args)
    lines = ["u,psi_U,psi_R,residual_U,residual_R"]
    for k, u in enumerate(pr.x.tolist()):
        vu = pu.interp(u) if u >= pu.xmin else float("nan")
        res_u = ru.values[k - 2] if 2 <= k <= len(ru) + 1 else float("nan")
        res_r = rr.values[k - 1] if 1 <= k <= len(rr) else float("nan")
        lines.append(",".join(repr(float(x)) for x in (u, vu, pr.values[k], res_u, res_r)))
    with open(os.path.join(out, "vershik.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_json(os.path.join(out, "vershik_meta.json"), {"meta": _meta(eff, "vershik"),
                "max_residual_U": float(np.abs(ru.values).max()),
                "max_residual_R": float(np.abs(rr.values).max())})
    print(f"max residual U {np.abs(ru.values).max():.3e}, RU {np.abs(rr.values).max():.3e}")
    return EXIT_OK


def cmd_converge(args) -> int:
    eff = _settings(args, "converge")
    if args.threads is not None:
        eff["threads"] = args.threads
    if args.out is not None:
        eff["out"] = args.out
    for key in ("replicas", "T"):
        if getattr(args, key, None) is not None:
            eff[key] = getattr(args, key)
    if args.N is not None:
        eff["N_list"] = args.N
    if args.statistics is not None:
        eff["statistics"] = args.statistics
    if args.initial is not None:
        eff["initial"] = args.initial
    try:
        cfg = ExperimentConfig.from_dict(eff)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(args)
    meta = metadata(cfg)
    start = time.perf_counter()
    rows, failures = run_convergence(cfg, progress=lambda N, s: print(f"N={N} done in {s:.1f}s"))
    emit(rows, os.path.join(out, "convergence.csv"))
    emit(rows, os.path.join(out, "convergence.json"), meta=meta)
    with open(os.path.join(out, "config.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")
    _write_json(os.path.join(out, "failures.json"), {"meta": meta, "failures": failures})
    _write_json(os.path.join(out, "timing.json"), {
        "wall_clock_total": time.perf_counter() - start,
        "per_N": {str(r.N): r.wall_clock for r in rows},
    })
    for r in rows:
        print(f"N={r.N:4d} t={r.t:<5g} weak={r.weak_median:.4f} (iqr {r.weak_iqr:.4f})"
              f" sup={r.sup_median:.4f} ok={r.replicas_ok}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="replica worker bound")

    p = argparse.ArgumentParser(prog="younghydro", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("epsilon", parents=[common], help="solve eps(N)")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--N", type=int, nargs="+")
    s.set_defaults(func=cmd_epsilon)

    s = sub.add_parser("sample", parents=[common], help="draw ensemble samples")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--N", type=int)
    s.add_argument("--count", type=int)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("simulate", parents=[common], help="run one trajectory")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--N", type=int)
    s.add_argument("--T", type=float)
    s.add_argument("--record-times", dest="record_times", type=float, nargs="+")
    s.add_argument("--initial")
    s.add_argument("--observables", nargs="+")
    s.add_argument("--format", choices=["jsonl", "binary"])
    s.add_argument("--obs-h", dest="obs_h", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pde", parents=[common], help="solve the limit equation")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--initial")
    s.add_argument("--T", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--L", type=float)
    s.set_defaults(func=cmd_pde)

    s = sub.add_parser("oracle", parents=[common], help="exact truncated-chain checks")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--M", type=int)
    s.add_argument("--epsilon", type=float)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("vershik", parents=[common], help="Vershik curves and stationarity residuals")
    s.add_argument("--h", type=float)
    s.add_argument("--umax", type=float)
    s.set_defaults(func=cmd_vershik)

    s = sub.add_parser("converge", parents=[common], help="convergence sweep from a JSON config")
    s.add_argument("--statistics", choices=["U", "RU"])
    s.add_argument("--N", type=int, nargs="+")
    s.add_argument("--replicas", type=int)
    s.add_argument("--T", type=float)
    s.add_argument("--initial")
    s.set_defaults(func=cmd_converge)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
