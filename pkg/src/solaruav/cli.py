"""Command-line front door: solve one slot, run campaigns, compare with
the grid oracle, validate solution files.

All power flags are in dBm and converted once here; every core module
works in watts.  Exit codes: 0 success, 1 domain failure (e.g. an
infeasible instance or a failed validation), 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace

import numpy as np

from . import oracle as oracle_mod
from .baselines import baseline1_fixed_xy, baseline2_random_assignment
from .channel import Instance, SystemParams, make_instance
from .harness import (
    ConfigError,
    aggregate,
    dbm_to_watts,
    load_config,
    run_campaign,
)
from .sca import SolverOptions, constraint_report, sca_solve
from .solar import SolarParams
from .subproblem import InfeasibleError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solaruav",
        description="Joint UAV 3-D positioning, power, and subcarrier allocation "
        "for a solar-powered multicarrier downlink.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve a single randomly drawn slot")
    ps.add_argument("--config", help="YAML file with system:/solar: overrides")
    ps.add_argument("--seed", type=int, default=0, help="instance seed (users + fading)")
    ps.add_argument("--k", type=int, default=3, help="number of downlink users")
    ps.add_argument("--n-f", type=int, default=16, help="number of subcarriers")
    ps.add_argument("--p-max-dbm", type=float, default=40.0, help="transmit power budget in dBm")
    ps.add_argument("--s-area", type=float, default=1.0, help="solar panel area in m^2")
    ps.add_argument(
        "--scheme",
        choices=["proposed", "baseline1", "baseline2", "oracle"],
        default="proposed",
    )
    ps.add_argument("--out", help="write the solution as JSON to this path")

    pc = sub.add_parser("campaign", help="run a Monte Carlo campaign from a config file")
    pc.add_argument("--config", required=True, help="YAML campaign configuration")
    pc.add_argument("--out", help="override the CSV output path from the config")

    po = sub.add_parser("oracle-compare", help="per-seed gap table vs the grid oracle")
    po.add_argument("--k", type=int, default=2)
    po.add_argument("--n-f", type=int, default=4)
    po.add_argument("--seeds", type=int, default=30, help="number of seeds (0..N-1)")
    po.add_argument("--grid-pitch", type=float, default=25.0, help="horizontal pitch in m")
    po.add_argument("--z-pitch", type=float, default=10.0, help="altitude pitch in m")
    po.add_argument("--p-max-dbm", type=float, default=40.0)
    po.add_argument("--s-area", type=float, default=1.0)

    pv = sub.add_parser("validate", help="check a solution file against all constraints")
    pv.add_argument("solution", help="JSON solution file written by 'solve --out'")
    return parser


def _load_overrides(path):
    import yaml

    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    sys_over = raw.pop("system", {}) or {}
    solar_over = raw.pop("solar", {}) or {}
    if raw:
        raise ConfigError(f"unknown config key {sorted(raw)[0]!r}")
    for key in sys_over:
        if key not in {f.name for f in fields(SystemParams)}:
            raise ConfigError(f"unknown config key 'system.{key}'")
    for key in solar_over:
        if key not in {f.name for f in fields(SolarParams)}:
            raise ConfigError(f"unknown config key 'solar.{key}'")
    return sys_over, solar_over


def _make_instance_from_args(args) -> Instance:
    sys_over, solar_over = ({}, {})
    if getattr(args, "config", None):
        sys_over, solar_over = _load_overrides(args.config)
    sys_over.setdefault("n_subcarriers", args.n_f)
    sys_over["p_max"] = dbm_to_watts(args.p_max_dbm)
    solar_over.setdefault("s_area", args.s_area)
    sys_params = SystemParams(**sys_over)
    solar_params = SolarParams(**solar_over)
    rng = np.random.default_rng(args.seed)
    return make_instance(rng, sys_params, solar_params, args.k)


def _print_solution(inst: Instance, sol, scheme: str):
    print(f"scheme:            {scheme}")
    print(f"status:            {sol.status} ({sol.iterations} outer iterations)")
    print(f"objective:         {sol.objective_original:.6f} bits/s/Hz (sum over subcarriers)")
    print(f"objective/carrier: {sol.objective_original / inst.sys.n_subcarriers:.6f} bits/s/Hz")
    print(f"uav position:      x={sol.r[0]:.2f} m  y={sol.r[1]:.2f} m  z={sol.r[2]:.2f} m")
    assigned = np.nonzero(sol.s)
    print("assignment (subcarrier -> user, power):")
    for k, i in zip(*assigned):
        print(f"  sc {i:3d} -> user {k}  p = {sol.p[k, i]:.6g} W")
    n_unassigned = inst.sys.n_subcarriers - len(assigned[0])
    if n_unassigned:
        print(f"  ({n_unassigned} subcarriers unassigned)")
    problems = constraint_report(inst, sol.s, sol.p, sol.r)
    if problems:
        print("constraint report: VIOLATIONS")
        for p in problems:
            print(f"  {p}")
    else:
        print("constraint report: all constraints satisfied")


def _cmd_solve(args) -> int:
    inst = _make_instance_from_args(args)
    options = SolverOptions(seed=args.seed)
    try:
        if args.scheme == "proposed":
            sol = sca_solve(inst, options)
        elif args.scheme == "baseline1":
            sol = baseline1_fixed_xy(inst, options)
        elif args.scheme == "baseline2":
            sol = baseline2_random_assignment(
                inst, options, np.random.default_rng([args.seed, 0xB2])
            )
        else:
            sol = oracle_mod.grid_search_oracle(inst, 50.0, 20.0)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    _print_solution(inst, sol, args.scheme)
    if args.out:
        payload = {
            "seed": args.seed,
            "k": args.k,
            "scheme": args.scheme,
            "system": {f.name: getattr(inst.sys, f.name) for f in fields(SystemParams)},
            "solar": {f.name: getattr(inst.solar, f.name) for f in fields(SolarParams)},
            "s": sol.s.tolist(),
            "p": sol.p.tolist(),
            "r": sol.r.tolist(),
            "objective": sol.objective_original,
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"solution written to {args.out}")
    return 0


def _cmd_campaign(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = replace(cfg, output=args.out)
    try:
        rows = run_campaign(cfg)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    print(f"{len(rows)} rows written to {cfg.output}" if cfg.output else f"{len(rows)} rows")
    for point in aggregate(rows):
        print(
            f"  {point.scheme:10s} sweep={point.sweep_value:g} S={point.s_area:g}: "
            f"mean {point.mean:.4f} +/- {point.stderr:.4f} ({point.count} trials)"
        )
    return 0


def _cmd_oracle_compare(args) -> int:
    gaps = []
    print("seed  oracle_obj    sca_obj       gap_%")
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        sys_params = SystemParams(
            n_subcarriers=args.n_f, p_max=dbm_to_watts(args.p_max_dbm)
        )
        inst = make_instance(rng, sys_params, SolarParams(s_area=args.s_area), args.k)
        try:
            ref = oracle_mod.grid_search_oracle(inst, args.grid_pitch, args.z_pitch)
            sol = sca_solve(inst, SolverOptions(seed=seed))
        except InfeasibleError as exc:
            print(f"{seed:4d}  infeasible: {exc}")
            continue
        gap = 100.0 * (ref.objective_relaxed - sol.objective_relaxed) / ref.objective_relaxed
        gaps.append(gap)
        print(f"{seed:4d}  {ref.objective_relaxed:12.6f}  {sol.objective_relaxed:12.6f}  {gap:8.3f}")
    if gaps:
        arr = np.asarray(gaps)
        print(
            f"gap percentiles (%): p50 {np.percentile(arr, 50):.3f}  "
            f"p90 {np.percentile(arr, 90):.3f}  max {arr.max():.3f}"
        )
    return 0


def _cmd_validate(args) -> int:
    with open(args.solution) as fh:
        payload = json.load(fh)
    sys_params = SystemParams(**payload["system"])
    solar_params = SolarParams(**payload["solar"])
    rng = np.random.default_rng(payload["seed"])
    inst = make_instance(rng, sys_params, solar_params, payload["k"])
    s = np.asarray(payload["s"])
    p = np.asarray(payload["p"])
    r = np.asarray(payload["r"])
    problems = constraint_report(inst, s, p, r)
    if problems:
        print("validation FAILED:")
        for msg in problems:
            print(f"  {msg}")
        return 1
    from .sca import evaluate_original

    obj = evaluate_original(inst, s, p, r)
    print("validation OK: all constraints satisfied")
    print(f"recomputed objective: {obj:.6f} bits/s/Hz (file says {payload['objective']:.6f})")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "campaign":
            return _cmd_campaign(args)
        if args.command == "oracle-compare":
            return _cmd_oracle_compare(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
