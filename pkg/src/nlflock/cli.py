"""Command-line interface.

Subcommands:
  simulate   particle run (two-particle or random N-body), CSV + JSON out
  envelope   envelope run in raw, S1, or Sb coordinates
  regions    print applicable regions/thresholds for (p, alpha) as JSON
  classify   print the scenario classification for (p, alpha) as JSON
  fit        fit a decay/growth exponent on a trajectory CSV
  sweep      batch sweep over a (p, alpha) grid, CSV + JSON out
  check      containment or Lyapunov monotonicity checks on a trajectory CSV
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .envelope import (
    EnvelopeParams,
    alignment_constant,
    integrate_envelope,
    integrate_log_scaled_Sb,
    integrate_scaled_S1,
)
from .harness import ConfigError, SweepConfig, run_sweep
from .integrate import (
    read_trajectory_csv,
    write_trajectory_csv,
    write_trajectory_json,
)
from .kernels import CappedPower, ConstantFloor, SmoothTail
from .model import SimParams
from .particles import ParticleState, init_two_particle, write_snapshot_files
from .particles import integrate as integrate_particles
from .rates import classify_scenario, fit_log_corrected, fit_power, lyapunov_series
from .regions import (
    RegionSpec,
    WrongScenarioError,
    check_containment,
    d0_star,
    flocking_bound_fat_tail,
    no_alignment_floor,
    no_alignment_floor_23,
    region_A_S1,
    region_B_S1_lower,
    subcritical_membership,
    supercritical_membership,
    supercritical_thresholds,
)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, required=True, help="nonlinearity exponent (> 1)")
    p.add_argument("--alpha", type=float, default=0.0, help="kernel tail exponent")
    p.add_argument("--kernel", choices=("constant_floor", "smooth_tail", "capped_power"),
                   default="capped_power")
    p.add_argument("--floor", type=float, default=1.0, help="constant-floor value")
    p.add_argument("--r-min", type=float, default=1e-6, help="capped-power cap radius")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="tail lower constant (default: from kernel)")
    p.add_argument("--Lambda", dest="Lam", type=float, default=None,
                   help="tail upper constant (default: from kernel)")
    p.add_argument("--R", type=float, default=None, help="tail radius (default: from kernel)")
    p.add_argument("--mass", type=float, default=2.0, help="total mass m0")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d0", "--x0", dest="d0", type=float, default=1.0,
                   help="initial spatial diameter")
    p.add_argument("--v0", type=float, default=1.0, help="initial velocity diameter")
    p.add_argument("--t-end", type=float, default=1e3)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--rtol", type=float, default=1e-9)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--out", type=str, default="run", help="output path prefix (runid)")


def _make_kernel(args):
    if args.kernel == "constant_floor":
        return ConstantFloor(args.floor)
    if args.kernel == "smooth_tail":
        return SmoothTail(args.alpha)
    return CappedPower(args.alpha, args.r_min)


def _make_params(args) -> SimParams:
    params = SimParams.from_kernel(args.p, _make_kernel(args), total_mass=args.mass)
    overrides = {}
    for attr in ("lam", "Lam", "R"):
        val = getattr(args, attr)
        if val is not None:
            overrides[attr] = val
    return params.with_(**overrides) if overrides else params


def _emit(traj, args, extra=None) -> None:
    prefix = args.out
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    write_trajectory_csv(traj, prefix + "_traj.csv")
    write_trajectory_json(traj, prefix + "_meta.json", extra)
    print(prefix + "_traj.csv")


def _cmd_simulate(args) -> int:
    params = _make_params(args)
    if args.n == 2:
        state = init_two_particle(args.d0, args.v0)
        if args.mass != 2.0:
            print("note: two-particle configuration has unit masses (m0 = 2)",
                  file=sys.stderr)
            params = params.with_(total_mass=2.0)
    else:
        rng = np.random.default_rng(args.seed)
        x = rng.uniform(-0.5 * args.d0, 0.5 * args.d0, (args.n, args.dim))
        v = rng.uniform(-0.5 * args.v0, 0.5 * args.v0, (args.n, args.dim))
        m = np.full(args.n, params.total_mass / args.n)
        state = ParticleState(t=0.0, x=x, v=v, m=m)
    traj = integrate_particles(state, params, args.t_end, coupling=args.coupling,
                               rtol=args.rtol, atol=args.atol,
                               n_samples=args.samples, spacing=args.spacing,
                               record_snapshots=args.snapshots)
    _emit(traj, args, {"p": args.p, "alpha": args.alpha, "n": args.n,
                       "coupling": args.coupling, "seed": args.seed})
    if args.snapshots:
        write_snapshot_files(traj, args.out)
    return 0


def _cmd_envelope(args) -> int:
    C = args.C if args.C is not None else alignment_constant(args.p, args.mass)
    kernel = _make_kernel(args)
    lam, Lam = args.lam, args.Lam
    if lam is None or Lam is None:
        base = SimParams.from_kernel(args.p, kernel, total_mass=args.mass)
        lam = lam if lam is not None else base.lam
        Lam = Lam if Lam is not None else base.Lam
    params = EnvelopeParams(p=args.p, C=C, alpha=args.alpha, lam=lam, Lam=Lam)
    if args.coords == "raw":
        traj = integrate_envelope(args.d0, args.v0, params, kernel,
                                  t_end=args.t_end, bound=args.bound,
                                  rtol=args.rtol, atol=args.atol,
                                  n_samples=args.samples, spacing=args.spacing)
    elif args.coords == "S1":
        traj = integrate_scaled_S1(args.d0, args.v0, params, tau_end=args.t_end,
                                   bound="lower" if args.bound == "exact" else args.bound,
                                   rtol=args.rtol, atol=args.atol,
                                   n_samples=args.samples)
    else:
        traj = integrate_log_scaled_Sb(args.d0, args.v0, params, tau_end=args.t_end,
                                       bound="lower" if args.bound == "exact" else args.bound,
                                       rtol=args.rtol, atol=args.atol,
                                       n_samples=args.samples)
    _emit(traj, args, {"p": args.p, "alpha": args.alpha, "C": C, "bound": args.bound})
    return 0


def _cmd_classify(args) -> int:
    scen = classify_scenario(args.p, args.alpha)
    payload = scen.to_json()
    if payload["predicted_V_exponent"] == math.inf:
        payload["predicted_V_exponent"] = "inf"
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_regions(args) -> int:
    p, alpha = args.p, args.alpha
    C = args.C if args.C is not None else alignment_constant(p, args.mass)
    lamC = args.lambdaC if args.lambdaC is not None else (args.lam or 1.0) * C
    LamC = args.LambdaC if args.LambdaC is not None else (args.Lam or 1.0) * C
    out = {"p": p, "alpha": alpha, "lambdaC": lamC, "LambdaC": LamC,
           "constants": {}, "regions": []}

    def add_region(region: RegionSpec) -> None:
        spec = region.to_json()
        spec["D_interval"] = [x if math.isfinite(x) else "inf" for x in spec["D_interval"]]
        spec["V_interval"] = [x if math.isfinite(x) else "inf" for x in spec["V_interval"]]
        out["regions"].append(spec)

    if p > 3 and 0 <= alpha < 1:
        add_region(region_A_S1(args.d0, args.v0, p, alpha, lamC))
        add_region(region_B_S1_lower(args.d0, args.v0, p, alpha, LamC))
        out["constants"]["M"] = out["regions"][0]["constants"]["M"]
        out["constants"]["m"] = out["regions"][1]["constants"]["m"]
    if 2 <= p < 3 and alpha < 1:
        out["constants"]["flocking_D_bar"] = flocking_bound_fat_tail(
            args.d0, args.v0, p, alpha, lamC)
    if 2 < p < 3 and alpha > 1:
        out["constants"]["D0_star"] = d0_star(p, alpha, lamC)
        member, beta = subcritical_membership(args.d0, args.v0, p, alpha, lamC)
        out["constants"]["subcritical"] = member
        if beta is not None:
            out["constants"]["witness_beta"] = beta
        v_min, x_slope = supercritical_thresholds(p, alpha, LamC)
        out["constants"]["supercritical_v_min"] = v_min
        out["constants"]["supercritical_x_slope"] = x_slope
        if supercritical_membership(args.d0, args.v0, p, alpha, LamC):
            floors = no_alignment_floor_23(args.d0, args.v0, p, alpha, LamC)
            out["constants"]["V_floor"] = floors.V_floor
            out["constants"]["D_linear_floor"] = floors.D_linear_floor
            add_region(floors.region())
    if p > 3 and alpha > 1:
        gamma = args.gamma if args.gamma is not None else 0.5 * (
            1.0 / alpha + min(1.0, (p - 2.0) / alpha))
        floors = no_alignment_floor(args.d0, args.v0, p, alpha, LamC, gamma)
        out["constants"]["gamma"] = gamma
        out["constants"]["V_floor"] = floors.V_floor
        out["constants"]["D_scaled_floor"] = floors.D_scaled_floor
        out["constants"]["D_linear_floor"] = floors.D_linear_floor
        add_region(floors.region())
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _cmd_fit(args) -> int:
    traj = read_trajectory_csv(args.traj)
    window = None
    if args.t_lo is not None and args.t_hi is not None:
        window = (args.t_lo, args.t_hi)
    if args.log_corrected:
        fit = fit_log_corrected(traj, args.field, args.alpha, window)
    else:
        fit = fit_power(traj, args.field, window)
    print(json.dumps(fit.to_json(), indent=2, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    try:
        if args.config:
            with open(args.config) as fh:
                config = SweepConfig.from_config(fh.read())
        else:
            if not (args.p_grid and args.alpha_grid and args.ic):
                raise ConfigError("sweep needs --config or --p-grid/--alpha-grid/--ic")
            ic_set = tuple(tuple(float(x) for x in chunk.split(":"))
                           for chunk in args.ic.split(";") if chunk.strip())
            config = SweepConfig(
                p_grid=tuple(float(x) for x in args.p_grid.split(",") if x),
                alpha_grid=tuple(float(x) for x in args.alpha_grid.split(",") if x),
                ic_set=ic_set, engine=args.engine, t_end=args.t_end,
                n_samples=args.samples, out_dir=args.out, jobs=args.jobs,
                seed=args.seed, plot=args.plot)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"sweep config error: {exc}", file=sys.stderr)
        return 2
    result = run_sweep(config)
    n_failed = sum(1 for r in result.rows if str(r["status"]).startswith("failed"))
    print(f"{len(result.rows)} rows -> {os.path.join(config.out_dir, 'sweep.csv')}"
          f" ({n_failed} failed)")
    return 0


def _cmd_check(args) -> int:
    traj = read_trajectory_csv(args.traj)
    if args.check == "lyapunov":
        if args.p is None or args.alpha is None:
            print("lyapunov check needs --p and --alpha", file=sys.stderr)
            return 2
        report = lyapunov_series(traj, args.p, alpha=args.alpha, lambdaC=args.lambdaC)
        print(json.dumps({"monotone": report.monotone,
                          "max_increase": report.max_increase,
                          "tol": report.tol, "E0": float(report.E[0]),
                          "E_last": float(report.E[-1])}, indent=2, sort_keys=True))
        return 0
    if args.region_file is None:
        print("containment check needs --region-file", file=sys.stderr)
        return 2
    with open(args.region_file) as fh:
        spec = json.load(fh)
    if "regions" in spec:
        if not spec["regions"]:
            print("region file contains no regions", file=sys.stderr)
            return 2
        spec = spec["regions"][args.region_index]

    def _num(x):
        return math.inf if x == "inf" else float(x)

    region = RegionSpec(_num(spec["D_interval"][0]), _num(spec["D_interval"][1]),
                        _num(spec["V_interval"][0]), _num(spec["V_interval"][1]),
                        coords=spec["coords"], provenance=spec.get("provenance", "file"))
    report = check_containment(traj, region, p=args.p, alpha=args.alpha, tol=args.tol)
    print(json.dumps({"contained": report.contained,
                      "first_exit": list(report.first_exit) if report.first_exit else None,
                      "n_checked": report.n_checked}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlflock", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="particle run")
    _add_model_flags(p_sim)
    _add_run_flags(p_sim)
    p_sim.add_argument("--n", type=int, default=2, help="number of agents")
    p_sim.add_argument("--dim", type=int, default=1, help="spatial dimension")
    p_sim.add_argument("--coupling", choices=("mass", "mean"), default="mass")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--snapshots", action="store_true",
                       help="also write per-agent snapshot CSVs")
    p_sim.set_defaults(func=_cmd_simulate)

    p_env = sub.add_parser("envelope", help="envelope run")
    _add_model_flags(p_env)
    _add_run_flags(p_env)
    p_env.add_argument("--C", type=float, default=None,
                       help="envelope constant (default 2^(2-p) * mass)")
    p_env.add_argument("--coords", choices=("raw", "S1", "Sb"), default="raw")
    p_env.add_argument("--bound", choices=("exact", "lower", "upper"), default="exact")
    p_env.set_defaults(func=_cmd_envelope)

    p_reg = sub.add_parser("regions", help="print regions and thresholds as JSON")
    _add_model_flags(p_reg)
    p_reg.add_argument("--d0", "--x0", dest="d0", type=float, default=1.0)
    p_reg.add_argument("--v0", type=float, default=1.0)
    p_reg.add_argument("--C", type=float, default=None)
    p_reg.add_argument("--lambdaC", type=float, default=None,
                       help="lower tail-rate product (overrides lambda * C)")
    p_reg.add_argument("--LambdaC", type=float, default=None,
                       help="upper tail-rate product (overrides Lambda * C)")
    p_reg.add_argument("--gamma", type=float, default=None,
                       help="scaling exponent for the p > 3 floors")
    p_reg.set_defaults(func=_cmd_regions)

    p_cls = sub.add_parser("classify", help="scenario classification")
    p_cls.add_argument("--p", type=float, required=True)
    p_cls.add_argument("--alpha", type=float, required=True)
    p_cls.set_defaults(func=_cmd_classify)

    p_fit = sub.add_parser("fit", help="fit exponents on a trajectory CSV")
    p_fit.add_argument("--traj", required=True)
    p_fit.add_argument("--field", choices=("D", "V"), default="V")
    p_fit.add_argument("--t-lo", type=float, default=None)
    p_fit.add_argument("--t-hi", type=float, default=None)
    p_fit.add_argument("--log-corrected", action="store_true")
    p_fit.add_argument("--alpha", type=float, default=0.0)
    p_fit.set_defaults(func=_cmd_fit)

    p_swp = sub.add_parser("sweep", help="batch sweep over the (p, alpha) grid")
    p_swp.add_argument("--config", type=str, default=None, help="key = value config file")
    p_swp.add_argument("--p-grid", type=str, default=None)
    p_swp.add_argument("--alpha-grid", type=str, default=None)
    p_swp.add_argument("--ic", type=str, default=None, help="D0:V0;D0:V0;...")
    p_swp.add_argument("--engine", choices=("envelope", "particle"), default="envelope")
    p_swp.add_argument("--t-end", type=float, default=1e6)
    p_swp.add_argument("--samples", type=int, default=300)
    p_swp.add_argument("--out", type=str, default="sweep_out")
    p_swp.add_argument("--jobs", type=int, default=1)
    p_swp.add_argument("--seed", type=int, default=0)
    p_swp.add_argument("--plot", action="store_true",
                       help="emit per-run SVG log-log plots with slope guides")
    p_swp.set_defaults(func=_cmd_sweep)

    p_chk = sub.add_parser("check", help="containment / Lyapunov checks")
    p_chk.add_argument("--traj", required=True)
    p_chk.add_argument("--check", choices=("containment", "lyapunov"), required=True)
    p_chk.add_argument("--p", type=float, default=None)
    p_chk.add_argument("--alpha", type=float, default=None)
    p_chk.add_argument("--lambdaC", type=float, default=1.0)
    p_chk.add_argument("--region-file", type=str, default=None,
                       help="JSON region (output of the regions subcommand)")
    p_chk.add_argument("--region-index", type=int, default=0)
    p_chk.add_argument("--tol", type=float, default=0.0)
    p_chk.set_defaults(func=_cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WrongScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
