"""Batch sweeps over the (p, alpha) plane.

Each grid point x initial condition becomes one row: classify, integrate,
fit exponents, run the applicable region check, and compare fitted against
predicted rates. Rows are independent, failures are recorded per row (the
sweep itself never aborts), and output is byte-reproducible for a fixed
config and seed.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .envelope import EnvelopeParams, integrate_envelope
from .integrate import Trajectory
from .kernels import CappedPower
from .model import SimParams, parse_config_text
from .particles import init_two_particle, pair_coupling_constant
from .particles import integrate as integrate_particles
from .rates import classify_scenario, fit_log_corrected, fit_power
from .regions import (
    RegionSpec,
    check_containment,
    flocking_bound_fat_tail,
    flocking_bound_thin_tail,
    no_alignment_floor,
    no_alignment_floor_23,
    region_A_S1,
    supercritical_membership,
)

CSV_COLUMNS = ("p", "alpha", "D0", "V0", "scenario", "V_exp_pred", "V_exp_fit",
               "D_exp_pred", "D_exp_fit", "log_q_fit", "region_check", "status")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    p_grid: tuple
    alpha_grid: tuple
    ic_set: tuple                      # ((D0, V0), ...)
    engine: str = "envelope"           # "envelope" | "particle"
    t_end: float = 1e6
    n_samples: int = 300
    out_dir: str = "."
    jobs: int = 1
    seed: int = 0
    C: float = 1.0                     # envelope constant (particle engine
                                       # uses the exact pair constant)
    r_min: float = 1e-6
    rtol: float = 1e-9
    exponent_tol: float = 0.05
    log_power_tol: float = 0.25
    plot: bool = False

    def __post_init__(self):
        if not self.p_grid:
            raise ConfigError("p_grid must be nonempty")
        if not self.alpha_grid:
            raise ConfigError("alpha_grid must be nonempty")
        if not self.ic_set:
            raise ConfigError("ic_set must be nonempty")
        if self.engine not in ("envelope", "particle"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.n_samples < 16:
            raise ConfigError("need at least 16 samples")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    @classmethod
    def from_config(cls, text: str) -> "SweepConfig":
        cfg = parse_config_text(text)

        def floats(key):
            return tuple(float(v) for v in cfg[key].replace(";", ",").split(",") if v)

        kw = {}
        try:
            if "p_grid" in cfg:
                kw["p_grid"] = floats("p_grid")
            if "alpha_grid" in cfg:
                kw["alpha_grid"] = floats("alpha_grid")
            if "ic" in cfg:
                pairs = []
                for chunk in cfg["ic"].split(";"):
                    if not chunk.strip():
                        continue
                    d0, v0 = chunk.split(":")
                    pairs.append((float(d0), float(v0)))
                kw["ic_set"] = tuple(pairs)
            for key, typ in (("engine", str), ("t_end", float), ("n_samples", int),
                             ("out_dir", str), ("jobs", int), ("seed", int),
                             ("C", float), ("r_min", float), ("rtol", float),
                             ("exponent_tol", float), ("log_power_tol", float)):
                if key in cfg:
                    kw[key] = typ(cfg[key])
            if "plot" in cfg:
                kw["plot"] = cfg["plot"].lower() in ("1", "true", "yes")
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError(f"malformed sweep config: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"malformed sweep config: {exc}") from exc
        missing = [k for k in ("p_grid", "alpha_grid", "ic_set") if k not in kw]
        if missing:
            raise ConfigError(f"sweep config missing: {missing}")
        return cls(**kw)

    def to_json(self) -> dict:
        return {
            "p_grid": list(self.p_grid), "alpha_grid": list(self.alpha_grid),
            "ic_set": [list(ic) for ic in self.ic_set], "engine": self.engine,
            "t_end": self.t_end, "n_samples": self.n_samples,
            "out_dir": self.out_dir, "jobs": self.jobs, "seed": self.seed,
            "C": self.C, "r_min": self.r_min, "rtol": self.rtol,
            "exponent_tol": self.exponent_tol, "log_power_tol": self.log_power_tol,
            "plot": self.plot,
        }


def _integrate_point(p: float, alpha: float, D0: float, V0: float,
                     config: SweepConfig) -> tuple[Trajectory, float, float]:
    """Returns (trajectory, lambdaC, LambdaC) for one grid point."""
    kernel = CappedPower(alpha, config.r_min)
    if config.engine == "particle":
        params = SimParams.from_kernel(p, kernel, total_mass=2.0)
        state = init_two_particle(D0, V0)
        traj = integrate_particles(state, params, config.t_end,
                                   n_samples=config.n_samples,
                                   rtol=config.rtol, atol=1e-60)
        C = pair_coupling_constant(params.total_mass)
        return traj, C, C
    eparams = EnvelopeParams(p=p, C=config.C, alpha=alpha)
    traj = integrate_envelope(D0, V0, eparams, kernel, t_end=config.t_end,
                              n_samples=config.n_samples,
                              rtol=config.rtol, atol=1e-60)
    return traj, eparams.lambdaC, eparams.LambdaC


def _region_check(traj, label, p, alpha, D0, V0, lamC, LamC,
                  graze: float) -> str:
    if label == "S1":
        region = region_A_S1(D0, V0, p, alpha, lamC)
        rep = check_containment(traj, region, p=p, alpha=alpha, tol=graze)
        return "contained" if rep.contained else f"exit@{rep.first_exit[0]:.6g}:{rep.first_exit[1]}"
    if label in ("S0", "S2"):
        D_bar = flocking_bound_fat_tail(D0, V0, p, alpha, lamC)
        region = RegionSpec(0.0, D_bar, 0.0, math.inf, coords="raw",
                            provenance="energy-flocking-bound")
        rep = check_containment(traj, region, tol=graze)
        return "contained" if rep.contained else f"exit@{rep.first_exit[0]:.6g}:{rep.first_exit[1]}"
    if label == "S3":
        # the energy-based bound is the sound flocking certificate here;
        # see the decisions ledger on the subcritical-box construction
        D_bar = flocking_bound_thin_tail(D0, V0, p, alpha, lamC)
        if D_bar is not None:
            region = RegionSpec(0.0, D_bar, 0.0, math.inf, coords="raw",
                                provenance="energy-flocking-bound-thin")
            rep = check_containment(traj, region, tol=graze)
            return ("subcritical:contained" if rep.contained
                    else f"subcritical:exit@{rep.first_exit[0]:.6g}")
        if supercritical_membership(D0, V0, p, alpha, LamC):
            floors = no_alignment_floor_23(D0, V0, p, alpha, LamC)
            ok = bool(np.all(traj.V >= floors.V_floor - 1e-9)
                      and np.all(traj.D >= floors.D_linear_floor * (traj.t + 1.0) - 1e-6))
            return "supercritical:floors-hold" if ok else "supercritical:floor-violated"
        return "unresolved"
    if label == "S4":
        gamma = 0.5 * (1.0 / alpha + min(1.0, (p - 2.0) / alpha))
        floors = no_alignment_floor(D0, V0, p, alpha, LamC, gamma)
        ok = bool(np.all(traj.V >= floors.V_floor - 1e-9)
                  and np.all(traj.D >= floors.D_linear_floor * (traj.t + 1.0) - 1e-6))
        return "floors-hold" if ok else "floor-violated"
    return ""


def _run_row(args) -> dict:
    p, alpha, D0, V0, config = args
    row = {"p": p, "alpha": alpha, "D0": D0, "V0": V0, "scenario": "",
           "V_exp_pred": None, "V_exp_fit": None, "D_exp_pred": None,
           "D_exp_fit": None, "log_q_fit": None, "region_check": "",
           "status": "ok"}
    try:
        scen = classify_scenario(p, alpha)
        row["scenario"] = scen.label
        row["V_exp_pred"] = scen.predicted_V_exponent
        row["D_exp_pred"] = scen.predicted_D_exponent
        if scen.label == "out_of_range":
            return row
        traj, lamC, LamC = _integrate_point(p, alpha, D0, V0, config)
        graze = 10.0 * config.rtol * max(D0, V0, 1.0)
        passed = None
        if scen.label == "Sb":
            fv = fit_log_corrected(traj, "V", alpha)
            fd = fit_log_corrected(traj, "D", alpha)
            row["V_exp_fit"] = fv.exponent
            row["D_exp_fit"] = fd.exponent
            row["log_q_fit"] = fv.log_power
            passed = (abs(fv.log_power - scen.log_power_V) <= config.log_power_tol)
        elif scen.label in ("S1", "S2", "S3", "S4", "boundary"):
            try:
                fv = fit_power(traj, "V")
                row["V_exp_fit"] = fv.exponent
                row["D_exp_fit"] = fit_power(traj, "D").exponent
            except ValueError:
                fv = None  # velocity numerically extinct: no power law to fit
            if (fv is not None and scen.predicted_V_exponent is not None
                    and np.isfinite(scen.predicted_V_exponent)):
                flocks = scen.label != "S3" or flocking_bound_thin_tail(
                    D0, V0, p, alpha, lamC) is not None
                if flocks:
                    passed = abs(fv.exponent - scen.predicted_V_exponent) <= config.exponent_tol
        row["region_check"] = _region_check(traj, scen.label, p, alpha, D0, V0,
                                            lamC, LamC, graze)
        if passed is not None:
            row["status"] = "ok" if passed else "prediction-mismatch"
        if config.plot:
            name = f"run_p{p:g}_a{alpha:g}_D{D0:g}_V{V0:g}.svg"
            plot_sweep_run(traj, scen, os.path.join(config.out_dir, name))
    except Exception as exc:  # per-row isolation: a bad row must not kill the sweep
        row["status"] = f"failed:{type(exc).__name__}"
    return row


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                out = []
                for col in CSV_COLUMNS:
                    val = row[col]
                    if val is None:
                        out.append("")
                    elif isinstance(val, float):
                        out.append(repr(val))
                    else:
                        out.append(str(val))
                writer.writerow(out)

    def write_json(self, path) -> None:
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v
        payload = {"config": self.config.to_json(),
                   "rows": [{k: clean(v) for k, v in row.items()} for row in self.rows]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_sweep(config: SweepConfig, write: bool = True) -> SweepResult:
    """Run the full grid; one row per (p, alpha, ic), in fixed grid order."""
    tasks = [(p, alpha, D0, V0, config)
             for p in config.p_grid
             for alpha in config.alpha_grid
             for (D0, V0) in config.ic_set]
    if write or config.plot:
        os.makedirs(config.out_dir, exist_ok=True)
    if config.jobs > 1:
        with Pool(config.jobs) as pool:
            rows = pool.map(_run_row, tasks)
    else:
        rows = [_run_row(t) for t in tasks]
    result = SweepResult(config=config, rows=rows)
    if write:
        result.write_csv(os.path.join(config.out_dir, "sweep.csv"))
        result.write_json(os.path.join(config.out_dir, "sweep.json"))
    return result


def plot_sweep_run(traj: Trajectory, scen, path) -> None:
    """Optional SVG: log-log D and V with predicted-slope guide lines."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    mask = traj.t > 0
    t = traj.t[mask]
    for ax, series, name, exp in (
            (axes[0], traj.D[mask], "D", scen.predicted_D_exponent),
            (axes[1], traj.V[mask], "V", scen.predicted_V_exponent)):
        ax.loglog(t, np.maximum(series, 1e-300), label=name)
        if exp is not None and np.isfinite(exp) and series[-1] > 0:
            sign = -1.0 if name == "V" else 1.0
            guide = series[-1] * (t / t[-1]) ** (sign * exp)
            ax.loglog(t, guide, "--", label=f"slope {sign * exp:+.3g}")
        ax.set_xlabel("t")
        ax.set_ylabel(name)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
