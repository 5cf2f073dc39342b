"""Adaptive embedded Runge-Kutta integration and trajectory records.

The stepper is a Dormand-Prince 5(4) pair with FSAL, proportional step
control, and exact landing on every requested sample time (no dense-output
interpolation). That keeps long log-spaced horizons cheap and the output
bitwise deterministic for a given right-hand side.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
)
# difference between 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER_EXP = -0.2  # 1 / -(order of the embedded pair)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-10


@dataclass
class IntegratorStats:
    steps: int = 0
    rejected: int = 0
    max_error: float = 0.0
    rhs_evals: int = 0

    def to_json(self) -> dict:
        return {"steps": self.steps, "rejected": self.rejected,
                "max_error": self.max_error, "rhs_evals": self.rhs_evals}


class IntegrationError(RuntimeError):
    """Step-size underflow or exhausted step budget; carries partial output."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class StepperResult:
    t: np.ndarray            # sample times actually reached
    y: np.ndarray            # (len(t), k) states at those times
    stats: IntegratorStats
    stopped: bool            # stop condition fired before the last sample
    t_final: float
    y_final: np.ndarray


def _rms_norm(e, scale):
    # components at exactly zero with zero scale (e.g. extinct velocities
    # under pure-relative control) contribute nothing
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(scale > 0.0, e / scale, np.where(e == 0.0, 0.0, np.inf))
    return float(np.sqrt(np.mean(r * r)))


def _initial_step(rhs, t0, y0, f0, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0 = _rms_norm(y0, scale)
    d1 = _rms_norm(f0, scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, 0.1 * span) if span > 0 else h0
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = _rms_norm(f1 - f0, scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span if span > 0 else np.inf)


def integrate_dp54(rhs: Callable, t0: float, y0, sample_times, *,
                   rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                   max_step: float = np.inf, first_step: float | None = None,
                   stop: Optional[Callable] = None,
                   max_steps: int = 5_000_000) -> StepperResult:
    """Integrate y' = rhs(t, y), recording the state at each sample time.

    sample_times must be strictly increasing and >= t0; the stepper clips
    each step so that every sample time is hit exactly. ``stop(t, y)`` is
    checked after each accepted step; when it fires the result carries the
    samples reached so far along with the final state.
    """
    y = np.array(y0, dtype=float).ravel()
    t = float(t0)
    samples = np.asarray(sample_times, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("sample schedule is empty")
    if np.any(np.diff(samples) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if samples[0] < t0:
        raise ValueError("sample times must not precede the initial time")

    stats = IntegratorStats()
    out = np.empty((samples.size, y.size))
    filled = 0
    if samples[0] == t0:
        out[0] = y
        filled = 1

    f = np.asarray(rhs(t, y), dtype=float).ravel()
    stats.rhs_evals += 1
    span = samples[-1] - t0
    if first_step is not None:
        h = float(first_step)
    else:
        h = _initial_step(rhs, t, y, f, rtol, atol, span)
        stats.rhs_evals += 1
    h = min(h, max_step)

    K = np.empty((7, y.size))
    stopped = False
    just_rejected = False

    while filled < samples.size:
        if stats.steps + stats.rejected > max_steps:
            raise IntegrationError(
                "step budget exhausted",
                partial=StepperResult(samples[:filled], out[:filled].copy(),
                                      stats, False, t, y.copy()))
        target = samples[filled]
        h_use = min(h, max_step)
        lands = t + h_use >= target
        if lands:
            h_use = target - t
        if h_use <= 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(
                f"step size underflow at t={t!r}",
                partial=StepperResult(samples[:filled], out[:filled].copy(),
                                      stats, False, t, y.copy()))

        K[0] = f
        for i in range(5):
            K[i + 1] = rhs(t + _C[i + 1] * h_use, y + h_use * (_A[i] @ K[:i + 1]))
        y_new = y + h_use * (_A[5] @ K[:6])
        K[6] = np.asarray(rhs(t + h_use, y_new), dtype=float).ravel()
        stats.rhs_evals += 6

        err_vec = h_use * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms_norm(err_vec, scale)

        if err <= 1.0:
            stats.steps += 1
            stats.max_error = max(stats.max_error, err)
            t = target if lands else t + h_use
            y = y_new
            f = K[6]
            if lands:
                out[filled] = y
                filled += 1
            if stop is not None and stop(t, y):
                stopped = True
                break
            factor = _MAX_FACTOR if err == 0.0 else min(
                _MAX_FACTOR, _SAFETY * err ** _ORDER_EXP)
            if just_rejected:
                factor = min(factor, 1.0)
            just_rejected = False
            h = max(h_use * factor, 1e-300)
        else:
            stats.rejected += 1
            just_rejected = True
            h = h_use * max(_MIN_FACTOR, _SAFETY * err ** _ORDER_EXP)

    return StepperResult(samples[:filled].copy(), out[:filled].copy(),
                         stats, stopped, t, y.copy())


# ---------------------------------------------------------------------------
# sampling schedules
# ---------------------------------------------------------------------------

def log_schedule(t_end: float, n: int = 200, t_first: float | None = None) -> np.ndarray:
    """Log-spaced sample times (t_first .. t_end), t_first defaulting to
    t_end * 1e-6 clipped to [1e-3, 1]."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if t_first is None:
        t_first = min(1.0, max(1e-3, t_end * 1e-6))
    if not 0 < t_first < t_end:
        raise ValueError("need 0 < t_first < t_end")
    return np.geomspace(t_first, t_end, n)


def linear_schedule(t_end: float, n: int = 200, t_start: float = 0.0) -> np.ndarray:
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")
    return np.linspace(t_start, t_end, n + 1)[1:]


# ---------------------------------------------------------------------------
# trajectory record
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Time-stamped (D, V) observables of one run plus integrator metadata.

    t, D, V are parallel arrays. ``momentum`` is (n, dim) for particle runs
    and None for envelope runs. ``coords`` records the coordinate system:
    raw time, S1-rescaled, Sb-rescaled, or D1 (D divided by t+1).
    """

    t: np.ndarray
    D: np.ndarray
    V: np.ndarray
    momentum: np.ndarray | None = None
    params: object | None = None
    meta: IntegratorStats = field(default_factory=IntegratorStats)
    engine: str = "envelope"          # "particle" | "envelope"
    coords: str = "raw"               # raw | S1 | Sb | D1
    status: str = "ok"                # ok | coalesced | extinct | failed
    extinction_time: float | None = None
    snapshots: list | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.D = np.asarray(self.D, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if not (self.t.shape == self.D.shape == self.V.shape):
            raise ValueError("t, D, V must have matching shapes")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if np.any(self.D < 0) or np.any(self.V < 0):
            raise ValueError("diameters must be nonnegative")

    @property
    def n_samples(self) -> int:
        return self.t.size

    def window(self, t_lo: float, t_hi: float) -> np.ndarray:
        """Boolean mask of samples with t in [t_lo, t_hi]."""
        return (self.t >= t_lo) & (self.t <= t_hi)


def _momentum_scalar(mom_row) -> float:
    row = np.atleast_1d(mom_row)
    return float(row[0]) if row.size == 1 else float(np.linalg.norm(row))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """CSV export: header ``t,D,V,momentum`` (+ ``coords`` for envelope runs).

    The momentum column is the signed value in one dimension, the euclidean
    norm otherwise, and empty for envelope runs.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t", "D", "V", "momentum"]
        if traj.engine == "envelope":
            header.append("coords")
        writer.writerow(header)
        for i in range(traj.n_samples):
            row = [repr(float(traj.t[i])), repr(float(traj.D[i])), repr(float(traj.V[i]))]
            if traj.momentum is not None:
                row.append(repr(_momentum_scalar(traj.momentum[i])))
            else:
                row.append("")
            if traj.engine == "envelope":
                row.append(traj.coords)
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    """Read a trajectory CSV written by :func:`write_trajectory_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["t", "D", "V", "momentum"]:
            raise ValueError(f"unexpected trajectory CSV header: {header}")
        has_coords = len(header) > 4 and header[4] == "coords"
        ts, Ds, Vs, moms = [], [], [], []
        coords = "raw"
        for row in reader:
            ts.append(float(row[0]))
            Ds.append(float(row[1]))
            Vs.append(float(row[2]))
            moms.append(float(row[3]) if row[3] else np.nan)
            if has_coords and row[4]:
                coords = row[4]
    mom = np.asarray(moms)
    momentum = None if np.all(np.isnan(mom)) else mom.reshape(-1, 1)
    return Trajectory(t=np.asarray(ts), D=np.asarray(Ds), V=np.asarray(Vs),
                      momentum=momentum,
                      engine="envelope" if has_coords else "particle",
                      coords=coords)


def trajectory_meta(traj: Trajectory, extra: dict | None = None) -> dict:
    meta = {
        "engine": traj.engine,
        "coords": traj.coords,
        "status": traj.status,
        "n_samples": int(traj.n_samples),
        "t_first": float(traj.t[0]) if traj.n_samples else None,
        "t_last": float(traj.t[-1]) if traj.n_samples else None,
        "integrator": traj.meta.to_json(),
    }
    if traj.extinction_time is not None:
        meta["extinction_time"] = float(traj.extinction_time)
    if extra:
        meta.update(extra)
    return meta


def write_trajectory_json(traj: Trajectory, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(trajectory_meta(traj, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
