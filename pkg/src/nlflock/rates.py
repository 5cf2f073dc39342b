"""Asymptotic rate measurement, Lyapunov diagnostics, and the scenario map.

The (p, alpha) plane splits into regimes with distinct long-time behavior
of the diameters:

  S0  p = 2,   alpha <= 1 : exponential alignment, bounded D
  S1  p > 3,   alpha < 1  : V ~ t^-b, D ~ t^(1-b), b = (1-alpha)/(p-2-alpha)
  S2  2<p<3,   alpha < 1  : V ~ t^(-1/(p-2)), D bounded
  Sb  p = 3,   alpha < 1  : V ~ t^-1 (log t)^g, D ~ (log t)^(g+1), g = alpha/(1-alpha)
  S3  2<p<3,   alpha > 1  : conditional; flocking for all V0 once D0 < D0*
  S4  p > 3,   alpha > 1  : no alignment for any initial data

alpha = 1 (for p != 2) and p = 3 with alpha > 1 are unanalyzed boundaries;
p in (1, 2) with a decaying tail is out of range of the classification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .envelope import alignment_constant, beta_sub, beta_sup, sb_gamma
from .integrate import Trajectory
from .kernels import Kernel, kernel_primitive

LYAPUNOV_TOL_SCALE = 1e-9
MIN_FIT_POINTS = 8


class WrongScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scenario classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioClass:
    label: str                       # S0 S1 S2 Sb S3 S4 boundary out_of_range
    predicted_V_exponent: float | None = None
    predicted_D_exponent: float | None = None
    log_power_V: float | None = None
    log_power_D: float | None = None
    conditionality: str | None = None

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "predicted_V_exponent": self.predicted_V_exponent,
            "predicted_D_exponent": self.predicted_D_exponent,
            "log_power_V": self.log_power_V,
            "log_power_D": self.log_power_D,
            "conditionality": self.conditionality,
        }


def classify_scenario(p: float, alpha: float) -> ScenarioClass:
    """Scenario label plus predicted rates for a (p, alpha) pair."""
    if p <= 1:
        raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {p}")
    if alpha < 0:
        raise ValueError(f"tail exponent must satisfy alpha >= 0, got {alpha}")
    if p < 2:
        return ScenarioClass("out_of_range")
    if p == 2:
        if alpha <= 1:
            return ScenarioClass("S0", predicted_V_exponent=math.inf,
                                 predicted_D_exponent=0.0,
                                 conditionality="unconditional")
        return ScenarioClass("boundary")
    if alpha == 1:
        return ScenarioClass("boundary")
    if alpha < 1:
        if p > 3:
            b = beta_sup(p, alpha)
            return ScenarioClass("S1", predicted_V_exponent=b,
                                 predicted_D_exponent=1.0 - b,
                                 conditionality="unconditional")
        if p == 3:
            g = sb_gamma(alpha)
            return ScenarioClass("Sb", predicted_V_exponent=1.0,
                                 predicted_D_exponent=0.0,
                                 log_power_V=g, log_power_D=g + 1.0,
                                 conditionality="unconditional")
        return ScenarioClass("S2", predicted_V_exponent=beta_sub(p),
                             predicted_D_exponent=0.0,
                             conditionality="unconditional")
    # alpha > 1
    if p == 3:
        return ScenarioClass("boundary")
    if p > 3:
        return ScenarioClass("S4", conditionality="no_alignment_generic")
    return ScenarioClass("S3", predicted_V_exponent=beta_sub(p),
                         predicted_D_exponent=0.0,
                         conditionality="semi_unconditional")


# ---------------------------------------------------------------------------
# exponent fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    field: str                 # "D" or "V"
    exponent: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    log_power: float | None = None

    def to_json(self) -> dict:
        return {"field": self.field, "exponent": self.exponent,
                "log_power": self.log_power, "r2": self.r_squared,
                "window": list(self.window), "n": self.n_points}


def _field_values(traj: Trajectory, fieldname: str) -> np.ndarray:
    if fieldname == "D":
        return traj.D
    if fieldname == "V":
        return traj.V
    raise ValueError(f"field must be 'D' or 'V', got {fieldname!r}")


def default_fit_window(traj: Trajectory) -> tuple[float, float]:
    """Last two decades of the run (asymptotic rates only)."""
    t_hi = float(traj.t[-1])
    return t_hi / 100.0, t_hi


def _windowed(traj: Trajectory, fieldname: str, window) -> tuple[np.ndarray, np.ndarray]:
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("fit window must satisfy t_lo < t_hi")
    mask = traj.window(t_lo, t_hi) & (traj.t > 0)
    t = traj.t[mask]
    y = _field_values(traj, fieldname)[mask]
    if t.size < MIN_FIT_POINTS:
        raise ValueError(
            f"need at least {MIN_FIT_POINTS} samples in the fit window, got {t.size}")
    bad = np.nonzero(y <= 0)[0]
    if bad.size:
        raise ValueError(
            f"nonpositive {fieldname} value at t={t[bad[0]]!r}; cannot log-fit")
    return t, y


def fit_power(traj: Trajectory, fieldname: str, window=None) -> RateFit:
    """Least-squares slope of log(field) against log(t) over the window.

    Sign convention: V decay is reported positive (V ~ t^-b -> exponent b);
    D growth is reported as-is.
    """
    if window is None:
        window = default_fit_window(traj)
    t, y = _windowed(traj, fieldname, window)
    res = linregress(np.log(t), np.log(y))
    slope = -res.slope if fieldname == "V" else res.slope
    return RateFit(field=fieldname, exponent=float(slope),
                   r_squared=float(res.rvalue ** 2),
                   window=(float(window[0]), float(window[1])),
                   n_points=int(t.size))


def fit_log_corrected(traj: Trajectory, fieldname: str, alpha: float,
                      window=None) -> RateFit:
    """Fit the logarithmic correction power in the borderline regime.

    V: fits q in V(t) * t = c (log t)^q, linearized as
       log(V t) = log c + q log log t; the expected value is alpha/(1-alpha).
    D: fits q in D(t) = c (log t)^q; expected 1/(1-alpha).

    Requires t >= 100 within the window so log log t is well separated.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"log-corrected fit requires alpha in [0, 1), got {alpha}")
    if window is None:
        window = default_fit_window(traj)
    window = (max(float(window[0]), 100.0), float(window[1]))
    t, y = _windowed(traj, fieldname, window)
    target = np.log(y * t) if fieldname == "V" else np.log(y)
    res = linregress(np.log(np.log(t)), target)
    exponent = 1.0 if fieldname == "V" else 0.0
    return RateFit(field=fieldname, exponent=exponent,
                   r_squared=float(res.rvalue ** 2),
                   window=window, n_points=int(t.size),
                   log_power=float(res.slope))


# ---------------------------------------------------------------------------
# Lyapunov diagnostics (2 <= p < 3)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovReport:
    t: np.ndarray
    E: np.ndarray
    monotone: bool
    max_increase: float
    tol: float


def lyapunov_series(traj: Trajectory, p: float, *, alpha: float | None = None,
                    lambdaC: float | None = None, kernel: Kernel | None = None,
                    C: float | None = None, D0: float | None = None,
                    tol: float | None = None) -> LyapunovReport:
    """Energy functional E = V^(3-p) + (3-p) C psi(D), psi(D) = int_D0^D phi.

    Nonincreasing along any dynamics obeying D' <= V and
    V' <= -C phi(D) V^(p-1). Two evaluation modes:

      * pure power tail: pass (alpha, lambdaC); C psi has the closed form
        lambdaC (D^(1-alpha) - D0^(1-alpha)) / (1-alpha) (log for alpha = 1);
      * exact kernel: pass (kernel, C); psi uses the kernel primitive
        (closed form or adaptive quadrature per family).

    ``monotone`` is True when every step increase stays within
    tol = 1e-9 * (1 + E(0)), absorbing integrator error.
    """
    if not 2.0 <= p < 3.0:
        raise WrongScenarioError(
            f"Lyapunov functional requires 2 <= p < 3, got p={p}")
    if D0 is None:
        D0 = float(traj.D[0])
    if kernel is not None:
        if C is None:
            mass = getattr(traj.params, "total_mass", None)
            if mass is None:
                raise ValueError("exact-kernel mode needs C (or params with total_mass)")
            C = alignment_constant(p, mass)
        psiC = C * np.array([kernel_primitive(kernel, D0, float(d)) for d in traj.D])
    else:
        if alpha is None or lambdaC is None:
            raise ValueError("pass either (alpha, lambdaC) or (kernel, C)")
        if alpha == 1.0:
            psiC = lambdaC * np.log(traj.D / D0)
        else:
            psiC = lambdaC * (traj.D ** (1.0 - alpha) - D0 ** (1.0 - alpha)) / (1.0 - alpha)
    E = traj.V ** (3.0 - p) + (3.0 - p) * psiC
    if tol is None:
        tol = LYAPUNOV_TOL_SCALE * (1.0 + abs(float(E[0])))
    increases = np.diff(E)
    max_inc = float(increases.max()) if increases.size else 0.0
    return LyapunovReport(t=traj.t.copy(), E=E, monotone=bool(max_inc <= tol),
                          max_increase=max_inc, tol=tol)
