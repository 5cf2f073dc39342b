"""Diameter-envelope dynamics.

The pair (D, V) of spatial and velocity diameters obeys

    D' = V,
    V' = -C * phi(D) * V^(p-1),

in the equality form (realized exactly by the symmetric two-particle
configuration); the general dynamics obeys the same relations as
inequalities. The inequality character is preserved numerically by the
bracketing tail-rate variants: kappa = C*lam*D^-alpha (lower rate, larger V)
and kappa = C*Lam*D^-alpha (upper rate, smaller V).

Rescaled autonomous forms used for invariant-region analysis:

  S1 (p > 3):  D_s = (t+1)^(b-1) D, V_s = (t+1)^b V, tau = log(t+1),
               b = beta_sup = (1-alpha)/(p-2-alpha):
                   D_s' = (b-1) D_s + V_s
                   V_s' = b V_s - lamC * D_s^-alpha * V_s^(p-1)

  Sb (p = 3):  on top of V_s = (t+1) V, a logarithmic rescale with
               g = alpha/(1-alpha):
                   Dt = (tau+1)^-(g+1) D,  Vt = (tau+1)^-g V_s:
                   Dt' = (1/(tau+1)) (-Dt/(1-alpha) + Vt)
                   Vt' = Vt (1 - lamC * Dt^-alpha * Vt)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    IntegrationError,
    Trajectory,
    integrate_dp54,
    linear_schedule,
    log_schedule,
)
from .kernels import Kernel, kernel_eval

COALESCENCE_V = 1e-14

_BOUNDS = ("exact", "lower", "upper")


class SingularDiameterError(ValueError):
    """Power-law rate evaluated at D <= 0."""


def alignment_constant(p: float, total_mass: float) -> float:
    """Dissipation constant C = 2^(2-p) * m0 of the envelope inequality."""
    if p <= 1:
        raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {p}")
    if total_mass <= 0:
        raise ValueError("total_mass must be > 0")
    return 2.0 ** (2.0 - p) * total_mass


def beta_sup(p: float, alpha: float) -> float:
    """Decay exponent (1-alpha)/(p-2-alpha) of V for p > 3, alpha in [0,1)."""
    return (1.0 - alpha) / (p - 2.0 - alpha)


def beta_sub(p: float) -> float:
    """Decay exponent 1/(p-2) of V under flocking, p > 2."""
    return 1.0 / (p - 2.0)


def sb_gamma(alpha: float) -> float:
    """Log-correction power alpha/(1-alpha) in the borderline case p = 3."""
    return alpha / (1.0 - alpha)


@dataclass(frozen=True)
class EnvelopeParams:
    """Envelope coefficients: nonlinearity p, constant C > 0, tail data."""

    p: float
    C: float
    alpha: float = 0.0
    lam: float = 1.0
    Lam: float = 1.0

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {self.p}")
        if not self.C > 0:
            raise ValueError("envelope constant C must be > 0")
        if not (0 < self.lam <= self.Lam):
            raise ValueError("tail constants must satisfy 0 < lambda <= Lambda")

    @property
    def lambdaC(self) -> float:
        return self.lam * self.C

    @property
    def LambdaC(self) -> float:
        return self.Lam * self.C


@dataclass(frozen=True)
class EnvelopeState:
    D: float
    V: float
    time: float = 0.0
    time_coord: str = "raw_t"  # raw_t | log_tau

    def __post_init__(self):
        if self.D < 0 or self.V < 0:
            raise ValueError("diameters must be nonnegative")
        if self.time_coord not in ("raw_t", "log_tau"):
            raise ValueError(f"unknown time coordinate {self.time_coord!r}")


def _power_rate(D: float, alpha: float) -> float:
    if alpha == 0.0:
        return 1.0
    if D <= 0.0:
        raise SingularDiameterError("power-law rate needs D > 0 (use a capped kernel)")
    return D ** -alpha


def envelope_rhs(D: float, V: float, kernel: Kernel | None,
                 params: EnvelopeParams, bound: str = "exact") -> tuple[float, float]:
    """Right-hand side (dD, dV) of the raw-time envelope system."""
    if bound not in _BOUNDS:
        raise ValueError(f"bound must be one of {_BOUNDS}, got {bound!r}")
    if bound == "exact":
        if kernel is None:
            raise ValueError("exact envelope rate needs a kernel")
        kappa = params.C * kernel_eval(kernel, D)
    elif bound == "lower":
        kappa = params.lambdaC * _power_rate(D, params.alpha)
    else:
        kappa = params.LambdaC * _power_rate(D, params.alpha)
    Vp = max(V, 0.0)
    return Vp, -kappa * Vp ** (params.p - 1.0)


def integrate_envelope(D0: float, V0: float, params: EnvelopeParams,
                       kernel: Kernel | None = None, *,
                       t_end: float, sample_times=None, bound: str = "exact",
                       rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                       n_samples: int = 200, spacing: str = "log") -> Trajectory:
    """Integrate the raw-time envelope ODE up to t_end.

    For p < 2 the velocity diameter reaches zero in finite time; integration
    stops at V < 1e-14, the extinction time is estimated from the local
    closed form, and the remaining samples continue with V = 0, D frozen.
    """
    if D0 < 0 or V0 < 0:
        raise ValueError("diameters must be nonnegative")
    if sample_times is None:
        sample_times = (log_schedule(t_end, n_samples) if spacing == "log"
                        else linear_schedule(t_end, n_samples))
    samples = np.asarray(sample_times, dtype=float)

    def rhs(t, y):
        dD, dV = envelope_rhs(y[0], y[1], kernel, params, bound)
        return np.array([dD, dV])

    stop = None
    if params.p < 2.0:
        stop = lambda t, y: y[1] <= COALESCENCE_V

    try:
        res = integrate_dp54(rhs, 0.0, np.array([D0, V0]), samples,
                             rtol=rtol, atol=atol, stop=stop)
    except IntegrationError as err:
        part = err.partial
        if part is None:
            raise
        traj = Trajectory(t=part.t, D=part.y[:, 0],
                          V=np.maximum(part.y[:, 1], 0.0), params=params,
                          meta=part.stats, engine="envelope", status="failed")
        raise IntegrationError(str(err), partial=traj) from err

    t_out = samples
    D_out = np.empty_like(samples)
    V_out = np.empty_like(samples)
    n = res.t.size
    D_out[:n] = res.y[:, 0]
    V_out[:n] = np.maximum(res.y[:, 1], 0.0)
    status = "ok"
    t_ext = None
    if res.stopped:
        # continue the unique rest state: V = 0, D frozen
        D_out[n:] = res.y_final[0]
        V_out[n:] = 0.0
        status = "extinct"
        Ds, Vs = res.y_final[0], max(res.y_final[1], 0.0)
        _, dV = envelope_rhs(Ds, max(Vs, COALESCENCE_V), kernel, params, bound)
        kappa = -dV / max(Vs, COALESCENCE_V) ** (params.p - 1.0)
        t_ext = res.t_final + Vs ** (2.0 - params.p) / ((2.0 - params.p) * kappa)

    prepend = samples[0] > 0.0
    if prepend:
        t_out = np.concatenate([[0.0], t_out])
        D_out = np.concatenate([[D0], D_out])
        V_out = np.concatenate([[V0], V_out])
    return Trajectory(t=t_out, D=D_out, V=V_out, params=params, meta=res.stats,
                      engine="envelope", coords="raw", status=status,
                      extinction_time=t_ext)


# ---------------------------------------------------------------------------
# closed forms under global communication phi >= floor > 0
# ---------------------------------------------------------------------------

def closed_form_global(p: float, c_phi_floor: float, V0: float, t):
    """V(t) for V' = -(C*floor) V^(p-1): exponential at p = 2, power decay
    for p > 2, finite-time extinction for p in (1, 2)."""
    if p <= 1:
        raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {p}")
    if c_phi_floor <= 0:
        raise ValueError("need C * floor > 0")
    t = np.asarray(t, dtype=float)
    if p == 2.0:
        out = V0 * np.exp(-c_phi_floor * t)
    elif p > 2.0:
        out = (V0 ** (2.0 - p) + (p - 2.0) * c_phi_floor * t) ** (-1.0 / (p - 2.0))
    else:
        base = np.maximum(V0 ** (2.0 - p) - (2.0 - p) * c_phi_floor * t, 0.0)
        out = base ** (1.0 / (2.0 - p))
    return out if out.ndim else float(out)


def global_extinction_time(p: float, c_phi_floor: float, V0: float) -> float:
    """Extinction time T* = V0^(2-p) / ((2-p) C floor) for p in (1, 2)."""
    if not 1.0 < p < 2.0:
        raise ValueError("finite-time extinction requires p in (1, 2)")
    if c_phi_floor <= 0:
        raise ValueError("need C * floor > 0")
    return V0 ** (2.0 - p) / ((2.0 - p) * c_phi_floor)


# ---------------------------------------------------------------------------
# rescaled autonomous systems
# ---------------------------------------------------------------------------

def _rate_coefficient(params: EnvelopeParams, bound: str) -> float:
    if bound == "lower":
        return params.lambdaC
    if bound == "upper":
        return params.LambdaC
    raise ValueError(f"scaled systems take bound 'lower' or 'upper', got {bound!r}")


def scaled_rhs_S1(D: float, V: float, params: EnvelopeParams,
                  bound: str = "lower") -> tuple[float, float]:
    """Autonomous S1 system in tau = log(t+1), valid for p > 3."""
    if params.p <= 3.0:
        raise ValueError("S1 rescaling requires p > 3")
    if not 0.0 <= params.alpha < 1.0:
        raise ValueError("S1 rescaling requires alpha in [0, 1)")
    b = beta_sup(params.p, params.alpha)
    coef = _rate_coefficient(params, bound)
    Vp = max(V, 0.0)
    dD = (b - 1.0) * D + Vp
    dV = b * Vp - coef * _power_rate(D, params.alpha) * Vp ** (params.p - 1.0)
    return dD, dV


def log_scaled_rhs_Sb(tau: float, D: float, V: float, params: EnvelopeParams,
                      bound: str = "lower") -> tuple[float, float]:
    """Doubly rescaled borderline system (p = 3); non-autonomous in tau."""
    if params.p != 3.0:
        raise ValueError("Sb rescaling requires p = 3")
    if not 0.0 <= params.alpha < 1.0:
        raise ValueError("Sb rescaling requires alpha in [0, 1)")
    coef = _rate_coefficient(params, bound)
    Vp = max(V, 0.0)
    dD = (-D / (1.0 - params.alpha) + Vp) / (tau + 1.0)
    dV = Vp * (1.0 - coef * _power_rate(D, params.alpha) * Vp)
    return dD, dV


def _with_initial_sample(res, D0: float, V0: float):
    if res.t.size and res.t[0] == 0.0:
        return res.t, res.y[:, 0], np.maximum(res.y[:, 1], 0.0)
    t = np.concatenate([[0.0], res.t])
    D = np.concatenate([[D0], res.y[:, 0]])
    V = np.concatenate([[V0], np.maximum(res.y[:, 1], 0.0)])
    return t, D, V


def integrate_scaled_S1(D0: float, V0: float, params: EnvelopeParams, *,
                        tau_end: float, sample_times=None, bound: str = "lower",
                        rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                        n_samples: int = 200) -> Trajectory:
    """Integrate the S1 system over tau in [0, tau_end]."""
    if sample_times is None:
        sample_times = linear_schedule(tau_end, n_samples)

    def rhs(tau, y):
        return np.array(scaled_rhs_S1(y[0], y[1], params, bound))

    res = integrate_dp54(rhs, 0.0, np.array([D0, V0]), sample_times,
                         rtol=rtol, atol=atol)
    t, D, V = _with_initial_sample(res, D0, V0)
    return Trajectory(t=t, D=D, V=V, params=params, meta=res.stats,
                      engine="envelope", coords="S1")


def integrate_log_scaled_Sb(D0: float, V0: float, params: EnvelopeParams, *,
                            tau_end: float, sample_times=None, bound: str = "lower",
                            rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                            n_samples: int = 200) -> Trajectory:
    """Integrate the borderline Sb system over tau in [0, tau_end]."""
    if sample_times is None:
        sample_times = linear_schedule(tau_end, n_samples)

    def rhs(tau, y):
        return np.array(log_scaled_rhs_Sb(tau, y[0], y[1], params, bound))

    res = integrate_dp54(rhs, 0.0, np.array([D0, V0]), sample_times,
                         rtol=rtol, atol=atol)
    t, D, V = _with_initial_sample(res, D0, V0)
    return Trajectory(t=t, D=D, V=V, params=params, meta=res.stats,
                      engine="envelope", coords="Sb")


# ---------------------------------------------------------------------------
# coordinate maps between raw and rescaled trajectories
# ---------------------------------------------------------------------------

def to_s1_coordinates(traj: Trajectory, p: float, alpha: float) -> Trajectory:
    """Map a raw-time trajectory to S1 coordinates (tau, D_s, V_s)."""
    if traj.coords != "raw":
        raise ValueError("to_s1_coordinates expects a raw-time trajectory")
    b = beta_sup(p, alpha)
    tp1 = traj.t + 1.0
    return Trajectory(t=np.log(tp1), D=tp1 ** (b - 1.0) * traj.D,
                      V=tp1 ** b * traj.V, params=traj.params, meta=traj.meta,
                      engine=traj.engine, coords="S1", status=traj.status)


def to_d1_coordinates(traj: Trajectory) -> Trajectory:
    """Map a raw-time trajectory to (t, D/(t+1), V)."""
    if traj.coords != "raw":
        raise ValueError("to_d1_coordinates expects a raw-time trajectory")
    return Trajectory(t=traj.t, D=traj.D / (traj.t + 1.0), V=traj.V,
                      params=traj.params, meta=traj.meta, engine=traj.engine,
                      coords="D1", status=traj.status)


def to_sb_coordinates(traj: Trajectory, alpha: float) -> Trajectory:
    """Map a raw-time trajectory to the doubly rescaled Sb coordinates."""
    if traj.coords != "raw":
        raise ValueError("to_sb_coordinates expects a raw-time trajectory")
    g = sb_gamma(alpha)
    tp1 = traj.t + 1.0
    tau = np.log(tp1)
    Dt = (tau + 1.0) ** -(g + 1.0) * traj.D
    Vt = (tau + 1.0) ** -g * (tp1 * traj.V)
    return Trajectory(t=tau, D=Dt, V=Vt, params=traj.params, meta=traj.meta,
                      engine=traj.engine, coords="Sb", status=traj.status)
