"""Invariant regions, flocking bounds, and sub/supercritical thresholds.

Every construction takes the tail-rate products lambdaC = lam * C and
LambdaC = Lam * C as single arguments, which is how the constants always
enter the formulas. All threshold arithmetic with beta-powers runs in log
space so that extreme exponents (e.g. beta ~ 1e6 near p = 2) survive.

Coordinate tags on regions:

  raw   (D, V) in raw time
  S1    D_s = (t+1)^(b-1) D, V_s = (t+1)^b V with b = beta_sup(p, alpha)
  D1    (D / (t+1), V) in raw time
  Sb    doubly rescaled borderline coordinates (p = 3)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import (
    beta_sub,
    beta_sup,
    to_d1_coordinates,
    to_s1_coordinates,
    to_sb_coordinates,
)
from .integrate import Trajectory

SUBCRITICAL_GRID_SIZE = 512
BISECTION_RTOL = 1e-12


class WrongScenarioError(ValueError):
    """Parameters outside the (p, alpha) range the construction covers."""


class CoordinateMismatchError(ValueError):
    """Trajectory and region coordinates differ and cannot be converted."""


@dataclass(frozen=True)
class RegionSpec:
    """A box [D_lo, D_hi] x [V_lo, V_hi], possibly half-infinite."""

    D_lo: float
    D_hi: float
    V_lo: float
    V_hi: float
    coords: str
    provenance: str
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.D_lo <= self.D_hi and 0 <= self.V_lo <= self.V_hi):
            raise ValueError("region intervals must satisfy 0 <= lo <= hi")

    def violation_side(self, D: float, V: float, tol: float = 0.0) -> str | None:
        """Name of the first violated side, or None if (D, V) is inside."""
        if D < self.D_lo - tol:
            return "left"
        if D > self.D_hi + tol:
            return "right"
        if V < self.V_lo - tol:
            return "bottom"
        if V > self.V_hi + tol:
            return "top"
        return None

    def to_json(self) -> dict:
        return {
            "provenance": self.provenance,
            "coords": self.coords,
            "D_interval": [self.D_lo, self.D_hi],
            "V_interval": [self.V_lo, self.V_hi],
            "constants": dict(self.constants),
        }


# ---------------------------------------------------------------------------
# fat tail, p > 3: bounded box in S1 coordinates (upper) and its mirror
# ---------------------------------------------------------------------------

def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise WrongScenarioError(msg)


def region_A_S1(D0: float, V0: float, p: float, alpha: float,
                lambdaC: float) -> RegionSpec:
    """Absorbing box for the S1 dynamics with the lower tail rate.

    M = max(V0, (1-b) D0, (b / (lambdaC (1-b)^alpha))^(1/(p-2-alpha))) and
    A = [0, M/(1-b)] x [0, M]: on the right edge D' <= 0, on the top edge
    V' <= 0, so trajectories started inside never exit.
    """
    _require(p > 3, f"S1 box requires p > 3, got p={p}")
    _require(0 <= alpha < 1, f"S1 box requires alpha in [0, 1), got alpha={alpha}")
    if min(D0, V0, lambdaC) <= 0:
        raise ValueError("D0, V0, lambdaC must be positive")
    b = beta_sup(p, alpha)
    M = max(V0, (1.0 - b) * D0,
            (b / (lambdaC * (1.0 - b) ** alpha)) ** (1.0 / (p - 2.0 - alpha)))
    return RegionSpec(0.0, M / (1.0 - b), 0.0, M, coords="S1",
                      provenance="absorbing-box-upper",
                      constants={"beta_sup": b, "M": M})


def region_B_S1_lower(x0: float, v0: float, p: float, alpha: float,
                      LambdaC: float) -> RegionSpec:
    """Mirror box bounding the S1 dynamics from below (upper tail rate).

    m = min(v0, (1-b) x0, (b / (LambdaC (1-b)^alpha))^(1/(p-2-alpha))) and
    B = [m/(1-b), inf) x [m, inf); the field points into B on its boundary.
    """
    _require(p > 3, f"S1 box requires p > 3, got p={p}")
    _require(0 <= alpha < 1, f"S1 box requires alpha in [0, 1), got alpha={alpha}")
    if min(x0, v0, LambdaC) <= 0:
        raise ValueError("x0, v0, LambdaC must be positive")
    b = beta_sup(p, alpha)
    m = min(v0, (1.0 - b) * x0,
            (b / (LambdaC * (1.0 - b) ** alpha)) ** (1.0 / (p - 2.0 - alpha)))
    return RegionSpec(m / (1.0 - b), math.inf, m, math.inf, coords="S1",
                      provenance="absorbing-box-lower",
                      constants={"beta_sup": b, "m": m})


# ---------------------------------------------------------------------------
# fat tail, 2 <= p < 3: flocking bounds
# ---------------------------------------------------------------------------

def flocking_bound_fat_tail(D0: float, V0: float, p: float, alpha: float,
                            lambdaC: float) -> float:
    """Uniform diameter bound from the energy functional, fat tail case:

        D_bar = (D0^(1-alpha) + (1-alpha) V0^(3-p) / ((3-p) lambdaC))^(1/(1-alpha))
    """
    _require(2 <= p < 3, f"energy flocking bound requires 2 <= p < 3, got p={p}")
    _require(alpha < 1, f"fat tail bound requires alpha < 1, got alpha={alpha}")
    if lambdaC <= 0:
        raise ValueError("lambdaC must be positive")
    inner = D0 ** (1.0 - alpha) + (1.0 - alpha) / ((3.0 - p) * lambdaC) * V0 ** (3.0 - p)
    return inner ** (1.0 / (1.0 - alpha))


def flocking_bound_thin_tail(D0: float, V0: float, p: float, alpha: float,
                             lambdaC: float) -> float | None:
    """Energy-based diameter bound for thin tails (alpha > 1), 2 <= p < 3.

    The functional V^(3-p) + (3-p) lambdaC psi(D) is nonincreasing and
    psi(inf) = D0^(1-alpha) / (alpha - 1) is finite, so the bound exists
    exactly when V0^(3-p) < (3-p) lambdaC psi(inf); returns None otherwise
    (no flocking guarantee from this argument).
    """
    _require(2 <= p < 3, f"energy flocking bound requires 2 <= p < 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if min(D0, V0, lambdaC) <= 0:
        raise ValueError("D0, V0, lambdaC must be positive")
    budget = D0 ** (1.0 - alpha) - (alpha - 1.0) * V0 ** (3.0 - p) / ((3.0 - p) * lambdaC)
    if budget <= 0.0:
        return None
    return budget ** (1.0 / (1.0 - alpha))


@dataclass(frozen=True)
class Scenario2Box:
    """Flocking box for 2 < p < 3: D stays below D_bar and the rescaled
    velocity (t+1)^beta * V stays below V_bar (infeasible outside the
    subcritical condition when alpha * beta > 1)."""

    feasible: bool
    beta: float
    D_bar: float | None = None
    V_bar: float | None = None


def scenario2_box(D0: float, V0: float, p: float, alpha: float,
                  lambdaC: float, beta: float) -> Scenario2Box:
    """Box construction behind the flocking proof for 2 < p < 3.

    With the sub-optimal velocity scaling exponent beta in (1, 1/(p-2)):
    when alpha*beta < 1 a large enough box always exists; when
    alpha*beta > 1 feasibility is exactly the subcritical condition.
    """
    _require(2 < p < 3, f"scenario-2 box requires 2 < p < 3, got p={p}")
    bsub = beta_sub(p)
    if not 1.0 < beta < bsub:
        raise ValueError(f"beta must lie in (1, {bsub}), got {beta}")
    if min(D0, V0, lambdaC) <= 0:
        raise ValueError("D0, V0, lambdaC must be positive")
    ab = alpha * beta
    if ab < 1.0:
        D_bar = max(2.0 * D0,
                    (2.0 * V0 ** (1.0 - beta * (p - 2.0))
                     / ((beta - 1.0) * lambdaC ** beta)) ** (1.0 / (1.0 - ab)))
    elif ab == 1.0:
        c = V0 ** (1.0 - beta * (p - 2.0)) / ((beta - 1.0) * lambdaC ** beta)
        if c >= 1.0:
            return Scenario2Box(feasible=False, beta=beta)
        D_bar = D0 / (1.0 - c)
    else:
        if not _case4_condition(D0, V0, p, alpha, lambdaC, beta):
            return Scenario2Box(feasible=False, beta=beta)
        # minimizer of D0 + V0^(1-beta(p-2)) D^(alpha beta) / ((beta-1)(lamC)^beta) - D
        log_D = (math.log(beta - 1.0) + beta * math.log(lambdaC)
                 - math.log(ab) - (1.0 - beta * (p - 2.0)) * math.log(V0)) / (ab - 1.0)
        D_bar = math.exp(log_D)
    V_bar = V0 ** ((bsub - beta) * (p - 2.0)) * D_bar ** ab / lambdaC ** beta
    return Scenario2Box(feasible=True, beta=beta, D_bar=D_bar, V_bar=V_bar)


# ---------------------------------------------------------------------------
# thin tail, 2 < p < 3: subcritical region S and threshold D0*
# ---------------------------------------------------------------------------

def _case4_condition(D0: float, V0: float, p: float, alpha: float,
                     lambdaC: float, beta: float) -> bool:
    """Subcritical inequality for a single beta, evaluated in log space:

        D0 * V0^((1 - beta(p-2)) / (alpha beta - 1))
            <= (alpha beta - 1) * ((beta-1) lambdaC^beta
                                   / (alpha beta)^(alpha beta))^(1/(alpha beta - 1))
    """
    ab = alpha * beta
    lhs = math.log(D0) + (1.0 - beta * (p - 2.0)) / (ab - 1.0) * math.log(V0)
    rhs = math.log(ab - 1.0) + (math.log(beta - 1.0) + beta * math.log(lambdaC)
                                - ab * math.log(ab)) / (ab - 1.0)
    return lhs <= rhs


def subcritical_beta_grid(p: float) -> np.ndarray:
    """Chebyshev-spaced scan grid on (1, beta_sub), clustered at both ends."""
    bsub = beta_sub(p)
    eps = 1e-6 * (bsub - 1.0)
    a, b = 1.0 + eps, bsub - eps
    k = np.arange(SUBCRITICAL_GRID_SIZE)
    nodes = np.cos(np.pi * k / (SUBCRITICAL_GRID_SIZE - 1))
    return np.sort(a + (b - a) * 0.5 * (1.0 - nodes))


def subcritical_membership(D0: float, V0: float, p: float, alpha: float,
                           lambdaC: float) -> tuple[bool, float | None]:
    """Scan the beta grid for a witness of the subcritical condition.

    Returns (member, witness_beta); the witness is the first satisfying
    grid point in ascending order.
    """
    _require(2 < p < 3, f"subcritical region requires 2 < p < 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if min(D0, V0, lambdaC) <= 0:
        raise ValueError("D0, V0, lambdaC must be positive")
    for beta in subcritical_beta_grid(p):
        if _case4_condition(D0, V0, p, alpha, lambdaC, float(beta)):
            return True, float(beta)
    return False, None


def d0_star(p: float, alpha: float, lambdaC: float) -> float:
    """Semi-unconditional flocking threshold: for D0 below this value the
    subcritical condition holds for every V0 (beta -> beta_sub limit

        D0* = (a b - 1) ((b - 1) lambdaC^b / (a b)^(a b))^(1/(a b - 1)),

    a = alpha, b = beta_sub), evaluated in log space."""
    _require(2 < p < 3, f"D0* requires 2 < p < 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if lambdaC <= 0:
        raise ValueError("lambdaC must be positive")
    b = beta_sub(p)
    ab = alpha * b
    assert ab > 1.0  # alpha > 1 and b > 1
    log_val = math.log(ab - 1.0) + (math.log(b - 1.0) + b * math.log(lambdaC)
                                    - ab * math.log(ab)) / (ab - 1.0)
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# thin tail: supercritical region T and no-alignment floors
# ---------------------------------------------------------------------------

def supercritical_thresholds(p: float, alpha: float,
                             LambdaC: float) -> tuple[float, float]:
    """(v_min, x_slope): T = {v0 >= v_min and x0 >= x_slope * v0}."""
    _require(2 < p < 3, f"supercritical region requires 2 < p < 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if LambdaC <= 0:
        raise ValueError("LambdaC must be positive")
    b = beta_sub(p)
    ab = alpha * b
    v_min = ((alpha * LambdaC / (alpha - 1.0)) ** (b / (ab - 1.0))
             * (ab / (ab - 1.0)) ** b)
    x_slope = (ab - 1.0) ** b
    return v_min, x_slope


def supercritical_membership(x0: float, v0: float, p: float, alpha: float,
                             LambdaC: float) -> bool:
    """Membership in the supercritical region T (spread fast enough that
    communication can never rein the velocities in)."""
    if min(x0, v0) <= 0:
        raise ValueError("x0, v0 must be positive")
    v_min, x_slope = supercritical_thresholds(p, alpha, LambdaC)
    return v0 >= v_min and x0 >= x_slope * v0


@dataclass(frozen=True)
class NoAlignmentFloors:
    """Persistent lower bounds along the pair dynamics.

    V_floor:          V(t) >= V_floor for all t
    D_scaled_floor:   D(t) >= D_scaled_floor * (t+1)^gamma for all t
    D_linear_floor:   D(t) >= D_linear_floor * (t+1) for all t
    """

    in_T: bool
    gamma: float
    V_floor: float | None = None
    D_scaled_floor: float | None = None
    D_linear_floor: float | None = None
    f_residual: float | None = None

    def region(self) -> RegionSpec:
        """Floors as a half-infinite box in D1 = (D/(t+1), V) coordinates."""
        if not self.in_T:
            raise WrongScenarioError("no floors: initial data not supercritical")
        return RegionSpec(self.D_linear_floor, math.inf, self.V_floor, math.inf,
                          coords="D1", provenance="no-alignment-floors",
                          constants={"gamma": self.gamma,
                                     "D_scaled_floor": self.D_scaled_floor})


def _v_floor(v0: float, LambdaC: float, p: float, alpha: float,
             D_floor: float, denom: float) -> float:
    return (v0 ** -(p - 2.0)
            + (p - 2.0) * LambdaC * D_floor ** -alpha / denom) ** (-1.0 / (p - 2.0))


def no_alignment_floor(x0: float, v0: float, p: float, alpha: float,
                       LambdaC: float, gamma: float) -> NoAlignmentFloors:
    """Persistent-spread floors for p > 3, alpha > 1 (any initial data).

    D_scaled_floor is the unique positive root of

        f(D) = v0^-(p-2) D^alpha
               - x0^((1-gamma)(p-2)/gamma) D^(alpha - (p-2)/gamma)
               + (p-2) LambdaC / (gamma alpha - 1),

    found by geometric bracketing plus bisection; with gamma in
    (1/alpha, (p-2)/alpha) the middle exponent is negative, so
    f(0+) = -inf, f(inf) = +inf and f is strictly increasing. V_floor
    follows by integrating the worst-case dissipation rate, and the
    linear-growth floor is min(x0, V_floor) since D(t) >= x0 + V_floor*t.
    """
    _require(p > 3, f"generic no-alignment floors require p > 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if min(x0, v0, LambdaC) <= 0:
        raise ValueError("x0, v0, LambdaC must be positive")
    lo_g, hi_g = 1.0 / alpha, (p - 2.0) / alpha
    if not (lo_g < gamma < hi_g and gamma <= 1.0):
        raise ValueError(
            f"gamma must lie in ({lo_g}, {min(hi_g, 1.0)}], got {gamma}")

    pm2 = p - 2.0
    c_mid = x0 ** ((1.0 - gamma) * pm2 / gamma)
    e_mid = alpha - pm2 / gamma
    c_tail = pm2 * LambdaC / (gamma * alpha - 1.0)

    def f(D: float) -> float:
        return v0 ** -pm2 * D ** alpha - c_mid * D ** e_mid + c_tail

    lo = hi = 1.0
    while f(lo) > 0.0:
        lo *= 0.5
        if lo < 1e-280:
            raise RuntimeError("bracket expansion failed (lower)")
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e280:
            raise RuntimeError("bracket expansion failed (upper)")
    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)

    V_floor = _v_floor(v0, LambdaC, p, alpha, root, gamma * alpha - 1.0)
    return NoAlignmentFloors(in_T=True, gamma=gamma, V_floor=V_floor,
                             D_scaled_floor=root,
                             D_linear_floor=min(x0, V_floor),
                             f_residual=f(root))


def no_alignment_floor_23(x0: float, v0: float, p: float, alpha: float,
                          LambdaC: float) -> NoAlignmentFloors:
    """Floors for supercritical data when 2 < p < 3, alpha > 1.

    For (x0, v0) in T the floor diameter slope is the minimizer of the
    gamma = 1 form of f,

        D_floor = ((alpha b - 1) / (alpha b))^b * v0,   b = 1/(p-2),

    at which f <= 0 exactly when v0 clears the supercritical threshold.
    Data outside T gets a typed not-in-T result rather than an exception.
    """
    _require(2 < p < 3, f"supercritical floors require 2 < p < 3, got p={p}")
    _require(alpha > 1, f"thin tail requires alpha > 1, got alpha={alpha}")
    if not supercritical_membership(x0, v0, p, alpha, LambdaC):
        return NoAlignmentFloors(in_T=False, gamma=1.0)
    b = beta_sub(p)
    ab = alpha * b
    D_floor = ((ab - 1.0) / ab) ** b * v0
    pm2 = p - 2.0
    V_floor = _v_floor(v0, LambdaC, p, alpha, D_floor, alpha - 1.0)
    residual = (v0 ** -pm2 * D_floor ** alpha - D_floor ** (alpha - pm2)
                + pm2 * LambdaC / (alpha - 1.0))
    return NoAlignmentFloors(in_T=True, gamma=1.0, V_floor=V_floor,
                             D_scaled_floor=D_floor, D_linear_floor=D_floor,
                             f_residual=residual)


# ---------------------------------------------------------------------------
# trajectory containment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContainmentReport:
    contained: bool
    first_exit: tuple[float, str] | None
    n_checked: int


def _convert_to(traj: Trajectory, coords: str, p: float | None,
                alpha: float | None) -> Trajectory:
    if traj.coords == coords:
        return traj
    if traj.coords != "raw":
        raise CoordinateMismatchError(
            f"cannot convert {traj.coords!r} trajectory to {coords!r}")
    if coords == "D1":
        return to_d1_coordinates(traj)
    if coords == "S1":
        if p is None or alpha is None:
            raise CoordinateMismatchError("S1 conversion needs p and alpha")
        return to_s1_coordinates(traj, p, alpha)
    if coords == "Sb":
        if alpha is None:
            raise CoordinateMismatchError("Sb conversion needs alpha")
        return to_sb_coordinates(traj, alpha)
    raise CoordinateMismatchError(f"unknown region coordinates {coords!r}")


def check_containment(traj: Trajectory, region: RegionSpec, *,
                      p: float | None = None, alpha: float | None = None,
                      tol: float = 0.0) -> ContainmentReport:
    """Scan trajectory samples for the first exit from the region.

    Raw trajectories are converted to the region's coordinates when the
    needed parameters are available. Boundary violations within ``tol``
    (numerical grazing) are not counted as exits.
    """
    if p is None and getattr(traj.params, "p", None) is not None:
        p = traj.params.p
    if alpha is None and getattr(traj.params, "alpha", None) is not None:
        alpha = traj.params.alpha
    conv = _convert_to(traj, region.coords, p, alpha)
    for i in range(conv.n_samples):
        side = region.violation_side(float(conv.D[i]), float(conv.V[i]), tol)
        if side is not None:
            return ContainmentReport(False, (float(conv.t[i]), side), i + 1)
    return ContainmentReport(True, None, conv.n_samples)
