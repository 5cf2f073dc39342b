"""Model parameters and the nonlinear velocity coupling map.

The coupling map sends a velocity difference z to |z|^(p-2) z with p > 1.
p = 2 is the classical linear coupling; p > 2 weakens the pull between
nearly aligned velocities, p < 2 strengthens it (and aligns in finite time
under global communication).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .kernels import (
    Kernel,
    NoTailClassError,
    kernel_alpha,
    kernel_from_config,
    kernel_to_config,
    tail_constants,
)

# tolerance for the algebraic dissipation check: absolute-relative hybrid
# so the inequality survives floating-point cancellation near equality
DISSIPATION_TOL = 1e-12


def phi_p(z, p: float):
    """Nonlinear coupling |z|^(p-2) z over the last axis of z.

    Defined as 0 at z = 0 for every p > 1 (the continuous extension for
    p > 2, the chosen convention for p in (1, 2)). Odd by construction.
    Scalars are treated as 1-vectors.
    """
    if p <= 1:
        raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {p}")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    if scalar:
        z = z.reshape(1)
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(norm > 0.0, norm, 1.0) ** (p - 2.0)
    out = np.where(norm > 0.0, weight, 0.0) * z
    return float(out[0]) if scalar else out


def pairwise_dissipation_holds(a, b, c, p: float, tol: float | None = None):
    """Check the algebraic dissipation bound behind the envelope constant.

    For extremal velocities a, b and any test velocity c with
    |c - a| <= |a - b| and |c - b| <= |a - b|:

        (a - b) . (phi_p(c - a) - phi_p(c - b)) <= -2^(2-p) |a - b|^p,

    with equality at c = (a + b) / 2. Inputs may be batched over leading
    axes; the last axis is the spatial dimension. Violating the admissibility
    precondition raises (it is not a False result).
    """
    if p <= 1:
        raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {p}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    gap = np.linalg.norm(a - b, axis=-1)
    slack = 1e-12 * np.maximum(1.0, gap)
    if np.any(np.linalg.norm(c - a, axis=-1) > gap + slack) or np.any(
            np.linalg.norm(c - b, axis=-1) > gap + slack):
        raise ValueError("not in admissible cone: need |c-a| <= |a-b| and |c-b| <= |a-b|")
    lhs = np.sum((a - b) * (phi_p(c - a, p) - phi_p(c - b, p)), axis=-1)
    bound = -(2.0 ** (2.0 - p)) * gap ** p
    if tol is None:
        tol = DISSIPATION_TOL * np.maximum(1.0, gap ** p)
    ok = lhs <= bound + tol
    return bool(ok) if np.ndim(ok) == 0 else ok


@dataclass(frozen=True)
class SimParams:
    """Immutable bundle of model parameters.

    p           nonlinearity exponent, > 1
    kernel      communication kernel
    total_mass  conserved total mass m0 (sum of particle masses)
    alpha       kernel tail exponent
    lam, Lam, R tail sandwich: lam r^-alpha <= phi(r) <= Lam r^-alpha, r >= R
    """

    p: float
    kernel: Kernel
    total_mass: float = 1.0
    alpha: float = 0.0
    lam: float = 1.0
    Lam: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError(f"nonlinearity exponent must satisfy p > 1, got {self.p}")
        if self.alpha < 0:
            raise ValueError("tail exponent alpha must be >= 0")
        if not (0 < self.lam <= self.Lam):
            raise ValueError("tail constants must satisfy 0 < lambda <= Lambda")
        if not self.R > 0:
            raise ValueError("tail radius R must be > 0")
        if not self.total_mass > 0:
            raise ValueError("total_mass must be > 0")

    @classmethod
    def from_kernel(cls, p: float, kernel: Kernel, total_mass: float = 1.0) -> "SimParams":
        """Fill the tail fields from the kernel itself."""
        try:
            lam, Lam, R = tail_constants(kernel)
        except NoTailClassError:
            lam = Lam = kernel.floor  # constant floor: alpha=0 sandwich is exact
            R = 1.0
        return cls(p=p, kernel=kernel, total_mass=total_mass,
                   alpha=kernel_alpha(kernel), lam=lam, Lam=Lam, R=R)

    def with_(self, **kw) -> "SimParams":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# key = value config round trip
# ---------------------------------------------------------------------------

_PARAM_KEYS = ("p", "alpha", "lambda", "Lambda", "R", "total_mass")


def params_to_config(params: SimParams) -> str:
    """Serialize SimParams to the documented ``key = value`` format."""
    lines = [
        f"p = {params.p!r}",
        f"alpha = {params.alpha!r}",
        f"lambda = {params.lam!r}",
        f"Lambda = {params.Lam!r}",
        f"R = {params.R!r}",
        f"total_mass = {params.total_mass!r}",
    ]
    for key, val in kernel_to_config(params.kernel).items():
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def params_from_config(text: str) -> SimParams:
    """Inverse of :func:`params_to_config`."""
    cfg = parse_config_text(text)
    missing = [k for k in ("p", "kernel.family") if k not in cfg]
    if missing:
        raise ValueError(f"config missing required keys: {missing}")
    kernel = kernel_from_config(cfg)
    base = SimParams.from_kernel(float(cfg["p"]), kernel,
                                 total_mass=float(cfg.get("total_mass", 1.0)))
    overrides = {}
    if "alpha" in cfg:
        overrides["alpha"] = float(cfg["alpha"])
    if "lambda" in cfg:
        overrides["lam"] = float(cfg["lambda"])
    if "Lambda" in cfg:
        overrides["Lam"] = float(cfg["Lambda"])
    if "R" in cfg:
        overrides["R"] = float(cfg["R"])
    return base.with_(**overrides) if overrides else base
