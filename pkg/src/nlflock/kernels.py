"""Radially symmetric communication kernels.

A kernel phi(r) weights the pairwise velocity coupling by distance. All
families here are nonnegative, nonincreasing in r, and finite at r = 0
(singular power laws are capped near the origin, since particle positions
may coincide). Families with a power-law tail expose sandwich constants
(lam, Lam, R) such that

    lam * r**-alpha <= phi(r) <= Lam * r**-alpha   for all r >= R.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np
from scipy.integrate import quad


class NoTailClassError(ValueError):
    """The kernel has no power-law tail class (e.g. a constant floor)."""


def _as_radii(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("kernel radius must be nonnegative")
    return arr


@dataclass(frozen=True)
class ConstantFloor:
    """Globally lower-bounded communication, phi(r) = floor > 0 for all r."""

    floor: float = 1.0
    family: ClassVar[str] = "constant_floor"

    def __post_init__(self):
        if not self.floor > 0:
            raise ValueError("ConstantFloor requires floor > 0")

    def evaluate(self, r):
        arr = _as_radii(r)
        out = np.full_like(arr, self.floor)
        return out if out.ndim else float(out)

    def primitive(self, a: float, b: float) -> float:
        return self.floor * (b - a)


@dataclass(frozen=True)
class SmoothTail:
    """Smoothly capped power law, phi(r) = (1 + r^2)^(-alpha/2).

    Bounded by 1 at the origin and behaves like r^-alpha at infinity:
    the ratio phi(r) / r^-alpha = (r^2 / (1 + r^2))^(alpha/2) lies in
    [2^(-alpha/2), 1) for r >= 1.
    """

    alpha: float
    family: ClassVar[str] = "smooth_tail"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("SmoothTail requires alpha >= 0")

    def evaluate(self, r):
        arr = _as_radii(r)
        out = (1.0 + arr * arr) ** (-0.5 * self.alpha)
        return out if out.ndim else float(out)

    def primitive(self, a: float, b: float) -> float:
        if a == b:
            return 0.0
        val, _err = quad(lambda s: (1.0 + s * s) ** (-0.5 * self.alpha),
                         a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val


@dataclass(frozen=True)
class CappedPower:
    """Pure power law capped near the origin:

        phi(r) = min(r_min^-alpha, r^-alpha),

    i.e. exactly r^-alpha for r >= r_min and constant below. The cap only
    regularizes coinciding positions; tail constants are exact (1, 1, r_min).
    """

    alpha: float
    r_min: float = 1e-6
    family: ClassVar[str] = "capped_power"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("CappedPower requires alpha >= 0")
        if not self.r_min > 0:
            raise ValueError("CappedPower requires r_min > 0")

    def evaluate(self, r):
        arr = _as_radii(r)
        with np.errstate(divide="ignore"):
            out = np.minimum(self.r_min ** -self.alpha,
                             np.power(np.maximum(arr, 0.0), -self.alpha))
        # 0**-0 = 1 is fine; 0**-a yields inf which the minimum removes
        return out if out.ndim else float(out)

    def _antiderivative(self, r: float) -> float:
        cap = self.r_min ** -self.alpha
        if r <= self.r_min:
            return cap * r
        head = cap * self.r_min
        if self.alpha == 1.0:
            return head + np.log(r / self.r_min)
        return head + (r ** (1.0 - self.alpha) - self.r_min ** (1.0 - self.alpha)) / (1.0 - self.alpha)

    def primitive(self, a: float, b: float) -> float:
        return self._antiderivative(b) - self._antiderivative(a)


Kernel = Union[ConstantFloor, SmoothTail, CappedPower]

_FAMILIES = {cls.family: cls for cls in (ConstantFloor, SmoothTail, CappedPower)}


def kernel_eval(kernel: Kernel, r):
    """Evaluate phi at radius r (scalar or array). Raises on negative r."""
    return kernel.evaluate(r)


def tail_constants(kernel: Kernel) -> tuple[float, float, float]:
    """Sandwich constants (lam, Lam, R) for the kernel's power-law tail.

    CappedPower is an exact power beyond the cap, so (1, 1, r_min).
    SmoothTail satisfies (r^2/(1+r^2))^(alpha/2) in [2^(-alpha/2), 1]
    for r >= 1, so (2^(-alpha/2), 1, 1).
    """
    if isinstance(kernel, CappedPower):
        return 1.0, 1.0, kernel.r_min
    if isinstance(kernel, SmoothTail):
        return 2.0 ** (-0.5 * kernel.alpha), 1.0, 1.0
    raise NoTailClassError(f"kernel family {kernel.family!r} has no tail class")


def kernel_primitive(kernel: Kernel, a: float, b: float) -> float:
    """Integral of phi(r) dr from a to b (closed form where available)."""
    if a < 0 or b < 0:
        raise ValueError("kernel radius must be nonnegative")
    return kernel.primitive(a, b)


def kernel_alpha(kernel: Kernel) -> float:
    """Tail exponent of the kernel (0 for a constant floor)."""
    if isinstance(kernel, ConstantFloor):
        return 0.0
    return kernel.alpha


def kernel_to_config(kernel: Kernel) -> dict[str, str]:
    """Flatten a kernel to the documented key = value schema."""
    cfg = {"kernel.family": kernel.family}
    if isinstance(kernel, ConstantFloor):
        cfg["kernel.floor"] = repr(kernel.floor)
    elif isinstance(kernel, SmoothTail):
        cfg["kernel.alpha"] = repr(kernel.alpha)
    else:
        cfg["kernel.alpha"] = repr(kernel.alpha)
        cfg["kernel.r_min"] = repr(kernel.r_min)
    return cfg


def kernel_from_config(cfg: dict[str, str]) -> Kernel:
    """Inverse of :func:`kernel_to_config`."""
    family = cfg.get("kernel.family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if family == "constant_floor":
        return ConstantFloor(floor=float(cfg.get("kernel.floor", 1.0)))
    if family == "smooth_tail":
        return SmoothTail(alpha=float(cfg["kernel.alpha"]))
    return CappedPower(alpha=float(cfg["kernel.alpha"]),
                       r_min=float(cfg.get("kernel.r_min", 1e-6)))
