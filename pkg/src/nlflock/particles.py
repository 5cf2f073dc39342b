"""Agent-based dynamics with distance-weighted nonlinear velocity coupling.

N agents in d dimensions evolve by

    x_i' = v_i,
    v_i' = sum_j m_j phi(|x_i - x_j|) phi_p(v_j - v_i),

the mass-weighted coupling that matches the continuum normalization (so the
envelope constant C = 2^(2-p) m0 applies) and makes the two-particle
configuration exactly reproducible. The classical 1/N mean-field variant is
available via ``coupling="mean"``.

Forces are evaluated with the full O(N^2) pairwise sum in a fixed order,
so runs are deterministic; N is expected at desk scale (<= 1e4).
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
from .kernels import kernel_eval
from .model import SimParams, phi_p

COALESCENCE_V = 1e-14
MASS_TOL = 1e-12

_COUPLINGS = ("mass", "mean")


@dataclass(frozen=True)
class ParticleState:
    """Positions, velocities and masses of N agents at time t."""

    t: float
    x: np.ndarray  # (N, d)
    v: np.ndarray  # (N, d)
    m: np.ndarray  # (N,)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.v, dtype=float)
        m = np.atleast_1d(np.array(self.m, dtype=float))
        if x.ndim == 1:
            x = x.reshape(-1, 1)  # 1-D input means N agents on the line
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if x.shape != v.shape:
            raise ValueError("positions and velocities must have matching shapes")
        if m.shape != (x.shape[0],):
            raise ValueError("need one mass per agent")
        if x.shape[0] < 1:
            raise ValueError("need at least one agent")
        if np.any(m <= 0):
            raise ValueError("all masses must be positive")
        for arr in (x, v, m):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def momentum(self) -> np.ndarray:
        return (self.m[:, None] * self.v).sum(axis=0)

    def check_mass(self, params: SimParams) -> None:
        if abs(self.m.sum() - params.total_mass) > MASS_TOL * max(1.0, params.total_mass):
            raise ValueError(
                f"mass sum {self.m.sum()!r} does not match total_mass {params.total_mass!r}")


def init_two_particle(x0: float, v0: float) -> ParticleState:
    """Two unit-mass agents at -+x0/2 moving apart at -+v0/2 (d = 1).

    Realizes the initial diameters (D, V) = (x0, v0) with zero net momentum;
    total mass is 2.
    """
    if x0 <= 0 or v0 <= 0:
        raise ValueError("two-particle configuration needs x0 > 0 and v0 > 0")
    x = np.array([[-0.5 * x0], [0.5 * x0]])
    v = np.array([[-0.5 * v0], [0.5 * v0]])
    return ParticleState(t=0.0, x=x, v=v, m=np.array([1.0, 1.0]))


def pair_coupling_constant(total_mass: float) -> float:
    """Exact envelope constant for the symmetric two-particle reduction.

    With masses m1 + m2 = m0, the relative velocity w = v1 - v2 obeys
    w' = -(m1 + m2) phi(D) phi_p(w), so the matching envelope ODE
    D' = V, V' = -kappa2 phi(D) V^(p-1) has kappa2 = m0 (= 2 for unit masses).
    """
    if total_mass <= 0:
        raise ValueError("total_mass must be > 0")
    return total_mass


def _accel(x: np.ndarray, v: np.ndarray, m: np.ndarray, params: SimParams,
           coupling: str) -> np.ndarray:
    dx = x[:, None, :] - x[None, :, :]
    r = np.sqrt(np.sum(dx * dx, axis=-1))
    w = kernel_eval(params.kernel, r)
    dv = v[None, :, :] - v[:, None, :]          # [i, j] = v_j - v_i
    coupled = phi_p(dv, params.p)               # odd, so the diagonal is 0
    if coupling == "mass":
        weights = w * m[None, :]
    else:
        weights = w / x.shape[0]
    return np.einsum("ij,ijk->ik", weights, coupled)


def alignment_accel(state: ParticleState, params: SimParams,
                    coupling: str = "mass") -> np.ndarray:
    """Per-agent acceleration from the pairwise alignment sum."""
    if coupling not in _COUPLINGS:
        raise ValueError(f"coupling must be one of {_COUPLINGS}, got {coupling!r}")
    return _accel(state.x, state.v, state.m, params, coupling)


def _diameters_xv(x: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    dx = x[:, None, :] - x[None, :, :]
    dv = v[:, None, :] - v[None, :, :]
    D = np.sqrt(np.max(np.sum(dx * dx, axis=-1)))
    V = np.sqrt(np.max(np.sum(dv * dv, axis=-1)))
    return float(D), float(V)


def diameters(state: ParticleState) -> tuple[float, float]:
    """Exact max-over-pairs spatial and velocity diameters (O(N^2))."""
    return _diameters_xv(state.x, state.v)


def integrate(state: ParticleState, params: SimParams, t_end: float,
              sample_times=None, *, coupling: str = "mass",
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
              n_samples: int = 200, spacing: str = "log",
              record_snapshots: bool = False) -> Trajectory:
    """Integrate the agent dynamics, recording (D, V, momentum) at samples.

    For p < 2 the velocities coalesce in finite time and the right-hand side
    loses Lipschitz continuity there; the run stops cleanly once V drops
    below max(1e-14, 100 * atol) and reports status "coalesced" (remaining
    samples continue the aligned state: V = 0, D frozen). The atol term is
    needed because the signed coupling makes the crossing oscillate at the
    solver's error floor, so V cannot shrink below ~10 * atol.
    """
    if coupling not in _COUPLINGS:
        raise ValueError(f"coupling must be one of {_COUPLINGS}, got {coupling!r}")
    if t_end <= state.t:
        raise ValueError("t_end must exceed the state time")
    state.check_mass(params)
    if sample_times is None:
        if spacing == "log":
            sample_times = state.t + log_schedule(t_end - state.t, n_samples)
        else:
            sample_times = linear_schedule(t_end, n_samples, t_start=state.t)
    samples = np.asarray(sample_times, dtype=float)

    n, d = state.n, state.dim
    y0 = np.concatenate([state.x.ravel(), state.v.ravel()])

    def rhs(t, y):
        x = y[:n * d].reshape(n, d)
        v = y[n * d:].reshape(n, d)
        return np.concatenate([v.ravel(),
                               _accel(x, v, state.m, params, coupling).ravel()])

    stop = None
    if params.p < 2.0:
        v_stop = max(COALESCENCE_V, 100.0 * atol)

        def stop(t, y):
            v = y[n * d:].reshape(n, d)
            dv = v[:, None, :] - v[None, :, :]
            return np.sqrt(np.max(np.sum(dv * dv, axis=-1))) < v_stop

    def unpack(y):
        return y[:n * d].reshape(n, d), y[n * d:].reshape(n, d)

    try:
        res = integrate_dp54(rhs, state.t, y0, samples, rtol=rtol, atol=atol,
                             stop=stop)
    except IntegrationError as err:
        part = err.partial
        if part is None:
            raise
        DV = [_diameters_xv(*unpack(part.y[i])) for i in range(part.t.size)]
        traj = Trajectory(
            t=part.t, D=np.array([dv[0] for dv in DV]),
            V=np.array([dv[1] for dv in DV]),
            momentum=np.array([(state.m[:, None] * unpack(part.y[i])[1]).sum(axis=0)
                               for i in range(part.t.size)]).reshape(part.t.size, d),
            params=params, meta=part.stats, engine="particle", status="failed")
        raise IntegrationError(str(err), partial=traj) from err

    n_filled = res.t.size
    n_total = samples.size
    D_out = np.empty(n_total)
    V_out = np.empty(n_total)
    mom_out = np.empty((n_total, d))
    snaps = [] if record_snapshots else None
    for i in range(n_filled):
        xi, vi = unpack(res.y[i])
        D_out[i], V_out[i] = _diameters_xv(xi, vi)
        mom_out[i] = (state.m[:, None] * vi).sum(axis=0)
        if record_snapshots:
            snaps.append((float(res.t[i]), xi.copy(), vi.copy()))
    status = "ok"
    if res.stopped:
        xf, vf = unpack(res.y_final)
        Df, _ = _diameters_xv(xf, vf)
        D_out[n_filled:] = Df
        V_out[n_filled:] = 0.0
        mom_out[n_filled:] = (state.m[:, None] * vf).sum(axis=0)
        status = "coalesced"

    t_out = samples
    if samples[0] > state.t:
        t_out = np.concatenate([[state.t], samples])
        D0, V0 = diameters(state)
        D_out = np.concatenate([[D0], D_out])
        V_out = np.concatenate([[V0], V_out])
        mom_out = np.concatenate([state.momentum()[None, :], mom_out])
        if record_snapshots:
            snaps.insert(0, (state.t, state.x.copy(), state.v.copy()))

    return Trajectory(t=t_out, D=D_out, V=np.maximum(V_out, 0.0),
                      momentum=mom_out, params=params, meta=res.stats,
                      engine="particle", coords="raw", status=status,
                      snapshots=snaps)


def write_snapshot_files(traj: Trajectory, prefix: str) -> list[str]:
    """One CSV per recorded snapshot: ``<prefix>_snap<k>.csv`` with a row per
    agent (columns agent, x_0..x_{d-1}, v_0..v_{d-1}); the sample time is on
    a leading comment line."""
    if not traj.snapshots:
        raise ValueError("trajectory carries no snapshots (record_snapshots=False)")
    paths = []
    for k, (t, x, v) in enumerate(traj.snapshots):
        d = x.shape[1]
        path = f"{prefix}_snap{k:04d}.csv"
        with open(path, "w") as fh:
            fh.write(f"# t = {t!r}\n")
            cols = ["agent"] + [f"x{j}" for j in range(d)] + [f"v{j}" for j in range(d)]
            fh.write(",".join(cols) + "\n")
            for i in range(x.shape[0]):
                vals = [str(i)] + [repr(float(val)) for val in x[i]] \
                    + [repr(float(val)) for val in v[i]]
                fh.write(",".join(vals) + "\n")
        paths.append(path)
    return paths
