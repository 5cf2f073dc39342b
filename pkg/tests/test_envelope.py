import numpy as np
import pytest

from nlflock.envelope import (
    EnvelopeParams,
    EnvelopeState,
    SingularDiameterError,
    alignment_constant,
    beta_sub,
    beta_sup,
    closed_form_global,
    envelope_rhs,
    global_extinction_time,
    integrate_envelope,
    integrate_log_scaled_Sb,
    integrate_scaled_S1,
    log_scaled_rhs_Sb,
    sb_gamma,
    scaled_rhs_S1,
    to_s1_coordinates,
)
from nlflock.kernels import CappedPower, ConstantFloor, SmoothTail


# ---------------------------------------------------------------------------
# constants and raw right-hand side
# ---------------------------------------------------------------------------

def test_alignment_constant_values():
    assert alignment_constant(2.0, 1.0) == 1.0
    assert alignment_constant(3.0, 2.0) == 0.5 * 2.0 == 1.0
    assert alignment_constant(4.0, 2.0) == 0.5
    with pytest.raises(ValueError):
        alignment_constant(1.0, 1.0)
    with pytest.raises(ValueError):
        alignment_constant(2.0, 0.0)


def test_rate_exponent_helpers():
    assert beta_sup(4.0, 0.5) == pytest.approx(1 / 3)
    assert beta_sub(2.5) == pytest.approx(2.0)
    assert sb_gamma(0.5) == pytest.approx(1.0)


def test_envelope_rhs_examples():
    params = EnvelopeParams(p=3.0, C=1.0)
    dD, dV = envelope_rhs(1.0, 0.0, ConstantFloor(1.0), params)
    assert (dD, dV) == (0.0, 0.0)
    dD, dV = envelope_rhs(1.0, 1.0, ConstantFloor(1.0), params)
    assert (dD, dV) == (1.0, -1.0)
    params = EnvelopeParams(p=2.5, C=1.0, alpha=0.5, lam=1.0, Lam=1.0)
    dD, dV = envelope_rhs(4.0, 2.0, None, params, bound="lower")
    assert dD == 2.0
    assert dV == pytest.approx(-np.sqrt(2.0))


def test_envelope_rhs_dissipative_and_errors():
    params = EnvelopeParams(p=2.5, C=1.0, alpha=0.5)
    for V in (0.0, 0.5, 3.0):
        _, dV = envelope_rhs(2.0, V, None, params, bound="upper")
        assert dV <= 0.0
    with pytest.raises(SingularDiameterError):
        envelope_rhs(0.0, 1.0, None, params, bound="lower")
    with pytest.raises(ValueError, match="bound"):
        envelope_rhs(1.0, 1.0, None, params, bound="middle")
    with pytest.raises(ValueError, match="kernel"):
        envelope_rhs(1.0, 1.0, None, params, bound="exact")


def test_envelope_state_validation():
    state = EnvelopeState(D=1.0, V=2.0)
    assert state.time_coord == "raw_t"
    with pytest.raises(ValueError):
        EnvelopeState(D=-1.0, V=0.0)
    with pytest.raises(ValueError):
        EnvelopeState(D=1.0, V=0.0, time_coord="minutes")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def test_closed_form_examples():
    assert closed_form_global(3.0, 1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert closed_form_global(3.0, 1.0, 1.0, 10.0) == pytest.approx(1 / 11)
    assert closed_form_global(2.0, 0.7, 2.0, 0.0) == pytest.approx(2.0)
    assert global_extinction_time(1.5, 1.0, 1.0) == pytest.approx(2.0)
    # vectorized evaluation with extinction clamped to zero
    vals = closed_form_global(1.5, 1.0, 1.0, np.array([0.0, 1.0, 2.0, 5.0]))
    assert vals[0] == 1.0
    assert vals[1] == pytest.approx(0.25)
    assert vals[2] == 0.0 and vals[3] == 0.0


def test_closed_form_errors():
    with pytest.raises(ValueError):
        closed_form_global(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        closed_form_global(2.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        global_extinction_time(2.5, 1.0, 1.0)


def test_integration_matches_closed_form():
    kernel = ConstantFloor(1.0)
    samples = np.array([1.0, 10.0, 100.0])
    for p in (2.0, 2.5, 3.0, 4.0):
        params = EnvelopeParams(p=p, C=0.1)
        traj = integrate_envelope(1.0, 1.0, params, kernel, t_end=100.0,
                                  sample_times=samples, rtol=1e-12, atol=1e-14)
        exact = closed_form_global(p, 0.1, 1.0, traj.t)
        rel = np.abs(traj.V - exact) / np.maximum(exact, 1e-300)
        assert rel.max() < 1e-8


def test_extinction_run_reports_time():
    params = EnvelopeParams(p=1.5, C=1.0)
    traj = integrate_envelope(1.0, 1.0, params, ConstantFloor(1.0), t_end=10.0,
                              sample_times=np.array([1.0, 5.0, 10.0]),
                              rtol=1e-11, atol=1e-13)
    assert traj.status == "extinct"
    assert traj.extinction_time == pytest.approx(2.0, rel=1e-3)
    assert traj.extinction_time >= 2.0 - 1e-9  # never stops early
    assert traj.V[-1] == 0.0 and traj.V[-2] == 0.0
    # diameter freezes at its extinction value afterwards
    assert traj.D[-1] == traj.D[-2]


def test_comparison_principle_tail_bracketing():
    # upper rate (Lam) decays fastest, exact kernel in between, lower
    # rate (lam) slowest, provided D stays beyond the sandwich radius
    kernel = SmoothTail(0.5)
    params = EnvelopeParams(p=2.5, C=1.0, alpha=0.5,
                            lam=2 ** -0.25, Lam=1.0)
    samples = np.geomspace(0.1, 1e3, 60)
    runs = {
        bound: integrate_envelope(2.0, 1.0, params, kernel, t_end=1e3,
                                  sample_times=samples, bound=bound,
                                  rtol=1e-11, atol=1e-14)
        for bound in ("exact", "lower", "upper")
    }
    assert np.all(runs["upper"].V <= runs["exact"].V * (1 + 1e-9))
    assert np.all(runs["exact"].V <= runs["lower"].V * (1 + 1e-9))


def test_monotone_envelope_trajectory():
    kernel = CappedPower(0.5, 1e-6)
    params = EnvelopeParams(p=3.0, C=1.0, alpha=0.5)
    traj = integrate_envelope(1.0, 1.0, params, kernel, t_end=1e4, n_samples=100)
    assert np.all(np.diff(traj.V) <= 1e-12)
    assert np.all(np.diff(traj.D) >= -1e-12)


# ---------------------------------------------------------------------------
# rescaled systems
# ---------------------------------------------------------------------------

def test_scaled_rhs_S1_nullclines_and_example():
    params = EnvelopeParams(p=4.0, C=1.0, alpha=0.0)
    b = beta_sup(4.0, 0.0)
    # red null-cline V = (1-b) D makes dD vanish
    for D in (0.5, 1.0, 3.0):
        dD, _ = scaled_rhs_S1(D, (1.0 - b) * D, params)
        assert dD == pytest.approx(0.0, abs=1e-14)
    # blue null-cline b V = lamC D^-alpha V^(p-1) makes dV vanish
    D = 2.0
    V = (b * D ** params.alpha) ** (1.0 / (params.p - 2.0))
    _, dV = scaled_rhs_S1(D, V, params)
    assert dV == pytest.approx(0.0, abs=1e-14)
    # hand evaluation at (2, 1)
    dD, dV = scaled_rhs_S1(2.0, 1.0, params)
    assert dD == pytest.approx(0.0)
    assert dV == pytest.approx(-0.5)


def test_scaled_rhs_S1_scenario_guard():
    params = EnvelopeParams(p=2.5, C=1.0, alpha=0.5)
    with pytest.raises(ValueError, match="p > 3"):
        scaled_rhs_S1(1.0, 1.0, params)


def test_log_scaled_rhs_Sb_examples():
    params = EnvelopeParams(p=3.0, C=1.0, alpha=0.5)
    _, dV = log_scaled_rhs_Sb(0.0, 1.0, 0.0, params)
    assert dV == 0.0
    # fixed point of the second equation: V = D^alpha / lamC
    D = 2.0
    V = D ** 0.5 / params.lambdaC
    _, dV = log_scaled_rhs_Sb(3.0, D, V, params)
    assert dV == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError, match="p = 3"):
        log_scaled_rhs_Sb(0.0, 1.0, 1.0, EnvelopeParams(p=4.0, C=1.0))


def test_sb_alpha_zero_logistic_limit():
    lamC = 2.0
    params = EnvelopeParams(p=3.0, C=lamC, alpha=0.0)
    traj = integrate_log_scaled_Sb(1.0, 1.0, params, tau_end=50.0, n_samples=100)
    assert abs(traj.V[-1] - 1.0 / lamC) < 1e-6


def test_scaling_consistency_raw_vs_S1():
    # raw integration mapped through the rescale reproduces the S1 system
    p, alpha = 4.0, 0.5
    kernel = CappedPower(alpha, 1e-9)
    params = EnvelopeParams(p=p, C=1.0, alpha=alpha)
    tau_samples = np.linspace(0.5, 6.0, 40)
    t_samples = np.exp(tau_samples) - 1.0
    raw = integrate_envelope(1.0, 1.0, params, kernel, t_end=t_samples[-1],
                             sample_times=t_samples, rtol=1e-12, atol=1e-14)
    mapped = to_s1_coordinates(raw, p, alpha)
    scaled = integrate_scaled_S1(1.0, 1.0, params, tau_end=tau_samples[-1],
                                 sample_times=np.log(t_samples + 1.0),
                                 bound="lower", rtol=1e-12, atol=1e-14)
    assert np.max(np.abs(mapped.t - scaled.t)) < 1e-12
    assert np.max(np.abs(mapped.D - scaled.D)) < 1e-6
    assert np.max(np.abs(mapped.V - scaled.V)) < 1e-6


def test_integration_failure_carries_partial_trajectory(monkeypatch):
    from nlflock import envelope as env_mod
    from nlflock.integrate import IntegrationError, IntegratorStats, StepperResult

    def exploding(rhs, t0, y0, samples, **kw):
        partial = StepperResult(t=np.array([0.5]), y=np.array([[1.5, 0.8]]),
                                stats=IntegratorStats(steps=3), stopped=False,
                                t_final=0.7, y_final=np.array([1.6, 0.7]))
        raise IntegrationError("step size underflow at t=0.7", partial=partial)

    monkeypatch.setattr(env_mod, "integrate_dp54", exploding)
    params = EnvelopeParams(p=2.5, C=1.0)
    with pytest.raises(IntegrationError) as info:
        env_mod.integrate_envelope(1.0, 1.0, params, ConstantFloor(1.0), t_end=10.0)
    traj = info.value.partial
    assert traj is not None and traj.status == "failed"
    assert traj.engine == "envelope"
    assert traj.t[0] == 0.5 and traj.D[0] == 1.5 and traj.V[0] == 0.8


def test_envelope_params_validation():
    with pytest.raises(ValueError):
        EnvelopeParams(p=1.0, C=1.0)
    with pytest.raises(ValueError):
        EnvelopeParams(p=2.0, C=0.0)
    with pytest.raises(ValueError):
        EnvelopeParams(p=2.0, C=1.0, lam=2.0, Lam=1.0)
