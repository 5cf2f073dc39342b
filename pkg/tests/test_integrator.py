import numpy as np
import pytest

from nlflock.integrate import (
    IntegrationError,
    Trajectory,
    integrate_dp54,
    linear_schedule,
    log_schedule,
    read_trajectory_csv,
    write_trajectory_csv,
)


def test_exponential_decay_accuracy():
    rhs = lambda t, y: -y
    samples = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
    res = integrate_dp54(rhs, 0.0, np.array([1.0]), samples, rtol=1e-11, atol=1e-14)
    exact = np.exp(-samples)
    assert np.max(np.abs(res.y[:, 0] - exact) / exact) < 1e-9
    assert res.stats.steps > 0
    assert res.stats.rhs_evals > 6 * res.stats.steps - 10


def test_harmonic_oscillator_accuracy():
    rhs = lambda t, y: np.array([y[1], -y[0]])
    samples = np.linspace(0.5, 20.0, 40)
    res = integrate_dp54(rhs, 0.0, np.array([1.0, 0.0]), samples, rtol=1e-10, atol=1e-12)
    assert np.max(np.abs(res.y[:, 0] - np.cos(samples))) < 1e-7
    assert np.max(np.abs(res.y[:, 1] + np.sin(samples))) < 1e-7


def test_samples_hit_exactly():
    rhs = lambda t, y: -0.3 * y
    samples = np.geomspace(1e-3, 1e3, 37)
    res = integrate_dp54(rhs, 0.0, np.array([2.0]), samples, rtol=1e-8, atol=1e-10)
    assert np.array_equal(res.t, samples)  # bitwise: stepper lands on samples


def test_sample_at_t0_recorded():
    rhs = lambda t, y: 0.0 * y
    samples = np.array([0.0, 1.0])
    res = integrate_dp54(rhs, 0.0, np.array([3.0]), samples)
    assert res.t[0] == 0.0 and res.y[0, 0] == 3.0


def test_schedule_validation():
    rhs = lambda t, y: -y
    with pytest.raises(ValueError, match="empty"):
        integrate_dp54(rhs, 0.0, np.array([1.0]), np.array([]))
    with pytest.raises(ValueError, match="strictly increasing"):
        integrate_dp54(rhs, 0.0, np.array([1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="precede"):
        integrate_dp54(rhs, 1.0, np.array([1.0]), np.array([0.5, 2.0]))


def test_stop_condition_halts():
    rhs = lambda t, y: -y
    samples = np.geomspace(0.1, 50.0, 30)
    res = integrate_dp54(rhs, 0.0, np.array([1.0]), samples,
                         stop=lambda t, y: y[0] < 1e-3)
    assert res.stopped
    assert res.t.size < samples.size
    assert res.y_final[0] <= 1e-3


def test_singularity_raises_with_partial():
    # y' = 1/(0.5 - t) blows up before the last sample
    rhs = lambda t, y: np.array([1.0 / (0.5 - t)])
    with pytest.raises(IntegrationError) as info:
        integrate_dp54(rhs, 0.0, np.array([0.0]), np.array([0.25, 1.0]),
                       rtol=1e-8, atol=1e-10)
    partial = info.value.partial
    assert partial is not None
    assert partial.t_final < 0.5
    assert partial.t.size >= 1  # the pre-singularity sample was recorded


def test_rejection_accounting():
    # mildly stiff-ish start forces at least some rejections at loose h0
    rhs = lambda t, y: np.array([-50.0 * y[0] + np.sin(t)])
    res = integrate_dp54(rhs, 0.0, np.array([1.0]), np.array([1.0, 2.0]),
                         rtol=1e-9, atol=1e-12, first_step=0.5)
    assert res.stats.rejected >= 1
    assert res.stats.max_error <= 1.0


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def test_log_schedule():
    s = log_schedule(1e6, n=50)
    assert s.size == 50
    assert s[-1] == 1e6
    assert np.all(np.diff(np.log(s)) > 0)
    with pytest.raises(ValueError):
        log_schedule(-1.0)


def test_linear_schedule():
    s = linear_schedule(10.0, n=10)
    assert s.size == 10
    assert s[0] > 0 and s[-1] == 10.0


# ---------------------------------------------------------------------------
# trajectory record and CSV round trip
# ---------------------------------------------------------------------------

def test_trajectory_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        Trajectory(t=[0.0, 0.0], D=[1.0, 1.0], V=[1.0, 1.0])
    with pytest.raises(ValueError, match="nonnegative"):
        Trajectory(t=[0.0, 1.0], D=[1.0, -1.0], V=[1.0, 1.0])
    with pytest.raises(ValueError, match="matching"):
        Trajectory(t=[0.0, 1.0], D=[1.0], V=[1.0, 1.0])


def test_csv_round_trip_particle(tmp_path):
    traj = Trajectory(t=[0.0, 1.0, 2.0], D=[1.0, 2.0, 3.0], V=[1.0, 0.5, 0.25],
                      momentum=np.array([[0.5], [0.5], [0.5]]), engine="particle")
    path = tmp_path / "run_traj.csv"
    write_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,D,V,momentum"
    back = read_trajectory_csv(path)
    assert np.array_equal(back.t, traj.t)
    assert np.array_equal(back.D, traj.D)
    assert np.array_equal(back.V, traj.V)
    assert np.array_equal(back.momentum[:, 0], [0.5, 0.5, 0.5])
    assert back.engine == "particle"


def test_csv_round_trip_envelope(tmp_path):
    traj = Trajectory(t=[0.0, 1.0], D=[1.0, 2.0], V=[1.0, 0.5],
                      engine="envelope", coords="S1")
    path = tmp_path / "env_traj.csv"
    write_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "t,D,V,momentum,coords"
    back = read_trajectory_csv(path)
    assert back.coords == "S1"
    assert back.engine == "envelope"
    assert back.momentum is None
