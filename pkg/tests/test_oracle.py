import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from optomech.errors import InstabilityError, ValidationError
from optomech.lyapunov import steady_state_cm
from optomech.model import single_mode_model
from optomech.oracle import SimConfig, simulate_cm, simulate_filtered_output
from optomech.output_modes import FilterSpec, output_cm


def damped(G=0.5, n0=2.0, gamma_m=0.5):
    return single_mode_model(G, 1.0, 1.0, gamma_m, n0)


def quick(model, n_traj=200, sample_time=100.0, bias=0.02, seed=1, **kw):
    return SimConfig.for_model(model, n_traj=n_traj, seed=seed, sample_time=sample_time, bias=bias, **kw)


def test_guards_follow_the_spectrum():
    m = damped()
    cfg = quick(m)
    cfg.validate(m)
    lam = np.linalg.eigvals(m.drift)
    assert cfg.dt * np.max(np.abs(lam)) < 0.05
    assert cfg.burn_in >= 10 / abs(np.max(lam.real))


def test_validation_rejects_bad_configs():
    m = damped()
    good = quick(m)
    with pytest.raises(ValidationError) as e:
        SimConfig(dt=0.2, t_end=good.t_end, n_traj=10, burn_in=good.burn_in).validate(m)
    assert e.value.field == "dt"
    with pytest.raises(ValidationError) as e:
        SimConfig(dt=good.dt, t_end=good.t_end, n_traj=10, burn_in=1.0).validate(m)
    assert e.value.field == "burn_in"
    with pytest.raises(ValidationError):
        SimConfig(dt=good.dt, t_end=good.burn_in, n_traj=10, burn_in=good.burn_in).validate(m)
    with pytest.raises(ValidationError):
        SimConfig(dt=good.dt, t_end=good.t_end, n_traj=1, burn_in=good.burn_in).validate(m)
    with pytest.raises(InstabilityError):
        good.validate(single_mode_model(2.0, 1.0, 1.0, 0.5, 1.0))


def euler_stationary(model, dt):
    """Exact stationary covariance of the Euler-Maruyama chain itself."""
    F = np.eye(len(model.drift)) + dt * np.asarray(model.drift)
    return solve_discrete_lyapunov(F, dt * np.asarray(model.diffusion))


def test_thermal_state_without_coupling():
    m = single_mode_model(0.0, 1.0, 1.0, 0.5, 3.0)
    cfg = quick(m, n_traj=256)
    res = simulate_cm(m, cfg)
    expect = np.diag([3.5, 3.5, 0.5, 0.5])
    scale = np.sqrt(np.outer(np.diag(expect), np.diag(expect)))
    assert np.all(np.abs(res.cm.entries - expect) <= 0.05 * scale)
    z = np.abs(res.cm.entries - euler_stationary(m, cfg.dt)) / res.stderr
    assert np.max(z) < 4.5


def test_agrees_with_lyapunov_on_a_damped_model():
    m = damped()
    cfg = quick(m, n_traj=256)
    res = simulate_cm(m, cfg)
    V = steady_state_cm(m).entries
    scale = np.sqrt(np.outer(np.diag(V), np.diag(V)))
    assert np.all(np.abs(res.cm.entries - V) <= 0.05 * scale)
    # the time-averaged q p moment is so precise that only the chain's own
    # stationary state (which carries the O(dt) Euler bias) is within noise
    z = np.abs(res.cm.entries - euler_stationary(m, cfg.dt)) / res.stderr
    assert np.max(z) < 4.5
    np.testing.assert_allclose(euler_stationary(m, cfg.dt / 100), V, atol=2e-3 * np.max(V))


def test_bit_identical_under_fixed_seed_and_any_batching():
    m = damped()
    base = quick(m, n_traj=40, sample_time=20.0)
    a = simulate_cm(m, base)
    b = simulate_cm(m, base)
    c = simulate_cm(m, SimConfig(**{**base.__dict__, "batch": 7}), workers=3)
    assert np.array_equal(a.cm.entries, b.cm.entries)
    assert np.array_equal(a.cm.entries, c.cm.entries)
    assert np.array_equal(a.stderr, c.stderr)
    d = simulate_cm(m, SimConfig(**{**base.__dict__, "seed": 2}))
    assert not np.array_equal(a.cm.entries, d.cm.entries)


def test_halving_the_step_is_within_noise():
    m = damped()
    cfg = quick(m, n_traj=256, bias=0.02)
    half = SimConfig(**{**cfg.__dict__, "dt": cfg.dt / 2})
    a, b = simulate_cm(m, cfg), simulate_cm(m, half)
    diff = np.abs(a.cm.entries - b.cm.entries)
    assert np.all(diff <= 4 * np.hypot(a.stderr, b.stderr))


def test_escape_is_reported(monkeypatch):
    import optomech.oracle as oracle

    m = damped()
    monkeypatch.setattr(oracle, "ESCAPE", 1e-3)
    with pytest.raises(InstabilityError):
        simulate_cm(m, quick(m, n_traj=4, sample_time=5.0))


def test_trajectory_dump_columns(tmp_path):
    m = damped()
    cfg = quick(m, n_traj=4, sample_time=5.0)
    path = tmp_path / "traj.txt"
    simulate_cm(m, cfg, dump_path=path, dump_every=50)
    header = path.read_text().splitlines()[0]
    assert header == "# t u0 u1 u2 u3"
    data = np.loadtxt(path)
    assert data.shape[1] == 5
    np.testing.assert_allclose(np.diff(data[:, 0]), 50 * cfg.dt, rtol=1e-9)


@pytest.mark.parametrize("kind", ["step", "exponential"])
def test_filtered_vacuum_without_coupling(kind):
    m = single_mode_model(0.0, 1.0, 1.0, 0.5, 2.0)
    f = FilterSpec(kind, -1.0, 2.0)
    res = simulate_filtered_output(m, f, quick(m, n_traj=128, sample_time=200.0, filters=[f]))
    assert np.all(res.agrees_with(np.diag([2.5, 2.5, 0.5, 0.5]), n_sigma=4, rel=0.06))


@pytest.mark.parametrize("kind", ["step", "exponential"])
def test_filtered_output_matches_closed_form(kind):
    m = damped(G=0.4)
    f = FilterSpec(kind, -1.0, 2.0)
    res = simulate_filtered_output(m, f, quick(m, n_traj=128, sample_time=300.0, filters=[f]))
    V = output_cm(m, [f]).entries
    z = np.abs(res.cm.entries - V) / res.stderr
    assert np.max(z) < 4.5


def test_filtered_output_needs_common_duration():
    m = damped()
    with pytest.raises(ValidationError):
        simulate_filtered_output(m, [FilterSpec("step", 0, 1), FilterSpec("step", 1, 2)], quick(m))
