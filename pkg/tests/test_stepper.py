import numpy as np
import pytest

from ncvi.errors import ConfigError, NonConvergence
from ncvi.lagrangian import make_lagrangian
from ncvi.oracle import oracle_flow
from ncvi.stepper import (
    SolverConfig,
    del_residual,
    initialize_second_point,
    integrate,
    integrate_ensemble,
    step,
)
from ncvi.systems import make_fieldline, make_rotor, sho_flow

from conftest import sho_orbit


@pytest.mark.parametrize("kw", [{"residual_tol": 0.0}, {"max_iterations": 0}, {"damping": 1.5},
                                {"predictor": "magic"}])
def test_solver_config_validation(kw):
    with pytest.raises(ConfigError):
        SolverConfig(**kw)


def test_linf_step_stays_on_sho_orbit():
    eps, tau = 0.25, 1.0
    dl = make_lagrangian(make_rotor(eps), "Linf", tau)
    z = sho_orbit([1.0, 0.3], eps, tau, 3)
    np.testing.assert_allclose(step(dl, None or SolverConfig(), z[0], z[1], 1), z[2], atol=1e-9)


def test_linf_long_run():
    eps, tau = 0.25, 1.0
    dl = make_lagrangian(make_rotor(eps), "Linf", tau)
    z0 = np.array([1.0, 0.0])
    traj = integrate(dl, SolverConfig(), z0, "oracle-flow", 100)
    exact = sho_orbit(z0, eps, tau, 101)
    assert np.abs(traj.z - exact).max() < 1e-8


def test_l0_unperturbed_orbit_is_exact():
    sys = make_fieldline(0.0)
    dl = make_lagrangian(sys, "L0", 2 * np.pi)
    z0 = np.array([1.1, 0.2])
    traj = integrate(dl, SolverConfig(), z0, "oracle-flow", 50)
    expected = sys.F(z0[None], dl.tau * np.arange(51), 0.0)
    assert np.abs(traj.z - expected).max() < 1e-9


def test_l0_residual_zero_on_unperturbed_triple():
    sys = make_fieldline(0.0)
    dl = make_lagrangian(sys, "L0", 2.0)
    z = sys.F(np.array([[0.8, -0.6]]), 2.0 * np.arange(3), 0.0)
    assert np.linalg.norm(del_residual(dl, z[0], z[1], z[2], 1)) < 1e-10


def test_fieldline_l1_one_period():
    sys = make_fieldline(0.0075)
    dl = make_lagrangian(sys, "L1", 2 * np.pi)
    z0 = np.array([1.2, 0.0])
    z1 = oracle_flow(sys, z0, 0.0, dl.tau)
    z2 = step(dl, SolverConfig(), z0, z1, 1)
    err = np.linalg.norm(z2 - oracle_flow(sys, z1, dl.tau, 2 * dl.tau))
    # O(eps^2) with a constant near 25 at this radius (see the convergence tests)
    assert 1e-4 < err < 3e-3


def test_predictors_reach_same_root():
    sys = make_fieldline(0.0075)
    dl = make_lagrangian(sys, "L1", 2 * np.pi)
    z0 = np.array([1.0, 0.1])
    z1 = oracle_flow(sys, z0, 0.0, dl.tau)
    a = step(dl, SolverConfig(), z0, z1, 1)
    b = step(dl, SolverConfig(predictor="previous-step-extrapolation"), z0, z1, 1)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_trajectory_length_and_bookkeeping():
    dl = make_lagrangian(make_rotor(0.1), "L1", 1.0)
    traj = integrate(dl, SolverConfig(), np.array([0.5, 0.5]), "unperturbed-flow", 10)
    assert len(traj) == 11 and traj.n_steps == 10
    np.testing.assert_allclose(traj.t, np.arange(11.0))
    assert traj.newton_iterations[0] == traj.newton_iterations[1] == 0
    assert np.all(traj.newton_iterations[2:] >= 1)
    assert np.all(traj.residual <= 1e-12)
    assert traj.points[3].t == 3.0


def test_single_step_returns_initial_pair():
    dl = make_lagrangian(make_rotor(0.1), "L1", 1.0)
    traj = integrate(dl, SolverConfig(), np.array([0.5, 0.5]), "unperturbed-flow", 1)
    np.testing.assert_allclose(traj.z, [[0.5, 0.5], [1.0, 0.5]])


def test_initialization_modes():
    sys = make_rotor(0.5)
    dl = make_lagrangian(sys, "L1", 1.0)
    z0 = np.array([1.0, 0.0])
    np.testing.assert_allclose(initialize_second_point(sys, dl, z0, "oracle-flow"),
                               sho_flow(z0, 1.0, 0.0, 0.5), atol=1e-10)
    np.testing.assert_allclose(initialize_second_point(sys, dl, z0, "unperturbed-flow"), [1.0, 0.0])
    np.testing.assert_allclose(initialize_second_point(sys, dl, z0, "user-supplied", z1=[2.0, 3.0]), [2.0, 3.0])
    with pytest.raises(ConfigError):
        initialize_second_point(sys, dl, z0, "user-supplied")
    with pytest.raises(ConfigError):
        initialize_second_point(sys, dl, z0, "guess")


def test_nonconvergence_carries_partial_trajectory():
    dl = make_lagrangian(make_fieldline(0.0075), "L1", 2 * np.pi)
    cfg = SolverConfig(max_iterations=1, residual_tol=1e-30)
    with pytest.raises(NonConvergence) as info:
        integrate(dl, cfg, np.array([1.0, 0.0]), "oracle-flow", 5)
    err = info.value
    assert err.step_index == 2
    assert len(err.trajectory) == 2
    assert err.best.shape == (2,) and err.residual > 0


def test_ensemble_isolates_failures():
    sys = make_fieldline(0.0075)
    dl = make_lagrangian(sys, "L1", 2 * np.pi)
    seeds = np.array([[1.0, 0.0], [0.9, 0.0]])
    members = integrate_ensemble(dl, SolverConfig(), seeds, "oracle-flow", 5, escape_radius=0.95)
    assert members[0].error is not None and len(members[0].trajectory) < 6
    assert members[1].error is None and len(members[1].trajectory) == 6
    single = integrate(dl, SolverConfig(), seeds[1], "oracle-flow", 5)
    np.testing.assert_allclose(members[1].trajectory.z, single.z, atol=1e-13)


def test_fieldline_l1_bounded_off_resonance():
    sys = make_fieldline(0.0075)
    dl = make_lagrangian(sys, "L1", 2 * np.pi)
    traj = integrate(dl, SolverConfig(), np.array([1.0, 0.0]), "oracle-flow", 2000)
    r = np.hypot(traj.z[:, 0], traj.z[:, 1])
    assert len(r) == 2001
    assert 0.1 <= r.min() and r.max() <= 2.5
