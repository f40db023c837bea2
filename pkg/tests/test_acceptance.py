"""Acceptance criteria, one test each, at the stated tolerances and runtimes.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import time

import numpy as np
import pytest
from dataclasses import replace

from ncvi.checks import run_suite
from ncvi.diagnostics import (
    convergence_study,
    drift_envelope,
    energy_drift,
    find_plateau,
    orbit_rotation_numbers,
    symplectic_defect,
)
from ncvi.lagrangian import make_lagrangian
from ncvi.stepper import SolverConfig, del_residual, initialize_second_point, integrate, integrate_ensemble
from ncvi.systems import make_fieldline, make_rotor

from conftest import sho_orbit

TWO_PI = 2 * np.pi
FL_EPS = 0.0075


def _no_perturbation(sys, eps):
    zero = lambda z, t: 0.0 * z[..., 0] + 0.0 * np.asarray(t)
    zero_grad = lambda z, t: 0.0 * z + 0.0 * np.asarray(t)[..., None]
    return replace(sys.with_epsilon(eps), h=zero, grad_h=zero_grad)


def test_criterion_1_linf_exactness(acceptance_report):
    start = time.perf_counter()
    worst = 0.0
    for tau in (0.5, 1.0, 2.0):
        for eps in (0.01, 0.1, 1.0):
            dl = make_lagrangian(make_rotor(eps), "Linf", tau)
            z = sho_orbit([0.7, -0.4], eps, tau, 12)
            for k in range(1, len(z) - 1):
                worst = max(worst, np.abs(del_residual(dl, z[k - 1], z[k], z[k + 1], k)).max())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 1.0
    acceptance_report(1, ok, f"max DEL residual {worst:.2e} (< 1e-10), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_unperturbed_exactness(acceptance_report):
    start = time.perf_counter()
    cases = [
        ("fieldline eps=0", make_fieldline(0.0), TWO_PI, [1.1, 0.3]),
        ("fieldline h=0 eps=0.3", _no_perturbation(make_fieldline(), 0.3), TWO_PI, [1.1, 0.3]),
        ("rotor eps=0", make_rotor(0.0), 1.0, [0.4, 0.6]),
        ("rotor h=0 eps=0.5", _no_perturbation(make_rotor(), 0.5), 1.0, [0.4, 0.6]),
    ]
    worst = 0.0
    for _, sys, tau, z0 in cases:
        dl = make_lagrangian(sys, "L0", tau)
        z0 = np.asarray(z0, dtype=float)
        traj = integrate(dl, SolverConfig(), z0, "oracle-flow", 100)
        exact = sys.F(z0[None], tau * np.arange(101), 0.0)
        worst = max(worst, np.abs(traj.z - exact).max())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 1.0
    acceptance_report(2, ok, f"max |z_k - F(z0, k tau, 0)| {worst:.2e} (< 1e-9), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_3_convergence_orders(acceptance_report):
    start = time.perf_counter()
    fl, z0 = make_fieldline(), np.array([1.0, 0.0])
    slopes = {
        "L0": (convergence_study(fl, "L0", np.logspace(-5, -2, 7), z0, TWO_PI).slope, 1.0, 0.15),
        "L1": (convergence_study(fl, "L1", np.logspace(-5, -2, 7), z0, TWO_PI).slope, 2.0, 0.15),
        "L2": (convergence_study(fl, "L2", np.logspace(-4, -2, 5), z0, TWO_PI).slope, 3.0, 0.2),
    }
    floor = convergence_study(fl, "L2", [1e-8, 1e-7, 1e-6], z0, TWO_PI).errors
    elapsed = time.perf_counter() - start
    slopes_ok = all(abs(s - target) <= tol for s, target, tol in slopes.values())
    # A floor near 1e-12: below 1e-11 and flat across two decades of epsilon.
    floor_ok = floor.max() < 1e-11 and floor.max() / floor.min() < 2.0
    ok = slopes_ok and floor_ok and elapsed < 120.0
    detail = ", ".join(f"{k} slope {s:.3f}" for k, (s, _, _) in slopes.items())
    acceptance_report(3, ok, f"{detail}, floor {floor.min():.2e}..{floor.max():.2e}, {elapsed:.1f} s (< 120 s)")
    assert ok


def _seed_radii():
    # Uniform seeds plus one at each unperturbed resonant radius R^2/3 = p/q.
    return np.sort(np.concatenate([np.linspace(0.3, 2.0, 28), [np.sqrt(1.5), np.sqrt(3.0)]]))


def test_criterion_4_poincare_structure(acceptance_report):
    start = time.perf_counter()
    sys = make_fieldline(FL_EPS)
    dl = make_lagrangian(sys, "L1", TWO_PI)
    radii = _seed_radii()
    seeds = np.stack([radii, np.zeros_like(radii)], axis=1)
    members = integrate_ensemble(dl, SolverConfig(), seeds, "oracle-flow", 2000, escape_radius=10.0)

    found = {1.0: [], 0.5: []}
    for m in members:
        z, t = m.trajectory.z[:501], m.trajectory.t[:501]
        if len(t) < 501:
            continue
        nu = orbit_rotation_numbers(sys, z, t, TWO_PI)
        mean_r = np.hypot(z[:, 0], z[:, 1]).mean()
        for target in found:
            if find_plateau(nu, target):
                found[target].append(mean_r)
    near = {
        1.0: any(abs(r - np.sqrt(3.0)) < 0.05 for r in found[1.0]),
        0.5: any(abs(r - np.sqrt(1.5)) < 0.05 for r in found[0.5]),
    }
    unbounded = [(float(radii[i]), len(m.trajectory.t) - 1) for i, m in enumerate(members) if m.error is not None]
    elapsed = time.perf_counter() - start
    ok = near[1.0] and near[0.5] and not unbounded and elapsed < 300.0
    lost = ", ".join(f"R0={r:.3f}@{k}" for r, k in unbounded) or "none"
    acceptance_report(4, ok, f"plateau nu=1 near sqrt3: {near[1.0]}, nu=1/2 near sqrt1.5: {near[0.5]}, "
                             f"orbits lost before 2000: {lost}, {elapsed:.0f} s (< 300 s)")
    assert near[1.0] and near[0.5], "missing rotation-number plateau"
    assert not unbounded, f"orbits not bounded for 2000 iterates: {lost}"
    assert elapsed < 300.0


def test_criterion_5_symplecticity(acceptance_report):
    start = time.perf_counter()
    cases = [(make_rotor(0.1), 1.0, [0.5, 0.5], ("L0", "L1", "L2", "Linf")),
             (make_fieldline(FL_EPS), TWO_PI, [1.0, 0.05], ("L0", "L1", "L2"))]
    results = {}
    for sys, tau, z0, orders in cases:
        z0 = np.asarray(z0, dtype=float)
        for order in orders:
            dl = make_lagrangian(sys, order, tau)
            z1 = initialize_second_point(sys, dl, z0)
            results[(sys.name, order)] = symplectic_defect(dl, SolverConfig(), z0, z1, 0, 10, 20, 0)["max"]
    elapsed = time.perf_counter() - start
    worst = max(results.values())
    ok = worst < 1e-5 and elapsed < 60.0
    acceptance_report(5, ok, f"max two-form defect {worst:.2e} over {len(results)} cases (< 1e-5), "
                             f"{elapsed:.1f} s (< 60 s)")
    assert ok, results


def test_criterion_6_property_suite(acceptance_report):
    start = time.perf_counter()
    failed = []
    for sys, tau in ((make_rotor(0.1), 1.0), (make_fieldline(FL_EPS), TWO_PI)):
        failed += [f"{sys.name}:{r.name} ({r.worst:.1e} vs {r.tolerance:.0e})"
                   for r in run_suite(sys, tau, count=100, seed=0) if not r.passed]
    elapsed = time.perf_counter() - start
    ok = not failed and elapsed < 60.0
    acceptance_report(6, ok, f"failures: {', '.join(failed) or 'none'}, {elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_7_initialization_comparison(acceptance_report):
    sys = make_fieldline(FL_EPS)
    dl = make_lagrangian(sys, "L1", TWO_PI)
    z0 = np.array([1.0, 0.0])
    env = {}
    for mode in ("oracle-flow", "unperturbed-flow"):
        traj = integrate(dl, SolverConfig(), z0, mode, 2000)
        assert len(traj.t) == 2001
        env[mode] = drift_envelope(energy_drift(sys, traj))
    ok = env["oracle-flow"] <= env["unperturbed-flow"]
    acceptance_report(7, ok, f"drift envelope oracle-flow {env['oracle-flow']:.3e} "
                             f"<= unperturbed-flow {env['unperturbed-flow']:.3e}")
    assert ok
