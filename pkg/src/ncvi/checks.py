"""Invariant suite run by ``ncvi check`` and by the property tests.

Each check draws a fixed-seed random sample, evaluates one identity and
returns a :class:`CheckResult` with the worst violation and its tolerance.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import _fd
from .diagnostics import discrete_one_form, fit_loglog, full_gradient_fd, two_form
from .lagrangian import make_lagrangian
from .phasespace import (
    _segment_pairing,
    flow_jacobian,
    omega_matrix,
    pairing_gradients,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def _result(name, worst, tol, detail=""):
    worst = float(worst)
    return CheckResult(name, bool(worst < tol), worst, tol, detail)


# Discrete Lagrangians are sampled on an annulus: the fieldline form
# degenerates at the origin and perturbation fields blow up there.
R_MIN = 0.3
R_MAX = 1.5
FD_REL = 1e-4


def random_points(rng, count, n=2, radius=2.0, min_radius=0.0):
    """Points uniform in the shell ``min_radius <= |z| <= radius``."""
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    lo, hi = min_radius ** n, radius ** n
    return v * (lo + (hi - lo) * rng.random((count, 1))) ** (1.0 / n)


def _rel(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


def check_flow_group_law(sys, count=100, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    z = random_points(rng, count, sys.n)
    u, s, t = np.sort(rng.uniform(0.0, 4 * np.pi, (3, count)), axis=0)
    lhs = sys.F(sys.F(z, s, u), t, s)
    rhs = sys.F(z, t, u)
    ident = np.abs(sys.F(z, u, u) - z).max()
    return _result("flow_group_law", max(np.abs(lhs - rhs).max(), ident), tol)


def check_flow_symplectic(sys, count=100, seed=0, tol=1e-7):
    """``Omega(F z)(DF u, DF v) = Omega(z)(u, v)`` with a finite-difference ``DF``."""
    rng = np.random.default_rng(seed)
    z = random_points(rng, count, sys.n)
    s, t = rng.uniform(0.0, 2 * np.pi, (2, count))
    DF = _fd.central_jacobian4(lambda zz: sys.F(zz, t, s), z, FD_REL)
    u = rng.standard_normal((count, sys.n))
    v = rng.standard_normal((count, sys.n))
    Fu = np.einsum("kij,kj->ki", DF, u)
    Fv = np.einsum("kij,kj->ki", DF, v)
    after = np.einsum("ki,kij,kj->k", Fu, omega_matrix(sys, sys.F(z, t, s)), Fv)
    before = np.einsum("ki,kij,kj->k", u, omega_matrix(sys, z), v)
    return _result("flow_symplectic", np.abs(after - before).max(), tol)


def check_pairing_antisymmetry(sys, count=100, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    z1, z2 = random_points(rng, count, sys.n), random_points(rng, count, sys.n)
    f = sys.pairing_f or (lambda a, b: _segment_pairing(sys, a, b, 8))
    return _result("pairing_antisymmetry", np.abs(f(z1, z2) + f(z2, z1)).max(), tol)


def check_pairing_boundary(sys, count=100, seed=0, tol=1e-10):
    """``D2 f(z, z) = theta(z)`` and ``D1 f(z, z) = -theta(z)``."""
    rng = np.random.default_rng(seed)
    z = random_points(rng, count, sys.n)
    d1, d2 = pairing_gradients(sys, z, z)
    th = sys.theta(z)
    return _result("pairing_boundary", max(np.abs(d2 - th).max(), np.abs(d1 + th).max()), tol)


def check_pairing_closed_form(sys, count=100, seed=0, tol=1e-10):
    if sys.pairing_f is None:
        return CheckResult("pairing_closed_form", True, 0.0, tol, "no closed form installed")
    rng = np.random.default_rng(seed)
    z1, z2 = random_points(rng, count, sys.n), random_points(rng, count, sys.n)
    diff = sys.pairing_f(z1, z2) - _segment_pairing(sys, z1, z2, 8)
    return _result("pairing_closed_form", np.abs(diff).max(), tol)


def check_analytic_gradients(sys, count=100, seed=0, tol=1e-6):
    """Supplied ``grad_H``, ``grad_h``, ``theta_jac``, ``flow_jac`` and
    ``pairing_grad`` against central differences (relative error)."""
    rng = np.random.default_rng(seed)
    z = random_points(rng, count, sys.n)
    t = rng.uniform(0.0, 2 * np.pi, count)
    worst = 0.0
    if sys.grad_H is not None:
        worst = max(worst, _rel(sys.grad_H(z, t), _fd.central_gradient(lambda p: sys.H(p, t), z)).max())
    if sys.grad_h is not None:
        worst = max(worst, _rel(sys.grad_h(z, t), _fd.central_gradient(lambda p: sys.h(p, t), z)).max())
    if sys.theta_jac is not None:
        fd = np.swapaxes(_fd.central_jacobian(sys.theta, z), -1, -2)
        worst = max(worst, _rel(sys.theta_jac(z), fd).max())
    if sys.flow_jac is not None:
        s = rng.uniform(0.0, 2 * np.pi, count)
        fd = _fd.central_jacobian(lambda p: sys.F(p, t, s), z)
        worst = max(worst, _rel(sys.flow_jac(z, t, s), fd).max())
    if sys.pairing_grad is not None and sys.pairing_f is not None:
        z2 = random_points(rng, count, sys.n)
        d1, d2 = sys.pairing_grad(z, z2)
        worst = max(worst, _rel(d1, _fd.central_gradient(lambda p: sys.pairing_f(p, z2), z)).max())
        worst = max(worst, _rel(d2, _fd.central_gradient(lambda p: sys.pairing_f(z, p), z2)).max())
    return _result("analytic_gradients", worst, tol)


def check_slot_gradients(dl, count=100, seed=0, tol=1e-6, radius=R_MAX, min_radius=R_MIN):
    """Slot gradients of ``L`` against central differences of its values."""
    rng = np.random.default_rng(seed)
    n = dl.sys.n
    z1, z2 = random_points(rng, count, n, radius, min_radius), random_points(rng, count, n, radius, min_radius)
    k = rng.integers(0, 5, count)
    t = k * dl.tau
    g1, g2 = dl.partial_gradients(z1, z2, t)
    fd = _fd.central_gradient4(lambda P: np.real(dl.evaluate(P[..., :n], P[..., n:], t)),
                               np.concatenate([z1, z2], axis=-1), FD_REL)
    worst = _rel(np.concatenate([g1, g2], axis=-1), fd).max()
    return _result(f"slot_gradients[{dl.order}]", worst, tol)


def check_one_form_exactness(dl, count=100, seed=0, tol=1e-7, radius=R_MAX, min_radius=R_MIN):
    """``theta1^k - theta2^k = dL`` with ``dL`` from central differences."""
    rng = np.random.default_rng(seed)
    n = dl.sys.n
    z1, z2 = random_points(rng, count, n, radius, min_radius), random_points(rng, count, n, radius, min_radius)
    k = 3
    lhs = discrete_one_form(dl, z1, z2, k, 1) - discrete_one_form(dl, z1, z2, k, 2)
    rhs = full_gradient_fd(dl, z1, z2, k)
    return _result(f"one_form_exactness[{dl.order}]", _rel(lhs, rhs).max(), tol)


def check_two_form_agreement(dl, count=20, seed=0, tol=1e-6, radius=R_MAX, min_radius=R_MIN):
    """``d theta1^k = d theta2^k`` as finite-difference two-forms."""
    rng = np.random.default_rng(seed)
    n = dl.sys.n
    z1, z2 = random_points(rng, count, n, radius, min_radius), random_points(rng, count, n, radius, min_radius)
    a = two_form(dl, z1, z2, 1, 1)
    b = two_form(dl, z1, z2, 1, 2)
    return _result(f"two_form_agreement[{dl.order}]", _rel(a, b).max(), tol)


def check_order_nesting(sys, tau, count=20, seed=0, slope_tol=0.15, radius=R_MAX, min_radius=R_MIN):
    """``L1 - L0 = O(eps)`` and ``L2 - L1 = O(eps^2)`` over three decades."""
    rng = np.random.default_rng(seed)
    z1, z2 = random_points(rng, count, sys.n, radius, min_radius), random_points(rng, count, sys.n, radius, min_radius)
    eps = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    d10, d21 = [], []
    for e in eps:
        s = sys.with_epsilon(e)
        L0, L1, L2 = (make_lagrangian(s, o, tau).evaluate(z1, z2, 0.0) for o in ("L0", "L1", "L2"))
        d10.append(np.abs(L1 - L0))
        d21.append(np.abs(L2 - L1))
    d10, d21 = np.array(d10), np.array(d21)
    worst = 0.0
    for j in range(count):
        for target, d in ((1.0, d10[:, j]), (2.0, d21[:, j])):
            if np.all(d > 0):
                worst = max(worst, abs(fit_loglog(eps, d)[0] - target))
    return _result("order_nesting", worst, slope_tol, "max |fitted slope - expected|")


def run_suite(sys, tau, orders=("L0", "L1", "L2"), count=100, seed=0):
    """Run every check for one system and return the list of results."""
    results = [
        check_flow_group_law(sys, count, seed),
        check_flow_symplectic(sys, count, seed),
        check_pairing_antisymmetry(sys, count, seed),
        check_pairing_boundary(sys, count, seed),
        check_pairing_closed_form(sys, count, seed),
        check_analytic_gradients(sys, count, seed),
    ]
    for order in orders:
        dl = make_lagrangian(sys, order, tau)
        results.append(check_slot_gradients(dl, count, seed))
        results.append(check_one_form_exactness(dl, count, seed))
        results.append(check_two_form_agreement(dl, min(count, 20), seed))
    results.append(check_order_nesting(sys, tau, min(count, 20), seed))
    return results
