"""Phase-space chart, one-form, Hamiltonian vector fields and the scalar
building blocks shared by every discrete Lagrangian.

All callables in a :class:`SystemSpec` are vectorised: points have shape
``(..., n)`` and times broadcast against the batch shape ``(...)``.  They
should also be complex-safe (polynomials, trig functions, ...) so that slot
gradients of discrete Lagrangians can be taken by the complex-step method.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import _fd
from .errors import GradientUnavailable, SingularForm

# 1/kappa threshold below which the symplectic matrix is declared singular.
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    z: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or z.size < 2 or z.size % 2:
            raise ValueError(f"phase point needs an even number >= 2 of coordinates, got shape {z.shape}")
        if not np.all(np.isfinite(z)) or not np.isfinite(self.t):
            raise ValueError("phase point must be finite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class SystemSpec:
    """A perturbed Hamiltonian system ``H_t + epsilon * h_t`` on a chart of R^n.

    Parameters
    ----------
    n : int
        Chart dimension (even).
    theta : callable
        ``theta(z) -> (..., n)`` components of the symplectic potential.
    H, h : callable
        ``H(z, t) -> (...)`` unperturbed Hamiltonian and perturbation.
    F : callable
        ``F(z, t, s)`` analytic unperturbed flow taking a point at time ``s`` to
        time ``t``.
    epsilon : float
        Perturbation strength.
    theta_jac : callable, optional
        ``theta_jac(z)[..., i, j] = d theta_j / d z_i``.
    grad_H, grad_h : callable, optional
        Analytic gradients ``(z, t) -> (..., n)``.
    flow_jac : callable, optional
        ``flow_jac(z, t, s)[..., i, j] = d F_i / d z_j``.
    pairing_f : callable, optional
        Closed form ``(z1, z2) -> (...)`` of the straight-segment integral of theta.
    pairing_grad : callable, optional
        ``(z1, z2) -> (D1 f, D2 f)``.
    name : str
        Label used in reports.

    Missing optional derivatives fall back to central finite differences.
    """

    n: int
    theta: Callable
    H: Callable
    h: Callable
    F: Callable
    epsilon: float = 0.0
    theta_jac: Optional[Callable] = None
    grad_H: Optional[Callable] = None
    grad_h: Optional[Callable] = None
    flow_jac: Optional[Callable] = None
    pairing_f: Optional[Callable] = None
    pairing_grad: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError(f"chart dimension must be even and >= 2, got {self.n}")
        if not (self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=float(epsilon))

    def total_hamiltonian(self, z, t):
        return self.H(z, t) + self.epsilon * self.h(z, t)


def _gradient(fun, grad, z, t):
    if grad is not None:
        return grad(z, t)
    if fun is None:
        raise GradientUnavailable("neither a scalar field nor its gradient was supplied")
    return _fd.central_gradient(lambda zz: fun(zz, t), z)


def theta_jacobian(sys, z):
    """``J[..., i, j] = d theta_j / d z_i`` (analytic if supplied)."""
    z = np.asarray(z)
    if sys.theta_jac is not None:
        return sys.theta_jac(z)
    # central_jacobian returns d theta_i / d z_j; transpose to the stored convention
    return np.swapaxes(_fd.central_jacobian(sys.theta, z), -1, -2)


def omega_matrix(sys, z, check=True):
    """Antisymmetric matrix ``Omega_ij = d_i theta_j - d_j theta_i``.

    Raises :class:`SingularForm` if ``check`` and the 1-norm reciprocal
    condition number drops below ``RCOND_MIN`` anywhere in the batch.
    """
    J = theta_jacobian(sys, z)
    omega = J - np.swapaxes(J, -1, -2)
    if check:
        _inverse_checked(omega)
    return omega


def _inverse_checked(a):
    re = np.real(a)
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularForm("symplectic matrix is exactly singular") from exc
    kappa = np.abs(re).sum(axis=-2).max(axis=-1) * np.abs(np.real(inv)).sum(axis=-2).max(axis=-1)
    if not np.all(np.isfinite(kappa)) or np.any(1.0 / kappa < RCOND_MIN):
        raise SingularForm(f"symplectic form degenerate: 1/kappa = {np.min(1.0 / kappa):.3e}")
    return inv


def vector_field_from_gradient(sys, z, grad):
    """Solve ``X^i Omega_ij = -grad_j`` for ``X``.

    A gradient that vanishes identically gives the zero field without
    touching ``Omega``, so degenerate forms are tolerated where nothing moves.
    """
    if not np.any(grad):
        return np.zeros(np.broadcast_shapes(np.shape(grad), np.shape(z)), dtype=np.result_type(grad, z))
    omega = omega_matrix(sys, z, check=False)
    inv_t = _inverse_checked(np.swapaxes(omega, -1, -2))
    grad = np.broadcast_to(grad, np.broadcast_shapes(grad.shape, inv_t.shape[:-1]))
    return -np.einsum("...ij,...j->...i", inv_t, grad)


def hamiltonian_vector_field(sys, g, z, t, grad_g=None):
    """Hamiltonian vector field of the scalar field ``g(z, t)``.

    ``grad_g`` overrides the finite-difference gradient.  Either may be ``None``
    but not both.
    """
    z = np.asarray(z)
    if g is None and grad_g is None:
        raise GradientUnavailable("hamiltonian_vector_field needs g or grad_g")
    grad = _gradient(g, grad_g, z, t)
    return vector_field_from_gradient(sys, z, grad)


def total_vector_field(sys, z, t):
    """Vector field of the full Hamiltonian ``H_t + epsilon h_t``."""
    z = np.asarray(z)
    grad = _gradient(sys.H, sys.grad_H, z, t)
    if sys.epsilon != 0.0:
        grad = grad + sys.epsilon * _gradient(sys.h, sys.grad_h, z, t)
    return vector_field_from_gradient(sys, z, grad)


def gauss_legendre(order):
    nodes, weights = np.polynomial.legendre.leggauss(int(order))
    return nodes, weights


def pairing_f(sys, z1, z2, quad_points=8):
    """Integral of theta along the straight segment from ``z1`` to ``z2``."""
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    if sys.pairing_f is not None:
        return sys.pairing_f(z1, z2)
    return _segment_pairing(sys, z1, z2, quad_points)


def _segment_pairing(sys, z1, z2, quad_points):
    x, w = gauss_legendre(quad_points)
    lam = 0.5 * (x + 1.0)
    d = z2 - z1
    p = z1[..., None, :] + lam[:, None] * d[..., None, :]
    integrand = np.einsum("...qj,...j->...q", sys.theta(p), d)
    return 0.5 * integrand @ w


def pairing_gradients(sys, z1, z2, quad_points=8):
    """Slot gradients ``(D1 f, D2 f)`` of the pairing function.

    Uses ``sys.pairing_grad`` if present; finite differences of a closed-form
    ``pairing_f``; otherwise the exact segment formula with ``theta_jacobian``.
    """
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    if sys.pairing_grad is not None:
        return sys.pairing_grad(z1, z2)
    if sys.pairing_f is not None:
        z1b, z2b = np.broadcast_arrays(z1, z2)
        d1 = _fd.central_gradient(lambda zz: sys.pairing_f(zz, z2b), z1b)
        d2 = _fd.central_gradient(lambda zz: sys.pairing_f(z1b, zz), z2b)
        return d1, d2
    x, w = gauss_legendre(quad_points)
    lam = 0.5 * (x + 1.0)
    d = z2 - z1
    p = z1[..., None, :] + lam[:, None] * d[..., None, :]
    jd = np.einsum("...qij,...j->...qi", theta_jacobian(sys, p), d)
    th = sys.theta(p)
    wq = 0.5 * w[:, None]
    d1 = np.sum(wq * ((1.0 - lam)[:, None] * jd - th), axis=-2)
    d2 = np.sum(wq * (lam[:, None] * jd + th), axis=-2)
    return d1, d2


def script_L(sys, z, s):
    """``theta(X_{H_s}) - H_s`` evaluated at ``z``."""
    z = np.asarray(z)
    X = hamiltonian_vector_field(sys, sys.H, z, s, grad_g=sys.grad_H)
    return np.einsum("...i,...i->...", sys.theta(z), X) - sys.H(z, s)


def flow_jacobian(sys, z, t, s):
    if sys.flow_jac is not None:
        return sys.flow_jac(z, t, s)
    return _fd.central_jacobian(lambda zz: sys.F(zz, t, s), z)


def K_pulled(sys, z, s, u):
    """Perturbation pulled back along the unperturbed flow: ``h_s(F(z, s, u))``."""
    return sys.h(sys.F(np.asarray(z), s, u), s)


def pulled_perturbation(sys, z, s, u):
    """``(K, grad K, X_K)`` for ``K = h_s o F_{s,u}`` at ``z``.

    The gradient goes through the chain rule ``DF^T grad h`` when an analytic
    ``grad_h`` is available.
    """
    z = np.asarray(z)
    p = sys.F(z, s, u)
    K = sys.h(p, s)
    if sys.grad_h is not None:
        DF = flow_jacobian(sys, z, s, u)
        gK = np.einsum("...ji,...j->...i", DF, sys.grad_h(p, s))
    else:
        gK = _fd.central_gradient(lambda zz: sys.h(sys.F(zz, s, u), s), z)
    X = vector_field_from_gradient(sys, z, gK)
    return K, gK, X


def little_l(sys, z, s, u):
    """``theta(X_K) - K`` with ``K = h_s o F_{s,u}``."""
    z = np.asarray(z)
    K, _, X = pulled_perturbation(sys, z, s, u)
    return np.einsum("...i,...i->...", sys.theta(z), X) - K
