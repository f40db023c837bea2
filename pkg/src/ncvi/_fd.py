"""Batched finite-difference and complex-step derivative helpers.

Conventions: points carry the coordinate axis last; perturbation axes are
*prepended*, so callables must broadcast over extra leading dimensions.
Step sizes are computed from real parts so that every helper can be nested
inside a complex-step evaluation.
"""

import numpy as np

EPS = np.finfo(float).eps
STEP1 = EPS ** (1.0 / 3.0)
STEP2 = EPS ** 0.25
CSTEP = 1e-30


def steps(z, rel):
    return rel * np.maximum(1.0, np.abs(np.real(z)))


def _perturbations(z, h):
    n = z.shape[-1]
    eye = np.eye(n).reshape((n,) + (1,) * (z.ndim - 1) + (n,))
    return h[None] * eye


def central_gradient(fun, z, rel=STEP1):
    """Gradient of a scalar field along the last axis of ``z``.

    ``fun`` maps points of shape ``(m, ..., n)`` to values ``(m, ...)`` (the
    value batch may be wider than the point batch by broadcasting).
    """
    z = np.asarray(z)
    n = z.shape[-1]
    h = steps(z, rel)
    dz = _perturbations(z, h)
    vals = fun(np.concatenate([z[None] + dz, z[None] - dz]))
    hT = np.moveaxis(h, -1, 0)
    diff = (vals[:n] - vals[n:]) / (2.0 * hT)
    return np.moveaxis(diff, 0, -1)


def central_jacobian(fun, z, rel=STEP1):
    """Jacobian ``J[..., i, j] = d fun_i / d z_j`` of a vector field."""
    z = np.asarray(z)
    n = z.shape[-1]
    h = steps(z, rel)
    dz = _perturbations(z, h)
    vals = fun(np.concatenate([z[None] + dz, z[None] - dz]))
    hT = np.moveaxis(h, -1, 0)[..., None]
    diff = (vals[:n] - vals[n:]) / (2.0 * hT)
    return np.moveaxis(diff, 0, -1)


def complex_step_gradient(fun, z, h=CSTEP):
    """Gradient of a real-analytic scalar field by the complex-step formula.

    Exact to round-off; ``fun`` must be built from complex-safe operations.
    """
    z = np.asarray(z)
    n = z.shape[-1]
    dz = _perturbations(z, np.full(z.shape, h))
    vals = fun(z[None] + 1j * dz)
    return np.moveaxis(np.imag(vals) / h, 0, -1)


STEP4 = EPS ** 0.2


def _stencil4(fun, z, rel):
    z = np.asarray(z)
    n = z.shape[-1]
    h = steps(z, rel)
    dz = _perturbations(z, h)
    vals = fun(np.concatenate([z[None] + 2 * dz, z[None] + dz, z[None] - dz, z[None] - 2 * dz]))
    a, b, c, d = (vals[i * n:(i + 1) * n] for i in range(4))
    return (-a + 8 * b - 8 * c + d) / 12.0, np.moveaxis(h, -1, 0)


def central_gradient4(fun, z, rel=STEP4):
    """Fourth-order central-difference gradient (five-point stencil)."""
    diff, hT = _stencil4(fun, z, rel)
    return np.moveaxis(diff / hT, 0, -1)


def central_jacobian4(fun, z, rel=STEP4):
    """Fourth-order analogue of :func:`central_jacobian`."""
    diff, hT = _stencil4(fun, z, rel)
    return np.moveaxis(diff / hT[..., None], 0, -1)
