"""High-accuracy reference integration of the full Hamiltonian vector field."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepFailure
from .phasespace import total_vector_field


@dataclass(frozen=True)
class OracleConfig:
    """Tolerances for the embedded Dormand-Prince 8(5,3) reference integrator.

    ``max_steps`` bounds the number of accepted steps; ``initial_step`` of
    ``None`` lets the integrator choose.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_steps: int = 1_000_000
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("oracle tolerances must be positive")


def oracle_flow(sys, z0, t0, t1, cfg=None):
    """Integrate ``z' = X_{H + eps h}(z, t)`` from ``t0`` to ``t1``.

    ``z0`` may be a batch ``(..., n)``; all members are integrated as one
    coupled system with shared step control.  ``t1 < t0`` integrates backwards.
    """
    cfg = cfg or OracleConfig()
    z0 = np.asarray(z0, dtype=float)
    if t1 == t0:
        return z0.copy()
    shape = z0.shape
    nsteps = 0

    def rhs(t, y):
        nonlocal nsteps
        nsteps += 1
        if nsteps > 13 * cfg.max_steps:  # DOP853 uses 12 evaluations per step
            raise StepFailure(f"oracle exceeded {cfg.max_steps} steps")
        return total_vector_field(sys, y.reshape(shape), t).ravel()

    kwargs = {}
    if cfg.initial_step is not None:
        kwargs["first_step"] = cfg.initial_step
    sol = solve_ivp(rhs, (float(t0), float(t1)), z0.ravel(), method="DOP853",
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, **kwargs)
    if sol.status != 0:
        raise StepFailure(f"oracle integration failed: {sol.message}")
    return sol.y[:, -1].reshape(shape)
