"""Variational integrators for perturbed non-canonical Hamiltonian systems.

Discrete Lagrangians ``L0``, ``L1``, ``L2`` are built from the unperturbed
flow and the perturbation; the two-step discrete Euler-Lagrange recurrence
they define is accurate to ``O(eps^(l+1))`` per step.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    EpsilonZero,
    GradientUnavailable,
    NcviError,
    NonConvergence,
    SingularForm,
    SingularJacobian,
    StepFailure,
    UnknownSystem,
)
from .lagrangian import DiscreteLagrangian, QuadratureRule, make_lagrangian
from .oracle import OracleConfig, oracle_flow
from .phasespace import PhasePoint, SystemSpec, hamiltonian_vector_field, omega_matrix
from .stepper import SolverConfig, Trajectory, integrate, integrate_ensemble, step
from .systems import list_systems, make_builtin
