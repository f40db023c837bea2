"""Exception types raised across the package."""


class NcviError(Exception):
    """Base class for all package errors."""


class SingularForm(NcviError):
    """The symplectic matrix is (numerically) singular at the evaluation point."""


class GradientUnavailable(NcviError):
    """No analytic gradient was supplied and a finite-difference one could not be formed."""


class EpsilonZero(NcviError):
    """The closed-form rotor Lagrangian needs a strictly positive perturbation strength."""


class UnknownSystem(NcviError, KeyError):
    pass


class ConfigError(NcviError, ValueError):
    pass


class StepFailure(NcviError):
    """The reference integrator could not complete the requested interval."""


class SingularJacobian(NcviError):
    """The Newton linear system for the next point is ill-conditioned."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class NonConvergence(NcviError):
    """Newton iterations were exhausted before the residual tolerance was met.

    Attributes
    ----------
    best : ndarray or None
        Last iterate of the solve.
    residual : float or None
        Residual norm at ``best``.
    step_index : int or None
        Index of the point that failed to converge.
    trajectory : Trajectory or None
        Partial trajectory up to the failing step, when raised by ``integrate``.
    """

    def __init__(self, message, best=None, residual=None, step_index=None, trajectory=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.step_index = step_index
        self.trajectory = trajectory
