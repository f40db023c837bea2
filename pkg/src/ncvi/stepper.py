"""Two-step discrete Euler-Lagrange time stepping.

Given a pair ``(z_prev, z_cur)`` at times ``t0 + (k-1) tau`` and ``t0 + k tau``,
the next point solves

    D2 L(z_prev, z_cur, t_{k-1}) + D1 L(z_cur, z_next, t_k) = 0

by damped Newton iteration with a finite-difference Jacobian.  The solver
is vectorised over a batch of independent pairs so that ensembles (Poincare
seeds, perturbed copies for Jacobian estimates) advance together.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigError, NonConvergence, SingularJacobian
from .oracle import OracleConfig, oracle_flow
from .phasespace import PhasePoint

PREDICTORS = ("unperturbed-push", "previous-step-extrapolation")
INIT_MODES = ("oracle-flow", "unperturbed-flow", "user-supplied")

# Newton Jacobians with 1/kappa below this are treated as singular.
JAC_RCOND_MIN = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-12
    max_iterations: int = 50
    damping: float = 1.0
    predictor: str = "unperturbed-push"
    max_halvings: int = 8

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ConfigError("residual_tol must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {self.predictor!r}; expected one of {PREDICTORS}")


@dataclass
class Trajectory:
    """Discrete trajectory on the grid ``t0 + k tau``.

    ``newton_iterations`` and ``residual`` are zero for the two initial points.
    """

    z: np.ndarray
    t: np.ndarray
    newton_iterations: np.ndarray
    residual: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def points(self) -> List[PhasePoint]:
        return [PhasePoint(z, t) for z, t in zip(self.z, self.t)]

    @property
    def n_steps(self):
        return len(self.t) - 1


def step_time(dl, k, t0=0.0):
    return t0 + k * dl.tau


def del_residual(dl, z_prev, z_cur, z_next, k, t0=0.0):
    """``D2 L(z_prev, z_cur, t_{k-1}) + D1 L(z_cur, z_next, t_k)``."""
    return (dl.slot2_gradient(z_prev, z_cur, step_time(dl, k - 1, t0))
            + dl.slot1_gradient(z_cur, z_next, step_time(dl, k, t0)))


def predict(dl, cfg, z_prev, z_cur, k, t0=0.0):
    F = dl.sys.F
    tk = step_time(dl, k, t0)
    push = F(z_cur, tk + dl.tau, tk)
    if cfg.predictor == "previous-step-extrapolation":
        push = push + (z_cur - F(z_prev, tk, tk - dl.tau))
    return push


def _norm(r):
    return np.sqrt(np.sum(r * r, axis=-1))


def newton_batch(dl, cfg, z_prev, z_cur, k, t0=0.0, guess=None):
    """Solve the DEL equations for a batch of pairs ``(M, n)``.

    Returns ``(z_next, iterations, residual_norm, status)`` where ``status`` is
    0 for converged, 1 for exhausted iterations and 2 for a singular Jacobian.
    Nothing is raised; callers decide how to report failures.
    """
    z_prev = np.atleast_2d(np.asarray(z_prev, dtype=float))
    z_cur = np.atleast_2d(np.asarray(z_cur, dtype=float))
    M = z_cur.shape[0]
    tk = step_time(dl, k, t0)
    r_prev = dl.slot2_gradient(z_prev, z_cur, tk - dl.tau)
    z = np.array(predict(dl, cfg, z_prev, z_cur, k, t0) if guess is None else guess, dtype=float)

    def resid(idx, zz):
        return r_prev[idx] + dl.slot1_gradient(z_cur[idx], zz, tk)

    everyone = np.arange(M)
    R = resid(everyone, z)
    nrm = _norm(R)
    nrm[~np.isfinite(nrm)] = np.inf
    iters = np.zeros(M, dtype=int)
    status = np.zeros(M, dtype=int)
    failed = np.zeros(M, dtype=bool)

    for _ in range(cfg.max_iterations):
        act = np.flatnonzero((nrm > cfg.residual_tol) & ~failed)
        if act.size == 0:
            break
        # J[i, j] = d(D1 L)_i / d z_next_j
        J = dl.mixed_hessian(z_cur[act], z[act], tk)
        with np.errstate(all="ignore"):
            rcond = 1.0 / np.linalg.cond(J)
        bad = ~(rcond > JAC_RCOND_MIN)
        if np.any(bad):
            failed[act[bad]] = True
            status[act[bad]] = 2
            act, J = act[~bad], J[~bad]
            if act.size == 0:
                break
        dz = np.linalg.solve(J, -R[act][..., None])[..., 0]
        lam = np.full(act.size, cfg.damping)
        pending = np.arange(act.size)
        z_act = z[act]
        for halving in range(cfg.max_halvings + 1):
            zt = z_act[pending] + lam[pending, None] * dz[pending]
            Rt = resid(act[pending], zt)
            nt = _norm(Rt)
            nt[~np.isfinite(nt)] = np.inf
            accept = (nt < nrm[act[pending]]) | (halving == cfg.max_halvings)
            take = pending[accept]
            z[act[take]] = zt[accept]
            R[act[take]] = Rt[accept]
            nrm[act[take]] = nt[accept]
            pending = pending[~accept]
            if pending.size == 0:
                break
            lam[pending] *= 0.5
        iters[act] += 1

    unconverged = ~(nrm <= cfg.residual_tol) & ~failed
    status[unconverged] = 1
    return z, iters, nrm, status


def step(dl, cfg, z_prev, z_cur, k, t0=0.0):
    """Advance one pair and return ``z_next``.

    Raises
    ------
    NonConvergence
        Iterations exhausted; the best iterate and residual are attached.
    SingularJacobian
        Newton matrix ill-conditioned.
    """
    z_prev = np.asarray(z_prev, dtype=float)
    z_cur = np.asarray(z_cur, dtype=float)
    z, iters, nrm, status = newton_batch(dl, cfg, z_prev[None], z_cur[None], k, t0)
    if status[0] == 2:
        raise SingularJacobian(f"singular Newton Jacobian at step {k}", step_index=k + 1)
    if status[0] == 1:
        raise NonConvergence(f"Newton did not converge at step {k} (residual {nrm[0]:.3e})",
                             best=z[0], residual=float(nrm[0]), step_index=k + 1)
    return z[0]


def initialize_second_point(sys, dl, z0, mode="oracle-flow", t0=0.0, z1=None, oracle_cfg=None):
    """Second initial condition for the two-step recurrence.

    ``oracle-flow`` flows the full system for one step with the reference
    integrator; ``unperturbed-flow`` applies ``F``; ``user-supplied`` returns ``z1``.
    """
    z0 = np.asarray(z0, dtype=float)
    if mode == "oracle-flow":
        return oracle_flow(sys, z0, t0, t0 + dl.tau, oracle_cfg or OracleConfig())
    if mode == "unperturbed-flow":
        return np.asarray(sys.F(z0, t0 + dl.tau, t0), dtype=float)
    if mode == "user-supplied":
        if z1 is None:
            raise ConfigError("user-supplied initialization needs z1")
        return np.broadcast_to(np.asarray(z1, dtype=float), z0.shape).copy()
    raise ConfigError(f"unknown initialization mode {mode!r}; expected one of {INIT_MODES}")


@dataclass
class EnsembleMember:
    trajectory: Trajectory
    error: Optional[Exception] = None


def march(dl, cfg, z0, z1, n_steps, t0=0.0, escape_radius=None):
    """Run the recurrence for a batch of initial pairs ``(M, n)``.

    Members that fail (non-convergence, singular Jacobian, or leaving the
    ball of ``escape_radius``) are frozen with their partial trajectory while
    the rest continue.
    """
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    M, n = z0.shape
    Z = np.full((M, n_steps + 1, n), np.nan)
    iters = np.zeros((M, n_steps + 1), dtype=int)
    res = np.zeros((M, n_steps + 1))
    Z[:, 0], Z[:, 1] = z0, z1
    length = np.full(M, n_steps + 1)
    errors = [None] * M
    alive = np.arange(M)
    for k in range(1, n_steps):
        if alive.size == 0:
            break
        znext, it, nrm, status = newton_batch(dl, cfg, Z[alive, k - 1], Z[alive, k], k, t0)
        Z[alive, k + 1] = znext
        iters[alive, k + 1] = it
        res[alive, k + 1] = nrm
        drop = status != 0
        if escape_radius is not None:
            escaped = ~(_norm(znext) <= escape_radius)
            drop |= escaped
        for j in np.flatnonzero(drop):
            m = alive[j]
            length[m] = k + 1
            if status[j] == 2:
                errors[m] = SingularJacobian(f"singular Newton Jacobian at step {k}", step_index=k + 1)
            elif status[j] == 1:
                errors[m] = NonConvergence(f"Newton did not converge at step {k} (residual {nrm[j]:.3e})",
                                           best=znext[j], residual=float(nrm[j]), step_index=k + 1)
            else:
                errors[m] = NonConvergence(f"orbit left radius {escape_radius} at step {k + 1}",
                                           best=znext[j], residual=float(nrm[j]), step_index=k + 1)
        alive = alive[~drop]
    times = t0 + dl.tau * np.arange(n_steps + 1)
    out = []
    for m in range(M):
        L = length[m]
        traj = Trajectory(Z[m, :L].copy(), times[:L].copy(), iters[m, :L].copy(), res[m, :L].copy())
        if errors[m] is not None:
            errors[m].trajectory = traj
        out.append(EnsembleMember(traj, errors[m]))
    return out


def integrate(dl, cfg, z0, mode="oracle-flow", n_steps=1, t0=0.0, z1=None, oracle_cfg=None):
    """Integrate ``n_steps`` steps from ``z0``.

    The returned trajectory has ``n_steps + 1`` points.  On failure the
    exception carries the partial trajectory in ``.trajectory``.
    """
    cfg = cfg or SolverConfig()
    z0 = np.asarray(z0, dtype=float)
    second = initialize_second_point(dl.sys, dl, z0, mode, t0, z1, oracle_cfg)
    if n_steps == 1:
        return Trajectory(np.stack([z0, second]), t0 + dl.tau * np.arange(2), np.zeros(2, int), np.zeros(2),
                          meta={"init_mode": mode})
    member = march(dl, cfg, z0, second, n_steps, t0)[0]
    member.trajectory.meta["init_mode"] = mode
    if member.error is not None:
        raise member.error
    return member.trajectory


def integrate_ensemble(dl, cfg, z0s, mode="oracle-flow", n_steps=1, t0=0.0, oracle_cfg=None, escape_radius=None):
    """Integrate many initial conditions together; failures are isolated per member."""
    cfg = cfg or SolverConfig()
    z0s = np.atleast_2d(np.asarray(z0s, dtype=float))
    second = initialize_second_point(dl.sys, dl, z0s, mode, t0, None, oracle_cfg)
    return march(dl, cfg, z0s, second, n_steps, t0, escape_radius)
