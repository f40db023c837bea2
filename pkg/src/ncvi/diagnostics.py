"""Structure-preservation, energy and convergence diagnostics.

The discrete one-forms on the product ``M x M`` are

    theta1^k(z1, z2) = ( D1 L(z1, z2, tau k), 0 )
    theta2^k(z1, z2) = ( 0, -D2 L(z1, z2, tau k) )

and their common exterior derivative ``omega^k`` is the two-form conserved
by the pair map ``(z_k, z_{k+1}) -> (z_{k+1}, z_{k+2})``.
"""

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _fd
from .errors import ConfigError, NonConvergence, SingularJacobian
from .oracle import OracleConfig, oracle_flow
from .stepper import SolverConfig, newton_batch, step_time

# Fits below this coefficient of determination are reported as inconclusive.
R2_MIN = 0.99


@dataclass
class ConvergenceRow:
    epsilon: float
    error: float


@dataclass
class ConvergenceTable:
    order: str
    rows: List[ConvergenceRow]
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    fit_residual: Optional[float] = None
    conclusive: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def epsilons(self):
        return np.array([r.epsilon for r in self.rows])

    @property
    def errors(self):
        return np.array([r.error for r in self.rows])


@dataclass
class DiagnosticsReport:
    """Container for everything a ``check`` or ``converge`` run produces."""

    energy_series: list = field(default_factory=list)
    symplectic_defects: dict = field(default_factory=dict)
    convergence_table: Optional[ConvergenceTable] = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


# ------------------------------------------------------------ one-forms

def _pair(z1, z2):
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
    return z1, z2


def discrete_one_form(dl, z1, z2, k=0, slot=1, t0=0.0):
    """``theta_slot^k`` at ``(z1, z2)`` as a covector of length ``2n``."""
    z1, z2 = _pair(z1, z2)
    t = step_time(dl, k, t0)
    if slot == 1:
        g = dl.slot1_gradient(z1, z2, t)
        return np.concatenate([g, np.zeros_like(g)], axis=-1)
    if slot == 2:
        g = dl.slot2_gradient(z1, z2, t)
        return np.concatenate([np.zeros_like(g), -g], axis=-1)
    raise ValueError(f"slot must be 1 or 2, got {slot!r}")


def full_gradient_fd(dl, z1, z2, k=0, t0=0.0, rel=1e-4):
    """Fourth-order central-difference gradient of ``L`` on the product,
    independent of the slot-gradient machinery."""
    z1, z2 = _pair(z1, z2)
    n = z1.shape[-1]
    t = step_time(dl, k, t0)
    Z = np.concatenate([z1, z2], axis=-1)
    return _fd.central_gradient4(lambda P: np.real(dl.evaluate(P[..., :n], P[..., n:], t)), Z, rel)


def two_form(dl, z1, z2, k=0, slot=1, t0=0.0):
    """``omega = D theta - D theta^T`` of the slot one-form, by central
    differences, so that ``omega(u, v) = u . omega . v``."""
    z1, z2 = _pair(z1, z2)
    n = z1.shape[-1]
    Z = np.concatenate([z1, z2], axis=-1)
    J = _fd.central_jacobian(lambda P: discrete_one_form(dl, P[..., :n], P[..., n:], k, slot, t0), Z)
    # J[a, b] = d theta_a / d Z_b
    return np.swapaxes(J, -1, -2) - J


def _pair_orbit(dl, cfg, z1, z2, k_from, k_to, t0):
    """Advance a batch of pairs from index ``k_from`` to ``k_to``."""
    zp, zc = np.atleast_2d(z1).copy(), np.atleast_2d(z2).copy()
    for k in range(k_from, k_to):
        zn, _, nrm, status = newton_batch(dl, cfg, zp, zc, k + 1, t0)
        if np.any(status == 2):
            raise SingularJacobian(f"singular Newton Jacobian at step {k + 1}", step_index=k + 2)
        if np.any(status != 0):
            j = int(np.argmax(nrm))
            raise NonConvergence(f"Newton did not converge at step {k + 1} (residual {nrm[j]:.3e})",
                                 best=zn[j], residual=float(nrm[j]), step_index=k + 2)
        zp, zc = zc, zn
    return zp, zc


def _one_step_jacobian(dl, cfg, z1, z2, k, t0, rel):
    n = z1.size
    Z = np.concatenate([z1, z2])
    h = _fd.steps(Z, rel)
    H = np.diag(h)
    P = np.concatenate([Z + 2 * H, Z + H, Z - H, Z - 2 * H])
    a, b = _pair_orbit(dl, cfg, P[:, :n], P[:, n:], k, k + 1, t0)
    out = np.concatenate([a, b], axis=1).reshape(4, 2 * n, 2 * n)
    # fourth-order stencil: the map is only known to the Newton tolerance,
    # so a wide stencil with small truncation error beats a narrow one
    D = (-out[0] + 8 * out[1] - 8 * out[2] + out[3]) / (12.0 * h[:, None])
    return D.T


def pair_map_jacobian(dl, cfg, z1, z2, k_from, k_to, t0=0.0, rel=1e-4):
    """Jacobian of the composed pair map, shape ``(2n, 2n)``.

    Built by the chain rule from finite-difference Jacobians of single steps
    along the orbit; differencing the composed map directly loses accuracy
    quickly because shear inflates its higher derivatives.
    """
    zp = np.asarray(z1, dtype=float)
    zc = np.asarray(z2, dtype=float)
    DF = np.eye(2 * zp.size)
    for k in range(k_from, k_to):
        DF = _one_step_jacobian(dl, cfg, zp, zc, k, t0, rel) @ DF
        a, b = _pair_orbit(dl, cfg, zp, zc, k, k + 1, t0)
        zp, zc = a[0], b[0]
    return DF


def _unit_sphere(rng, count, dim):
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def symplectic_defect(dl, cfg=None, z1=None, z2=None, k_from=0, k_to=10, n_tangent_samples=20,
                      seed=0, t0=0.0):
    """Sampled defect ``|omega^{k_to}(DF u, DF v) - omega^{k_from}(u, v)|``.

    Returns a dict with ``max``, ``mean``, the per-sample ``defects``, the
    ``seed`` and the end pair of the orbit.
    """
    cfg = cfg or SolverConfig()
    if k_to <= k_from:
        raise ConfigError("k_to must exceed k_from")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    n = z1.size
    w_end = _pair_orbit(dl, cfg, z1, z2, k_from, k_to, t0)
    DF = pair_map_jacobian(dl, cfg, z1, z2, k_from, k_to, t0)
    om0 = two_form(dl, z1, z2, k_from, 1, t0)
    om1 = two_form(dl, w_end[0][0], w_end[1][0], k_to, 1, t0)
    rng = np.random.default_rng(seed)
    U = _unit_sphere(rng, n_tangent_samples, 2 * n)
    V = _unit_sphere(rng, n_tangent_samples, 2 * n)
    before = np.einsum("si,ij,sj->s", U, om0, V)
    after = np.einsum("si,ij,sj->s", U @ DF.T, om1, V @ DF.T)
    d = np.abs(after - before)
    return {"max": float(d.max()), "mean": float(d.mean()), "defects": d.tolist(), "seed": seed,
            "k_from": k_from, "k_to": k_to, "n_tangent_samples": n_tangent_samples}


# --------------------------------------------------------------- energy

def energy_drift(sys, traj, sample_stride=1):
    """``(step, H_t(z) + eps h_t(z))`` sampled every ``sample_stride`` points."""
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    idx = np.arange(0, len(traj.t), max(1, int(sample_stride)))
    E = sys.total_hamiltonian(traj.z[idx], traj.t[idx])
    return [(int(i), float(e)) for i, e in zip(idx, E)]


def drift_envelope(series):
    """Largest excursion of the energy from its initial value."""
    E = np.array([e for _, e in series])
    return float(np.max(np.abs(E - E[0])))


# ----------------------------------------------------------- convergence

def fit_loglog(epsilons, errors):
    """Least-squares fit of ``log10 error = slope log10 eps + c``.

    Returns ``(slope, intercept, r_squared, rms_residual)``.
    """
    x = np.log10(np.asarray(epsilons, dtype=float))
    y = np.log10(np.asarray(errors, dtype=float))
    (slope, c), res, *_ = np.polyfit(x, y, 1, full=True)
    fitted = slope * x + c
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(c), r2, float(np.sqrt(ss_res / len(x)))


def one_step_error(dl, z0, solver_cfg=None, oracle_cfg=None, t0=0.0):
    """Error of one DEL step after an oracle-initialized first point.

    The pair ``(z0, z1)`` with ``z1`` the oracle image of ``z0`` is advanced
    once; the result is compared with the oracle image of ``z1``.
    """
    sys = dl.sys
    oracle_cfg = oracle_cfg or OracleConfig()
    z0 = np.asarray(z0, dtype=float)
    t1, t2 = t0 + dl.tau, t0 + 2 * dl.tau
    z1 = oracle_flow(sys, z0, t0, t1, oracle_cfg)
    ref = oracle_flow(sys, z1, t1, t2, oracle_cfg)
    zn, _, nrm, status = newton_batch(dl, solver_cfg or SolverConfig(), z0[None], z1[None], 1, t0)
    if status[0] != 0:
        raise NonConvergence(f"one-step Newton failed (residual {nrm[0]:.3e})", best=zn[0],
                             residual=float(nrm[0]), step_index=2)
    return float(np.linalg.norm(zn[0] - ref))


def convergence_study(sys_template, l_order, epsilons: Sequence[float], z0, tau, quad=None,
                      solver_cfg=None, oracle_cfg=None):
    """Local one-step error against epsilon with a log-log slope fit."""
    from .lagrangian import make_lagrangian, normalize_order

    eps = [float(e) for e in epsilons]
    if len(eps) == 0 or any(not e > 0 for e in eps):
        raise ConfigError("epsilons must be a non-empty list of positive numbers")
    order = normalize_order(l_order)
    rows = []
    for e in eps:
        dl = make_lagrangian(sys_template.with_epsilon(e), order, tau, quad)
        rows.append(ConvergenceRow(e, one_step_error(dl, z0, solver_cfg, oracle_cfg)))
    table = ConvergenceTable(order, rows)
    if len(set(eps)) < 2:
        table.notes.append("single epsilon: no slope fitted")
        return table
    if np.log10(max(eps) / min(eps)) < 2.0:
        table.notes.append("epsilons span less than two decades")
    errs = table.errors
    if np.any(errs <= 0):
        table.notes.append("zero error encountered: no slope fitted")
        return table
    table.slope, table.intercept, table.r_squared, table.fit_residual = fit_loglog(table.epsilons, errs)
    table.conclusive = table.r_squared >= R2_MIN
    if not table.conclusive:
        table.notes.append(f"fit inconclusive: R^2 = {table.r_squared:.4f} < {R2_MIN}")
    return table


# ------------------------------------------------------ rotation numbers

def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def angle_increments(z, advance_hint=None):
    """Lifted polar-angle increments along an orbit ``(N, 2)``.

    Raw increments are only known modulo ``2 pi``; ``advance_hint`` (scalar
    or per-step) selects the branch closest to an expected advance, e.g. the
    unperturbed rotation per step.  Without a hint the principal branch is used.
    """
    z = np.asarray(z, dtype=float)
    theta = np.arctan2(z[:, 1], z[:, 0])
    raw = np.diff(theta)
    if advance_hint is None:
        return _wrap(raw)
    hint = np.broadcast_to(np.asarray(advance_hint, dtype=float), raw.shape)
    return hint + _wrap(raw - hint)


def running_rotation_number(z, advance_hint=None, clockwise=True):
    """Cumulative rotation number ``nu_k`` (turns per step) after ``k`` steps."""
    d = angle_increments(z, advance_hint)
    if clockwise:
        d = -d
    return np.cumsum(d) / (2.0 * np.pi * np.arange(1, len(d) + 1))


def longest_run(mask):
    """Length of the longest run of consecutive ``True`` values."""
    best = cur = 0
    for m in np.asarray(mask, dtype=bool):
        cur = cur + 1 if m else 0
        best = max(best, cur)
    return best


def find_plateau(nu, target, tol=5e-3, min_run=20, skip=20):
    """Whether ``|nu_k - target| < tol`` holds for ``min_run`` consecutive
    iterates after the first ``skip`` (where the running mean is still noisy)."""
    nu = np.asarray(nu)[skip:]
    return longest_run(np.abs(nu - target) < tol) >= min_run


def unperturbed_advance(sys, z, t, tau, substeps=64):
    """Polar-angle advance of ``F`` over one step, lifted by substepping.

    Used as the branch hint for :func:`angle_increments`; ``substeps`` must be
    large enough that each substep turns by less than ``pi``.
    """
    z = np.asarray(z, dtype=float)
    t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
    total = np.zeros(z.shape[:-1])
    prev = np.arctan2(z[..., 1], z[..., 0])
    for j in range(1, substeps + 1):
        p = sys.F(z, t + tau * j / substeps, t)
        cur = np.arctan2(p[..., 1], p[..., 0])
        total += _wrap(cur - prev)
        prev = cur
    return total


def orbit_rotation_numbers(sys, z, t, tau):
    """Running rotation numbers (clockwise turns per step) of one orbit."""
    z = np.asarray(z, dtype=float)
    hint = unperturbed_advance(sys, z[:-1], np.asarray(t)[:-1], tau)
    return running_rotation_number(z, hint, clockwise=True)
