"""Run configuration shared by every CLI subcommand.

A config file is YAML (JSON is accepted as a subset) with flat top-level keys
and three nested sections::

    system: fieldline
    epsilon: 0.0075
    order: L1
    n_steps: 2000
    solver: {residual_tol: 1.0e-12, max_iterations: 50}
    quadrature: {points_per_panel: 8}
    oracle: {abs_tol: 1.0e-12, rel_tol: 1.0e-12}

Command-line flags override values read from the file.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np
import yaml

from .errors import ConfigError
from .lagrangian import QuadratureRule, normalize_order
from .oracle import OracleConfig
from .stepper import INIT_MODES, SolverConfig
from .systems import DEFAULT_TAU, list_systems

FORMATS = ("csv", "json")


def _section(cls, data, name):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}] section: {exc}") from exc


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.

    ``tau`` of ``None`` resolves to the system default (``2 pi`` for the
    fieldline so each step is a Poincare map).  ``seed_grid`` is
    ``"rmin:rmax:count[:theta]"`` or a comma-separated list of radii.
    """

    system: Optional[str] = None
    epsilon: float = 0.0
    tau: Optional[float] = None
    order: str = "L1"
    n_steps: int = 100
    initial_conditions: List[List[float]] = field(default_factory=lambda: [[1.2, 0.0]])
    initial_conditions_file: Optional[str] = None
    init_mode: str = "oracle-flow"
    second_point: Optional[List[float]] = None
    seed_grid: str = "0.3:2.0:30"
    epsilons: List[float] = field(default_factory=lambda: [1e-4, 3e-4, 1e-3, 3e-3, 1e-2])
    escape_radius: float = 10.0
    check_steps: int = 10
    tangent_samples: int = 20
    random_seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    solver: SolverConfig = field(default_factory=SolverConfig)
    quadrature: QuadratureRule = field(default_factory=QuadratureRule)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    # -------------------------------------------------------- building

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        nested = {
            "solver": _section(SolverConfig, data.pop("solver", None), "solver"),
            "quadrature": _section(QuadratureRule, data.pop("quadrature", None), "quadrature"),
            "oracle": _section(OracleConfig, data.pop("oracle", None), "oracle"),
        }
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**data, **nested)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    # ------------------------------------------------------ resolution

    def resolved(self):
        """Validated copy with defaults filled in."""
        if not self.system:
            raise ConfigError("no system given; use --system or a config file")
        if self.system not in list_systems():
            raise ConfigError(f"unknown system {self.system!r}; known: {', '.join(list_systems())}")
        try:
            eps = float(self.epsilon)
            tau = float(self.tau) if self.tau is not None else DEFAULT_TAU[self.system]
            order = normalize_order(self.order)
            n_steps = int(self.n_steps)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not eps >= 0:
            raise ConfigError("epsilon must be >= 0")
        if not tau > 0:
            raise ConfigError("tau must be positive")
        if n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(f"unknown init mode {self.init_mode!r}; expected one of {INIT_MODES}")
        if self.init_mode == "user-supplied" and self.second_point is None:
            raise ConfigError("init_mode user-supplied needs second_point")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        out = RunConfig(**{f.name: getattr(self, f.name) for f in fields(self)})
        out.epsilon, out.tau, out.order, out.n_steps = eps, tau, order, n_steps
        out.initial_conditions = self.initial_points().tolist()
        out.initial_conditions_file = None
        return out

    def initial_points(self):
        if self.initial_conditions_file:
            try:
                pts = np.loadtxt(self.initial_conditions_file, delimiter=",", ndmin=2, comments="#")
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read initial conditions: {exc}") from exc
        else:
            pts = np.atleast_2d(np.asarray(self.initial_conditions, dtype=float))
        if pts.size == 0 or pts.shape[1] % 2 or not np.all(np.isfinite(pts)):
            raise ConfigError("initial conditions must be finite rows of even length")
        return pts

    def seed_points(self):
        """Poincare seeds ``(M, 2)`` from ``seed_grid``."""
        spec = str(self.seed_grid).strip()
        theta = 0.0
        try:
            if ":" in spec:
                parts = [float(p) for p in spec.split(":")]
                if len(parts) not in (3, 4):
                    raise ValueError("expected rmin:rmax:count[:theta]")
                if len(parts) == 4:
                    theta = parts[3]
                radii = np.linspace(parts[0], parts[1], int(parts[2]))
            else:
                radii = np.array([float(p) for p in spec.split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad seed grid {spec!r}: {exc}") from exc
        if radii.size == 0 or np.any(radii < 0):
            raise ConfigError(f"bad seed grid {spec!r}")
        return np.stack([radii * np.cos(theta), radii * np.sin(theta)], axis=1)
