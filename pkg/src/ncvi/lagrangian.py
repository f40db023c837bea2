"""Truncated discrete Lagrangians ``L0``, ``L1``, ``L2`` and the closed-form rotor ``Linf``.

Every Lagrangian is a two-point function ``L(z1, z2, t)`` for a step from time
``t`` to ``t + tau``.  With ``w = F(z2, t, t + tau)`` (the second point pulled
back to the start of the step) and ``K_s = h_s o F(., s, t)``:

* ``L0 = f(z1, w) + int_t^{t+tau} Lscr_s(F(z2, s, t+tau)) ds``
* ``L1 = L0 + eps * [first-order corrections split at the step midpoint]``
* ``L2 = L1 + eps^2 * [nested Lie-derivative corrections on two triangles and a
  rectangle of the (s, a) plane]``

Gauge terms that telescope out of the action sum are dropped at every order,
so raw values of ``L`` are defined only up to a per-endpoint function; slot
gradients of sums (DEL residuals) and mixed second derivatives are unaffected.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import _fd
from .errors import ConfigError
from .phasespace import (
    pairing_f,
    pairing_gradients,
    pulled_perturbation,
    script_L,
)

ORDERS = ("L0", "L1", "L2", "Linf")
_ORDER_ALIASES = {"0": "L0", "1": "L1", "2": "L2", "inf": "Linf", "linf": "Linf", "linfclosed": "Linf"}


def normalize_order(order):
    key = str(order).strip()
    if key in ORDERS:
        return key
    try:
        return _ORDER_ALIASES[key.lower()]
    except KeyError:
        try:
            return _ORDER_ALIASES[key.lower().lstrip("l")]
        except KeyError:
            raise ConfigError(f"unknown order {order!r}; expected one of 0, 1, 2, inf") from None


@lru_cache(maxsize=None)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule used on every integration panel."""

    points_per_panel: int = 8

    def __post_init__(self):
        if int(self.points_per_panel) < 2:
            raise ConfigError("points_per_panel must be >= 2")

    @property
    def nodes(self):
        return _leggauss(int(self.points_per_panel))[0]

    @property
    def weights(self):
        return _leggauss(int(self.points_per_panel))[1]

    def unit(self):
        """Nodes and weights mapped to [0, 1]."""
        x, w = _leggauss(int(self.points_per_panel))
        return 0.5 * (x + 1.0), 0.5 * w

    def panel(self, a, b):
        """Nodes/weights on ``[a, b]``; a trailing node axis is appended to ``a``'s shape."""
        v, wv = self.unit()
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        return a + (b - a) * v, (b - a) * wv


@dataclass(frozen=True)
class DiscreteLagrangian:
    """Evaluatable truncated discrete Lagrangian.

    Parameters
    ----------
    sys : SystemSpec
    order : {"L0", "L1", "L2", "Linf"}
    tau : float
        Time step.
    quad : QuadratureRule
    closed_form : callable, optional
        ``(z1, z2, t) -> value``; required for ``Linf``.
    gradient_method : {"complex", "central"}
        How slot gradients are formed.  ``"complex"`` (complex step) is exact to
        round-off for complex-safe system callables; ``"central"`` uses central
        differences.
    analytic_gradients : callable, optional
        ``(z1, z2, t) -> (D1 L, D2 L)`` overriding both methods.
    """

    sys: object
    order: str
    tau: float
    quad: QuadratureRule = QuadratureRule()
    closed_form: Optional[Callable] = None
    gradient_method: str = "complex"
    analytic_gradients: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "order", normalize_order(self.order))
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.order == "Linf" and self.closed_form is None:
            raise ConfigError("order Linf needs a closed_form Lagrangian")
        if self.gradient_method not in ("complex", "central"):
            raise ConfigError(f"unknown gradient_method {self.gradient_method!r}")

    def evaluate(self, z1, z2, t=0.0):
        return _EVALUATORS[self.order](self, z1, z2, t)

    __call__ = evaluate

    def _gradient(self, fun, z):
        if self.gradient_method == "complex":
            return _fd.complex_step_gradient(fun, z)
        return _fd.central_gradient(fun, z)

    def slot1_gradient(self, z1, z2, t=0.0):
        z1, z2 = np.broadcast_arrays(np.asarray(z1), np.asarray(z2))
        if self.analytic_gradients is not None:
            return self.analytic_gradients(z1, z2, t)[0]
        return self._gradient(lambda zz: self.evaluate(zz, z2, t), z1)

    def slot2_gradient(self, z1, z2, t=0.0):
        z1, z2 = np.broadcast_arrays(np.asarray(z1), np.asarray(z2))
        if self.analytic_gradients is not None:
            return self.analytic_gradients(z1, z2, t)[1]
        return self._gradient(lambda zz: self.evaluate(z1, zz, t), z2)

    def partial_gradients(self, z1, z2, t=0.0):
        return self.slot1_gradient(z1, z2, t), self.slot2_gradient(z1, z2, t)

    def mixed_hessian(self, z1, z2, t=0.0):
        """``M[..., i, j] = d^2 L / d z1_i d z2_j``."""
        z1 = np.asarray(z1)
        return _fd.central_jacobian(lambda zz: self.slot1_gradient(z1, zz, t), np.asarray(z2))


def _setup(dl, z1, z2, t):
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    t = np.asarray(t, dtype=float)
    T = t + dl.tau
    w = dl.sys.F(z2, t, T)
    return z1, z2, t, T, w


def _l0_value(dl, z1, z2, t, T, w):
    sys = dl.sys
    val = pairing_f(sys, z1, w, dl.quad.points_per_panel)
    s, ws = dl.quad.panel(t, T)
    pts = sys.F(z2[..., None, :], s, T[..., None])
    return val + np.sum(ws * script_L(sys, pts, s), axis=-1)


def eval_L0(dl, z1, z2, t=0.0):
    """Zeroth-order discrete Lagrangian (exact for the unperturbed flow)."""
    z1, z2, t, T, w = _setup(dl, z1, z2, t)
    return _l0_value(dl, z1, z2, t, T, w)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _first_order(dl, z1, w, t):
    """Node data shared by the first- and second-order corrections."""
    sys = dl.sys
    m = t + 0.5 * dl.tau
    T = t + dl.tau
    sA, wA = dl.quad.panel(m, T)
    sB, wB = dl.quad.panel(t, m)
    tn = t[..., None]
    KA, _, XA = pulled_perturbation(sys, w[..., None, :], sA, tn)
    KB, _, XB = pulled_perturbation(sys, z1[..., None, :], sB, tn)
    lA = _dot(sys.theta(w)[..., None, :], XA) - KA
    lB = _dot(sys.theta(z1)[..., None, :], XB) - KB
    d1f, d2f = pairing_gradients(sys, z1, w, dl.quad.points_per_panel)
    IA = np.sum(wA[..., None] * XA, axis=-2)
    IB = np.sum(wB[..., None] * XB, axis=-2)
    corr = np.sum(wA * lA, axis=-1) + np.sum(wB * lB, axis=-1) - _dot(d2f, IA) + _dot(d1f, IB)
    return dict(m=m, T=T, sA=sA, wA=wA, sB=sB, wB=wB, XA=XA, XB=XB,
                d1f=d1f, d2f=d2f, IA=IA, IB=IB, corr=corr)


def eval_L1(dl, z1, z2, t=0.0):
    """First-order discrete Lagrangian (local O(eps^2) integrator)."""
    z1, z2, t, T, w = _setup(dl, z1, z2, t)
    val = _l0_value(dl, z1, z2, t, T, w)
    eps = dl.sys.epsilon
    if eps == 0.0:
        return val
    return val + eps * _first_order(dl, z1, w, t)["corr"]


def _l_and_field(sys, t):
    def fun(zz, s):
        K, _, X = pulled_perturbation(sys, zz, s, t)
        l = _dot(sys.theta(zz), X) - K
        return np.concatenate([l[..., None], X], axis=-1)
    return fun


def pairing_hessian(sys, z1, z2, quad_points=8):
    """Blocks ``(H11, H22, M)`` of the pairing Hessian; ``M = d^2 f / dz1 dz2``."""
    z1, z2 = np.broadcast_arrays(np.asarray(z1), np.asarray(z2))
    n = z1.shape[-1]

    def grads(Z):
        d1, d2 = pairing_gradients(sys, Z[..., :n], Z[..., n:], quad_points)
        return np.concatenate([d1, d2], axis=-1)

    Hs = _fd.central_jacobian(grads, np.concatenate([z1, z2], axis=-1), rel=_fd.STEP2)
    return Hs[..., :n, :n], Hs[..., n:, n:], Hs[..., :n, n:]


def _second_order(dl, z1, w, t, fo):
    sys = dl.sys
    v, wv = dl.quad.unit()
    tn = t[..., None]
    tnn = t[..., None, None]
    m, T = fo["m"], fo["T"]
    sA, wA, sB, wB = fo["sA"], fo["wA"], fo["sB"], fo["wB"]

    # triangle A: m <= s <= T, s <= a <= T ; triangle B: t <= s <= m, t <= a <= s
    aA = sA[..., :, None] + (T[..., None, None] - sA[..., :, None]) * v
    WA = (wA * (T[..., None] - sA))[..., :, None] * wv
    aB = t[..., None, None] + (sB[..., :, None] - t[..., None, None]) * v
    WB = (wB * (sB - tn))[..., :, None] * wv

    _, _, XaA = pulled_perturbation(sys, w[..., None, None, :], aA, tnn)
    _, _, XaB = pulled_perturbation(sys, z1[..., None, None, :], aB, tnn)

    lf = _l_and_field(sys, tn)
    JA = _fd.central_jacobian(lambda zz: lf(zz, sA), w[..., None, :], rel=_fd.STEP2)
    JB = _fd.central_jacobian(lambda zz: lf(zz, sB), z1[..., None, :], rel=_fd.STEP2)
    gradlA, DXA = JA[..., 0, :], JA[..., 1:, :]
    gradlB, DXB = JB[..., 0, :], JB[..., 1:, :]

    H11, H22, M = pairing_hessian(sys, z1, w, dl.quad.points_per_panel)
    XA, XB = fo["XA"], fo["XB"]
    d1f, d2f = fo["d1f"], fo["d2f"]

    t1 = -np.einsum("...in,...ijn,...ij->...", gradlA, XaA, WA)
    t2 = np.einsum("...in,...ijn,...ij->...", gradlB, XaB, WB)
    t3 = (np.einsum("...ijn,...nm,...im,...ij->...", XaA, H22, XA, WA)
          + np.einsum("...n,...inm,...ijm,...ij->...", d2f, DXA, XaA, WA))
    t4 = (np.einsum("...ijn,...nm,...im,...ij->...", XaB, H11, XB, WB)
          + np.einsum("...n,...inm,...ijm,...ij->...", d1f, DXB, XaB, WB))
    t5 = -np.einsum("...n,...nm,...m->...", fo["IB"], M, fo["IA"])
    return t1 + t2 + t3 + t4 + t5


def eval_L2(dl, z1, z2, t=0.0):
    """Second-order discrete Lagrangian (local O(eps^3) integrator)."""
    z1, z2, t, T, w = _setup(dl, z1, z2, t)
    val = _l0_value(dl, z1, z2, t, T, w)
    eps = dl.sys.epsilon
    if eps == 0.0:
        return val
    # second-order terms need z1 and w on a common batch shape
    z1b, wb = np.broadcast_arrays(z1, w)
    tb = np.broadcast_to(t, z1b.shape[:-1])
    fo = _first_order(dl, z1b, wb, tb)
    return val + eps * fo["corr"] + eps ** 2 * _second_order(dl, z1b, wb, tb, fo)


def eval_Linf_closed(dl, z1, z2, t=0.0):
    """Closed-form exact Lagrangian installed on ``dl``."""
    if dl.closed_form is None:
        raise ConfigError("no closed-form Lagrangian installed")
    return dl.closed_form(np.asarray(z1), np.asarray(z2), t)


_EVALUATORS = {"L0": eval_L0, "L1": eval_L1, "L2": eval_L2, "Linf": eval_Linf_closed}


def make_lagrangian(sys, order, tau, quad=None, **kwargs):
    """Build a :class:`DiscreteLagrangian`, installing the rotor closed form for ``Linf``."""
    from .systems import rotor_linf_closed

    order = normalize_order(order)
    quad = quad or QuadratureRule()
    if order == "Linf" and kwargs.get("closed_form") is None:
        if sys.name != "rotor-oscillator":
            raise ConfigError("a closed-form Linf is only available for the rotor-oscillator")
        kwargs["closed_form"] = rotor_linf_closed(sys.epsilon, tau)
    return DiscreteLagrangian(sys=sys, order=order, tau=float(tau), quad=quad, **kwargs)
