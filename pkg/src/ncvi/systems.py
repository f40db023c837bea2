"""Built-in perturbed systems with all closed-form ingredients installed.

``rotor-oscillator``
    theta = y dx, H = y^2/2, h = x^2/2: a free rotor perturbed into a harmonic
    oscillator of frequency sqrt(epsilon).
``fieldline``
    theta = (x^2+y^2)(y dx - x dy), H = (2/9)(x^2+y^2)^3,
    h_t = x sin t + x^2 sin t: a field-line flow whose unperturbed rotation
    frequency at radius R is R^2/3.
"""

import numpy as np

from .errors import EpsilonZero, UnknownSystem
from .phasespace import SystemSpec


def _xy(z):
    return z[..., 0], z[..., 1]


def _stack(a, b):
    a, b = np.broadcast_arrays(a, b)
    return np.stack([a, b], axis=-1)


def _mat(a, b, c, d):
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    return np.stack([np.stack([a, b], axis=-1), np.stack([c, d], axis=-1)], axis=-2)


# ---------------------------------------------------------------- rotor

def _rotor_theta(z):
    x, y = _xy(z)
    return _stack(y, 0.0 * x)


def _rotor_theta_jac(z):
    x, _ = _xy(z)
    zero = 0.0 * x
    return _mat(zero, zero, zero + 1.0, zero)


def _rotor_H(z, t):
    return 0.5 * z[..., 1] ** 2 + 0.0 * np.asarray(t)


def _rotor_grad_H(z, t):
    x, y = _xy(z)
    return _stack(0.0 * x + 0.0 * np.asarray(t), y)


def _rotor_h(z, t):
    return 0.5 * z[..., 0] ** 2 + 0.0 * np.asarray(t)


def _rotor_grad_h(z, t):
    x, y = _xy(z)
    return _stack(x + 0.0 * np.asarray(t), 0.0 * y)


def _rotor_F(z, t, s):
    x, y = _xy(z)
    return _stack(x + (np.asarray(t) - s) * y, y + 0.0 * np.asarray(t))


def _rotor_flow_jac(z, t, s):
    dt = np.asarray(t) - s
    one = np.ones(np.broadcast_shapes(z.shape[:-1], np.shape(dt)))
    return _mat(one, dt * one, 0.0 * one, one)


def _rotor_pairing(z1, z2):
    return 0.5 * (z2[..., 0] - z1[..., 0]) * (z1[..., 1] + z2[..., 1])


def _rotor_pairing_grad(z1, z2):
    x1, y1 = _xy(z1)
    x2, y2 = _xy(z2)
    d1 = _stack(-0.5 * (y1 + y2), 0.5 * (x2 - x1))
    d2 = _stack(0.5 * (y1 + y2), 0.5 * (x2 - x1))
    return d1, d2


def rotor_linf_closed(epsilon, tau):
    """Closed-form exact discrete Lagrangian of the rotor (gauge terms dropped)."""
    if epsilon <= 0.0:
        raise EpsilonZero("the closed-form rotor Lagrangian requires epsilon > 0")
    w = np.sqrt(epsilon)
    c, s = np.cos(w * tau), np.sin(w * tau)

    def L(z1, z2, t=0.0):
        x1, y1 = _xy(z1)
        x2, y2 = _xy(z2)
        return -0.5 * (y2 * x1 - y1 * x2) * c - 0.5 * (y2 * y1 / w + w * x2 * x1) * s

    return L


def sho_flow(z, t, s, epsilon):
    """Exact flow of the rotor-oscillator, mapping time ``s`` to time ``t``."""
    z = np.asarray(z)
    w = np.sqrt(epsilon)
    dt = np.asarray(t) - s
    x, y = _xy(z)
    if w == 0.0:
        return _stack(x + dt * y, y + 0.0 * dt)
    c, sn = np.cos(w * dt), np.sin(w * dt)
    return _stack(x * c + y / w * sn, y * c - w * x * sn)


def make_rotor(epsilon=0.0):
    return SystemSpec(
        n=2,
        theta=_rotor_theta,
        theta_jac=_rotor_theta_jac,
        H=_rotor_H,
        grad_H=_rotor_grad_H,
        h=_rotor_h,
        grad_h=_rotor_grad_h,
        F=_rotor_F,
        flow_jac=_rotor_flow_jac,
        pairing_f=_rotor_pairing,
        pairing_grad=_rotor_pairing_grad,
        epsilon=float(epsilon),
        name="rotor-oscillator",
    )


# ------------------------------------------------------------ fieldline

def _fl_theta(z):
    x, y = _xy(z)
    r2 = x * x + y * y
    return _stack(r2 * y, -r2 * x)


def _fl_theta_jac(z):
    x, y = _xy(z)
    return _mat(2 * x * y, -(3 * x * x + y * y), x * x + 3 * y * y, -2 * x * y)


def _fl_H(z, t):
    x, y = _xy(z)
    return (2.0 / 9.0) * (x * x + y * y) ** 3 + 0.0 * np.asarray(t)


def _fl_grad_H(z, t):
    x, y = _xy(z)
    c = (4.0 / 3.0) * (x * x + y * y) ** 2 + 0.0 * np.asarray(t)
    return _stack(c * x, c * y)


def _fl_h(z, t):
    x = z[..., 0]
    return (x + x * x) * np.sin(t)


def _fl_grad_h(z, t):
    x, y = _xy(z)
    st = np.sin(t)
    return _stack((1.0 + 2.0 * x) * st, 0.0 * y * st)


def _fl_angle(z, t, s):
    x, y = _xy(z)
    return (x * x + y * y) * (np.asarray(t) - s) / 3.0


def _fl_F(z, t, s):
    x, y = _xy(z)
    phi = _fl_angle(z, t, s)
    c, sn = np.cos(phi), np.sin(phi)
    return _stack(x * c + y * sn, -x * sn + y * c)


def _fl_flow_jac(z, t, s):
    x, y = _xy(z)
    dt = np.asarray(t) - s
    phi = _fl_angle(z, t, s)
    c, sn = np.cos(phi), np.sin(phi)
    u = x * c + y * sn
    v = -x * sn + y * c
    px = 2.0 * x * dt / 3.0
    py = 2.0 * y * dt / 3.0
    return _mat(c + v * px, sn + v * py, -sn - u * px, c - u * py)


def _fl_pairing(z1, z2):
    x1, y1 = _xy(z1)
    x2, y2 = _xy(z2)
    q = x1 * x1 + x1 * x2 + x2 * x2 + y1 * y1 + y1 * y2 + y2 * y2
    return (x2 * y1 - x1 * y2) * q / 3.0


def _fl_pairing_grad(z1, z2):
    x1, y1 = _xy(z1)
    x2, y2 = _xy(z2)
    a = x2 * y1 - x1 * y2
    q = x1 * x1 + x1 * x2 + x2 * x2 + y1 * y1 + y1 * y2 + y2 * y2
    d1 = _stack((-y2 * q + a * (2 * x1 + x2)) / 3.0, (x2 * q + a * (2 * y1 + y2)) / 3.0)
    d2 = _stack((y1 * q + a * (x1 + 2 * x2)) / 3.0, (-x1 * q + a * (y1 + 2 * y2)) / 3.0)
    return d1, d2


def make_fieldline(epsilon=0.0):
    return SystemSpec(
        n=2,
        theta=_fl_theta,
        theta_jac=_fl_theta_jac,
        H=_fl_H,
        grad_H=_fl_grad_H,
        h=_fl_h,
        grad_h=_fl_grad_h,
        F=_fl_F,
        flow_jac=_fl_flow_jac,
        pairing_f=_fl_pairing,
        pairing_grad=_fl_pairing_grad,
        epsilon=float(epsilon),
        name="fieldline",
        params={"period": 2.0 * np.pi},
    )


def fieldline_frequency(R):
    """Unperturbed rotation frequency (per unit time) at radius ``R``."""
    return np.asarray(R) ** 2 / 3.0


BUILTINS = {
    "rotor-oscillator": make_rotor,
    "fieldline": make_fieldline,
}

DEFAULT_TAU = {"rotor-oscillator": 1.0, "fieldline": 2.0 * np.pi}


def make_builtin(name, epsilon=0.0):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return factory(epsilon)


def list_systems():
    return sorted(BUILTINS)
