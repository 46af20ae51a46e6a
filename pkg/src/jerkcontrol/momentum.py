"""Centroidal momentum model and a momentum-level plant.

Momentum ``H = [linear; angular]`` about the center of mass obeys
``Hdot = A f - m g e3`` where ``A`` stacks one 6x6 block per contact. The
plant integrates that law together with the CoM (``com_dot = H_lin / m``)
and the integral of the momentum error.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .linalg import skew
from .wrench import ContactGeometry, as_stack, phi, stack_gradient, stack_phi

E3 = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class ContactFrame:
    """World-aligned planar contact: origin, origin velocity and foot geometry."""

    origin: np.ndarray
    geometry: ContactGeometry = field(default_factory=ContactGeometry)
    origin_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("origin", "origin_velocity"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise InvalidInputError(f"ContactFrame.{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)

    @property
    def rigid(self):
        return not np.any(self.origin_velocity)


@dataclass(frozen=True)
class MomentumState:
    H: np.ndarray
    com: np.ndarray
    m: float
    I_err: np.ndarray = field(default_factory=lambda: np.zeros(6))
    zeta: np.ndarray = field(default_factory=lambda: np.zeros(6))
    g: float = 9.81

    def __post_init__(self):
        for name, n in (("H", 6), ("com", 3), ("I_err", 6), ("zeta", 6)):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (n,):
                raise InvalidInputError(f"MomentumState.{name} must have {n} entries")
            object.__setattr__(self, name, v)
        if not self.m > 0:
            raise InvalidInputError("mass must be positive")

    @property
    def com_velocity(self):
        return self.H[:3] / self.m

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.H))
            and np.all(np.isfinite(self.com))
            and np.all(np.isfinite(self.I_err))
            and np.all(np.isfinite(self.zeta))
        )


def contact_map(frames, com):
    """``A = [A_1 ... A_nc]`` with ``A_k = [[I, 0], [S(o_k - com), I]]``."""
    if not frames:
        raise InvalidInputError("at least one contact frame is required")
    com = np.asarray(com, dtype=float)
    A = np.zeros((6, 6 * len(frames)))
    for k, fr in enumerate(frames):
        c = 6 * k
        A[:3, c:c + 3] = np.eye(3)
        A[3:, c:c + 3] = skew(fr.origin - com)
        A[3:, c + 3:c + 6] = np.eye(3)
    return A


def contact_map_dot(frames, com_velocity):
    """Time derivative of :func:`contact_map`; only lower-left blocks are nonzero."""
    if not frames:
        raise InvalidInputError("at least one contact frame is required")
    v = np.asarray(com_velocity, dtype=float)
    Ad = np.zeros((6, 6 * len(frames)))
    for k, fr in enumerate(frames):
        Ad[3:, 6 * k:6 * k + 3] = skew(fr.origin_velocity - v)
    return Ad


def hdot(f, A, m, g=9.81):
    """Momentum rate ``A f - m g e3``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    A = np.asarray(A, dtype=float)
    if A.shape != (6, f.size):
        raise InvalidInputError(f"A has shape {A.shape}, f has {f.size} entries")
    return A @ f - m * g * E3


def hddot(xi, xi_dot, f, A, A_dot, geoms):
    """Momentum acceleration ``A Phi(xi) xi_dot + A_dot f``.

    ``f`` must equal ``stack_phi(xi, geoms)``; this is asserted unless Python
    runs with ``-O``.
    """
    xis = as_stack(xi)
    xi_dot = np.asarray(xi_dot, dtype=float).reshape(-1)
    f = np.asarray(f, dtype=float).reshape(-1)
    n = xis.size
    if xi_dot.size != n or f.size != n or np.shape(A) != (6, n) or np.shape(A_dot) != (6, n):
        raise InvalidInputError("dimension mismatch between xi, xi_dot, f, A and A_dot")
    assert np.allclose(stack_phi(xis, geoms).reshape(-1), f, rtol=1e-8, atol=1e-8), \
        "f is not phi(xi)"
    Phi = stack_gradient(xis, geoms)
    return A @ (Phi @ xi_dot) + A_dot @ f


def _constant(v):
    return lambda t: v


def _rk4(fn, x, t, h):
    k1 = fn(t, x)
    k2 = fn(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = fn(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = fn(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _euler(fn, x, t, h):
    return x + h * fn(t, x)


INTEGRATORS = {"rk4": _rk4, "euler": _euler}


def plant_step(state, frames, xi, dt, disturbance=None, *, xi_dot=None,
               h_ref=None, t=0.0, integrator="rk4"):
    """Advance the momentum plant by ``dt``.

    The applied wrench is ``phi(xi + xi_dot * s)`` at time ``t + s``, which
    models a zero-order hold on ``xi_dot``. ``h_ref(t)`` supplies the
    reference momentum whose error is integrated into ``I_err``; without it
    the reference is zero. Contact frames are fixed in the world.
    """
    if not dt > 0:
        raise InvalidInputError("dt must be positive")
    xis = as_stack(xi)
    geoms = [fr.geometry for fr in frames]
    if len(geoms) != len(xis):
        raise InvalidInputError(f"{len(xis)} xi blocks for {len(frames)} frames")
    rate = np.zeros_like(xis) if xi_dot is None else np.asarray(xi_dot, dtype=float).reshape(xis.shape)
    if callable(disturbance):
        disturb = disturbance
    else:
        d = np.zeros(6) if disturbance is None else np.asarray(disturbance, dtype=float).reshape(6)
        disturb = _constant(d)
    ref = h_ref if h_ref is not None else _constant(np.zeros(6))
    m, g = state.m, state.g
    t0 = t

    origins = np.array([fr.origin for fr in frames])
    shared = all(gk == geoms[0] for gk in geoms)

    def wrenches(s):
        if shared:
            return phi(xis + rate * s, geoms[0])
        return np.stack([phi(xk + rk * s, gk) for xk, rk, gk in zip(xis, rate, geoms)])

    def deriv(tt, x):
        H, com = x[:6], x[6:9]
        f = wrenches(tt - t0)
        out = np.empty(15)
        # A f without forming A
        out[:3] = f[:, :3].sum(axis=0)
        out[3:6] = np.cross(origins - com, f[:, :3]).sum(axis=0) + f[:, 3:].sum(axis=0)
        out[:6] += disturb(tt) - m * g * E3
        out[6:9] = H[:3] / m
        out[9:] = H - ref(tt)
        return out

    x0 = np.concatenate([state.H, state.com, state.I_err])
    x1 = INTEGRATORS[integrator](deriv, x0, t, dt)
    return replace(state, H=x1[:6], com=x1[6:9], I_err=x1[9:])
