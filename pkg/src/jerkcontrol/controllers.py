"""Momentum jerk control laws and the wrench-to-torque map.

Every law returns ``xi_dot``, the rate of the wrench parameters. Because the
applied wrenches are ``phi(xi)``, whatever ``xi_dot`` is commanded keeps them
contact-stable; the laws only decide how momentum is steered.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ActuationDeficiencyError, DegradedAuthorityError, InvalidInputError
from .linalg import is_spd, numerical_rank, nullspace_projector, pinv
from .momentum import E3, contact_map, contact_map_dot, hdot
from .wrench import (
    NO_SATURATION,
    OutOfDomainError,
    SaturationPolicy,
    as_stack,
    phi_inverse,
    stack_gradient,
    stack_phi,
    stack_phi_inverse,
)

RANK_TOL = 1e-8
CONTROL_MODES = ("fb-lin", "fb-lin+Ki", "lemma2", "lemma2+regularization")


class InfeasibleReferenceWarning(UserWarning):
    """The minimum-norm reference wrench lies outside the parametrized set."""


def _gain(x, n=6):
    x = np.asarray(x, dtype=float)
    return x * np.eye(n) if x.ndim == 0 else x


@dataclass(frozen=True)
class GainSet:
    """Momentum gains (6x6 SPD), regularization scalar and torque decay gain."""

    Kp: np.ndarray
    Kd: np.ndarray
    Ko: np.ndarray
    Ki: np.ndarray = None
    k_e: float = 0.0
    K_tau: np.ndarray = None

    def __post_init__(self):
        for name in ("Kp", "Kd", "Ko", "Ki"):
            v = getattr(self, name)
            if v is None:
                continue
            v = _gain(v)
            if v.shape != (6, 6) or not is_spd(v):
                raise InvalidInputError(f"{name} must be a symmetric positive definite 6x6 matrix")
            object.__setattr__(self, name, v)
        if self.K_tau is not None:
            v = np.atleast_2d(np.asarray(self.K_tau, dtype=float))
            if not is_spd(v):
                raise InvalidInputError("K_tau must be symmetric positive definite")
            object.__setattr__(self, "K_tau", v)
        if not (np.isfinite(self.k_e) and self.k_e >= 0):
            raise InvalidInputError("k_e must be a finite non-negative scalar")

    @property
    def Ko_inv(self):
        return np.linalg.inv(self.Ko)


@dataclass(frozen=True)
class Reference:
    """Reference momentum and its first two derivatives at one instant."""

    H_d: np.ndarray = field(default_factory=lambda: np.zeros(6))
    H_d_dot: np.ndarray = field(default_factory=lambda: np.zeros(6))
    H_d_ddot: np.ndarray = field(default_factory=lambda: np.zeros(6))
    f_d: np.ndarray = None


@dataclass
class ControlOutput:
    xi_dot: np.ndarray
    tau: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MomentumTerms:
    """Quantities shared by all momentum laws at one control instant."""

    A: np.ndarray
    A_dot: np.ndarray
    Phi: np.ndarray
    f: np.ndarray
    AP: np.ndarray
    AP_pinv: np.ndarray
    N: np.ndarray
    Htil: np.ndarray
    Htil_dot: np.ndarray
    rank: int


def momentum_terms(state, frames, xi, ref, f_meas=None, tol=RANK_TOL):
    """Evaluate ``A``, ``A_dot``, ``Phi`` and the momentum errors.

    ``Htil_dot`` comes from the measured wrenches ``f_meas`` through
    ``A f - m g e3`` (force feedback); ``A_dot f`` uses the model wrench
    ``phi(xi)``. Without a measurement the model wrench is used for both.
    """
    xis = as_stack(xi)
    geoms = [fr.geometry for fr in frames]
    if len(geoms) != len(xis):
        raise InvalidInputError(f"{len(xis)} xi blocks for {len(frames)} frames")
    f = stack_phi(xis, geoms).reshape(-1)
    fm = f if f_meas is None else np.asarray(f_meas, dtype=float).reshape(-1)
    A = contact_map(frames, state.com)
    A_dot = contact_map_dot(frames, state.com_velocity)
    Phi = stack_gradient(xis, geoms)
    AP = A @ Phi
    return MomentumTerms(
        A=A, A_dot=A_dot, Phi=Phi, f=f, AP=AP,
        AP_pinv=pinv(AP, tol), N=nullspace_projector(AP, tol),
        Htil=state.H - ref.H_d,
        Htil_dot=hdot(fm, A, state.m, state.g) - ref.H_d_dot,
        rank=numerical_rank(AP, tol),
    )


def _solve(terms, target, xi0):
    """``pinv(A Phi) (target - A_dot f) + N xi0`` with a rank check."""
    rhs = target - terms.A_dot @ terms.f
    xi_dot = terms.AP_pinv @ rhs
    if xi0 is not None:
        xi_dot = xi_dot + terms.N @ np.asarray(xi0, dtype=float).reshape(-1)
    if terms.rank < 6:
        res = np.linalg.norm(terms.AP @ xi_dot + terms.A_dot @ terms.f - target)
        raise DegradedAuthorityError(
            f"A Phi has rank {terms.rank} < 6", residual=float(res), solution=xi_dot
        )
    return xi_dot


def fb_lin_target(terms, state, ref, gains, with_integral=False):
    """Imposed momentum acceleration ``H_d_ddot - Kd Htil_dot - Kp Htil [- Ki I]``."""
    target = ref.H_d_ddot - gains.Kd @ terms.Htil_dot - gains.Kp @ terms.Htil
    if with_integral:
        if gains.Ki is None:
            raise InvalidInputError("the integral variant needs Ki")
        target = target - gains.Ki @ state.I_err
    return target


def fb_lin_xidot(state, frames, xi, ref, gains, with_integral=False, *,
                 f_meas=None, xi0=None, tol=RANK_TOL):
    """Feedback-linearizing law: solve ``A Phi xi_dot + A_dot f = target``.

    The ``Ki`` variant adds an integral of the momentum error; its stable
    gain region is narrow and is not characterized here.
    """
    terms = momentum_terms(state, frames, xi, ref, f_meas, tol)
    return _solve(terms, fb_lin_target(terms, state, ref, gains, with_integral), xi0)


def lyapunov_target(terms, state, ref, gains):
    """Momentum acceleration requested by the integral Lyapunov law."""
    eye = np.eye(6)
    return (
        ref.H_d_ddot
        - (gains.Kd + eye) @ terms.Htil_dot
        - (gains.Kd + gains.Ko_inv + gains.Kp) @ terms.Htil
        - gains.Kp @ state.I_err
    )


def momentum_jerk_xidot(state, frames, xi, ref, gains, xi0=None, *,
                        f_meas=None, tol=RANK_TOL):
    """Integral Lyapunov law; ``xi0`` moves in the null space of ``A Phi``."""
    terms = momentum_terms(state, frames, xi, ref, f_meas, tol)
    return _solve(terms, lyapunov_target(terms, state, ref, gains), xi0)


def regularized_xidot(state, frames, xi, ref, gains, xi_d, xi0=None, *,
                      f_meas=None, tol=RANK_TOL):
    """:func:`momentum_jerk_xidot` plus ``-k_e (xi - xi_d)``."""
    base = momentum_jerk_xidot(state, frames, xi, ref, gains, xi0, f_meas=f_meas, tol=tol)
    diff = as_stack(xi).reshape(-1) - as_stack(xi_d).reshape(-1)
    return base - gains.k_e * diff


def zeta(terms, state, gains):
    """Exogenous state ``Htil_dot + Kd Htil + Kp I``."""
    return terms.Htil_dot + gains.Kd @ terms.Htil + gains.Kp @ state.I_err


def zeta_dot(terms, xi_dot, ref, gains):
    """``A_dot f + A Phi xi_dot - H_d_ddot + Kd Htil_dot + Kp Htil``."""
    return (
        terms.A_dot @ terms.f + terms.AP @ xi_dot - ref.H_d_ddot
        + gains.Kd @ terms.Htil_dot + gains.Kp @ terms.Htil
    )


def lyapunov_value(I_err, Htil, z, gains):
    return 0.5 * (I_err @ gains.Kp @ I_err + Htil @ Htil + z @ gains.Ko @ z)


def lyapunov_rate(Htil, z, gains):
    return -(Htil @ gains.Kd @ Htil) - z @ gains.Ko @ z


def compute_xi_d(ref, frames, com, m, g=9.81, saturation=SaturationPolicy()):
    """Parameters of the minimum-norm wrenches realizing ``ref.H_d_dot``.

    ``f_d = pinv(A) (H_d_dot + m g e3)`` split per contact and inverted with
    saturation. Emits :class:`InfeasibleReferenceWarning` when some ``f_d``
    block is outside the parametrized set.
    """
    A = contact_map(frames, com)
    f_d = pinv(A) @ (ref.H_d_dot + m * g * E3)
    blocks = f_d.reshape(-1, 6)
    geoms = [fr.geometry for fr in frames]
    for k, (w, gk) in enumerate(zip(blocks, geoms)):
        try:
            phi_inverse(w, gk, NO_SATURATION)
        except OutOfDomainError:
            warnings.warn(
                f"reference wrench of contact {k} is outside the parametrized set; saturating",
                InfeasibleReferenceWarning,
                stacklevel=2,
            )
    return stack_phi_inverse(blocks, geoms, saturation)


# Torque map -----------------------------------------------------------------


@dataclass(frozen=True)
class TorqueMap:
    """``tau = Theta f + theta`` for one dynamics sample."""

    Lambda: np.ndarray
    Lambda_pinv: np.ndarray
    N_Lambda: np.ndarray
    Theta: np.ndarray
    theta: np.ndarray
    JMinv: np.ndarray


def torque_map(sample, tau0=None, tol=RANK_TOL):
    """Build ``Theta`` and ``theta`` with ``Lambda = J M^-1 B``.

    Raises :class:`ActuationDeficiencyError` when ``Lambda`` is rank
    deficient (rank below ``min`` of its dimensions).
    """
    JMinv = np.linalg.solve(sample.M, sample.J.T).T
    Lam = JMinv @ sample.B
    rank = numerical_rank(Lam, tol)
    if rank < min(Lam.shape):
        raise ActuationDeficiencyError(f"Lambda has rank {rank} < {min(Lam.shape)}")
    Lp = pinv(Lam, tol)
    N = nullspace_projector(Lam, tol)
    Theta = -Lp @ JMinv @ sample.J.T
    theta = Lp @ (JMinv @ sample.h - sample.Jdot_nu)
    if tau0 is not None:
        theta = theta + N @ np.asarray(tau0, dtype=float)
    return TorqueMap(Lambda=Lam, Lambda_pinv=Lp, N_Lambda=N, Theta=Theta, theta=theta, JMinv=JMinv)


def torque_from_wrench(sample, f, tau0=None, tol=RANK_TOL):
    """``tau = pinv(Lambda) (J M^-1 (h - J^T f) - Jdot_nu) + N_Lambda tau0``."""
    tm = torque_map(sample, tau0, tol)
    return tm.Theta @ np.asarray(f, dtype=float).reshape(-1) + tm.theta


def torques_forces_residual(sample, f, tau):
    """``J M^-1 (J^T f - h) + Lambda tau + Jdot_nu``; zero for realizable pairs."""
    f = np.asarray(f, dtype=float).reshape(-1)
    JMinv = np.linalg.solve(sample.M, sample.J.T).T
    return JMinv @ (sample.J.T @ f - sample.h) + JMinv @ sample.B @ tau + sample.Jdot_nu


def xi0_torque_min(tmap, Phi, N_AP, xi_dot_1, f, tau, K_tau, *,
                   Theta_dot=None, theta_dot=None, tol=RANK_TOL):
    """Null-space rate that pushes ``tau`` toward ``-K_tau tau`` dynamics.

    Least-squares solution of
    ``Theta_dot f + Theta Phi (xi_dot_1 + N xi0) + theta_dot = -K_tau tau``.
    Returns exact zeros when ``Theta Phi N`` vanishes (e.g. one contact).
    """
    TPN = tmap.Theta @ Phi @ N_AP
    if not np.any(N_AP) or np.linalg.norm(TPN) <= tol * max(1.0, np.linalg.norm(tmap.Theta @ Phi)):
        return np.zeros(N_AP.shape[1])
    f = np.asarray(f, dtype=float).reshape(-1)
    rhs = tmap.Theta @ Phi @ xi_dot_1 + np.asarray(K_tau) @ tau
    if Theta_dot is not None:
        rhs = rhs + Theta_dot @ f
    if theta_dot is not None:
        rhs = rhs + theta_dot
    return -pinv(TPN, tol) @ rhs


# Stateful controller used by the episode harness -----------------------------


class MomentumJerkController:
    """One controller instance per episode; holds the integrated ``xi``.

    ``mode`` selects the law (see ``CONTROL_MODES``). ``xi`` advances by
    exact integration of the held ``xi_dot`` over each control period, and
    can be re-synchronized from measured wrenches every ``resync_every``
    cycles. With ``torque_min`` and a dynamics sample, the null-space rate
    minimizes the joint torque norm.
    """

    def __init__(self, frames, gains, mode="lemma2", *, dt=0.01, dynamics=None,
                 torque_min=False, tau0=None, resync_every=0,
                 derivative_mode="zero", saturation=SaturationPolicy()):
        if mode not in CONTROL_MODES:
            raise InvalidInputError(f"unknown controller mode {mode!r}")
        if derivative_mode not in ("zero", "finite-difference"):
            raise InvalidInputError(f"unknown derivative mode {derivative_mode!r}")
        if torque_min and (dynamics is None or gains.K_tau is None):
            raise InvalidInputError("torque minimization needs a dynamics sample and K_tau")
        self.frames = list(frames)
        self.geoms = [fr.geometry for fr in self.frames]
        self.gains = gains
        self.mode = mode
        self.dt = dt
        self.dynamics = dynamics
        self.torque_min = torque_min
        self.tau0 = tau0
        self.resync_every = int(resync_every)
        self.derivative_mode = derivative_mode
        self.saturation = saturation
        self.xi = None
        self.cycle = 0
        self._prev_map = None

    def reset(self, f_meas):
        """Initialize ``xi`` from the measured wrenches."""
        self.xi = stack_phi_inverse(as_stack(f_meas), self.geoms, self.saturation)
        self.cycle = 0
        self._prev_map = None

    def _sample(self, t):
        return self.dynamics(t) if callable(self.dynamics) else self.dynamics

    def step(self, t, state, f_meas, ref):
        diag = {"saturated": False, "rank_degraded": False, "resynced": False}
        if self.resync_every and self.cycle and self.cycle % self.resync_every == 0:
            try:
                self.xi = stack_phi_inverse(as_stack(f_meas), self.geoms, NO_SATURATION)
            except OutOfDomainError:
                self.xi = stack_phi_inverse(as_stack(f_meas), self.geoms, self.saturation)
                diag["saturated"] = True
            diag["resynced"] = True

        g = self.gains
        terms = momentum_terms(state, self.frames, self.xi, ref, f_meas)
        if self.mode.startswith("fb-lin"):
            target = fb_lin_target(terms, state, ref, g, self.mode == "fb-lin+Ki")
        else:
            target = lyapunov_target(terms, state, ref, g)

        xi_dot_1 = terms.AP_pinv @ (target - terms.A_dot @ terms.f)
        xi0 = None
        tau = None
        sample = self._sample(t) if self.dynamics is not None else None
        if sample is not None:
            tmap = torque_map(sample, self.tau0)
            tau = tmap.Theta @ terms.f + tmap.theta
            if self.torque_min:
                Theta_dot = theta_dot = None
                if self.derivative_mode == "finite-difference" and self._prev_map is not None:
                    Theta_dot = (tmap.Theta - self._prev_map.Theta) / self.dt
                    theta_dot = (tmap.theta - self._prev_map.theta) / self.dt
                xi0 = xi0_torque_min(tmap, terms.Phi, terms.N, xi_dot_1, terms.f, tau,
                                     g.K_tau, Theta_dot=Theta_dot, theta_dot=theta_dot)
            self._prev_map = tmap

        try:
            xi_dot = _solve(terms, target, xi0)
        except DegradedAuthorityError as exc:
            xi_dot = exc.solution
            diag["rank_degraded"] = True
        if self.mode == "lemma2+regularization" and g.k_e > 0:
            xi_d = compute_xi_d(ref, self.frames, state.com, state.m, state.g, self.saturation)
            xi_dot = xi_dot - g.k_e * (self.xi.reshape(-1) - xi_d.reshape(-1))

        z = zeta(terms, state, g)
        diag.update(
            Htil=terms.Htil,
            Htil_dot=terms.Htil_dot,
            zeta=z,
            V=lyapunov_value(state.I_err, terms.Htil, z, g),
            residual=float(np.linalg.norm(terms.AP @ xi_dot + terms.A_dot @ terms.f - target)),
            zeta_dot_error=float(np.linalg.norm(
                zeta_dot(terms, xi_dot, ref, g) + z + g.Ko_inv @ terms.Htil)),
            phi_norm=float(np.linalg.norm(terms.Phi, 2)),
            f=terms.f,
            xi=self.xi.reshape(-1).copy(),
        )
        return ControlOutput(xi_dot=xi_dot, tau=tau, diagnostics=diag)

    def advance(self, xi_dot):
        self.xi = self.xi + np.asarray(xi_dot).reshape(self.xi.shape) * self.dt
        self.cycle += 1
