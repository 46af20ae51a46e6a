import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jerkcontrol.controllers import (
    GainSet,
    InfeasibleReferenceWarning,
    MomentumJerkController,
    Reference,
    compute_xi_d,
    fb_lin_target,
    fb_lin_xidot,
    lyapunov_rate,
    lyapunov_value,
    momentum_jerk_xidot,
    momentum_terms,
    regularized_xidot,
    torque_from_wrench,
    torque_map,
    torques_forces_residual,
    xi0_torque_min,
    zeta,
    zeta_dot,
)
from jerkcontrol.errors import ActuationDeficiencyError, DegradedAuthorityError, InvalidInputError
from jerkcontrol.jerk_sot import DynamicsSample, selector
from jerkcontrol.linalg import pinv
from jerkcontrol.momentum import (
    E3,
    ContactFrame,
    MomentumState,
    contact_map,
    contact_map_dot,
    hddot,
)
from jerkcontrol.synthetic import consistent_sample, static_sample, torque_optimum_sample
from jerkcontrol.wrench import ContactGeometry, phi_inverse, stack_phi, stack_phi_inverse

M, G = 33.0, 9.81
FOOT = ContactGeometry(x_min=-0.06, x_max=0.11, y_min=-0.04, y_max=0.04)
ONE = [ContactFrame(origin=np.zeros(3), geometry=FOOT)]
TWO = [ContactFrame(origin=np.array([0, 0.07, 0]), geometry=FOOT),
       ContactFrame(origin=np.array([0, -0.07, 0]), geometry=FOOT)]
COM = np.array([0.0, 0.0, 0.5])
GAINS = GainSet(Kp=4.0, Kd=4.0, Ko=1.0, Ki=1.0, k_e=1.0)


def random_spd(rng, n=6, lo=0.5, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


def support_xi(frames, com=COM):
    f = pinv(contact_map(frames, com)) @ (M * G * E3)
    return stack_phi_inverse(f, [fr.geometry for fr in frames]).reshape(-1)


def rest_state(**kw):
    return MomentumState(H=np.zeros(6), com=COM, m=M, g=G, **kw)


def random_state(rng, v_scale=0.0):
    H = rng.standard_normal(6) * 0.5
    H[:3] *= v_scale
    return MomentumState(H=H, com=COM + 0.02 * rng.standard_normal(3), m=M, g=G,
                         I_err=rng.standard_normal(6) * 0.2)


# gains ----------------------------------------------------------------------


def test_gainset_validation():
    g = GainSet(Kp=2.0, Kd=[1, 2, 3, 4, 5, 6] * np.eye(6), Ko=np.eye(6))
    assert np.array_equal(g.Kp, 2 * np.eye(6))
    with pytest.raises(InvalidInputError):
        GainSet(Kp=-np.eye(6), Kd=1.0, Ko=1.0)
    with pytest.raises(InvalidInputError):
        GainSet(Kp=np.triu(np.ones((6, 6))), Kd=1.0, Ko=1.0)
    with pytest.raises(InvalidInputError):
        GainSet(Kp=1.0, Kd=1.0, Ko=1.0, k_e=-0.1)


# feedback-linearizing law ---------------------------------------------------


def test_fb_lin_equilibrium_single_contact_is_zero():
    xi = support_xi(ONE)
    out = fb_lin_xidot(rest_state(), ONE, xi, Reference(), GAINS)
    assert np.allclose(out, 0.0, atol=1e-12)


def test_fb_lin_equilibrium_two_contacts_is_min_norm_zero():
    xi = support_xi(TWO)
    out = fb_lin_xidot(rest_state(), TWO, xi, Reference(), GAINS)
    assert np.allclose(out, 0.0, atol=1e-12)


@pytest.mark.parametrize("with_integral", [False, True])
def test_fb_lin_achieves_target_single_contact(rng, with_integral):
    for _ in range(20):
        state = random_state(rng, v_scale=1.0)
        xi = support_xi(ONE) + 0.3 * rng.standard_normal(6)
        ref = Reference(H_d=rng.standard_normal(6), H_d_dot=rng.standard_normal(6),
                        H_d_ddot=rng.standard_normal(6))
        xi_dot = fb_lin_xidot(state, ONE, xi, ref, GAINS, with_integral)
        t = momentum_terms(state, ONE, xi, ref)
        target = fb_lin_target(t, state, ref, GAINS, with_integral)
        got = hddot(xi, xi_dot, t.f, t.A, t.A_dot, [FOOT])
        assert np.linalg.norm(got - target) < 1e-9 * (1 + np.linalg.norm(target))


def test_fb_lin_integral_needs_ki():
    g = GainSet(Kp=1.0, Kd=1.0, Ko=1.0)
    with pytest.raises(InvalidInputError):
        fb_lin_xidot(rest_state(), ONE, support_xi(ONE), Reference(), g, with_integral=True)


def test_degraded_authority():
    xi = support_xi(ONE)
    xi[0] = 25.0  # tanh saturated: the fx column of Phi vanishes numerically
    with pytest.raises(DegradedAuthorityError) as exc:
        fb_lin_xidot(rest_state(), ONE, xi, Reference(H_d=np.ones(6)), GAINS)
    assert exc.value.solution is not None and np.isfinite(exc.value.residual)


# Lyapunov law ---------------------------------------------------------------


def test_integral_law_pure_null_space_motion(rng):
    xi = support_xi(TWO)
    xi0 = rng.standard_normal(12)
    out = momentum_jerk_xidot(rest_state(), TWO, xi, Reference(), GAINS, xi0)
    t = momentum_terms(rest_state(), TWO, xi, Reference())
    assert np.allclose(out, t.N @ xi0, atol=1e-12)
    assert np.allclose(t.AP @ out, 0.0, atol=1e-9)
    assert np.allclose(momentum_jerk_xidot(rest_state(), ONE, support_xi(ONE), Reference(),
                                           GAINS, rng.standard_normal(6)), 0.0, atol=1e-12)


def test_zeta_identity_single_contact(rng):
    for _ in range(50):
        gains = GainSet(Kp=random_spd(rng), Kd=random_spd(rng), Ko=random_spd(rng))
        state = random_state(rng, v_scale=1.0)
        xi = support_xi(ONE) + 0.3 * rng.standard_normal(6)
        ref = Reference(H_d=rng.standard_normal(6), H_d_dot=rng.standard_normal(6),
                        H_d_ddot=rng.standard_normal(6))
        xi_dot = momentum_jerk_xidot(state, ONE, xi, ref, gains)
        t = momentum_terms(state, ONE, xi, ref)
        z = zeta(t, state, gains)
        err = zeta_dot(t, xi_dot, ref, gains) + z + np.linalg.solve(gains.Ko, t.Htil)
        assert np.linalg.norm(err) < 1e-8 * (1 + np.linalg.norm(z))


def test_lyapunov_rate_formula(rng):
    # V_dot along the ideal closed loop equals the closed-form expression
    for _ in range(50):
        gains = GainSet(Kp=random_spd(rng), Kd=random_spd(rng), Ko=random_spd(rng))
        I, Ht, z = rng.standard_normal((3, 6))
        Ht_dot = z - gains.Kd @ Ht - gains.Kp @ I
        z_dot = -z - np.linalg.solve(gains.Ko, Ht)
        vdot = I @ gains.Kp @ Ht + Ht @ Ht_dot + z @ gains.Ko @ z_dot
        assert vdot == pytest.approx(lyapunov_rate(Ht, z, gains), rel=1e-10, abs=1e-10)
        assert lyapunov_value(I, Ht, z, gains) > 0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_closed_loop_matrix_is_hurwitz(seed):
    rng = np.random.default_rng(seed)
    Kp, Kd, Ko = (random_spd(rng, lo=0.05, hi=20.0) for _ in range(3))
    I6, Z = np.eye(6), np.zeros((6, 6))
    Acl = np.block([[Z, I6, Z], [-Kp, -Kd, I6], [Z, -np.linalg.inv(Ko), -I6]])
    assert np.linalg.eigvals(Acl).real.max() < 0


def test_regularized_reduces_to_base(rng):
    state = random_state(rng)
    xi = support_xi(TWO) + 0.1 * rng.standard_normal(12)
    ref = Reference(H_d=rng.standard_normal(6))
    base = momentum_jerk_xidot(state, TWO, xi, ref, GAINS)
    g0 = GainSet(Kp=4.0, Kd=4.0, Ko=1.0, k_e=0.0)
    assert np.array_equal(regularized_xidot(state, TWO, xi, ref, g0, rng.standard_normal(12)), base)
    assert np.array_equal(regularized_xidot(state, TWO, xi, ref, GAINS, xi), base)
    xi_d = xi + 1.0
    assert np.allclose(regularized_xidot(state, TWO, xi, ref, GAINS, xi_d), base + GAINS.k_e)


# desired parameters ---------------------------------------------------------


def test_xi_d_single_contact_at_com():
    frames = [ContactFrame(origin=COM, geometry=FOOT)]
    xi_d = compute_xi_d(Reference(), frames, COM, M, G)
    assert np.allclose(stack_phi(xi_d, FOOT).reshape(-1), [0, 0, M * G, 0, 0, 0], atol=1e-8)


def test_xi_d_two_symmetric_contacts():
    xi_d = compute_xi_d(Reference(), TWO, COM, M, G)
    f = stack_phi(xi_d, FOOT)
    assert np.allclose(f[:, 2], M * G / 2, rtol=1e-10)
    f_d = pinv(contact_map(TWO, COM)) @ (M * G * E3)
    assert np.allclose(f.reshape(-1), f_d, atol=1e-8)


def test_xi_d_warns_for_infeasible_reference():
    ref = Reference(H_d_dot=np.array([200.0, 0, 0, 0, 0, 0]))
    with pytest.warns(InfeasibleReferenceWarning):
        xi_d = compute_xi_d(ref, TWO, COM, M, G)
    assert np.all(np.isfinite(xi_d))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        compute_xi_d(Reference(), TWO, COM, M, G)


# torque map -----------------------------------------------------------------


def test_static_sample_gives_null_torque(rng):
    for n, n_c in ((6, 1), (10, 1), (10, 2)):
        f = rng.standard_normal(6 * n_c)
        s = static_sample(rng, n, n_c, f)
        assert np.allclose(torque_from_wrench(s, f), 0.0, atol=1e-9)
        tau0 = rng.standard_normal(n)
        tm = torque_map(s, tau0)
        assert np.allclose(torque_from_wrench(s, f, tau0), tm.N_Lambda @ tau0, atol=1e-9)


@pytest.mark.parametrize("n,n_c", [(6, 1), (10, 1), (6, 2), (10, 2)])
def test_torque_residual_on_consistent_samples(rng, n, n_c):
    for _ in range(50):
        f = rng.standard_normal(6 * n_c) * 50
        s = consistent_sample(rng, n, n_c, f, rng.standard_normal(n) * 10)
        tau = torque_from_wrench(s, f)
        tm = torque_map(s)
        scale = 1 + np.linalg.norm(tm.JMinv @ s.h) + np.linalg.norm(s.Jdot_nu) \
            + np.linalg.norm(tm.JMinv @ s.J.T @ f)
        assert np.linalg.norm(torques_forces_residual(s, f, tau)) / scale < 1e-8


def test_null_space_shift(rng):
    f = rng.standard_normal(6)
    s = consistent_sample(rng, 10, 1, f, rng.standard_normal(10))
    tau0 = rng.standard_normal(10)
    tm = torque_map(s)
    a, b = torque_from_wrench(s, f), torque_from_wrench(s, f, tau0)
    assert np.max(np.abs(b - a - tm.N_Lambda @ tau0)) < 1e-10
    ra = torques_forces_residual(s, f, a)
    rb = torques_forces_residual(s, f, b)
    assert np.max(np.abs(ra - rb)) < 1e-10


def test_actuation_deficiency():
    n = 6
    J = np.hstack([np.eye(6), np.zeros((6, n))])
    s = DynamicsSample(M=np.eye(n + 6), h=np.zeros(n + 6), J=J, Jdot_nu=np.zeros(6), B=selector(n))
    with pytest.raises(ActuationDeficiencyError):
        torque_from_wrench(s, np.zeros(6))


# torque-minimizing null-space rate -------------------------------------------


def test_xi0_zero_for_single_contact(rng):
    xi = support_xi(ONE)
    t = momentum_terms(rest_state(), ONE, xi, Reference())
    s = consistent_sample(rng, 10, 1, t.f, rng.standard_normal(10))
    tm = torque_map(s)
    tau = tm.Theta @ t.f + tm.theta
    out = xi0_torque_min(tm, t.Phi, t.N, rng.standard_normal(6), t.f, tau, np.eye(10))
    assert np.array_equal(out, np.zeros(6))


def test_xi0_stationary_at_torque_optimum(rng):
    xi = support_xi(TWO)
    t = momentum_terms(rest_state(), TWO, xi, Reference())
    s = torque_optimum_sample(rng, 10, t.A, t.f)
    tm = torque_map(s)
    tau = tm.Theta @ t.f + tm.theta
    grad = (tm.Theta @ t.Phi @ t.N).T @ tau
    assert np.linalg.norm(grad) < 1e-8 * (1 + np.linalg.norm(tau))
    out = xi0_torque_min(tm, t.Phi, t.N, np.zeros(12), t.f, tau, np.zeros((10, 10)))
    assert np.linalg.norm(out) < 1e-8


def test_xi0_descends_torque_norm(rng):
    for _ in range(30):
        xi = support_xi(TWO) + 0.2 * rng.standard_normal(12)
        t = momentum_terms(rest_state(), TWO, xi, Reference())
        s = consistent_sample(rng, 10, 2, t.f, rng.standard_normal(10))
        tm = torque_map(s)
        tau = tm.Theta @ t.f + tm.theta
        xi0 = xi0_torque_min(tm, t.Phi, t.N, np.zeros(12), t.f, tau, np.eye(10))
        rate = tau @ tm.Theta @ t.Phi @ (t.N @ xi0)
        assert rate <= 1e-9 * np.linalg.norm(tau) ** 2


# stateful controller --------------------------------------------------------


def test_controller_rejects_bad_configuration():
    with pytest.raises(InvalidInputError):
        MomentumJerkController(ONE, GAINS, mode="pid")
    with pytest.raises(InvalidInputError):
        MomentumJerkController(ONE, GAINS, torque_min=True)
    with pytest.raises(InvalidInputError):
        MomentumJerkController(ONE, GAINS, derivative_mode="analytic")


def test_controller_step_and_resync(rng):
    ctrl = MomentumJerkController(TWO, GAINS, "lemma2+regularization", resync_every=2)
    f0 = stack_phi(support_xi(TWO), FOOT).reshape(-1)
    ctrl.reset(f0)
    state = rest_state()
    flags = []
    for _ in range(5):
        out = ctrl.step(0.0, state, f0 + 0.1, Reference())
        flags.append(out.diagnostics["resynced"])
        assert np.all(np.isfinite(out.xi_dot))
        for key in ("V", "residual", "zeta", "Htil", "Htil_dot", "f", "xi"):
            assert key in out.diagnostics
        ctrl.advance(out.xi_dot)
    assert flags == [False, False, True, False, True]


def test_controller_torque_outputs(rng):
    xi = support_xi(TWO)
    f = stack_phi(xi, FOOT).reshape(-1)
    s = consistent_sample(rng, 10, 2, f, rng.standard_normal(10))
    g = GainSet(Kp=4.0, Kd=4.0, Ko=1.0, K_tau=np.eye(10))
    for mode in ("zero", "finite-difference"):
        ctrl = MomentumJerkController(TWO, g, "lemma2", dynamics=s, torque_min=True,
                                      derivative_mode=mode)
        ctrl.reset(f)
        out = ctrl.step(0.0, rest_state(), f, Reference())
        assert out.tau.shape == (10,)
        assert np.allclose(out.tau, torque_from_wrench(s, f))
