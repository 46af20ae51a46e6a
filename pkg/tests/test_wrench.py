import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad

from jerkcontrol.errors import InvalidInputError, OutOfDomainError
from jerkcontrol.wrench import (
    NO_SATURATION,
    XI3_CAP,
    ContactGeometry,
    SaturationPolicy,
    check_constraints,
    cone_coverage_estimate,
    in_image,
    phi,
    phi_gradient,
    phi_gradient_det,
    phi_inverse,
    stack_gradient,
    stack_phi,
    stack_phi_inverse,
)

from conftest import SYMMETRIC, geometries, xis


# geometry -------------------------------------------------------------------


def test_geometry_offsets():
    g = ContactGeometry(x_min=-0.06, x_max=0.11, y_min=-0.04, y_max=0.02)
    assert g.delta_x == pytest.approx(0.085)
    assert g.delta_x0 == pytest.approx(-0.025)
    assert g.delta_y == pytest.approx(0.03)
    assert g.delta_y0 == pytest.approx(-0.01)


@pytest.mark.parametrize("kw", [
    {"x_min": 0.1, "x_max": 0.1}, {"y_min": 0.2, "y_max": 0.1}, {"mu_c": 0.0},
    {"mu_z": -1.0}, {"fz_min": -1.0}, {"mu_c": float("nan")},
])
def test_geometry_rejects_invalid(kw):
    with pytest.raises(InvalidInputError):
        ContactGeometry(**kw)


def test_geometry_dict_round_trip():
    g = ContactGeometry(mu_c=0.5, mu_z=0.02, fz_min=3.0, x_min=-0.1, x_max=0.2,
                        y_min=-0.03, y_max=0.05)
    assert ContactGeometry.from_dict(g.to_dict()) == g
    assert ContactGeometry.from_dict({"mu_c": 0.5, "x_min": -0.2}).x_min == -0.2


# phi ------------------------------------------------------------------------


def test_phi_at_zero_symmetric():
    assert np.array_equal(phi(np.zeros(6), SYMMETRIC), [0, 0, 1, 0, 0, 0])


@settings(max_examples=300)
@given(geometries(), xis(10.0))
def test_phi_satisfies_constraints(g, xi):
    rep = check_constraints(phi(xi, g), g)
    assert rep.all_satisfied
    assert np.all(rep.margins > 0)


def test_friction_ratio_stays_below_mu():
    g = SYMMETRIC
    for t in (1.0, 5.0, 10.0, 15.0, 18.0):
        w = phi(np.array([t, 0, 0, 0, 0, 0]), g)
        assert w[0] / w[2] < g.mu_c
        assert check_constraints(w, g).all_satisfied
    # tanh(50) rounds to 1.0 in double precision: the ratio reaches mu_c but never exceeds it
    w = phi(np.array([50.0, 0, 0, 0, 0, 0]), g)
    assert w[0] / w[2] <= g.mu_c


def test_phi_xi3_cap_keeps_values_finite():
    w = phi(np.array([0, 0, 1e4, 0, 0, 0]), SYMMETRIC)
    assert np.all(np.isfinite(w))
    assert w[2] == pytest.approx(np.exp(XI3_CAP))


def test_phi_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        phi(np.array([np.nan, 0, 0, 0, 0, 0]), SYMMETRIC)
    with pytest.raises(InvalidInputError):
        phi(np.zeros(5), SYMMETRIC)


def test_phi_batch_matches_single(rng):
    xi = rng.uniform(-3, 3, (7, 6))
    batch = phi(xi, SYMMETRIC)
    for i in range(7):
        assert np.array_equal(batch[i], phi(xi[i], SYMMETRIC))


# inverse --------------------------------------------------------------------


def test_inverse_of_unit_normal():
    assert np.allclose(phi_inverse(np.array([0, 0, 1.0, 0, 0, 0]), SYMMETRIC), 0.0, atol=0)


@settings(max_examples=300)
@given(geometries(), xis(5.0))
def test_round_trip(g, xi):
    assert np.max(np.abs(phi_inverse(phi(xi, g), g) - xi)) < 1e-8


@settings(max_examples=300)
@given(geometries(), xis(5.0))
def test_reverse_round_trip(g, xi):
    w = phi(xi, g)
    back = phi(phi_inverse(w, g, NO_SATURATION), g)
    assert np.all(np.abs(back - w) <= 1e-8 * np.max(np.abs(w)))


def test_inverse_sign_rule(rng):
    for _ in range(100):
        xi = rng.uniform(-3, 3, 6)
        out = phi_inverse(phi(xi, SYMMETRIC), SYMMETRIC)
        assert np.all(np.sign(out[:2]) == np.sign(xi[:2]))


def test_saturation_of_low_normal_force():
    g = ContactGeometry(fz_min=2.0)
    pol = SaturationPolicy()
    w = np.array([0.1, 0.0, g.fz_min / 2, 0.0, 0.0, 0.0])
    xi = phi_inverse(w, g, pol)
    assert np.all(np.isfinite(xi))
    assert xi[2] == pytest.approx(np.log(pol.eps_z))
    # saturating an already saturated wrench changes nothing
    again = phi_inverse(phi(xi, g), g, pol)
    assert np.allclose(again, xi, atol=1e-6)


@pytest.mark.parametrize("w", [
    [0, 0, -1.0, 0, 0, 0],                 # pulling contact
    [0.5, 0, 1.0, 0, 0, 0],                # outside friction disk
    [0.3, 0.3, 1.0, 0, 0, 0],              # inside disk, outside the image
    [0, 0, 1.0, 0.06, 0, 0],               # CoP beyond y_max
    [0, 0, 1.0, 0, 0, 0.02],               # torsion
])
def test_out_of_domain(w):
    w = np.array(w, dtype=float)
    with pytest.raises(OutOfDomainError):
        phi_inverse(w, SYMMETRIC, NO_SATURATION)
    xi = phi_inverse(w, SYMMETRIC)
    assert np.all(np.isfinite(xi))
    assert check_constraints(phi(xi, SYMMETRIC), SYMMETRIC).all_satisfied
    assert not in_image(w, SYMMETRIC)


def test_in_image_accepts_generated_wrenches(rng):
    for _ in range(50):
        assert in_image(phi(rng.uniform(-4, 4, 6), SYMMETRIC), SYMMETRIC)


# gradient -------------------------------------------------------------------


def test_gradient_at_zero():
    g = SYMMETRIC
    G = phi_gradient(np.zeros(6), g)
    expected = np.diag([g.mu_c, g.mu_c, 1.0, g.delta_y, g.delta_x, g.mu_z])
    assert np.max(np.abs(G - expected)) <= 1e-14
    assert np.linalg.det(G) == pytest.approx(g.mu_c ** 2 * g.delta_y * g.delta_x * g.mu_z)


def _fd(xi, g, h=1e-6):
    out = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        out[:, j] = (phi(xi + e, g) - phi(xi - e, g)) / (2 * h)
    return out


@settings(max_examples=300)
@given(geometries(), xis(5.0))
def test_gradient_matches_finite_differences(g, xi):
    G = phi_gradient(xi, g)
    fd = _fd(xi, g)
    col = np.maximum(np.linalg.norm(G, axis=0), 1e-300)
    assert np.max(np.abs(G - fd) / col) < 1e-5


PATTERN = np.zeros((6, 6), dtype=bool)
for i, j in [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 2), (3, 2), (3, 3),
             (4, 2), (4, 4), (5, 2), (5, 5)]:
    PATTERN[i, j] = True


@given(geometries(), xis(8.0))
def test_gradient_sparsity_and_determinant(g, xi):
    G = phi_gradient(xi, g)
    assert not G[~PATTERN].any()
    det = phi_gradient_det(xi, g)
    assert det > 0
    assert det == pytest.approx(np.linalg.det(G), rel=1e-8)
    assert np.isfinite(np.linalg.cond(G))


def test_determinant_sign_constant(rng):
    xi = rng.uniform(-8, 8, (20000, 6))
    assert np.all(phi_gradient_det(xi, SYMMETRIC) > 0)


# constraint checker ---------------------------------------------------------


def test_unit_normal_satisfies_everything():
    rep = check_constraints(np.array([0, 0, 1.0, 0, 0, 0]), SYMMETRIC)
    assert rep.all_satisfied
    assert set(rep.as_dict()) == {"normal", "friction", "cop_y", "cop_x", "torsion"}


def test_friction_boundary_is_violation():
    g = SYMMETRIC
    rep = check_constraints(np.array([g.mu_c * 2.0, 0, 2.0, 0, 0, 0]), g)
    d = dict(zip(rep.names, rep.satisfied))
    assert not d["friction"]
    assert d["normal"] and d["cop_x"] and d["cop_y"] and d["torsion"]


def test_zero_normal_force_sentinel():
    rep = check_constraints(np.zeros(6), SYMMETRIC)
    m = rep.as_dict()
    assert m["cop_x"] == -np.inf and m["cop_y"] == -np.inf and m["torsion"] == -np.inf
    assert not rep.all_satisfied


def test_cop_sign_convention():
    g = ContactGeometry(x_min=0.0, x_max=0.2, y_min=0.0, y_max=0.1)
    # CoP at (0.1, 0.05) with fz = 10: mx = y fz, my = -x fz
    assert check_constraints(np.array([0, 0, 10.0, 0.5, -1.0, 0]), g).all_satisfied
    assert not check_constraints(np.array([0, 0, 10.0, 0.5, 1.0, 0]), g).all_satisfied


# stacks ---------------------------------------------------------------------


def test_stack_single_contact_reduces(rng):
    xi = rng.uniform(-2, 2, 6)
    assert np.array_equal(stack_phi(xi, SYMMETRIC)[0], phi(xi, SYMMETRIC))
    assert np.array_equal(stack_gradient(xi, SYMMETRIC), phi_gradient(xi, SYMMETRIC))


def test_stack_two_contacts_at_zero():
    f = stack_phi(np.zeros(12), [SYMMETRIC, SYMMETRIC]).reshape(-1)
    assert np.array_equal(f, [0, 0, 1, 0, 0, 0] * 2)


def test_stack_determinant_product(rng):
    xis_ = rng.uniform(-3, 3, (3, 6))
    geoms = [SYMMETRIC, ContactGeometry(mu_c=0.7), ContactGeometry(fz_min=5.0)]
    G = stack_gradient(xis_, geoms)
    prod = np.prod([np.linalg.det(phi_gradient(x, g)) for x, g in zip(xis_, geoms)])
    assert np.linalg.det(G) == pytest.approx(prod, rel=1e-9)
    assert np.allclose(stack_phi_inverse(stack_phi(xis_, geoms), geoms), xis_, atol=1e-9)


def test_stack_length_mismatch():
    with pytest.raises(InvalidInputError):
        stack_phi(np.zeros(12), [SYMMETRIC])
    with pytest.raises(InvalidInputError):
        stack_phi(np.zeros(7), SYMMETRIC)


# coverage -------------------------------------------------------------------


def image_area_ratio():
    """Area of the tangential image over the disk area, by quadrature.

    With u = tanh(xi) in (-1, 1)^2 the normalized map is
    a = u1 / sqrt(1 + u2^2), b = u2 / sqrt(1 + u1^2); it is injective, so
    the image area is the integral of its Jacobian determinant.
    """
    def jac(u2, u1):
        p, q = 1 + u1 * u1, 1 + u2 * u2
        return 1 / np.sqrt(p * q) - (u1 * u2) ** 2 / (p * q) ** 1.5
    area, _ = dblquad(jac, -1, 1, -1, 1, epsabs=1e-12, epsrel=1e-12)
    return area / np.pi


def test_coverage_matches_quadrature_oracle():
    oracle = image_area_ratio()
    assert oracle == pytest.approx(0.950410, abs=1e-6)
    n = 200_000
    p = cone_coverage_estimate(SYMMETRIC, samples=n, seed=3)
    se = np.sqrt(oracle * (1 - oracle) / n)
    assert abs(p - oracle) < 4 * se
    assert p > 0.90


def test_coverage_is_deterministic_and_scale_free():
    g = ContactGeometry(mu_c=0.8)
    a = cone_coverage_estimate(g, samples=50_000, seed=7)
    assert a == cone_coverage_estimate(g, samples=50_000, seed=7)
    assert a == cone_coverage_estimate(g, samples=50_000, seed=7, fz=123.0)
    assert a == cone_coverage_estimate(SYMMETRIC, samples=50_000, seed=7)
