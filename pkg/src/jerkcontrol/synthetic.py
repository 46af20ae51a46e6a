"""Random but well-conditioned dynamics snapshots for tests and episodes.

The momentum plant carries no joint dynamics, so torque-related features are
exercised on synthetic ``DynamicsSample`` instances held constant over an
episode.
"""

import numpy as np

from .jerk_sot import DynamicsSample, selector


def random_spd(rng, n, cond=10.0):
    """SPD matrix with eigenvalues spread over ``[1, cond]``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.geomspace(1.0, cond, n)
    rng.shuffle(eig)
    m = (q * eig) @ q.T
    return 0.5 * (m + m.T)


def random_sample(rng, n, n_c, cond=10.0):
    """Arbitrary sample: random ``M``, ``h``, ``J`` and ``Jdot_nu``."""
    nv = n + 6
    return DynamicsSample(
        M=random_spd(rng, nv, cond),
        h=rng.standard_normal(nv),
        J=rng.standard_normal((6 * n_c, nv)),
        Jdot_nu=rng.standard_normal(6 * n_c),
        B=selector(n),
    )


def consistent_sample(rng, n, n_c, f, tau, cond=10.0):
    """Sample in which the pair ``(f, tau)`` is exactly realizable.

    ``Jdot_nu`` is chosen so that ``J M^-1 (J^T f - h) + Lambda tau +
    Jdot_nu = 0``.
    """
    s = random_sample(rng, n, n_c, cond)
    JMinv = np.linalg.solve(s.M, s.J.T).T
    jd = -(JMinv @ (s.J.T @ np.asarray(f).reshape(-1) - s.h) + JMinv @ s.B @ tau)
    return DynamicsSample(M=s.M, h=s.h, J=s.J, Jdot_nu=jd, B=s.B)


def static_sample(rng, n, n_c, f, cond=10.0):
    """Equilibrium sample with ``J^T f = h`` and ``Jdot_nu = 0``."""
    s = random_sample(rng, n, n_c, cond)
    h = s.J.T @ np.asarray(f).reshape(-1)
    return DynamicsSample(M=s.M, h=h, J=s.J, Jdot_nu=np.zeros(6 * n_c), B=s.B)


def torque_optimum_sample(rng, n, A, f_star, tau_star_norm=10.0, cond=10.0):
    """Sample whose torque norm, over wrenches with ``A f = A f_star``, is minimal at ``f_star``.

    ``tau(f) = Theta f + theta``; the optimum condition is that
    ``tau(f_star)`` be orthogonal to ``Theta U`` for ``U`` a basis of the
    null space of ``A``. ``theta`` is placed through ``Jdot_nu``, which needs
    ``Lambda`` to have full column rank (``6 n_c >= n``).
    """
    f_star = np.asarray(f_star, dtype=float).reshape(-1)
    k = f_star.size
    if k < n:
        raise ValueError("needs 6 n_c >= n so that Lambda has full column rank")
    s = random_sample(rng, n, k // 6, cond)
    JMinv = np.linalg.solve(s.M, s.J.T).T
    Lam = JMinv @ s.B
    Lp = np.linalg.pinv(Lam)
    Theta = -Lp @ JMinv @ s.J.T
    _, sv, vt = np.linalg.svd(A)
    U = vt[np.sum(sv > 1e-12 * sv[0]):].T
    Q, _ = np.linalg.qr(Theta @ U)
    w = rng.standard_normal(n)
    tau_star = w - Q @ (Q.T @ w)
    tau_star *= tau_star_norm / np.linalg.norm(tau_star)
    theta = tau_star - Theta @ f_star
    jd = JMinv @ s.h - Lam @ theta
    return DynamicsSample(M=s.M, h=s.h, J=s.J, Jdot_nu=jd, B=s.B)
