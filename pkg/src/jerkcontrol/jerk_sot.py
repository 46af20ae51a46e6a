"""Jerk-level stack of tasks with parametrized contact wrenches.

The search variable is ``u = (nu_ddot, xi_dot, tau_dot)``. Writing
``P = blkdiag(I, Phi(xi), I)`` turns the wrench-rate block into ``Phi xi_dot``
so the contact constraints never appear: the problem is a plain
equality-constrained least squares

    min ||A_dot y + A P u - a_star_dot||^2   s.t.   D_dot y + D P u = beta_dot
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProblemError, InvalidInputError
from .linalg import block_diag, numerical_rank, nullspace_projector, pinv
from .wrench import stack_gradient


def selector(n):
    """Actuation selector ``B = [0_{n x 6}, I_n]^T``."""
    return np.vstack([np.zeros((6, n)), np.eye(n)])


@dataclass(frozen=True)
class DynamicsSample:
    """One snapshot of ``M nu_dot + h = J^T f + B tau`` with ``J nu_dot + Jdot_nu = 0``."""

    M: np.ndarray
    h: np.ndarray
    J: np.ndarray
    Jdot_nu: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        nv = M.shape[0]
        if M.shape != (nv, nv) or nv < 7:
            raise InvalidInputError(f"M must be square of size n+6 > 6, got {M.shape}")
        if not np.allclose(M, M.T, rtol=1e-10, atol=1e-10):
            raise InvalidInputError("M is not symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise InvalidInputError("M is not positive definite") from None
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        if J.shape[1] != nv or J.shape[0] % 6:
            raise InvalidInputError(f"J must be (6 n_c, {nv}), got {J.shape}")
        if numerical_rank(J, 1e-10) < J.shape[0]:
            raise InvalidInputError("J must have full row rank")
        n = nv - 6
        B = np.asarray(self.B, dtype=float)
        if B.shape != (nv, n):
            raise InvalidInputError(f"B must be ({nv}, {n}), got {B.shape}")
        h = np.asarray(self.h, dtype=float).reshape(-1)
        jd = np.asarray(self.Jdot_nu, dtype=float).reshape(-1)
        if h.shape != (nv,) or jd.shape != (J.shape[0],):
            raise InvalidInputError("h or Jdot_nu has the wrong length")
        for name, v in (("M", M), ("J", J), ("B", B), ("h", h), ("Jdot_nu", jd)):
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"{name} has non-finite entries")
        for name, v in (("M", M), ("J", J), ("B", B), ("h", h), ("Jdot_nu", jd)):
            object.__setattr__(self, name, v)

    @property
    def n(self):
        return self.M.shape[0] - 6

    @property
    def n_c(self):
        return self.J.shape[0] // 6


def constraint_matrix(sample):
    """``D = [[M, -J^T, -B], [J, 0, 0]]``."""
    n, k = sample.n, 6 * sample.n_c
    nv = n + 6
    D = np.zeros((nv + k, nv + k + n))
    D[:nv, :nv] = sample.M
    D[:nv, nv:nv + k] = -sample.J.T
    D[:nv, nv + k:] = -sample.B
    D[nv:, :nv] = sample.J
    return D


def constraint_rhs(sample):
    """``beta = [-h; -Jdot_nu]``."""
    return -np.concatenate([sample.h, sample.Jdot_nu])


def build_P(xis, geoms, n):
    """``blkdiag(I_{n+6}, Phi(xi), I_n)``."""
    return block_diag([np.eye(n + 6), stack_gradient(xis, geoms), np.eye(n)])


@dataclass(frozen=True)
class SotProblem:
    D: np.ndarray
    D_dot: np.ndarray
    beta_dot: np.ndarray
    A_task: np.ndarray
    A_task_dot: np.ndarray
    a_star_dot: np.ndarray
    y: np.ndarray
    P: np.ndarray


def make_problem(sample, xis, geoms, y, A_task, a_star_dot, *, A_task_dot=None,
                 prev_sample=None, dt=None):
    """Assemble a :class:`SotProblem` from a dynamics snapshot.

    ``D_dot``, ``beta_dot`` and ``A_task_dot`` default to zero. When
    ``prev_sample`` and ``dt`` are given, ``D_dot`` and ``beta_dot`` are
    backward differences between the two snapshots instead.
    """
    D = constraint_matrix(sample)
    if prev_sample is not None:
        if not dt or dt <= 0:
            raise InvalidInputError("finite-difference mode needs dt > 0")
        D_dot = (D - constraint_matrix(prev_sample)) / dt
        beta_dot = (constraint_rhs(sample) - constraint_rhs(prev_sample)) / dt
    else:
        D_dot = np.zeros_like(D)
        beta_dot = np.zeros(D.shape[0])
    A_task = np.atleast_2d(np.asarray(A_task, dtype=float))
    if A_task_dot is None:
        A_task_dot = np.zeros_like(A_task)
    return SotProblem(
        D=D, D_dot=D_dot, beta_dot=beta_dot, A_task=A_task,
        A_task_dot=np.asarray(A_task_dot, dtype=float),
        a_star_dot=np.asarray(a_star_dot, dtype=float).reshape(-1),
        y=np.asarray(y, dtype=float).reshape(-1),
        P=build_P(xis, geoms, sample.n),
    )


def solve_jerk_sot(p, tol=1e-10):
    """Minimal-norm minimizer of the task residual on the constraint set.

    Returns ``u = u_p + N z``: ``u_p`` the minimal-norm particular solution
    of the constraint, ``N`` the projector onto the null space of ``D P``
    and ``z`` the minimal-norm least-squares solution of the projected task.
    Raises :class:`DegenerateProblemError` if ``D P`` is row-rank deficient.
    """
    C = p.D @ p.P
    d = p.beta_dot - p.D_dot @ p.y
    G = p.A_task @ p.P
    C_pinv = pinv(C, tol)
    u_p = C_pinv @ d
    if numerical_rank(C, tol) < C.shape[0]:
        res = float(np.linalg.norm(C @ u_p - d))
        raise DegenerateProblemError("D P is row-rank deficient", residual=res, solution=u_p)
    N = nullspace_projector(C, tol)
    r = p.a_star_dot - p.A_task_dot @ p.y - G @ u_p
    z = pinv(G @ N, tol) @ r
    return u_p + N @ z


def split_solution(u, n, n_c):
    """Split ``u`` into ``(nu_ddot, xi_dot, tau_dot)``."""
    u = np.asarray(u)
    nv, k = n + 6, 6 * n_c
    return u[:nv], u[nv:nv + k], u[nv + k:]
