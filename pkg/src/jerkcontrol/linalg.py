"""Small dense linear-algebra helpers shared by the rest of the package."""

import numpy as np

from .errors import InvalidInputError

DEFAULT_RTOL = 1e-10


def _as_finite_matrix(m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def numerical_rank(m, tol=DEFAULT_RTOL):
    """Number of singular values above ``tol`` times the largest one."""
    m = _as_finite_matrix(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def pinv(m, tol=DEFAULT_RTOL):
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values at or below ``tol * s_max`` are treated as zero, so the
    result degrades gracefully when ``m`` loses rank.
    """
    if tol < 0:
        raise InvalidInputError("tol must be non-negative")
    m = _as_finite_matrix(m)
    rows, cols = m.shape
    if m.size == 0:
        return np.zeros((cols, rows))
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((cols, rows))
    keep = s > tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def nullspace_projector(m, tol=DEFAULT_RTOL):
    """Orthogonal projector onto the null space of ``m``.

    Equal to ``I - pinv(m) @ m``, but assembled from the right singular
    vectors so that a full-column-rank ``m`` yields an exactly zero matrix.
    """
    m = _as_finite_matrix(m)
    cols = m.shape[1]
    if m.size == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    v0 = vt[rank:].T
    return v0 @ v0.T


def skew(x):
    """Cross-product matrix: ``skew(x) @ y == np.cross(x, y)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise InvalidInputError(f"skew expects a 3-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("skew argument is not finite")
    return np.array(
        [
            [0.0, -x[2], x[1]],
            [x[2], 0.0, -x[0]],
            [-x[1], x[0], 0.0],
        ]
    )


def block_diag(blocks):
    """Block-diagonal assembly; off-block entries are exactly zero."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise InvalidInputError("block_diag needs at least one block")
    for b in blocks:
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("block has non-finite entries")
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def is_spd(m, tol=0.0):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    if not np.all(np.isfinite(m)):
        return False
    if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + m.T)).min() > tol)
