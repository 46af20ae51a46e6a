"""Contact-stable wrench parametrization.

A contact wrench is ``[fx, fy, fz, mx, my, mz]`` expressed in the contact
frame. ``phi`` maps any ``xi`` in R^6 to a wrench that strictly satisfies the
unilateral, friction, center-of-pressure and torsional constraints of a
rectangular foot; ``phi_inverse`` undoes it and ``phi_gradient`` is its
Jacobian. All three accept arrays with arbitrary leading batch dimensions
(``(..., 6)``), which keeps the property checks vectorized.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, OutOfDomainError
from .linalg import block_diag

XI3_CAP = 40.0
CONSTRAINT_NAMES = ("normal", "friction", "cop_y", "cop_x", "torsion")


@dataclass(frozen=True)
class ContactGeometry:
    """Friction coefficients and foot rectangle of one planar contact.

    ``mu_z`` is a length (m): the bound on ``|mz / fz|``.
    """

    mu_c: float = 1.0 / 3.0
    mu_z: float = 0.01
    fz_min: float = 0.0
    x_min: float = -0.1
    x_max: float = 0.1
    y_min: float = -0.05
    y_max: float = 0.05

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise InvalidInputError(
                "invalid contact geometry: " + "; ".join(f"{k}: {m}" for k, m in problems)
            )

    def problems(self):
        out = []
        for name in ("mu_c", "mu_z", "fz_min", "x_min", "x_max", "y_min", "y_max"):
            if not np.isfinite(getattr(self, name)):
                out.append((name, "must be finite"))
        if not self.mu_c > 0:
            out.append(("mu_c", "must be > 0"))
        if not self.mu_z > 0:
            out.append(("mu_z", "must be > 0"))
        if not self.fz_min >= 0:
            out.append(("fz_min", "must be >= 0"))
        if not self.x_min < self.x_max:
            out.append(("x_min", "must be < x_max"))
        if not self.y_min < self.y_max:
            out.append(("y_min", "must be < y_max"))
        return out

    @property
    def delta_x(self):
        return 0.5 * (self.x_max - self.x_min)

    @property
    def delta_x0(self):
        return -0.5 * (self.x_min + self.x_max)

    @property
    def delta_y(self):
        return 0.5 * (self.y_max - self.y_min)

    @property
    def delta_y0(self):
        return 0.5 * (self.y_max + self.y_min)

    def to_dict(self):
        return {
            "mu_c": self.mu_c,
            "mu_z_m": self.mu_z,
            "fz_min_N": self.fz_min,
            "x_min_m": self.x_min,
            "x_max_m": self.x_max,
            "y_min_m": self.y_min,
            "y_max_m": self.y_max,
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`; unit suffixes are optional on input."""
        keys = {
            "mu_c": ("mu_c",),
            "mu_z": ("mu_z_m", "mu_z"),
            "fz_min": ("fz_min_N", "fz_min"),
            "x_min": ("x_min_m", "x_min"),
            "x_max": ("x_max_m", "x_max"),
            "y_min": ("y_min_m", "y_min"),
            "y_max": ("y_max_m", "y_max"),
        }
        kwargs = {}
        for attr, names in keys.items():
            for n in names:
                if n in d:
                    kwargs[attr] = float(d[n])
                    break
        return cls(**kwargs)


@dataclass(frozen=True)
class SaturationPolicy:
    """Clamps applied by :func:`phi_inverse` to wrenches outside the image.

    With ``enabled=False`` such wrenches raise :class:`OutOfDomainError`.
    """

    enabled: bool = True
    eps_z: float = 1e-6
    atanh_margin: float = 1e-6
    tanh2_max: float = 1.0 - 1e-6


NO_SATURATION = SaturationPolicy(enabled=False)


@dataclass(frozen=True)
class ConstraintReport:
    """Strict satisfaction and signed margins of the five contact constraints.

    Margins are in natural units: N for ``normal`` and ``friction``, m for
    the two CoP rows and for ``torsion``. A non-positive normal force gives
    ``-inf`` margins on the ratio-based rows.
    """

    margins: np.ndarray
    names: tuple = field(default=CONSTRAINT_NAMES)

    @property
    def satisfied(self):
        return self.margins > 0.0

    @property
    def all_satisfied(self):
        return bool(np.all(self.satisfied))

    @property
    def min_margin(self):
        return float(np.min(self.margins))

    def as_dict(self):
        if self.margins.ndim != 1:
            raise ValueError("as_dict is only defined for a single wrench")
        return dict(zip(self.names, self.margins.tolist()))


def _check_last_dim(a, name):
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (6,):
        raise InvalidInputError(f"{name} must have trailing dimension 6, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def phi(xi, geom):
    """Map free parameters ``xi`` (..., 6) to a contact-stable wrench."""
    xi = _check_last_dim(xi, "xi")
    t = np.tanh(xi)
    t1, t2, t4, t5, t6 = t[..., 0], t[..., 1], t[..., 3], t[..., 4], t[..., 5]
    fz = np.exp(np.minimum(xi[..., 2], XI3_CAP)) + geom.fz_min
    out = np.empty(xi.shape)
    out[..., 0] = geom.mu_c * t1 * fz / np.sqrt(1.0 + t2 * t2)
    out[..., 1] = geom.mu_c * t2 * fz / np.sqrt(1.0 + t1 * t1)
    out[..., 2] = fz
    out[..., 3] = (geom.delta_y * t4 + geom.delta_y0) * fz
    out[..., 4] = (geom.delta_x * t5 + geom.delta_x0) * fz
    out[..., 5] = geom.mu_z * t6 * fz
    return out


def phi_gradient(xi, geom):
    """Jacobian of :func:`phi`, shape (..., 6, 6).

    Only the entries (1,1) (1,2) (1,3) (2,1) (2,2) (2,3) and the third
    column and diagonal of rows 4-6 can be nonzero (1-based indices).
    """
    xi = _check_last_dim(xi, "xi")
    t = np.tanh(xi)
    t1, t2, t4, t5, t6 = t[..., 0], t[..., 1], t[..., 3], t[..., 4], t[..., 5]
    ez = np.exp(np.minimum(xi[..., 2], XI3_CAP))
    fz = ez + geom.fz_min
    s1 = 1.0 + t1 * t1
    s2 = 1.0 + t2 * t2
    mu = geom.mu_c
    g = np.zeros(xi.shape + (6,))
    g[..., 0, 0] = mu * (1.0 - t1 * t1) * fz / np.sqrt(s2)
    g[..., 0, 1] = mu * t1 * fz * (t2 ** 3 - t2) / s2 ** 1.5
    g[..., 0, 2] = mu * t1 * ez / np.sqrt(s2)
    g[..., 1, 0] = mu * t2 * fz * (t1 ** 3 - t1) / s1 ** 1.5
    g[..., 1, 1] = mu * (1.0 - t2 * t2) * fz / np.sqrt(s1)
    g[..., 1, 2] = mu * t2 * ez / np.sqrt(s1)
    g[..., 2, 2] = ez
    g[..., 3, 2] = (geom.delta_y * t4 + geom.delta_y0) * ez
    g[..., 3, 3] = geom.delta_y * (1.0 - t4 * t4) * fz
    g[..., 4, 2] = (geom.delta_x * t5 + geom.delta_x0) * ez
    g[..., 4, 4] = geom.delta_x * (1.0 - t5 * t5) * fz
    g[..., 5, 2] = geom.mu_z * t6 * ez
    g[..., 5, 5] = geom.mu_z * (1.0 - t6 * t6) * fz
    return g


def phi_gradient_det(xi, geom):
    """Closed-form determinant of :func:`phi_gradient` (cofactor expansion)."""
    xi = _check_last_dim(xi, "xi")
    t = np.tanh(xi)
    a, b = t[..., 0] ** 2, t[..., 1] ** 2
    ez = np.exp(np.minimum(xi[..., 2], XI3_CAP))
    fz = ez + geom.fz_min
    planar = (
        geom.mu_c ** 2 * fz ** 2
        * (1 - a) * (1 - b) / np.sqrt((1 + a) * (1 + b))
        * (1 + a + b) / ((1 + a) * (1 + b))
    )
    rest = (
        ez
        * geom.delta_y * (1 - t[..., 3] ** 2) * fz
        * geom.delta_x * (1 - t[..., 4] ** 2) * fz
        * geom.mu_z * (1 - t[..., 5] ** 2) * fz
    )
    return planar * rest


def _tangential_tanh2(a, b):
    """Solve the 2x2 linear system for (tanh^2 xi1, tanh^2 xi2).

    ``a``, ``b`` are ``fx, fy`` normalized by ``mu_c * fz``. Returns the pair
    and the system determinant ``1 - a^2 b^2``.
    """
    a2, b2 = a * a, b * b
    det = 1.0 - a2 * b2
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = a2 * (1.0 + b2) / det
        t2 = b2 * (1.0 + a2) / det
    return t1, t2, det


def phi_inverse(w, geom, saturation=SaturationPolicy()):
    """Recover ``xi`` from a wrench (..., 6).

    For wrenches in the image of :func:`phi` this is the exact inverse. With
    saturation enabled, wrenches outside it are clamped so the result is
    always finite: ``fz - fz_min`` to at least ``eps_z``, atanh arguments to
    ``[-1 + margin, 1 - margin]`` and tangential ``tanh^2`` to
    ``[0, tanh2_max]``.
    """
    w = _check_last_dim(w, "wrench")
    sat = saturation.enabled
    dz = w[..., 2] - geom.fz_min
    if sat:
        dz = np.maximum(dz, saturation.eps_z)
    elif np.any(dz <= 0):
        raise OutOfDomainError("fz <= fz_min")
    fz = dz + geom.fz_min

    def _atanh(arg, name):
        if sat:
            lim = 1.0 - saturation.atanh_margin
            arg = np.clip(arg, -lim, lim)
        elif np.any(np.abs(arg) >= 1.0):
            raise OutOfDomainError(f"{name} outside the parametrized range")
        return np.arctanh(arg)

    xi = np.empty(w.shape)
    xi[..., 2] = np.log(dz)
    xi[..., 3] = _atanh((w[..., 3] - geom.delta_y0 * fz) / (geom.delta_y * fz), "mx (CoP y)")
    xi[..., 4] = _atanh((w[..., 4] - geom.delta_x0 * fz) / (geom.delta_x * fz), "my (CoP x)")
    xi[..., 5] = _atanh(w[..., 5] / (geom.mu_z * fz), "mz (torsion)")

    scale = geom.mu_c * fz
    a = w[..., 0] / scale
    b = w[..., 1] / scale
    t1, t2, det = _tangential_tanh2(a, b)
    if sat:
        bad = ~(det > 0)
        t1 = np.where(bad, saturation.tanh2_max, t1)
        t2 = np.where(bad, saturation.tanh2_max, t2)
        t1 = np.clip(t1, 0.0, saturation.tanh2_max)
        t2 = np.clip(t2, 0.0, saturation.tanh2_max)
    elif np.any(~(det > 0)) or np.any(t1 >= 1.0) or np.any(t2 >= 1.0):
        raise OutOfDomainError("tangential force outside the parametrized friction set")
    xi[..., 0] = np.sign(w[..., 0]) * np.arctanh(np.sqrt(t1))
    xi[..., 1] = np.sign(w[..., 1]) * np.arctanh(np.sqrt(t2))
    return xi


def in_image(w, geom, rtol=1e-8):
    """Operational membership test for the image of :func:`phi`.

    True when the unsaturated inverse exists and maps back onto ``w``.
    """
    try:
        xi = phi_inverse(w, geom, NO_SATURATION)
    except OutOfDomainError:
        return False
    w = np.asarray(w, dtype=float)
    back = phi(xi, geom)
    return bool(np.all(np.abs(back - w) <= rtol * (1.0 + np.abs(w))))


def check_constraints(w, geom):
    """Evaluate the five strict contact-stability inequalities.

    Accepts a single wrench or a batch (..., 6); margins have shape (..., 5).
    """
    w = _check_last_dim(w, "wrench")
    fx, fy, fz, mx, my, mz = np.moveaxis(w, -1, 0)
    margins = np.empty(w.shape[:-1] + (5,))
    margins[..., 0] = fz - geom.fz_min
    margins[..., 1] = geom.mu_c * fz - np.hypot(fx, fy)
    pos = fz > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cop_y = mx / fz
        cop_x = -my / fz
        twist = np.abs(mz / fz)
        margins[..., 2] = np.where(pos, np.minimum(cop_y - geom.y_min, geom.y_max - cop_y), -np.inf)
        margins[..., 3] = np.where(pos, np.minimum(cop_x - geom.x_min, geom.x_max - cop_x), -np.inf)
        margins[..., 4] = np.where(pos, geom.mu_z - twist, -np.inf)
    return ConstraintReport(margins=margins)


def _geoms_for(n_c, geoms):
    if isinstance(geoms, ContactGeometry):
        return [geoms] * n_c
    geoms = list(geoms)
    if len(geoms) != n_c:
        raise InvalidInputError(f"{len(geoms)} geometries for {n_c} contacts")
    return geoms


def as_stack(x):
    """Reshape a flat ``6 n_c`` vector (or a stack) into an (n_c, 6) array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.size == 0 or x.size % 6:
            raise InvalidInputError(f"flat stack length {x.size} is not a positive multiple of 6")
        return x.reshape(-1, 6)
    if x.ndim != 2 or x.shape[1] != 6 or x.shape[0] == 0:
        raise InvalidInputError(f"expected an (n_c, 6) stack, got {x.shape}")
    return x


def stack_phi(xis, geoms):
    """Per-contact :func:`phi`; returns an (n_c, 6) wrench stack."""
    xis = as_stack(xis)
    gs = _geoms_for(len(xis), geoms)
    return np.stack([phi(x, g) for x, g in zip(xis, gs)])


def stack_gradient(xis, geoms):
    """Block-diagonal Jacobian of :func:`stack_phi`, (6 n_c, 6 n_c)."""
    xis = as_stack(xis)
    gs = _geoms_for(len(xis), geoms)
    return block_diag([phi_gradient(x, g) for x, g in zip(xis, gs)])


def stack_phi_inverse(ws, geoms, saturation=SaturationPolicy()):
    ws = as_stack(ws)
    gs = _geoms_for(len(ws), geoms)
    return np.stack([phi_inverse(w, g, saturation) for w, g in zip(ws, gs)])


def cone_coverage_estimate(geom, samples=1_000_000, seed=0, fz=None, chunk=250_000):
    """Monte Carlo share of the friction disk reached by ``phi``.

    Tangential forces are drawn uniformly from the disk of radius
    ``mu_c * fz`` and kept when the unsaturated inverse succeeds. The ratio
    does not depend on ``fz``. Deterministic for a given ``seed``.
    """
    if samples < 1:
        raise InvalidInputError("samples must be positive")
    if fz is None:
        fz = geom.fz_min + 1.0
    rng = np.random.default_rng(seed)
    radius = geom.mu_c * fz
    hits = 0
    left = int(samples)
    while left > 0:
        n = min(chunk, left)
        r = radius * np.sqrt(rng.random(n))
        ang = 2.0 * np.pi * rng.random(n)
        a = r * np.cos(ang) / radius
        b = r * np.sin(ang) / radius
        t1, t2, det = _tangential_tanh2(a, b)
        hits += int(np.count_nonzero((det > 0) & (t1 < 1.0) & (t2 < 1.0)))
        left -= n
    return hits / samples


def binomial_interval(p, samples, z=1.96):
    """Normal-approximation confidence interval for a Monte Carlo share."""
    half = z * np.sqrt(p * (1.0 - p) / samples)
    return p - half, p + half
