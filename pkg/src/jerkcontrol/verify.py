"""Built-in property checks behind ``jerkcontrol verify``.

Each check returns a :class:`CheckResult` with the number of samples, the
worst observed value and whether it met its bound.
"""

import time
from dataclasses import dataclass

import numpy as np

from .controllers import torque_from_wrench, torque_map, torques_forces_residual
from .sim import Scenario, run_episode
from .synthetic import consistent_sample
from .wrench import ContactGeometry, check_constraints, phi, phi_gradient, phi_inverse

PROFILES = {
    "quick": {"constraints": 10_000, "roundtrip": 10_000, "gradient": 1_000,
              "lyapunov_horizon_s": 5.0, "torque": 100},
    "full": {"constraints": 100_000, "roundtrip": 100_000, "gradient": 10_000,
             "lyapunov_horizon_s": 20.0, "torque": 1000},
}


@dataclass
class CheckResult:
    name: str
    samples: int
    worst: float
    bound: str
    passed: bool
    seconds: float = 0.0

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28} samples={self.samples:<8} worst={self.worst:.3e} ({self.bound})"


def random_geometry(rng):
    x0 = rng.uniform(-0.2, 0.1)
    y0 = rng.uniform(-0.1, 0.05)
    return ContactGeometry(
        mu_c=rng.uniform(0.1, 1.2),
        mu_z=rng.uniform(0.005, 0.1),
        fz_min=rng.uniform(0.0, 20.0),
        x_min=x0, x_max=x0 + rng.uniform(0.02, 0.3),
        y_min=y0, y_max=y0 + rng.uniform(0.02, 0.15),
    )


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        r = fn(*a, **kw)
        r.seconds = time.perf_counter() - t0
        return r
    return wrapper


@_timed
def check_constraint_satisfaction(samples, seed=0, n_geoms=20, bound=10.0):
    rng = np.random.default_rng(seed)
    per = -(-samples // n_geoms)
    worst = np.inf
    for _ in range(n_geoms):
        g = random_geometry(rng)
        xi = rng.uniform(-bound, bound, (per, 6))
        m = check_constraints(phi(xi, g), g).margins
        worst = min(worst, float(m.min()))
    return CheckResult("constraint satisfaction", per * n_geoms, worst, "min margin > 0", worst > 0)


@_timed
def check_roundtrip(samples, seed=1, bound=5.0, tol=1e-8):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng)
    xi = rng.uniform(-bound, bound, (samples, 6))
    w = phi(xi, g)
    err = float(np.max(np.abs(phi_inverse(w, g) - xi)))
    return CheckResult("round trip phi^-1(phi(xi))", samples, err, f"< {tol:g}", err < tol)


def fd_gradient(xi, g, h=1e-6):
    """Central finite differences of :func:`phi`, batch (..., 6, 6)."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape + (6,))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        out[..., :, j] = (phi(xi + e, g) - phi(xi - e, g)) / (2 * h)
    return out


@_timed
def check_gradient(samples, seed=2, bound=5.0, tol=1e-5):
    rng = np.random.default_rng(seed)
    g = random_geometry(rng)
    xi = rng.uniform(-bound, bound, (samples, 6))
    an = phi_gradient(xi, g)
    fd = fd_gradient(xi, g)
    scale = np.max(np.abs(an), axis=(-2, -1))
    rel = np.max(np.abs(an - fd), axis=(-2, -1)) / scale
    worst = float(rel.max())
    return CheckResult("gradient vs finite diff", samples, worst, f"< {tol:g}", worst < tol)


LYAPUNOV_SCENARIO = {
    "name": "verify-lyapunov",
    "mass_kg": 33.0,
    "com_m": [0.0, 0.0, 0.5],
    "contacts": [{"origin_m": [0.0, 0.0, 0.0]}],
    "initial": {"H_error": [0.3, -0.2, 0.1, 0.05, 0.2, -0.1], "I_err": [0.1, 0.0, -0.1, 0.0, 0.05, 0.0]},
    "controller": {"mode": "lemma2"},
    "gains": {"Kp": [2, 3, 4, 2, 3, 4], "Kd": 3.0, "Ko": [1, 2, 1, 2, 1, 2]},
    "horizon_s": 5.0,
}


@_timed
def check_lyapunov(horizon):
    s = Scenario.from_dict(dict(LYAPUNOV_SCENARIO, horizon_s=horizon))
    log, _ = run_episode(s)
    V = log.col("V")
    rise = float(np.max(np.diff(V)) / V[0])
    return CheckResult("Lyapunov monotonicity", len(V), rise, "max dV/V0 <= 1e-6", rise <= 1e-6)


@_timed
def check_torque_map(samples, seed=3, tol=1e-8):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(samples):
        n = (6, 10)[i % 2]
        n_c = (1, 2)[(i // 2) % 2]
        tau_true = rng.standard_normal(n)
        f = rng.standard_normal(6 * n_c)
        s = consistent_sample(rng, n, n_c, f, tau_true)
        tm = torque_map(s)
        tau = torque_from_wrench(s, f)
        scale = 1.0 + np.linalg.norm(tm.JMinv @ s.h) + np.linalg.norm(s.Jdot_nu)
        worst = max(worst, float(np.linalg.norm(torques_forces_residual(s, f, tau)) / scale))
    return CheckResult("torque map residual", samples, worst, f"< {tol:g} scaled", worst < tol)


def run_checks(profile="quick"):
    p = PROFILES[profile]
    return [
        check_constraint_satisfaction(p["constraints"]),
        check_roundtrip(p["roundtrip"]),
        check_gradient(p["gradient"]),
        check_lyapunov(p["lyapunov_horizon_s"]),
        check_torque_map(p["torque"]),
    ]
