"""Scenario-driven episodes on the momentum plant.

A scenario is a JSON document with explicit units in its keys (``horizon_s``,
``plant_dt_s``, ...). ``run_episode`` wires the plant, a controller, the
measurement transform and the disturbance schedule together and returns an
:class:`EpisodeLog` that writes a fixed-schema CSV.
"""

import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .controllers import (
    CONTROL_MODES,
    GainSet,
    MomentumJerkController,
    Reference,
)
from .errors import ConfigError, InvalidInputError
from .momentum import E3, ContactFrame, MomentumState, contact_map, plant_step
from .linalg import pinv
from .synthetic import random_sample, torque_optimum_sample
from .wrench import CONSTRAINT_NAMES, ContactGeometry, check_constraints, stack_phi

DIVERGENCE_RATIO = 1e3


# Reference trajectories -----------------------------------------------------


class ConstantReference:
    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)

    def __call__(self, t):
        return Reference(H_d=self.value.copy())


class SinusoidReference:
    """``offset + amplitude * sin(2 pi f t + phase)`` per component."""

    def __init__(self, offset, amplitude, frequency_hz, phase_rad=0.0):
        self.offset = np.asarray(offset, dtype=float)
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.w = 2.0 * np.pi * float(frequency_hz)
        self.phase = phase_rad

    def __call__(self, t):
        s = np.sin(self.w * t + self.phase)
        c = np.cos(self.w * t + self.phase)
        return Reference(
            H_d=self.offset + self.amplitude * s,
            H_d_dot=self.amplitude * self.w * c,
            H_d_ddot=-self.amplitude * self.w ** 2 * s,
        )


class SplineReference:
    """Cubic spline through knots; held constant outside the knot range."""

    def __init__(self, times, values):
        self.t0, self.t1 = times[0], times[-1]
        self.spline = CubicSpline(np.asarray(times, float), np.asarray(values, float), axis=0)

    def __call__(self, t):
        tc = min(max(t, self.t0), self.t1)
        inside = self.t0 <= t <= self.t1
        d1 = self.spline(tc, 1) if inside else np.zeros(6)
        d2 = self.spline(tc, 2) if inside else np.zeros(6)
        return Reference(H_d=self.spline(tc), H_d_dot=d1, H_d_ddot=d2)


# Scenario -------------------------------------------------------------------


def _vec(x, n):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size != n or not np.all(np.isfinite(v)):
        raise ValueError(f"expected {n} finite numbers")
    return v


def _gain_matrix(x, n=6):
    """Scalar, diagonal list or full matrix -> n x n matrix."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    if a.ndim == 1 and a.size == n:
        return np.diag(a)
    if a.shape == (n, n):
        return a
    raise ValueError(f"expected a scalar, {n} diagonal entries or a {n}x{n} matrix")


@dataclass
class Scenario:
    """Parsed and validated scenario. Build with :meth:`from_dict`."""

    name: str
    frames: list
    mass: float
    gravity: float
    com: np.ndarray
    H_error0: np.ndarray
    I_err0: np.ndarray
    initial_wrench: np.ndarray
    reference: object
    mode: str
    gains: GainSet
    torque_min: bool = False
    resync_every: int = 0
    derivative_mode: str = "zero"
    bias: np.ndarray = None
    noise_std: float = 0.0
    seed: int = None
    disturbances: list = field(default_factory=list)
    dynamics: dict = None
    horizon: float = 1.0
    plant_dt: float = 1e-3
    controller_dt: float = 1e-2
    divergence_floor: float = 1e-2
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_c(self):
        return len(self.frames)

    @property
    def substeps(self):
        return int(round(self.controller_dt / self.plant_dt))

    @property
    def n_cycles(self):
        return int(round(self.horizon / self.controller_dt))

    @classmethod
    def from_json(cls, path, seed=None):
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls.from_dict(d, seed=seed)

    @classmethod
    def from_dict(cls, d, seed=None):
        """Validate ``d``; raise :class:`ConfigError` listing every bad field."""
        problems = []
        out = {"raw": d}

        def get(key, conv, default=None, required=False):
            if key not in d:
                if required:
                    problems.append((key, "missing"))
                return default
            try:
                return conv(d[key])
            except (TypeError, ValueError) as exc:
                problems.append((key, str(exc) or "invalid value"))
                return default

        out["name"] = str(d.get("name", "scenario"))
        out["mass"] = get("mass_kg", float, 1.0, required=True)
        if out["mass"] is not None and not out["mass"] > 0:
            problems.append(("mass_kg", "must be > 0"))
        out["gravity"] = get("gravity_mps2", float, 9.81)
        out["com"] = get("com_m", lambda x: _vec(x, 3), np.zeros(3), required=True)

        frames = []
        contacts = d.get("contacts")
        if not isinstance(contacts, list) or not contacts:
            problems.append(("contacts", "must be a non-empty list"))
            contacts = []
        for k, c in enumerate(contacts):
            pre = f"contacts[{k}]"
            try:
                origin = _vec(c.get("origin_m"), 3)
            except (TypeError, ValueError, AttributeError):
                problems.append((f"{pre}.origin_m", "expected 3 finite numbers"))
                continue
            gd = c.get("geometry", {})
            try:
                geom = _geometry_unchecked(gd)
            except (TypeError, ValueError, AttributeError) as exc:
                problems.append((f"{pre}.geometry", str(exc)))
                continue
            gp = geom.problems()
            if gp:
                suffix = {"mu_c": "mu_c", "mu_z": "mu_z_m", "fz_min": "fz_min_N",
                          "x_min": "x_min_m", "x_max": "x_max_m",
                          "y_min": "y_min_m", "y_max": "y_max_m"}
                problems.extend((f"{pre}.geometry.{suffix[n]}", m) for n, m in gp)
                continue
            frames.append(ContactFrame(origin=origin, geometry=geom))
        out["frames"] = frames
        n_c = len(contacts)

        init = d.get("initial", {})
        if not isinstance(init, dict):
            problems.append(("initial", "must be an object"))
            init = {}

        def iget(key, n, default):
            if key not in init:
                return default
            try:
                return _vec(init[key], n)
            except (TypeError, ValueError) as exc:
                problems.append((f"initial.{key}", str(exc)))
                return default

        out["H_error0"] = iget("H_error", 6, np.zeros(6))
        out["I_err0"] = iget("I_err", 6, np.zeros(6))
        out["initial_wrench"] = iget("wrench_N", 6 * max(n_c, 1), None)

        out["reference"] = _parse_reference(d.get("reference", {"type": "constant"}), problems)

        ctrl = d.get("controller", {})
        mode = ctrl.get("mode", "lemma2")
        if mode not in CONTROL_MODES:
            problems.append(("controller.mode", f"must be one of {CONTROL_MODES}"))
        out["mode"] = mode
        out["torque_min"] = bool(ctrl.get("torque_min", False))
        try:
            out["resync_every"] = int(ctrl.get("resync_every", 0))
            if out["resync_every"] < 0:
                raise ValueError
        except (TypeError, ValueError):
            problems.append(("controller.resync_every", "must be a non-negative integer"))
        out["derivative_mode"] = ctrl.get("derivative_mode", "zero")
        if out["derivative_mode"] not in ("zero", "finite-difference"):
            problems.append(("controller.derivative_mode", "must be 'zero' or 'finite-difference'"))

        dyn = d.get("dynamics")
        if dyn is not None:
            try:
                kind = dyn.get("kind", "random")
                parsed = {"kind": kind, "n": int(dyn.get("n", 10)), "seed": int(dyn.get("seed", 0)),
                          "cond": float(dyn.get("cond", 10.0))}
                if parsed["n"] < 1:
                    raise ValueError
                if kind == "optimum":
                    parsed["optimum_wrench"] = _vec(dyn["optimum_wrench_N"], 6 * n_c)
                    parsed["tau_star_norm"] = float(dyn.get("tau_star_norm_Nm", 10.0))
                    if 6 * n_c < parsed["n"]:
                        raise ValueError
                elif kind != "random":
                    raise ValueError
                dyn = parsed
            except (TypeError, ValueError, AttributeError, KeyError):
                problems.append(("dynamics", "expects kind random|optimum, integer n >= 1, integer "
                                 "seed, cond; optimum also needs optimum_wrench_N and 6 n_c >= n"))
                dyn = None
        out["dynamics"] = dyn

        out["gains"] = _parse_gains(d.get("gains", {}), dyn["n"] if dyn else None, problems)
        if out["torque_min"] and (dyn is None or (out["gains"] and out["gains"].K_tau is None)):
            problems.append(("controller.torque_min", "needs a dynamics section and gains.K_tau"))
        if mode == "fb-lin+Ki" and out["gains"] is not None and out["gains"].Ki is None:
            problems.append(("gains.Ki", "required by fb-lin+Ki"))

        meas = d.get("measurement", {})
        out["bias"] = None
        if "bias_N" in meas:
            try:
                out["bias"] = _vec(meas["bias_N"], 6 * n_c)
            except (TypeError, ValueError) as exc:
                problems.append(("measurement.bias_N", str(exc)))
        try:
            out["noise_std"] = float(meas.get("noise_std_N", 0.0))
            if not out["noise_std"] >= 0:
                raise ValueError
        except (TypeError, ValueError):
            problems.append(("measurement.noise_std_N", "must be >= 0"))
            out["noise_std"] = 0.0
        s = meas.get("seed") if seed is None else seed
        out["seed"] = None if s is None else int(s)
        if out["noise_std"] > 0 and out["seed"] is None:
            problems.append(("measurement.seed", "mandatory when noise_std_N > 0"))

        dist = []
        for k, e in enumerate(d.get("disturbances", [])):
            try:
                t0, t1 = float(e["start_s"]), float(e["stop_s"])
                if not t1 > t0:
                    raise ValueError("stop_s must exceed start_s")
                dist.append((t0, t1, _vec(e["wrench"], 6)))
            except (KeyError, TypeError, ValueError) as exc:
                problems.append((f"disturbances[{k}]", str(exc) or "needs start_s, stop_s, wrench"))
        out["disturbances"] = dist

        out["horizon"] = get("horizon_s", float, 1.0, required=True)
        out["plant_dt"] = get("plant_dt_s", float, 1e-3)
        out["controller_dt"] = get("controller_dt_s", float, 1e-2)
        out["divergence_floor"] = get("divergence_floor", float, 1e-2)
        for key, attr in (("horizon_s", "horizon"), ("plant_dt_s", "plant_dt"),
                          ("controller_dt_s", "controller_dt"),
                          ("divergence_floor", "divergence_floor")):
            v = out[attr]
            if v is not None and not (np.isfinite(v) and v > 0):
                problems.append((key, "must be > 0"))
        pdt, cdt = out["plant_dt"], out["controller_dt"]
        if pdt and cdt and pdt > 0 and cdt > 0:
            ratio = cdt / pdt
            if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
                problems.append(("controller_dt_s", "must be an integer multiple of plant_dt_s"))

        if problems:
            raise ConfigError(problems)
        return cls(**out)


def _geometry_unchecked(gd):
    """Build a ContactGeometry without raising so all problems can be listed."""
    vals = ContactGeometry().to_dict()
    for k in list(vals):
        base = k if k == "mu_c" else k.rsplit("_", 1)[0]
        for name in (k, base):
            if name in gd:
                vals[k] = float(gd[name])
                break
    geom = object.__new__(ContactGeometry)
    attrs = {"mu_c": "mu_c", "mu_z_m": "mu_z", "fz_min_N": "fz_min", "x_min_m": "x_min",
             "x_max_m": "x_max", "y_min_m": "y_min", "y_max_m": "y_max"}
    for k, a in attrs.items():
        object.__setattr__(geom, a, vals[k])
    return geom


def _parse_reference(rd, problems):
    kind = rd.get("type", "constant")
    try:
        if kind == "constant":
            return ConstantReference(_vec(rd.get("H_d", np.zeros(6)), 6))
        if kind == "sinusoid":
            return SinusoidReference(
                _vec(rd.get("offset", np.zeros(6)), 6),
                _vec(rd["amplitude"], 6),
                float(rd["frequency_hz"]),
                float(rd.get("phase_rad", 0.0)),
            )
        if kind == "spline":
            times = np.asarray(rd["times_s"], dtype=float)
            vals = np.asarray(rd["H_d"], dtype=float)
            if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
                raise ValueError("times_s must be strictly increasing with >= 2 knots")
            if vals.shape != (times.size, 6):
                raise ValueError("H_d must have one 6-vector per knot")
            return SplineReference(times, vals)
        problems.append(("reference.type", "must be constant, sinusoid or spline"))
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(("reference", str(exc)))
    return ConstantReference(np.zeros(6))


def _parse_gains(gd, n, problems):
    kw = {}
    for key in ("Kp", "Kd", "Ko", "Ki"):
        if key not in gd:
            if key != "Ki":
                problems.append((f"gains.{key}", "missing"))
            continue
        try:
            m = _gain_matrix(gd[key])
            if not np.allclose(m, m.T) or np.any(np.linalg.eigvalsh(0.5 * (m + m.T)) <= 0):
                raise ValueError("must be symmetric positive definite")
            kw[key] = m
        except (TypeError, ValueError, np.linalg.LinAlgError) as exc:
            problems.append((f"gains.{key}", str(exc)))
    try:
        kw["k_e"] = float(gd.get("k_e", 0.0))
        if not kw["k_e"] >= 0:
            raise ValueError
    except (TypeError, ValueError):
        problems.append(("gains.k_e", "must be a scalar >= 0"))
        kw["k_e"] = 0.0
    if "K_tau" in gd:
        if n is None:
            problems.append(("gains.K_tau", "needs a dynamics section"))
        else:
            try:
                m = _gain_matrix(gd["K_tau"], n)
                if np.any(np.linalg.eigvalsh(0.5 * (m + m.T)) <= 0):
                    raise ValueError("must be symmetric positive definite")
                kw["K_tau"] = m
            except (TypeError, ValueError) as exc:
                problems.append(("gains.K_tau", str(exc)))
    if not all(k in kw for k in ("Kp", "Kd", "Ko")):
        return None
    try:
        return GainSet(**kw)
    except InvalidInputError as exc:
        problems.append(("gains", str(exc)))
        return None


# Episode log ----------------------------------------------------------------


def log_columns(n_c):
    cols = ["t"]
    for base in ("H", "H_d", "Htil", "Htil_dot", "I_err", "zeta"):
        cols += [f"{base}_{i}" for i in range(6)]
    cols.append("V")
    for base in ("xi", "f"):
        cols += [f"{base}_{k}_{i}" for k in range(n_c) for i in range(6)]
    cols += [f"margin_{k}_{nm}" for k in range(n_c) for nm in CONSTRAINT_NAMES]
    cols += ["tau_norm", "xi_norm", "xi_dot_norm", "phi_norm", "residual", "zeta_dot_error",
             "saturated", "rank_degraded", "resynced", "diverged"]
    return cols


@dataclass
class EpisodeLog:
    """One row per controller cycle, columns given by :func:`log_columns`."""

    columns: list
    rows: list = field(default_factory=list)

    @property
    def data(self):
        return np.array(self.rows, dtype=float).reshape(-1, len(self.columns))

    def col(self, name):
        return self.data[:, self.columns.index(name)]

    def block(self, prefix):
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix + "_")
               and c[len(prefix) + 1:].replace("_", "").isdigit()]
        return self.data[:, idx]

    def margins(self):
        idx = [i for i, c in enumerate(self.columns) if c.startswith("margin_")]
        return self.data[:, idx]

    @property
    def diverged(self):
        return bool(self.rows) and bool(self.rows[-1][-1])

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(format(float(v), ".17g") for v in r) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


@dataclass
class Summary:
    name: str
    completed: bool
    diverged: bool
    cycles: int
    final_Htil_norm: float
    max_Htil_norm: float
    max_xi_norm: float
    final_tau_norm: float
    seed: int = None
    error: str = None

    @property
    def success(self):
        return self.completed and not self.diverged and self.error is None

    def to_text(self):
        lines = [f"{k}: {v}" for k, v in self.__dict__.items()]
        lines.append(f"success: {self.success}")
        return "\n".join(lines) + "\n"


# Episode --------------------------------------------------------------------


def _disturbance_fn(schedule):
    if not schedule:
        return None

    def d(t):
        out = np.zeros(6)
        for t0, t1, w in schedule:
            if t0 <= t < t1:
                out += w
        return out
    return d


def initial_wrench(s):
    """Explicit ``initial.wrench_N`` or the minimum-norm wrench matching ``H_d_dot(0)``."""
    if s.initial_wrench is not None:
        return s.initial_wrench.copy()
    A = contact_map(s.frames, s.com)
    return pinv(A) @ (s.reference(0.0).H_d_dot + s.mass * s.gravity * E3)


def run_episode(s):
    """Simulate ``s`` to its horizon or until divergence; return (log, summary)."""
    rng = np.random.default_rng(s.seed)
    dynamics = None
    if s.dynamics is not None:
        dyn = s.dynamics
        drng = np.random.default_rng(dyn["seed"])
        if dyn["kind"] == "optimum":
            dynamics = torque_optimum_sample(drng, dyn["n"], contact_map(s.frames, s.com),
                                             dyn["optimum_wrench"], dyn["tau_star_norm"],
                                             dyn["cond"])
        else:
            dynamics = random_sample(drng, dyn["n"], s.n_c, dyn["cond"])
    ctrl = MomentumJerkController(
        s.frames, s.gains, s.mode, dt=s.controller_dt, dynamics=dynamics,
        torque_min=s.torque_min, resync_every=s.resync_every,
        derivative_mode=s.derivative_mode,
    )
    ref0 = s.reference(0.0)
    state = MomentumState(H=ref0.H_d + s.H_error0, com=s.com, m=s.mass, I_err=s.I_err0,
                          g=s.gravity)
    ctrl.reset(initial_wrench(s))
    bias = s.bias if s.bias is not None else np.zeros(6 * s.n_c)
    dist = _disturbance_fn(s.disturbances)
    h_ref = lambda t: s.reference(t).H_d  # noqa: E731
    threshold = DIVERGENCE_RATIO * max(np.linalg.norm(s.H_error0), s.divergence_floor)

    log = EpisodeLog(columns=log_columns(s.n_c))
    n_sub = s.substeps
    max_xi = 0.0
    tau_norm = float("nan")
    k = 0
    for k in range(s.n_cycles + 1):
        t = k * s.controller_dt
        ref = s.reference(t)
        f_true = stack_phi(ctrl.xi, ctrl.geoms).reshape(-1)
        f_meas = f_true + bias
        if s.noise_std > 0:
            f_meas = f_meas + s.noise_std * rng.standard_normal(f_meas.size)
        try:
            out = ctrl.step(t, state, f_meas, ref)
        except (InvalidInputError, np.linalg.LinAlgError, FloatingPointError):
            # non-finite xi or state: keep the partial log and flag divergence
            row = np.full(len(log.columns), np.nan)
            row[0], row[-1] = t, 1.0
            log.rows.append(row)
            break
        dg = out.diagnostics
        f = dg["f"]
        margins = np.concatenate([check_constraints(fk, g).margins
                                  for fk, g in zip(f.reshape(-1, 6), ctrl.geoms)])
        tau_norm = float(np.linalg.norm(out.tau)) if out.tau is not None else float("nan")
        xi_norm = float(np.linalg.norm(dg["xi"]))
        max_xi = max(max_xi, xi_norm)
        htil_n = float(np.linalg.norm(dg["Htil"]))
        finite = (state.is_finite() and np.all(np.isfinite(out.xi_dot))
                  and np.all(np.isfinite(dg["xi"])))
        diverged = (not finite) or htil_n > threshold
        log.rows.append(np.concatenate([
            [t], state.H, ref.H_d, dg["Htil"], dg["Htil_dot"], state.I_err, dg["zeta"], [dg["V"]],
            dg["xi"], f, margins,
            [tau_norm, xi_norm, float(np.linalg.norm(out.xi_dot)), dg["phi_norm"], dg["residual"],
             dg["zeta_dot_error"], dg["saturated"], dg["rank_degraded"], dg["resynced"], diverged],
        ]))
        if diverged or k == s.n_cycles:
            break
        xi = ctrl.xi.reshape(-1)
        for j in range(n_sub):
            tj = t + j * s.plant_dt
            state = plant_step(state, s.frames, xi + out.xi_dot * (j * s.plant_dt), s.plant_dt,
                               dist, xi_dot=out.xi_dot, h_ref=h_ref, t=tj)
        ctrl.advance(out.xi_dot)

    htil = log.block("Htil")
    htil = htil[np.all(np.isfinite(htil), axis=1)]
    if not len(htil):
        htil = np.full((1, 6), np.nan)
    summary = Summary(
        name=s.name,
        completed=not log.diverged,
        diverged=log.diverged,
        cycles=len(log.rows),
        final_Htil_norm=float(np.linalg.norm(htil[-1])),
        max_Htil_norm=float(np.max(np.linalg.norm(htil, axis=1))),
        max_xi_norm=max_xi,
        final_tau_norm=tau_norm,
        seed=s.seed,
    )
    return log, summary


def _run_one(s):
    try:
        log, summary = run_episode(s)
    except Exception as exc:  # per-episode failures must not stop the suite
        nan = float("nan")
        return None, Summary(s.name, False, False, 0, nan, nan, nan, nan, s.seed,
                             error=f"{type(exc).__name__}: {exc}")
    return log, summary


def run_suite(scenarios, parallelism=1):
    """Run independent episodes; returns ``[(scenario, log, summary), ...]``.

    Results keep the input order. Errors are captured in ``summary.error``.
    """
    scenarios = list(scenarios)
    if not scenarios:
        return []
    if parallelism <= 1:
        results = [_run_one(s) for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as ex:
            results = list(ex.map(_run_one, scenarios))
    return [(s, log, summ) for s, (log, summ) in zip(scenarios, results)]
