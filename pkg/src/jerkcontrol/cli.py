"""Command-line entry point: ``jerkcontrol {run,suite,verify,coverage,inspect}``.

Exit codes: 0 success, 1 configuration error, 2 divergence (run/suite) or a
failed property (verify).
"""

import argparse
import copy
import itertools
import json
import os
import sys
import time

import numpy as np

from .errors import ConfigError, InvalidInputError, OutOfDomainError
from .sim import Scenario, run_episode, run_suite
from .verify import PROFILES, run_checks
from .wrench import (
    NO_SATURATION,
    ContactGeometry,
    binomial_interval,
    check_constraints,
    cone_coverage_estimate,
    phi,
    phi_gradient,
    phi_gradient_det,
    phi_inverse,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2

GNUPLOT_TEMPLATE = """set datafile separator ','
set key autotitle columnhead
set multiplot layout 2,1
set ylabel '|Htil| components'
plot for [i=0:5] '{csv}' using 't':'Htil_'.i with lines
set ylabel 'V'
set logscale y
plot '{csv}' using 't':'V' with lines
unset multiplot
"""


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _report_config_error(exc):
    print(str(exc), file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args):
    try:
        scenario = Scenario.from_json(args.config, seed=args.seed)
    except ConfigError as exc:
        return _report_config_error(exc)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    log, summary = run_episode(scenario)
    csv_path = os.path.join(args.out, "episode.csv")
    log.to_csv(csv_path)
    _write(os.path.join(args.out, "summary.txt"), summary.to_text())
    if args.gnuplot:
        _write(os.path.join(args.out, "plot.gp"), GNUPLOT_TEMPLATE.format(csv="episode.csv"))
    print(summary.to_text(), end="")
    return EXIT_DIVERGED if summary.diverged else EXIT_OK


def _set_path(d, dotted, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def expand_suite(cfg, base_dir="."):
    """Scenario dicts from a suite file.

    ``scenarios`` lists inline dicts or paths (relative to the suite file);
    ``base`` with ``sweep`` (dotted key -> list of values) adds the
    cartesian product of the sweep applied to ``base``.
    """
    out = []
    for item in cfg.get("scenarios", []):
        out.append(_load_json(os.path.join(base_dir, item)) if isinstance(item, str) else item)
    if "sweep" in cfg:
        base = cfg.get("base", {})
        if isinstance(base, str):
            base = _load_json(os.path.join(base_dir, base))
        keys = list(cfg["sweep"])
        for values in itertools.product(*(cfg["sweep"][k] for k in keys)):
            d = copy.deepcopy(base)
            for k, v in zip(keys, values):
                _set_path(d, k, v)
            tag = ",".join(f"{k}={v}" for k, v in zip(keys, values))
            d["name"] = f"{base.get('name', 'sweep')}[{tag}]"
            out.append(d)
    return out


def cmd_suite(args):
    try:
        cfg = _load_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dicts = expand_suite(cfg, os.path.dirname(os.path.abspath(args.config)))
    scenarios, problems = [], []
    for i, d in enumerate(dicts):
        try:
            scenarios.append(Scenario.from_dict(d, seed=args.seed))
        except ConfigError as exc:
            problems.extend((f"scenarios[{i}].{k}", m) for k, m in exc.problems)
    if problems:
        return _report_config_error(ConfigError(problems))
    results = run_suite(scenarios, args.parallel)
    os.makedirs(args.out, exist_ok=True)
    header = "index,name,success,completed,diverged,final_Htil_norm,max_Htil_norm,max_xi_norm,final_tau_norm,seed,error"
    lines = [header]
    for i, (s, log, summ) in enumerate(results):
        if log is not None:
            log.to_csv(os.path.join(args.out, f"episode_{i:03d}.csv"))
        lines.append(",".join(str(x) for x in (
            i, json.dumps(summ.name), summ.success, summ.completed, summ.diverged,
            f"{summ.final_Htil_norm:.6g}", f"{summ.max_Htil_norm:.6g}", f"{summ.max_xi_norm:.6g}",
            f"{summ.final_tau_norm:.6g}", summ.seed, json.dumps(summ.error or ""))))
    table = "\n".join(lines) + "\n"
    _write(os.path.join(args.out, "summary.csv"), table)
    print(table, end="")
    return EXIT_DIVERGED if any(not r[2].success for r in results) else EXIT_OK


def cmd_verify(args):
    results = run_checks(args.profile)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} properties passed ({args.profile})")
    return EXIT_OK if ok else EXIT_DIVERGED


def _geometry_from_args(args):
    d = _load_json(args.geometry) if args.geometry else {}
    for attr in ("mu_c", "mu_z", "fz_min", "x_min", "x_max", "y_min", "y_max"):
        v = getattr(args, attr)
        if v is not None:
            d[attr] = v
    return ContactGeometry.from_dict(d)


def cmd_coverage(args):
    try:
        geom = _geometry_from_args(args)
    except (InvalidInputError, OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    seed = 0 if args.seed is None else args.seed
    t0 = time.perf_counter()
    p = cone_coverage_estimate(geom, samples=args.samples, seed=seed)
    lo, hi = binomial_interval(p, args.samples)
    print(f"coverage estimate: {p:.6f}")
    print(f"95% interval:      [{lo:.6f}, {hi:.6f}]")
    print(f"samples: {args.samples}  seed: {seed}  time: {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def cmd_inspect(args):
    try:
        geom = _geometry_from_args(args)
    except (InvalidInputError, OSError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    np.set_printoptions(precision=6, suppress=False, linewidth=120)
    if args.xi is not None:
        xi = np.array(args.xi, dtype=float)
        w = phi(xi, geom)
        print("xi      =", xi)
        print("phi(xi) =", w)
    else:
        w = np.array(args.wrench, dtype=float)
        print("wrench        =", w)
        try:
            xi = phi_inverse(w, geom, NO_SATURATION)
            print("phi^-1(w)     =", xi)
        except OutOfDomainError as exc:
            xi = phi_inverse(w, geom)
            print(f"outside the parametrized set ({exc}); saturated inverse:")
            print("phi^-1_sat(w) =", xi)
            print("phi(phi^-1)   =", phi(xi, geom))
    print("Phi(xi) =")
    print(phi_gradient(xi, geom))
    print(f"det Phi = {phi_gradient_det(xi, geom):.6e}")
    rep = check_constraints(w, geom)
    for name, m in rep.as_dict().items():
        print(f"margin {name:<9} {m: .6e}  {'ok' if m > 0 else 'VIOLATED'}")
    return EXIT_OK


def _add_geometry_flags(p):
    p.add_argument("--geometry", help="JSON file with contact geometry fields")
    for attr in ("mu_c", "mu_z", "fz_min", "x_min", "x_max", "y_min", "y_max"):
        p.add_argument(f"--{attr.replace('_', '-')}", dest=attr, type=float)


def build_parser():
    ap = argparse.ArgumentParser(prog="jerkcontrol", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the measurement seed")
    p.add_argument("--gnuplot", action="store_true", help="also write plot.gp")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("suite", help="run a suite of scenarios")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(fn=cmd_suite)

    p = sub.add_parser("verify", help="run the built-in property checks")
    p.add_argument("--profile", choices=sorted(PROFILES), default="quick")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("coverage", help="Monte Carlo friction-disk coverage")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int)
    _add_geometry_flags(p)
    p.set_defaults(fn=cmd_coverage)

    p = sub.add_parser("inspect", help="phi / phi^-1 / Phi / margins at one point")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--xi", type=float, nargs=6)
    g.add_argument("--wrench", type=float, nargs=6)
    _add_geometry_flags(p)
    p.set_defaults(fn=cmd_inspect)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
