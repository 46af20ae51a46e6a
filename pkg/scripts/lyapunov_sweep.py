"""Lyapunov monotonicity over random symmetric positive-definite gain draws.

    python scripts/lyapunov_sweep.py --draws 10 --horizon 60
"""

import argparse
import copy
import json
from pathlib import Path

import numpy as np

from jerkcontrol.sim import Scenario, run_episode

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "integral_single.json"


def random_spd(rng, lo, hi):
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    return (q * rng.uniform(lo, hi, 6)) @ q.T


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=10)
    ap.add_argument("--horizon", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--eig", type=float, nargs=2, default=(1.0, 4.0))
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    base = json.loads(SCENARIO.read_text())
    print(f"{'draw':>4} {'max dV/V0':>11} {'final |I|':>10} {'final |Htil|':>12} {'final |zeta|':>12} {'identity':>9}")
    for i in range(args.draws):
        d = copy.deepcopy(base)
        d["horizon_s"] = args.horizon
        d["gains"] = {k: random_spd(rng, *args.eig).tolist() for k in ("Kp", "Kd", "Ko")}
        d["initial"] = {"H_error": (rng.standard_normal(6) / 3).tolist(),
                        "I_err": (rng.standard_normal(6) / 3).tolist()}
        log, _ = run_episode(Scenario.from_dict(d))
        V = log.col("V")
        last = {b: np.linalg.norm(log.block(b)[-1]) for b in ("I_err", "Htil", "zeta")}
        print(f"{i:4d} {np.max(np.diff(V)) / V[0]:11.2e} {last['I_err']:10.2e} {last['Htil']:12.2e} "
              f"{last['zeta']:12.2e} {log.col('zeta_dot_error').max():9.1e}")


if __name__ == "__main__":
    main()
