"""Paired two-contact episodes with and without the torque-minimizing null-space term.

    python scripts/torque_descent.py --seeds 0 1 2 3
"""

import argparse
import json
from pathlib import Path

import numpy as np

from jerkcontrol.sim import Scenario, run_episode

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "torque_min_two_feet.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    args = ap.parse_args()
    base = json.loads(SCENARIO.read_text())
    print(f"{'seed':>4} {'|tau| on':>10} {'|tau| off':>10} {'min margin on':>14} {'final |Htil| on':>16}")
    for seed in args.seeds:
        out = {}
        for active in (True, False):
            d = json.loads(json.dumps(base))
            d["dynamics"]["seed"] = seed
            d["controller"]["torque_min"] = active
            out[active] = run_episode(Scenario.from_dict(d))
        log, s = out[True]
        print(f"{seed:4d} {s.final_tau_norm:10.3f} {out[False][1].final_tau_norm:10.3f} "
              f"{np.min(log.margins()):14.3e} {s.final_Htil_norm:16.3e}")


if __name__ == "__main__":
    main()
