"""Feedback-linearization episode against the double-pole closed form.

With Kp = Kd = 4 I each error component obeys x'' + 4x' + 4x = 0, so
|Htil(t)| = |Htil0| (1 + 2t) exp(-2t), bounded by c exp(-t) with
c = 2 exp(-1/2). The zero-order hold on the controller rate shifts the
discrete poles slightly; this script reports both gaps per controller rate.

    python scripts/fblin_envelope.py
"""

import json
from pathlib import Path

import numpy as np

from jerkcontrol.sim import Scenario, run_episode

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / "fblin_single.json"


def main():
    base = json.loads(SCENARIO.read_text())
    c = 2 * np.exp(-0.5)
    print(f"{'ctrl dt':>8} {'final |Htil|':>13} {'max |H|/env':>12} {'max abs dev':>12} {'max rel dev':>12}")
    for dt in (0.001, 0.002, 0.005, 0.01, 0.02):
        d = dict(base, controller_dt_s=dt)
        log, _ = run_episode(Scenario.from_dict(d))
        t = log.col("t")
        n = np.linalg.norm(log.block("Htil"), axis=1)
        closed = n[0] * (1 + 2 * t) * np.exp(-2 * t)
        keep = closed > 1e-6
        print(f"{dt:8.3f} {n[-1]:13.3e} {np.max(n / (n[0] * c * np.exp(-t))):12.4f} "
              f"{np.max(np.abs(n - closed)) / n[0]:12.2e} "
              f"{np.max(np.abs(n - closed)[keep] / closed[keep]):12.3f}")


if __name__ == "__main__":
    main()
