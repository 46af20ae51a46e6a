"""Friction-disk coverage: Monte Carlo estimate vs two deterministic oracles.

Oracle 1 integrates the Jacobian determinant of the normalized tangential
map over (-1, 1)^2; oracle 2 traces the image boundary (the edges
|tanh xi| -> 1) and applies the shoelace formula.

    python scripts/coverage_oracle.py --samples 1000000
"""

import argparse

import numpy as np
from scipy.integrate import dblquad

from jerkcontrol.wrench import ContactGeometry, binomial_interval, cone_coverage_estimate


def quadrature_ratio():
    def jac(u2, u1):
        p, q = 1 + u1 * u1, 1 + u2 * u2
        return 1 / np.sqrt(p * q) - (u1 * u2) ** 2 / (p * q) ** 1.5
    area, _ = dblquad(jac, -1, 1, -1, 1, epsabs=1e-12, epsrel=1e-12)
    return area / np.pi


def boundary_ratio(points=200_000):
    s = np.linspace(-1, 1, points, endpoint=False)
    edges = []
    # counter-clockwise: u1 = 1 (s up), u2 = 1 (s down), u1 = -1 (s down), u2 = -1 (s up)
    for u1, u2 in ((np.ones_like(s), s), (-s, np.ones_like(s)), (-np.ones_like(s), -s), (s, -np.ones_like(s))):
        edges.append(np.stack([u1 / np.sqrt(1 + u2 ** 2), u2 / np.sqrt(1 + u1 ** 2)], axis=1))
    p = np.concatenate(edges)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / np.pi


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    q, b = quadrature_ratio(), boundary_ratio()
    print(f"quadrature oracle      {q:.6f}")
    print(f"boundary-trace oracle  {b:.6f}")
    print(f"inscribed octagon      {2 * np.sqrt(2) / np.pi:.6f}  (lower bound)")
    for mu in (0.3, 0.6, 1.0):
        g = ContactGeometry(mu_c=mu)
        for seed in range(args.seeds):
            p = cone_coverage_estimate(g, samples=args.samples, seed=seed)
            lo, hi = binomial_interval(p, args.samples)
            print(f"mu_c={mu:<4} seed={seed}  estimate {p:.6f}  95% [{lo:.6f}, {hi:.6f}]  "
                  f"oracle inside: {lo <= q <= hi}")


if __name__ == "__main__":
    main()
