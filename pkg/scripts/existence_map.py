"""Fixed-point existence over an (alpha, beta) grid, checked against brute-force iteration.

Writes ``alpha,beta,margin,predicted_stable,simulated_stable`` rows. The
simulation uses a fixed scalar system and maps each (alpha, beta) back to
kappa1 and the temperature-independent power.
"""

import argparse
import csv

import numpy as np

from thermotool.stability import AuxiliaryForm, existence
from thermotool.thermal_sim import simulate_siso_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=41, help="grid points per axis")
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--out", default="existence_map.csv")
    args = ap.parse_args()

    a, b, v, k2 = 0.95, 0.5, 1.0, -800.0
    alphas = np.logspace(-1, 0, args.n)
    betas = np.logspace(-1.5, 1, args.n)
    al, be = (x.ravel() for x in np.meshgrid(alphas, betas))
    k1 = (a - 1) / (b * be * v * k2)
    pc = al * (a - 1) * k2 / b
    _, runaway, _ = simulate_siso_batch(a, b, pc, v, k1, k2, 0.5 * b * pc / (1 - a),
                                        args.steps, tol=1e-13)
    margins = [existence(AuxiliaryForm(x, y, k2))[1] for x, y in zip(al, be)]
    mismatched = 0
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "margin", "predicted_stable", "simulated_stable"])
        for x, y, m, r in zip(al, be, margins, runaway):
            writer.writerow([f"{x:.6g}", f"{y:.6g}", f"{m:.6g}", int(m >= 0), int(not r)])
            mismatched += (m >= 0) == bool(r) and abs(m) > 1e-3
    print(f"{len(al)} grid points -> {args.out}; {mismatched} disagreements with |margin| > 1e-3")


if __name__ == "__main__":
    main()
