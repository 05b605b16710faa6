"""Maximum safe power against the temperature cap for the reference system.

Writes ``T_star_K,pc_star_W`` from just above the zero-power floor up to the
tangency temperature, plus a check that each budget settles at its cap.
"""

import argparse
import csv

import numpy as np

from thermotool.power_model import LeakageParams
from thermotool.safety import safe_power, tangency_temperature, zero_power_temperature
from thermotool.stability import SisoParams, analyze


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ambient", type=float, default=300.0)
    ap.add_argument("--points", type=int, default=60)
    ap.add_argument("--out", default="safe_power_curve.csv")
    args = ap.parse_args()

    siso, lp = SisoParams(0.95, 0.5), LeakageParams(0.0, 1.25e-4, -800.0)
    floor = zero_power_temperature(siso, 1.0, lp, args.ambient)
    top = tangency_temperature(siso, 1.0, lp)
    caps = np.linspace(floor + 1.0, top - 1.0, args.points)
    worst = 0.0
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T_star_K", "pc_star_W"])
        for cap in caps:
            res = safe_power(cap, siso, 1.0, lp, args.ambient)
            back = analyze(siso, res.pc_star, 1.0, lp, args.ambient).temp_stable_K
            worst = max(worst, abs(back - cap) / cap)
            writer.writerow([f"{cap:.6f}", f"{res.pc_star:.9g}"])
    print(f"floor {floor:.3f} K, tangency {top:.3f} K, {len(caps)} caps -> {args.out}")
    print(f"worst round-trip relative error {worst:.2e}")


if __name__ == "__main__":
    main()
