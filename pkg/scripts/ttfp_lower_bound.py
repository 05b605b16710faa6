"""How often the two-sample time-to-fixed-point estimate undershoots the true remaining time.

Runs the reference system at several powers from several starting
temperatures (below and above the fixed point) and reports the share of
evaluation points where the estimate is a lower bound.
"""

import argparse

import numpy as np

from thermotool.power_model import LeakageParams, SourceParams
from thermotool.safety import (EstimationUndefinedError, default_epsilon, estimate_tau,
                               remaining_time, time_to_fixed_point)
from thermotool.stability import SisoParams, analyze
from thermotool.thermal_sim import ThermalStateSpace, simulate


def share(model, lp, pc, t0, t_fix, d, steps):
    traj = simulate(model, [SourceParams.from_pc(pc, 1.0, lp)], [t0], steps)
    eps = default_epsilon(t0, t_fix)
    hits = total = 0
    for k in range(d, steps):
        if abs(traj.temps[k, 0] - t_fix) <= eps:
            break
        try:
            tau = estimate_tau(traj, 0, t_fix, d, end=k)
        except EstimationUndefinedError:
            continue
        total += 1
        hits += time_to_fixed_point(traj.temps[k, 0], t_fix, tau, eps) <= \
            remaining_time(traj, 0, t_fix, eps, k)
    return hits, total


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args()

    siso, lp = SisoParams(0.95, 0.5), LeakageParams(0.0, 1.25e-4, -800.0)
    model = ThermalStateSpace([[0.95]], [[0.5]])
    print("pc_W  start      lower-bound share")
    for pc in np.linspace(10.0, 45.0, 8):
        rep = analyze(siso, pc, 1.0, lp)
        for label, t0 in (("warm-up", 0.75 * rep.temp_stable_K),
                          ("cool-down", 0.5 * (rep.temp_stable_K + rep.temp_unstable_K))):
            hits, total = share(model, lp, pc, t0, rep.temp_stable_K, args.d, args.steps)
            print(f"{pc:5.1f} {label:10s} {hits:4d}/{total:<4d} = {hits / max(total, 1):.1%}")


if __name__ == "__main__":
    main()
