"""Two-phase power schedule on the reference system and the (P, T) loop it traces."""

import argparse

import numpy as np

from thermotool.power_model import LeakageParams, SourceParams
from thermotool.stability import SisoParams, analyze
from thermotool.thermal_sim import ScheduleEntry, ThermalStateSpace, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--low", type=float, default=20.0)
    ap.add_argument("--high", type=float, default=40.0)
    ap.add_argument("--hold", type=int, default=1500, help="steps per phase")
    ap.add_argument("--out", default="hysteresis.csv")
    args = ap.parse_args()

    lp = LeakageParams(0.0, 1.25e-4, -800.0)
    start = analyze(SisoParams(0.95, 0.5), args.low, 1.0, lp)
    if not start.stable:
        raise SystemExit(f"{args.low} W already runs away")
    model = ThermalStateSpace([[0.95]], [[0.5]])
    sched = [ScheduleEntry(args.hold, 0, args.high), ScheduleEntry(2 * args.hold, 0, args.low)]
    traj = simulate(model, [SourceParams.from_pc(args.low, 1.0, lp)], [start.temp_stable_K],
                    3 * args.hold, sched)
    traj.to_csv(args.out)
    p, t = traj.powers[args.hold - 1:, 0], traj.temps[args.hold - 1:, 0]
    area = 0.5 * abs(np.dot(p, np.roll(t, -1)) - np.dot(t, np.roll(p, -1)))
    print(f"{len(traj)} rows -> {args.out}; runaway={traj.runaway}; loop area {area:.1f} W*K")


if __name__ == "__main__":
    main()
