"""``thermotool`` command line.

Exit codes: 0 success (or a stable outcome), 2 an analytic negative outcome
(runaway, unreachable cap, undefined estimate), 1 usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import timeit
from pathlib import Path

import numpy as np

from thermotool import safety, stability, sysid
from thermotool.config import SCHEMA_VERSION, ConfigError, ModelConfig, load_config
from thermotool.mimo_refine import NewtonFailure, refine
from thermotool.thermal_sim import (Trajectory, read_schedule, simulate,
                                    write_schedule)

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


# temperature differences: same magnitude in both scales, never offset
_DIFFERENCE_KEYS = {"epsilon_K", "residual_norm_K"}


class UsageError(Exception):
    pass


def _celsius_fields(report: dict, cfg: ModelConfig | None) -> dict:
    """Mirror every ``*_K`` temperature as ``*_C`` when the config uses Celsius."""
    if cfg is None or cfg.units != "celsius":
        return report
    out = dict(report)
    for key, val in report.items():
        if key in _DIFFERENCE_KEYS:
            out[key[:-2] + "_C"] = val
        elif key.endswith("_K") and not key.startswith("kappa"):
            if isinstance(val, (list, tuple)):
                out[key[:-2] + "_C"] = [cfg.temp_out(v) for v in val]
            elif isinstance(val, (int, float)):
                out[key[:-2] + "_C"] = cfg.temp_out(val)
    return out


def _emit(payload: dict, out: str | None, cfg: ModelConfig | None = None) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **_celsius_fields(payload, cfg)}
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    siso, pc, volt, lp = cfg.siso_problem(args.hotspot, args.pc)
    report = stability.analyze(siso, pc, volt, lp, ambient=cfg.thermal.ambient)
    payload = {"hotspot": args.hotspot, "pc_W": pc, "a": siso.a, "b": siso.b,
               **report.to_dict()}
    _emit(payload, args.out, cfg)
    return EXIT_OK if report.stable else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    _need(args, "steps")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    cfg = load_config(args.config)
    schedule = read_schedule(args.schedule) if args.schedule else ()
    t0 = np.full(cfg.thermal.n_hotspots, cfg.temp_in(args.t0))
    traj = simulate(cfg.thermal, cfg.sources, t0, args.steps, schedule, bound=args.bound)
    if args.out:
        traj.to_csv(args.out)
    else:
        writer = csv.writer(sys.stdout)
        n, m = traj.temps.shape[1], traj.powers.shape[1]
        writer.writerow(["t_s"] + [f"T{i + 1}_K" for i in range(n)] + [f"P{j + 1}_W" for j in range(m)])
        for row in np.column_stack([traj.times, traj.temps, traj.powers]):
            writer.writerow([repr(float(x)) for x in row])
    if traj.runaway:
        print(f"runaway: temperature exceeded {args.bound} K at t={traj.times[-1]:g} s",
              file=sys.stderr)
        return EXIT_NEGATIVE
    return EXIT_OK


def _parse_sweep(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    except ValueError as exc:
        raise UsageError("--sweep expects START:STOP:COUNT") from exc


def cmd_safe_power(args) -> int:
    cfg = load_config(args.config)
    siso, _, volt, lp = cfg.siso_problem(args.hotspot)
    amb = cfg.thermal.ambient
    if args.sweep:
        rows = []
        for t_user in _parse_sweep(args.sweep):
            try:
                res = safety.safe_power(cfg.temp_in(t_user), siso, volt, lp, amb)
            except safety.UnreachableTemperatureError:
                continue
            rows.append((res.t_star_K, res.pc_star))
        fh = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.writer(fh)
            writer.writerow(["T_star_K", "pc_star_W"])
            for t, p in rows:
                writer.writerow([repr(float(t)), repr(float(p))])
        finally:
            if args.out:
                fh.close()
        return EXIT_OK if rows else EXIT_NEGATIVE
    _need(args, "tmax")
    try:
        res = safety.safe_power(cfg.temp_in(args.tmax), siso, volt, lp, amb)
    except safety.UnreachableTemperatureError as exc:
        _emit({"status": "unreachable", "t_star_K": cfg.temp_in(args.tmax),
               "reason": str(exc)}, args.out, cfg)
        return EXIT_NEGATIVE
    _emit({"status": "ok", "hotspot": args.hotspot, **res.to_dict()}, args.out, cfg)
    return EXIT_OK


def cmd_ttfp(args) -> int:
    _need(args, "traj", "tfix")
    traj = Trajectory.from_csv(args.traj)
    cfg = load_config(args.config) if args.config else None
    to_k = cfg.temp_in if cfg else (lambda v: v)
    t_fix = to_k(args.tfix)
    try:
        est = safety.ttfp(traj, args.hotspot, t_fix, args.d, args.epsilon)
    except safety.EstimationUndefinedError as exc:
        _emit({"status": "undefined", "reason": str(exc)}, args.out, cfg)
        return EXIT_NEGATIVE
    _emit({"status": "ok", "hotspot": args.hotspot, "t_fix_K": t_fix, **est.to_dict()},
          args.out, cfg)
    return EXIT_OK


def cmd_identify(args) -> int:
    kind = args.kind
    if kind == "leakage":
        _need(args, "calib", "voltage")
        cal = sysid.LeakageCalibration.from_csv(args.calib, args.voltage)
        fit = sysid.fit_leakage(cal, p_dyn=args.p_dyn)
        payload = {"kind": "leakage", **fit.report.to_dict()}
    elif kind == "statespace":
        _need(args, "traj")
        traces = [Trajectory.from_csv(p) for p in args.traj]
        a_mat, b_mat, rep = sysid.fit_state_space(traces)
        payload = {"kind": "statespace", **rep.to_dict()}
    else:
        _need(args, "traj")
        if len(args.traj) != 1:
            raise UsageError("siso identification takes exactly one --traj")
        siso, rep = sysid.reduce_to_siso(Trajectory.from_csv(args.traj[0]), args.hotspot)
        payload = {"kind": "siso", "hotspot": args.hotspot, **rep.to_dict()}
    _emit(payload, args.out)
    return EXIT_OK


def _parse_levels(text: str) -> list[list[float]]:
    try:
        groups = [[float(x) for x in grp.split(",")] for grp in text.split(";")]
    except ValueError as exc:
        raise UsageError("--levels expects comma-separated numbers, ';' between sources") from exc
    return groups


def cmd_prbs(args) -> int:
    _need(args, "levels", "length")
    seed = int(args.seed, 16)
    entries = sysid.generate_prbs(_parse_levels(args.levels), args.length, seed)
    if args.out:
        write_schedule(args.out, entries)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(["step", "source", "pc_W"])
        for e in entries:
            writer.writerow([e.step, e.source, repr(e.pc)])
    return EXIT_OK


def cmd_mimo(args) -> int:
    cfg = load_config(args.config)
    try:
        seeds, res = refine(cfg.system)
    except NewtonFailure as exc:
        _emit({"status": "failed", "reason": str(exc), "last_K": exc.last,
               "iterations": exc.iterations}, args.out, cfg)
        return EXIT_NEGATIVE
    except ValueError as exc:
        if "runaway" in str(exc):
            _emit({"status": "runaway", "reason": str(exc)}, args.out, cfg)
            return EXIT_NEGATIVE
        raise
    _emit({"status": "ok", "seeds_K": seeds, "temps_K": res.temps,
           "iterations": res.iterations, "residual_norm_K": res.residual_norm},
          args.out, cfg)
    return EXIT_OK


def bench_pipeline(cfg: ModelConfig, hotspot: int = 0, repeat: int = 200) -> dict:
    """Median wall time (s) of analyze, safe_power and ttfp on one config."""
    siso, pc, volt, lp = cfg.siso_problem(hotspot)
    amb = cfg.thermal.ambient
    report = stability.analyze(siso, pc, volt, lp, ambient=amb)
    if not report.stable:
        raise UsageError("bench needs a config with a stable fixed point")
    t_fix = report.temp_stable_K
    steps = safety.DEFAULT_D + 1
    t0 = np.full(cfg.thermal.n_hotspots, 0.5 * t_fix)
    traj = simulate(cfg.thermal, cfg.sources, t0, steps)

    def timed(fn):
        times = timeit.repeat(fn, number=1, repeat=repeat)
        return float(np.median(times))

    return {
        "analyze_s": timed(lambda: stability.analyze(siso, pc, volt, lp, ambient=amb)),
        "safe_power_s": timed(lambda: safety.safe_power(t_fix, siso, volt, lp, amb)),
        "ttfp_s": timed(lambda: safety.ttfp(traj, hotspot, t_fix)),
    }


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    timings = bench_pipeline(cfg, args.hotspot, args.repeat)
    timings["total_s"] = sum(timings.values())
    _emit(timings, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermotool",
                                description="Power-temperature stability analysis toolkit.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_, config=True, hidden=False):
        kw = {} if hidden else {"help": help_}
        sp = sub.add_parser(name, description=help_, **kw)
        sp.set_defaults(func=fn)
        if config:
            sp.add_argument("--config", required=True, help="model config JSON")
        sp.add_argument("--out", help="output path (default: stdout)")
        return sp

    sp = add("analyze", cmd_analyze, "fixed-point existence, location and stability")
    sp.add_argument("--pc", type=float, help="temperature-independent power (W)")
    sp.add_argument("--hotspot", type=int, default=0)

    sp = add("simulate", cmd_simulate, "iterate the coupled power-temperature model")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--schedule", help="CSV step,source,pc_W")
    sp.add_argument("--t0", type=float, default=300.0, help="initial temperature")
    sp.add_argument("--bound", type=float, default=2000.0, help="runaway bound (K)")

    sp = add("safe-power", cmd_safe_power, "maximum safe power for a temperature cap")
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--sweep", help="START:STOP:COUNT temperature sweep, CSV output")
    sp.add_argument("--hotspot", type=int, default=0)

    sp = add("ttfp", cmd_ttfp, "time constant and time to reach the fixed point", config=False)
    sp.add_argument("--config", help="model config JSON (only for units)")
    sp.add_argument("--traj", help="trajectory CSV")
    sp.add_argument("--tfix", type=float)
    sp.add_argument("--d", type=int, default=safety.DEFAULT_D)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--hotspot", type=int, default=0)

    sp = add("identify", cmd_identify, "fit model parameters from traces", config=False)
    sp.add_argument("kind", choices=["leakage", "statespace", "siso"])
    sp.add_argument("--calib", help="calibration CSV T_K,P_W")
    sp.add_argument("--voltage", type=float)
    sp.add_argument("--p-dyn", type=float, help="known dynamic power to split out I_g")
    sp.add_argument("--traj", action="append", help="trajectory CSV (repeatable)")
    sp.add_argument("--hotspot", type=int, default=0)

    sp = add("prbs", cmd_prbs, "PRBS power schedule", config=False)
    sp.add_argument("--levels", help="e.g. '1,5' or '1,5;2,8' (per source)")
    sp.add_argument("--length", type=int)
    sp.add_argument("--seed", default="ACE1", help="16-bit hex seed")

    add("mimo", cmd_mimo, "Newton refinement of the multi-hotspot fixed point")

    sp = add("bench", cmd_bench, "time the runtime pipeline", hidden=True)
    sp.add_argument("--hotspot", type=int, default=0)
    sp.add_argument("--repeat", type=int, default=200)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, OSError, ValueError) as exc:
        print(f"thermotool {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
