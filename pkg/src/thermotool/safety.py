"""Temperature cap to power budget, and time-to-fixed-point estimates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from thermotool.power_model import LeakageParams
from thermotool.stability import SisoParams, analyze, compute_beta, effective_pc, t_tilde_m
from thermotool.thermal_sim import Trajectory

DEFAULT_D = 10
DEFAULT_SAMPLE_PERIOD = 0.1
DEFAULT_EPSILON_FRACTION = 0.01


class UnreachableTemperatureError(ValueError):
    """No positive temperature-independent power puts the stable point at the cap."""


class EstimationUndefinedError(ValueError):
    """The sample pair does not describe a monotone approach to the fixed point."""


@dataclass(frozen=True)
class SafePowerResult:
    pc_star: float
    alpha_star: float
    t_tilde_star: float
    t_star_K: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TtfpEstimate:
    tau: float
    t_to_epsilon: float
    epsilon: float

    def to_dict(self) -> dict:
        return {"tau_s": self.tau, "t_to_epsilon_s": self.t_to_epsilon, "epsilon_K": self.epsilon}


def safe_power(t_star: float, siso: SisoParams, voltage: float, lp: LeakageParams,
               ambient: float = 0.0) -> SafePowerResult:
    """Largest temperature-independent power whose stable fixed point is ``t_star``.

    Any smaller power settles strictly below ``t_star``. With an
    ambient-referenced model the ambient's share of the drive is removed from
    the returned budget.
    """
    if not t_star > 0:
        raise ValueError(f"t_star must be > 0 K, got {t_star}")
    beta = compute_beta(siso, voltage, lp)
    tt = -lp.kappa2 / t_star
    alpha = (1.0 - math.exp(-tt) / (beta * tt)) / tt
    if not alpha > 0 or tt < t_tilde_m(alpha):
        raise UnreachableTemperatureError(
            f"{t_star} K exceeds the hottest reachable stable point"
        )
    pc = (siso.a - 1.0) / siso.b * alpha * lp.kappa2 - effective_pc(siso, 0.0, ambient)
    if not pc > 0:
        raise UnreachableTemperatureError(
            f"{t_star} K is at or below the zero-power fixed point"
        )
    return SafePowerResult(pc_star=pc, alpha_star=alpha, t_tilde_star=tt, t_star_K=t_star)


def tangency_temperature(siso: SisoParams, voltage: float, lp: LeakageParams) -> float:
    """Hottest temperature any stable fixed point can have (where the two roots merge)."""
    beta = compute_beta(siso, voltage, lp)
    # on the tangency curve t_m(alpha) = t and beta = (2/t + 1) exp(-t)
    def g(t):
        return math.log(2.0 / t + 1.0) - t - math.log(beta)

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    lo = hi
    while g(lo) < 0:
        lo /= 2.0
    return -lp.kappa2 / brentq(g, lo, hi, xtol=1e-15)


def zero_power_temperature(siso: SisoParams, voltage: float, lp: LeakageParams,
                           ambient: float = 0.0) -> float:
    """Stable fixed point with no temperature-independent power; the coolest reachable cap."""
    if ambient <= 0:
        return 0.0
    report = analyze(siso, 0.0, voltage, lp, ambient)
    if not report.stable:
        raise UnreachableTemperatureError("runaway even at zero power")
    return report.temp_stable_K


def estimate_tau(traj: Trajectory, hotspot: int, t_fix: float, d: int = DEFAULT_D,
                 end: int | None = None) -> float:
    """Time constant from the sample at ``end`` (default: last) and the one ``d`` rows earlier."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    k = len(traj) - 1 if end is None else end
    if k - d < 0 or k >= len(traj):
        raise EstimationUndefinedError(f"need samples {k - d} and {k}, trajectory has {len(traj)}")
    late = traj.temps[k, hotspot] - t_fix
    early = traj.temps[k - d, hotspot] - t_fix
    if late == 0 or early == 0 or (late > 0) != (early > 0):
        raise EstimationUndefinedError("samples must lie strictly on one side of t_fix")
    ratio = early / late
    if not ratio > 1:
        raise EstimationUndefinedError("samples are not converging toward t_fix")
    return float((traj.times[k] - traj.times[k - d]) / math.log(ratio))


def time_to_fixed_point(t_init: float, t_fix: float, tau: float, epsilon: float) -> float:
    """Time for an exponential approach from ``t_init`` to come within ``epsilon`` of ``t_fix``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    gap = abs(t_fix - t_init)
    if gap <= epsilon:
        return 0.0
    return tau * math.log(gap / epsilon)


def default_epsilon(t_init: float, t_fix: float) -> float:
    return DEFAULT_EPSILON_FRACTION * abs(t_fix - t_init)


def ttfp(traj: Trajectory, hotspot: int, t_fix: float, d: int = DEFAULT_D,
         epsilon: float | None = None) -> TtfpEstimate:
    """Estimate tau at the end of ``traj`` and the remaining time to settle.

    ``epsilon`` defaults to 1% of the distance between the first sample and
    ``t_fix``.
    """
    tau = estimate_tau(traj, hotspot, t_fix, d)
    if epsilon is None:
        epsilon = default_epsilon(traj.temps[0, hotspot], t_fix)
    now = traj.temps[-1, hotspot]
    return TtfpEstimate(tau, time_to_fixed_point(now, t_fix, tau, epsilon), epsilon)


def remaining_time(traj: Trajectory, hotspot: int, t_fix: float, epsilon: float,
                   start: int) -> float:
    """Observed time from row ``start`` until the trace first enters the epsilon band."""
    err = np.abs(traj.temps[start:, hotspot] - t_fix)
    inside = np.flatnonzero(err <= epsilon)
    if inside.size == 0:
        return math.inf
    return float(traj.times[start + inside[0]] - traj.times[start])
