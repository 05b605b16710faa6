"""Parameter identification from measurement (or simulated) traces."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from thermotool.stability import SisoParams
from thermotool.thermal_sim import ScheduleEntry, Trajectory, spectral_radius

log = logging.getLogger(__name__)

PRBS_TAPS = 0xB400  # x^16 + x^14 + x^13 + x^11
PRBS_PERIOD = 0xFFFF


class IdentifiabilityError(ValueError):
    """The data does not pin down every requested parameter."""


class ModelMismatchError(ValueError):
    """A fitted reduced model violates its structural constraints."""


@dataclass(frozen=True)
class LeakageCalibration:
    """``(temperature K, total power W)`` pairs at one fixed workload."""

    samples: Sequence[tuple[float, float]]
    voltage: float

    def __post_init__(self):
        temps = {float(t) for t, _ in self.samples}
        if len(temps) < 4:
            raise ValueError("need samples at >= 4 distinct temperatures")
        if any(t <= 0 for t in temps):
            raise ValueError("temperatures must be > 0 K")
        if not self.voltage > 0:
            raise ValueError("voltage must be > 0")

    @classmethod
    def from_csv(cls, path: str | Path, voltage: float) -> "LeakageCalibration":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["T_K", "P_W"]:
                raise ValueError(f"{path}: expected header T_K,P_W")
            samples = [(float(r["T_K"]), float(r["P_W"])) for r in reader]
        return cls(samples, voltage)


@dataclass
class FitReport:
    parameters: dict
    residual_rms: float | list[float]
    converged: bool
    degenerate: bool = False
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "degenerate": self.degenerate,
            "warnings": self.warnings,
        }


@dataclass(frozen=True)
class LeakageFit:
    lump: float
    kappa1: float
    kappa2: float
    report: FitReport
    i_gate: float | None = None


def _shape(temps: np.ndarray, kappa2: float) -> np.ndarray:
    return temps**2 * np.exp(kappa2 / temps)


def _kappa2_guess(temps: np.ndarray, power: np.ndarray) -> float:
    """Exponential constant from the ratio of power rises cold->mid and cold->hot.

    The unknown constant power cancels in the differences and the scale
    cancels in their ratio, leaving a one-dimensional equation in kappa2.
    """
    order = np.argsort(temps)
    t, p = temps[order], power[order]
    cold, mid, hot = 0, len(t) // 2, len(t) - 1
    target = (p[hot] - p[cold]) / (p[mid] - p[cold]) if p[mid] != p[cold] else math.nan

    def ratio(k2):
        h = _shape(t[[cold, mid, hot]], k2)
        return (h[2] - h[0]) / (h[1] - h[0])

    if np.isfinite(target):
        grid = -np.logspace(0, 5, 101)
        vals = np.array([ratio(k) - target for k in grid])
        flips = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        if flips.size:
            i = flips[0]
            return brentq(lambda k: ratio(k) - target, grid[i], grid[i + 1])
    # fall back to the grid value whose linear sub-fit leaves the smallest residual
    best, best_res = -1000.0, math.inf
    for k2 in -np.logspace(1, 4.5, 200):
        x = np.column_stack([np.ones_like(t), _shape(t, k2)])
        coef, *_ = np.linalg.lstsq(x, p, rcond=None)
        r = float(np.sum((x @ coef - p) ** 2))
        if coef[1] > 0 and r < best_res:
            best, best_res = k2, r
    return best


def fit_leakage(cal: LeakageCalibration, p_dyn: float | None = None,
                max_iter: int = 500) -> LeakageFit:
    """Fit ``P = lump + V k1 T^2 exp(k2/T)`` to furnace samples.

    ``lump`` carries dynamic power plus gate leakage, which this experiment
    cannot separate. Pass the known dynamic power ``p_dyn`` to split out
    ``i_gate``.
    """
    temps = np.array([t for t, _ in cal.samples], dtype=float)
    power = np.array([p for _, p in cal.samples], dtype=float)
    volt = cal.voltage
    if np.ptp(temps) < 20:
        raise IdentifiabilityError("calibration temperatures must span at least 20 K")

    spread = np.ptp(power)
    if spread <= 1e-12 * max(1.0, float(np.max(np.abs(power)))):
        lump = float(np.mean(power))
        report = FitReport({"lump_W": lump, "kappa1": 0.0, "kappa2_K": None},
                           0.0, converged=True, degenerate=True,
                           warnings=["power is independent of temperature"])
        return LeakageFit(lump, 0.0, math.nan, report, _split_gate(lump, p_dyn, volt))

    k2 = _kappa2_guess(temps, power)
    x = np.column_stack([np.ones_like(temps), volt * _shape(temps, k2)])
    (lump0, k1_0), *_ = np.linalg.lstsq(x, power, rcond=None)
    k1_0 = k1_0 if k1_0 > 0 else 1e-6
    scale = max(spread, 1e-12)

    def resid(theta):
        lump, log_k1, log_mk2 = theta
        model = lump + volt * np.exp(log_k1) * _shape(temps, -np.exp(log_mk2))
        return (model - power) / scale

    sol = least_squares(resid, [lump0, math.log(k1_0), math.log(-k2)], method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iter * 4)
    lump, log_k1, log_mk2 = sol.x
    kappa1, kappa2 = math.exp(log_k1), -math.exp(log_mk2)
    rms = float(np.sqrt(np.mean((sol.fun * scale) ** 2)))
    report = FitReport({"lump_W": float(lump), "kappa1": kappa1, "kappa2_K": kappa2},
                       rms, converged=bool(sol.success))
    if not sol.success:
        raise RuntimeError(f"leakage fit did not converge: {sol.message}")
    i_gate = _split_gate(float(lump), p_dyn, volt)
    if i_gate is not None:
        report.parameters["i_gate_A"] = i_gate
    return LeakageFit(float(lump), kappa1, kappa2, report, i_gate)


def _split_gate(lump: float, p_dyn: float | None, voltage: float) -> float | None:
    if p_dyn is None:
        return None
    return max(lump - p_dyn, 0.0) / voltage


def _stack(traces: Sequence[Trajectory]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regressors ``[T[k], P[k]]``, targets ``T[k+1]`` and power columns, stacked over traces."""
    xs, ys = [], []
    for tr in traces:
        if len(tr) < 2:
            continue
        xs.append(np.hstack([tr.temps[:-1], tr.powers[:-1]]))
        ys.append(tr.temps[1:])
    if not xs:
        raise IdentifiabilityError("traces contain no transitions")
    return np.vstack(xs), np.vstack(ys)


def _column_names(n: int, m: int) -> list[str]:
    return [f"T{i + 1}" for i in range(n)] + [f"P{j + 1}" for j in range(m)]


def fit_state_space(traces: Sequence[Trajectory], n: int | None = None, m: int | None = None,
                    rcond: float = 1e-10):
    """Least-squares ``T[k+1] = A T[k] + B P[k]`` over all transitions in ``traces``.

    Returns ``(A, B, FitReport)``. Each hotspot row is solved through an SVD
    of the shared regressor matrix.
    """
    traces = list(traces)
    if not traces:
        raise IdentifiabilityError("no traces")
    n = traces[0].temps.shape[1] if n is None else n
    m = traces[0].powers.shape[1] if m is None else m
    for tr in traces:
        if tr.temps.shape[1] != n or tr.powers.shape[1] != m:
            raise ValueError(f"every trace must have {n} temperatures and {m} powers")
    x, y = _stack(traces)
    names = _column_names(n, m)
    if x.shape[0] < 10 * (n + m):
        raise IdentifiabilityError(
            f"{x.shape[0]} transitions, need at least {10 * (n + m)}")
    flat = [names[n + j] for j in range(m) if np.ptp(x[:, n + j]) == 0]
    if flat:
        raise IdentifiabilityError(f"power columns not excited: {', '.join(flat)}")

    # column scaling keeps the rank test independent of units
    norms = np.linalg.norm(x, axis=0)
    norms[norms == 0] = 1.0
    u, s, vt = np.linalg.svd(x / norms, full_matrices=False)
    bad = s < rcond * s[0]
    if bad.any():
        dirs = []
        for v in vt[bad]:
            terms = [f"{c:+.3g}*{names[i]}" for i, c in enumerate(v) if abs(c) > 1e-3]
            dirs.append(" ".join(terms))
        raise IdentifiabilityError("regressors are rank deficient along: " + "; ".join(dirs))
    coef = (vt.T @ ((u.T @ y) / s[:, None])) / norms[:, None]
    theta = coef.T  # row i: [A_i, B_i]
    a_mat, b_mat = theta[:, :n], theta[:, n:]
    rms = np.sqrt(np.mean((x @ coef - y) ** 2, axis=0))
    report = FitReport({"A": a_mat.tolist(), "B": b_mat.tolist()},
                       [float(r) for r in rms], converged=True)
    rho = spectral_radius(a_mat)
    if rho >= 1:
        msg = f"fitted A has spectral radius {rho:.6g} >= 1"
        log.warning(msg)
        report.warnings.append(msg)
    return a_mat, b_mat, report


def reduce_to_siso(trace: Trajectory, hotspot: int) -> tuple[SisoParams, FitReport]:
    """Fit ``T_i[k+1] = a T_i[k] + b sum_m P_m[k]`` for one hotspot."""
    if len(trace) < 3:
        raise IdentifiabilityError("trace too short for a scalar fit")
    t = trace.temps[:, hotspot]
    p = trace.total_power
    x = np.column_stack([t[:-1], p[:-1]])
    y = t[1:]
    q, r = np.linalg.qr(x)
    if abs(r[1, 1]) < 1e-12 * abs(r[0, 0]):
        raise IdentifiabilityError("temperature and total power are collinear")
    a, b = np.linalg.solve(r, q.T @ y)
    rms = float(np.sqrt(np.mean((x @ [a, b] - y) ** 2)))
    report = FitReport({"a": float(a), "b": float(b)}, rms, converged=True)
    try:
        return SisoParams(float(a), float(b)), report
    except ValueError as exc:
        raise ModelMismatchError(f"fitted a={a:.6g}, b={b:.6g}: {exc}") from exc


def lfsr_states(seed: int, count: int) -> list[int]:
    """Successive states of the 16-bit Fibonacci LFSR, taps 16, 14, 13, 11."""
    if not 0 < seed <= 0xFFFF:
        raise ValueError(f"seed must be a nonzero 16-bit value, got {seed:#x}")
    state = seed
    out = []
    for _ in range(count):
        bit = (state ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1
        state = (state >> 1) | (bit << 15)
        out.append(state)
    return out


def prbs_indices(n_levels: int, length: int, seed: int = 0xACE1) -> list[int]:
    return [s % n_levels for s in lfsr_states(seed, length)]


def generate_prbs(levels: Sequence[Sequence[float]] | Sequence[float], length: int,
                  seed: int = 0xACE1) -> list[ScheduleEntry]:
    """PRBS schedule switching every source among its power levels at each step.

    ``levels`` is either one list shared by all sources or one list per
    source. Source ``m`` uses the register sequence started from
    ``seed`` rotated by ``m`` bits so sources are not in lockstep.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    per_source = [list(lv) for lv in levels] if levels and isinstance(levels[0], (list, tuple)) \
        else [list(levels)]
    entries = []
    for m, lv in enumerate(per_source):
        if len(lv) < 2:
            raise ValueError("need at least two power levels per source")
        src_seed = ((seed << m) | (seed >> (16 - m))) & 0xFFFF if m else seed
        for k, idx in enumerate(prbs_indices(len(lv), length, src_seed)):
            entries.append(ScheduleEntry(k, m, float(lv[idx])))
    entries.sort(key=lambda e: (e.step, e.source))
    return entries
