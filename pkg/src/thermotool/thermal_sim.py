"""Discrete-time thermal model and the coupled power-temperature simulator.

The linear part is ``T[k+1] = A T[k] + B P[k]``. Closing the loop through the
temperature-dependent source power gives the nonlinear recurrence that every
closed-form result in this package is checked against.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from thermotool.power_model import SourceParams, pc_component

DEFAULT_RUNAWAY_BOUND_K = 2000.0


@dataclass
class ThermalStateSpace:
    """``T[k+1] = A T[k] + B P[k] + (I - A) 1 ambient``.

    ``ambient`` is 0 for models identified on absolute temperatures. A nonzero
    value means A and B were fitted on temperature rise above ambient.
    ``source_hotspot_map[m]`` is the hotspot whose temperature sets the
    leakage of source ``m``; it defaults to the identity when N == M.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    sample_period: float = 0.1
    source_hotspot_map: Sequence[int] | None = None
    ambient: float = 0.0

    def __post_init__(self):
        self.a_matrix = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        self.b_matrix = np.atleast_2d(np.asarray(self.b_matrix, dtype=float))
        n, n2 = self.a_matrix.shape
        if n != n2:
            raise ValueError(f"A must be square, got {self.a_matrix.shape}")
        if self.b_matrix.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.b_matrix.shape}")
        if not self.sample_period > 0:
            raise ValueError(f"sample_period must be > 0, got {self.sample_period}")
        if np.any(self.b_matrix < 0):
            raise ValueError("B entries must be >= 0")
        rho = spectral_radius(self.a_matrix)
        if not rho < 1:
            raise ValueError(f"spectral radius of A is {rho:.6g}, must be < 1")
        m = self.b_matrix.shape[1]
        if self.source_hotspot_map is None:
            if n != m:
                raise ValueError("source_hotspot_map is required when N != M")
            self.source_hotspot_map = tuple(range(m))
        self.source_hotspot_map = tuple(int(h) for h in self.source_hotspot_map)
        if len(self.source_hotspot_map) != m:
            raise ValueError(f"source_hotspot_map needs {m} entries")
        if any(h < 0 or h >= n for h in self.source_hotspot_map):
            raise ValueError(f"source_hotspot_map entries must lie in [0, {n})")

    @property
    def n_hotspots(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_sources(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def offset(self) -> np.ndarray:
        """Constant input from the ambient, zero in the absolute convention."""
        if self.ambient == 0.0:
            return np.zeros(self.n_hotspots)
        return (np.eye(self.n_hotspots) - self.a_matrix).sum(axis=1) * self.ambient


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


@dataclass
class Trajectory:
    """Sampled run. Row k holds time, temperature and the power drawn at step k."""

    times: np.ndarray
    temps: np.ndarray
    powers: np.ndarray
    runaway: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.temps = np.atleast_2d(np.asarray(self.temps, dtype=float).T).T
        self.powers = np.atleast_2d(np.asarray(self.powers, dtype=float).T).T
        k = len(self.times)
        if self.temps.shape[0] != k or self.powers.shape[0] != k:
            raise ValueError("times, temps and powers must have the same length")
        if k > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def total_power(self) -> np.ndarray:
        return self.powers.sum(axis=1)

    def to_csv(self, path: str | Path) -> None:
        n, m = self.temps.shape[1], self.powers.shape[1]
        header = ["t_s"] + [f"T{i + 1}_K" for i in range(n)] + [f"P{j + 1}_W" for j in range(m)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, temp, power in zip(self.times, self.temps, self.powers):
                writer.writerow([repr(float(t))] + [repr(float(x)) for x in temp]
                                + [repr(float(x)) for x in power])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(x) for x in row] for row in reader if row]
        if not header or header[0] != "t_s":
            raise ValueError(f"{path}: first column must be t_s")
        t_cols = [i for i, h in enumerate(header) if h.startswith("T") and h.endswith("_K")]
        p_cols = [i for i, h in enumerate(header) if h.startswith("P") and h.endswith("_W")]
        if not t_cols or not p_cols or len(t_cols) + len(p_cols) + 1 != len(header):
            raise ValueError(f"{path}: expected header t_s,T1_K..TN_K,P1_W..PM_W")
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        return cls(data[:, 0], data[:, t_cols], data[:, p_cols])


@dataclass(frozen=True)
class ScheduleEntry:
    """From ``step`` on, source ``source`` draws ``pc`` W of temperature-independent power."""

    step: int
    source: int
    pc: float


def read_schedule(path: str | Path) -> list[ScheduleEntry]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["step", "source", "pc_W"]:
            raise ValueError(f"{path}: expected header step,source,pc_W")
        return [ScheduleEntry(int(r["step"]), int(r["source"]), float(r["pc_W"]))
                for r in reader]


def write_schedule(path: str | Path, entries: Iterable[ScheduleEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "source", "pc_W"])
        for e in entries:
            writer.writerow([e.step, e.source, repr(float(e.pc))])


def _check_dims(model: ThermalStateSpace, temp, power=None):
    temp = np.asarray(temp, dtype=float).reshape(-1)
    if temp.shape != (model.n_hotspots,):
        raise ValueError(f"temperature vector must have {model.n_hotspots} entries")
    if power is None:
        return temp
    power = np.asarray(power, dtype=float).reshape(-1)
    if power.shape != (model.n_sources,):
        raise ValueError(f"power vector must have {model.n_sources} entries")
    return temp, power


def linear_step(model: ThermalStateSpace, temp, power) -> np.ndarray:
    temp, power = _check_dims(model, temp, power)
    return model.a_matrix @ temp + model.b_matrix @ power + model.offset


class _SourceArrays:
    """Source parameters laid out as vectors for the inner simulation loop."""

    def __init__(self, model: ThermalStateSpace, sources: Sequence[SourceParams]):
        if len(sources) != model.n_sources:
            raise ValueError(f"expected {model.n_sources} sources, got {len(sources)}")
        self.pc = np.array([pc_component(s) for s in sources])
        self.vk1 = np.array([s.voltage * s.leakage.kappa1 for s in sources])
        self.k2 = np.array([s.leakage.kappa2 for s in sources])
        self.hot = np.array(model.source_hotspot_map, dtype=int)

    def power(self, temp: np.ndarray) -> np.ndarray:
        th = temp[self.hot]
        return self.pc + self.vk1 * th * th * np.exp(self.k2 / th)


def source_powers(model: ThermalStateSpace, sources: Sequence[SourceParams], temp) -> np.ndarray:
    """Power of every source given the hotspot temperature vector."""
    temp = _check_dims(model, temp)
    if np.any(temp <= 0):
        raise ValueError("temperatures must be > 0 K")
    return _SourceArrays(model, sources).power(temp)


def coupled_step(model: ThermalStateSpace, sources: Sequence[SourceParams], temp):
    """One step of the nonlinear loop; returns ``(next_temp, power)``."""
    power = source_powers(model, sources, temp)
    return linear_step(model, temp, power), power


def simulate(
    model: ThermalStateSpace,
    sources: Sequence[SourceParams],
    temp0,
    steps: int,
    schedule: Iterable[ScheduleEntry] = (),
    bound: float = DEFAULT_RUNAWAY_BOUND_K,
) -> Trajectory:
    """Iterate the coupled model for ``steps`` steps.

    Schedule entries replace a source's temperature-independent power from
    their step onward. If any temperature exceeds ``bound`` the run stops and
    the returned trajectory is marked ``runaway`` (its last row is the first
    state above the bound).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    temp = _check_dims(model, temp0).copy()
    if np.any(temp <= 0):
        raise ValueError("temperatures must be > 0 K")
    src = _SourceArrays(model, sources)
    changes: dict[int, list[ScheduleEntry]] = {}
    for e in schedule:
        if not 0 <= e.source < model.n_sources:
            raise ValueError(f"schedule source {e.source} out of range")
        changes.setdefault(e.step, []).append(e)

    a, b, off = model.a_matrix, model.b_matrix, model.offset
    temps = np.empty((steps + 1, model.n_hotspots))
    powers = np.empty((steps + 1, model.n_sources))
    temps[0] = temp
    runaway = False
    k = 0
    for k in range(steps):
        for e in changes.get(k, ()):
            src.pc[e.source] = e.pc
        power = src.power(temp)
        powers[k] = power
        temp = a @ temp + b @ power + off
        temps[k + 1] = temp
        if not np.all(temp <= bound):
            runaway = True
            break
    last = k + 1
    for e in changes.get(last, ()):
        src.pc[e.source] = e.pc
    with np.errstate(over="ignore", invalid="ignore"):
        powers[last] = src.power(temps[last]) if np.all(temps[last] > 0) else np.nan
    times = np.arange(last + 1) * model.sample_period
    return Trajectory(times, temps[: last + 1], powers[: last + 1], runaway=runaway)


def linear_steady_state(model: ThermalStateSpace, power) -> np.ndarray:
    """Fixed point of the linear model under constant power."""
    power = np.asarray(power, dtype=float).reshape(-1)
    if power.shape != (model.n_sources,):
        raise ValueError(f"power vector must have {model.n_sources} entries")
    lhs = np.eye(model.n_hotspots) - model.a_matrix
    try:
        return np.linalg.solve(lhs, model.b_matrix @ power + model.offset)
    except np.linalg.LinAlgError as exc:
        raise ValueError("I - A is singular") from exc


def simulate_siso_batch(a, b, pc, voltage, kappa1, kappa2, temp0, steps: int,
                        bound: float = DEFAULT_RUNAWAY_BOUND_K, tol: float = 0.0):
    """Run many independent scalar loops ``T <- aT + b(pc + V k1 T^2 e^(k2/T))`` at once.

    All parameters broadcast against each other. A loop stops once it exceeds
    ``bound`` (runaway) or its step change drops to ``tol`` or below. Returns
    ``(final_temp, runaway_mask, steps_taken)``.
    """
    arrays = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (a, b, pc, voltage, kappa1, kappa2, temp0)))
    shape = arrays[0].shape
    a, b, pc, voltage, kappa1, kappa2, temp = (x.ravel() for x in arrays)
    temp = temp.copy()
    drive = b * pc
    gain = b * voltage * kappa1
    active = np.ones(temp.shape, dtype=bool)
    runaway = np.zeros(temp.shape, dtype=bool)
    taken = np.zeros(temp.shape, dtype=int)
    for k in range(steps):
        t = temp[active]
        nxt = a[active] * t + drive[active] + gain[active] * t * t * np.exp(kappa2[active] / t)
        delta = np.abs(nxt - t)
        temp[active] = nxt
        taken[active] = k + 1
        hot = nxt > bound
        idx = np.flatnonzero(active)
        runaway[idx[hot]] = True
        active[idx[hot | (delta <= tol)]] = False
        if not active.any():
            break
    return temp.reshape(shape), runaway.reshape(shape), taken.reshape(shape)

