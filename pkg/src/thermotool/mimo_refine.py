"""Newton refinement of per-hotspot scalar estimates into the full fixed point."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from thermotool.power_model import LeakageParams, SourceParams, pc_component
from thermotool.stability import SisoParams, analyze
from thermotool.thermal_sim import ThermalStateSpace, _SourceArrays, linear_step

MAX_NEWTON_ITER = 50
MAX_HALVINGS = 10
NEWTON_TOL = 1e-9


class NewtonFailure(RuntimeError):
    def __init__(self, message: str, last: np.ndarray, iterations: int):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


@dataclass
class MimoSystem:
    model: ThermalStateSpace
    sources: Sequence[SourceParams]

    def __post_init__(self):
        if len(self.sources) != self.model.n_sources:
            raise ValueError(
                f"model has {self.model.n_sources} sources, got {len(self.sources)}"
            )
        self._arrays = _SourceArrays(self.model, self.sources)

    @property
    def n(self) -> int:
        return self.model.n_hotspots


@dataclass(frozen=True)
class NewtonResult:
    temps: np.ndarray
    iterations: int
    residual_norm: float


def _temps(sys: MimoSystem, temp) -> np.ndarray:
    temp = np.asarray(temp, dtype=float).reshape(-1)
    if temp.shape != (sys.n,):
        raise ValueError(f"expected {sys.n} temperatures")
    if np.any(temp <= 0):
        raise ValueError("temperatures must be > 0 K")
    return temp


def residual(sys: MimoSystem, temp) -> np.ndarray:
    """``A T + B P(T) - T``; zero exactly at a fixed point."""
    temp = _temps(sys, temp)
    return linear_step(sys.model, temp, sys._arrays.power(temp)) - temp


def power_slopes(sys: MimoSystem, temp) -> np.ndarray:
    """dP_m/dT at each source's driving hotspot."""
    src = sys._arrays
    th = np.asarray(temp, dtype=float)[src.hot]
    return src.vk1 * np.exp(src.k2 / th) * (2.0 * th - src.k2)


def jacobian(sys: MimoSystem, temp) -> np.ndarray:
    temp = _temps(sys, temp)
    model = sys.model
    lift = np.zeros((model.n_sources, sys.n))
    lift[np.arange(model.n_sources), sys._arrays.hot] = power_slopes(sys, temp)
    return model.a_matrix - np.eye(sys.n) + model.b_matrix @ lift


def newton_refine(sys: MimoSystem, initial, tol: float = NEWTON_TOL,
                  max_iter: int = MAX_NEWTON_ITER) -> NewtonResult:
    """Solve ``A T + B P(T) = T`` by damped Newton from ``initial``.

    A step is halved (up to ten times) while it fails to reduce the residual
    norm or leaves the positive orthant. Converges to the root nearest the
    seed; it does not enumerate other fixed points.
    """
    temp = _temps(sys, initial).copy()
    res = residual(sys, temp)
    norm = float(np.max(np.abs(res)))
    for it in range(max_iter + 1):
        if norm < tol:
            return NewtonResult(temp, it, norm)
        if it == max_iter:
            break
        try:
            step = np.linalg.solve(jacobian(sys, temp), -res)
        except np.linalg.LinAlgError as exc:
            raise NewtonFailure("singular Jacobian", temp, it) from exc
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = temp + scale * step
            if np.all(trial > 0):
                trial_res = residual(sys, trial)
                trial_norm = float(np.max(np.abs(trial_res)))
                if trial_norm < norm:
                    break
            scale *= 0.5
        else:
            # no decrease within the halving budget; take the smallest step anyway
            if not np.all(trial > 0):
                raise NewtonFailure("Newton step left the positive orthant", temp, it)
        temp, res, norm = trial, trial_res, trial_norm
    raise NewtonFailure(f"no convergence in {max_iter} iterations", temp, max_iter)


def siso_reduction(sys: MimoSystem, hotspot: int) -> tuple[SisoParams, float, float, LeakageParams]:
    """Scalar model of one hotspot from the full matrices.

    Neighbouring hotspots are taken to sit at this hotspot's temperature, so
    ``a`` is the row sum of A (coupling) and ``b`` the row sum of B (all
    sources). Power terms are B-weighted averages; the leakage is carried by
    the exponential constant of the dominant contributor.
    Returns ``(siso, pc, voltage, leakage)`` ready for :func:`stability.analyze`.
    """
    model = sys.model
    a = float(model.a_matrix[hotspot].sum())
    weights = model.b_matrix[hotspot]
    b = float(weights.sum())
    siso = SisoParams(a, b)
    pc = float(sum(w * pc_component(s) for w, s in zip(weights, sys.sources)) / b)
    volt = float(sum(w * s.voltage for w, s in zip(weights, sys.sources)) / b)
    drive = [w * s.voltage * s.leakage.kappa1 for w, s in zip(weights, sys.sources)]
    dominant = sys.sources[int(np.argmax(drive))].leakage
    kappa1 = float(sum(drive)) / (b * volt)
    return siso, pc, volt, LeakageParams(0.0, kappa1, dominant.kappa2)


def siso_seeds(sys: MimoSystem) -> np.ndarray:
    """Per-hotspot stable temperatures from the scalar analysis."""
    seeds = np.empty(sys.n)
    for i in range(sys.n):
        siso, pc, volt, lp = siso_reduction(sys, i)
        report = analyze(siso, pc, volt, lp, ambient=sys.model.ambient)
        if not report.stable:
            raise ValueError(f"hotspot {i}: scalar analysis predicts thermal runaway")
        seeds[i] = report.temp_stable_K
    return seeds


def refine(sys: MimoSystem, tol: float = NEWTON_TOL) -> tuple[np.ndarray, NewtonResult]:
    """Seed from the scalar analysis and refine; returns ``(seeds, result)``."""
    seeds = siso_seeds(sys)
    return seeds, newton_refine(sys, seeds, tol)
