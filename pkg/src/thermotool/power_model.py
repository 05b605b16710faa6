"""Per-source power consumption as a function of temperature.

All temperatures are absolute (Kelvin). A source draws dynamic switching
power plus leakage, and the leakage current is a constant gate term plus a
subthreshold term that grows like T^2 exp(kappa2 / T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

# CODATA 2018 exact values.
BOLTZMANN = 1.380649e-23  # J/K
ELECTRON_CHARGE = 1.602176634e-19  # C

ZERO_CELSIUS_K = 273.15


def celsius_to_kelvin(temp_c: float) -> float:
    return temp_c + ZERO_CELSIUS_K


def kelvin_to_celsius(temp_k: float) -> float:
    return temp_k - ZERO_CELSIUS_K


@dataclass(frozen=True)
class LeakageParams:
    """Consolidated leakage constants of one source.

    ``kappa1`` (A/K^2) scales the subthreshold term and ``kappa2`` (K) is the
    exponential constant; it is negative in the subthreshold regime.
    """

    i_gate: float
    kappa1: float
    kappa2: float

    def __post_init__(self):
        if self.i_gate < 0:
            raise ValueError(f"i_gate must be >= 0, got {self.i_gate}")
        if self.kappa1 < 0:
            raise ValueError(f"kappa1 must be >= 0, got {self.kappa1}")
        if not self.kappa2 < 0:
            raise ValueError(f"kappa2 must be < 0, got {self.kappa2}")


@dataclass(frozen=True)
class SourceParams:
    """Operating point of one power source (core cluster, GPU, memory...)."""

    c_sw: float
    voltage: float
    frequency: float
    leakage: LeakageParams

    def __post_init__(self):
        if not self.voltage > 0:
            raise ValueError(f"voltage must be > 0, got {self.voltage}")
        if self.c_sw < 0:
            raise ValueError(f"c_sw must be >= 0, got {self.c_sw}")
        if self.frequency < 0:
            raise ValueError(f"frequency must be >= 0, got {self.frequency}")

    def with_pc(self, pc: float) -> "SourceParams":
        """Copy of this source whose temperature-independent power equals ``pc``.

        The gate leakage is kept and the dynamic term absorbs the rest
        (frequency is fixed at 1 Hz so ``c_sw`` carries the energy per cycle).
        """
        dynamic = pc - self.voltage * self.leakage.i_gate
        if dynamic < 0:
            raise ValueError(
                f"pc={pc} W is below the gate leakage power "
                f"{self.voltage * self.leakage.i_gate} W"
            )
        return replace(self, c_sw=dynamic / self.voltage**2, frequency=1.0)

    @classmethod
    def from_pc(cls, pc: float, voltage: float, leakage: LeakageParams) -> "SourceParams":
        """Build a source that draws ``pc`` watts independent of temperature."""
        base = cls(c_sw=0.0, voltage=voltage, frequency=0.0, leakage=leakage)
        return base.with_pc(pc)


@dataclass(frozen=True)
class TechnologyParams:
    a_s: float
    w_over_l: float
    v_gs: float
    v_th: float
    n_swing: float

    def __post_init__(self):
        if not self.w_over_l > 0:
            raise ValueError(f"w_over_l must be > 0, got {self.w_over_l}")
        if not self.n_swing > 0:
            raise ValueError(f"n_swing must be > 0, got {self.n_swing}")


def kappa_from_technology(tech: TechnologyParams) -> tuple[float, float]:
    """Collapse device constants into ``(kappa1, kappa2)``."""
    if tech.v_gs >= tech.v_th:
        raise ValueError(
            f"v_gs={tech.v_gs} must be below v_th={tech.v_th} (subthreshold regime)"
        )
    kappa1 = tech.a_s * tech.w_over_l * BOLTZMANN / ELECTRON_CHARGE
    kappa2 = ELECTRON_CHARGE * (tech.v_gs - tech.v_th) / (tech.n_swing * BOLTZMANN)
    if not kappa1 > 0:
        raise ValueError(f"a_s * w_over_l must be positive, got kappa1={kappa1}")
    return kappa1, kappa2


def _check_temp(temp: float) -> None:
    if not temp > 0:
        raise ValueError(f"temperature must be > 0 K, got {temp}")


def subthreshold_current(lp: LeakageParams, temp: float) -> float:
    _check_temp(temp)
    return lp.kappa1 * temp * temp * math.exp(lp.kappa2 / temp)


def leakage_current(lp: LeakageParams, temp: float) -> float:
    """Gate plus subthreshold leakage current (A) at ``temp`` Kelvin."""
    return lp.i_gate + subthreshold_current(lp, temp)


def leakage_current_slope(lp: LeakageParams, temp: float) -> float:
    """d(leakage_current)/dT in A/K."""
    _check_temp(temp)
    return lp.kappa1 * math.exp(lp.kappa2 / temp) * (2.0 * temp - lp.kappa2)


def pc_component(sp: SourceParams) -> float:
    """Temperature-independent power: dynamic switching plus gate leakage."""
    return sp.c_sw * sp.voltage**2 * sp.frequency + sp.voltage * sp.leakage.i_gate


def leakage_power(sp: SourceParams, temp: float) -> float:
    """Temperature-dependent (subthreshold) part of the source power."""
    return sp.voltage * subthreshold_current(sp.leakage, temp)


def total_power(sp: SourceParams, temp: float) -> float:
    return pc_component(sp) + leakage_power(sp, temp)


def power_slope(sp: SourceParams, temp: float) -> float:
    """dP/dT of one source in W/K."""
    return sp.voltage * leakage_current_slope(sp.leakage, temp)
