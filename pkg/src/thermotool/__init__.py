"""Power-temperature fixed-point analysis for multiprocessor thermal models."""

from thermotool.power_model import LeakageParams, SourceParams, TechnologyParams
from thermotool.stability import (AuxiliaryForm, Runaway, SisoParams, TwoFixedPoints,
                                  analyze)
from thermotool.safety import safe_power, time_to_fixed_point
from thermotool.thermal_sim import ThermalStateSpace, Trajectory, simulate

__all__ = [
    "AuxiliaryForm",
    "LeakageParams",
    "Runaway",
    "SisoParams",
    "SourceParams",
    "TechnologyParams",
    "ThermalStateSpace",
    "Trajectory",
    "TwoFixedPoints",
    "analyze",
    "safe_power",
    "simulate",
    "time_to_fixed_point",
]
