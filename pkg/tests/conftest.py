import os
import sys

import hypothesis
import numpy as np
import pytest

from thermotool.power_model import LeakageParams, SourceParams
from thermotool.stability import SisoParams
from thermotool.thermal_sim import ThermalStateSpace

sys.path.insert(0, os.path.dirname(__file__))

hypothesis.settings.register_profile("default", deadline=None, max_examples=100)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# reference scalar system: a=0.95, b=0.5, V=1, kappa1=1.25e-4, kappa2=-800 K, P_C=40 W
REF_A, REF_B, REF_V, REF_K1, REF_K2, REF_PC = 0.95, 0.5, 1.0, 1.25e-4, -800.0, 40.0
# high-precision (mpmath, 40 digits) roots of the reference fixed-point equation
REF_T_TILDE_U = 0.7550323288889074998
REF_T_TILDE_S = 1.8226901430860826359
REF_TEMP_STABLE = 438.91168393849010097
REF_TEMP_UNSTABLE = 1059.5572790601776567


@pytest.fixture
def ref_leak():
    return LeakageParams(0.0, REF_K1, REF_K2)


@pytest.fixture
def ref_siso():
    return SisoParams(REF_A, REF_B)


@pytest.fixture
def ref_model():
    return ThermalStateSpace([[REF_A]], [[REF_B]], 0.1, [0])


@pytest.fixture
def ref_sources(ref_leak):
    return [SourceParams.from_pc(REF_PC, REF_V, ref_leak)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
