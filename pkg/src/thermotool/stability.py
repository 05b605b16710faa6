"""Fixed-point existence, location and stability for the reduced scalar model.

At steady state a hotspot obeys ``T = aT + b(P_C + V k1 T^2 exp(k2/T))``.
Substituting the auxiliary temperature ``t = -k2/T`` turns the fixed-point
condition into ``beta t (1 - alpha t) = exp(-t)``, or equivalently the zero
set of

    F(t) = ln(beta) + ln(t) + ln(1 - alpha t) + t,     0 < t < 1/alpha.

F is concave with a single maximum at ``t_m``. There are two fixed points
when ``F(t_m) >= 0`` and none otherwise. The smaller root ``t_u`` (hotter
physical temperature) is unstable. The larger root ``t_s`` is stable and
attracts every start in ``(t_u, 1/alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.optimize import brentq

from thermotool.power_model import LeakageParams

ROOT_TOL = 1e-10
DEGENERATE_MARGIN = 1e-9
MAX_ROOT_ITER = 200


class NoFixedPointError(ValueError):
    """The power-temperature loop has no fixed point (thermal runaway)."""


class RunawayError(ArithmeticError):
    """An iteration left the physical domain on its way to T -> infinity."""


@dataclass(frozen=True)
class SisoParams:
    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise ValueError(f"a must lie in (0, 1), got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")


@dataclass(frozen=True)
class AuxiliaryForm:
    alpha: float
    beta: float
    kappa2: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.kappa2 < 0:
            raise ValueError(f"kappa2 must be < 0, got {self.kappa2}")

    @property
    def upper(self) -> float:
        """Right end ``1/alpha`` of the admissible auxiliary domain."""
        return 1.0 / self.alpha


def compute_beta(siso: SisoParams, voltage: float, lp: LeakageParams) -> float:
    if not lp.kappa1 > 0:
        raise ValueError("kappa1 must be > 0 for the fixed-point analysis")
    return (siso.a - 1.0) / siso.b / (voltage * lp.kappa1 * lp.kappa2)


def to_auxiliary(siso: SisoParams, pc: float, voltage: float, lp: LeakageParams) -> AuxiliaryForm:
    if not pc > 0:
        raise ValueError(f"pc must be > 0, got {pc}")
    alpha = siso.b / (siso.a - 1.0) * (pc / lp.kappa2)
    return AuxiliaryForm(alpha, compute_beta(siso, voltage, lp), lp.kappa2)


def aux_to_temp(t_tilde: float, kappa2: float) -> float:
    if not t_tilde > 0:
        raise ValueError(f"auxiliary temperature must be > 0, got {t_tilde}")
    return -kappa2 / t_tilde


def temp_to_aux(temp: float, kappa2: float) -> float:
    if not temp > 0:
        raise ValueError(f"temperature must be > 0, got {temp}")
    return -kappa2 / temp


def _check_domain(t_tilde: float, aux: AuxiliaryForm) -> None:
    if not 0 < t_tilde < aux.upper or aux.alpha * t_tilde >= 1:
        raise ValueError(f"t_tilde={t_tilde} outside (0, 1/alpha={aux.upper})")


def f_of(t_tilde: float, aux: AuxiliaryForm) -> float:
    _check_domain(t_tilde, aux)
    return math.log(aux.beta) + math.log(t_tilde) + math.log1p(-aux.alpha * t_tilde) + t_tilde


def f_prime(t_tilde: float, aux: AuxiliaryForm) -> float:
    _check_domain(t_tilde, aux)
    return 1.0 / t_tilde - aux.alpha / (1.0 - aux.alpha * t_tilde) + 1.0


def f_double_prime(t_tilde: float, aux: AuxiliaryForm) -> float:
    _check_domain(t_tilde, aux)
    return -1.0 / t_tilde**2 - (aux.alpha / (1.0 - aux.alpha * t_tilde)) ** 2


def t_tilde_m(alpha: float) -> float:
    """Maximizer of F: ``1/(2 alpha) - 1 + sqrt(1/(4 alpha^2) + 1)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    half = 0.5 / alpha
    # sqrt(h^2 + 1) - 1 rewritten as h^2 / (sqrt(h^2 + 1) + 1) to avoid cancellation
    return half + half * half / (math.hypot(half, 1.0) + 1.0)


def existence(aux: AuxiliaryForm) -> tuple[bool, float]:
    """Return ``(has_fixed_points, F(t_m))``."""
    tm = t_tilde_m(aux.alpha)
    margin = math.log(aux.beta) + tm - math.log(2.0 / tm + 1.0)
    return margin >= 0, margin


def _lower_end(aux: AuxiliaryForm, f) -> float:
    lo = 1e-12
    while f(lo) >= 0:
        lo *= 1e-6
        if lo < 1e-300:
            raise RuntimeError("could not bracket the unstable root near zero")
    return lo


def _upper_end(aux: AuxiliaryForm, f) -> float:
    upper = aux.upper
    nudge = max(1e-12, 1e-9 * upper)
    hi = upper - nudge
    while aux.alpha * hi < 1 and f(hi) >= 0:
        nudge *= 1e-3
        nxt = upper - nudge
        if nxt == hi or aux.alpha * nxt >= 1:
            break
        hi = nxt
    return hi


def find_fixed_points(aux: AuxiliaryForm) -> tuple[float, float]:
    """Auxiliary roots ``(t_u, t_s)`` of F, with ``t_u <= t_m <= t_s``."""
    ok, margin = existence(aux)
    if not ok:
        raise NoFixedPointError(f"no fixed point: F(t_m) = {margin:.6g} < 0")
    tm = t_tilde_m(aux.alpha)
    if margin < DEGENERATE_MARGIN:
        return tm, tm

    log_beta = math.log(aux.beta)
    alpha = aux.alpha

    def f(t):
        return log_beta + math.log(t) + math.log1p(-alpha * t) + t

    lo = _lower_end(aux, f)
    hi = _upper_end(aux, f)
    t_u = brentq(f, lo, tm, xtol=1e-15, rtol=1e-15, maxiter=MAX_ROOT_ITER)
    if f(hi) >= 0:
        # root sits within floating-point spacing of 1/alpha
        t_s = hi
    else:
        t_s = brentq(f, tm, hi, xtol=1e-15, rtol=1e-15, maxiter=MAX_ROOT_ITER)
    return t_u, t_s


def iterate_aux(t_tilde: float, aux: AuxiliaryForm, a: float) -> float:
    """One step of the temperature recurrence written in the auxiliary variable.

    The step raises ``t_tilde`` where F > 0 and lowers it where F < 0.
    """
    if not t_tilde > 0:
        raise ValueError(f"auxiliary temperature must be > 0, got {t_tilde}")
    beta, alpha = aux.beta, aux.alpha
    gain = (1.0 - a) / beta / t_tilde / t_tilde
    bracket = beta * (1.0 - alpha * t_tilde) * t_tilde - math.exp(-t_tilde)
    inv = 1.0 / t_tilde - gain * bracket
    if not inv < math.inf:
        raise RunawayError("auxiliary temperature collapsed to 0")
    if not inv > 0:
        raise RunawayError(f"auxiliary step produced 1/t = {inv}")
    return 1.0 / inv


@dataclass(frozen=True)
class Runaway:
    """No fixed point exists; temperature diverges from any start."""

    alpha: float
    beta: float
    t_tilde_m: float
    margin: float

    stable = False

    def to_dict(self) -> dict:
        return {"variant": "runaway", **asdict(self)}


@dataclass(frozen=True)
class TwoFixedPoints:
    alpha: float
    beta: float
    t_tilde_m: float
    margin: float
    t_tilde_u: float
    t_tilde_s: float
    temp_unstable_K: float
    temp_stable_K: float
    roc_aux: tuple[float, float]
    roc_temp_K: tuple[float, float]
    degenerate: bool = False

    stable = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc_aux"] = list(self.roc_aux)
        d["roc_temp_K"] = list(self.roc_temp_K)
        return {"variant": "two_fixed_points", **d}


StabilityReport = Runaway | TwoFixedPoints


def analyze_aux(aux: AuxiliaryForm) -> StabilityReport:
    ok, margin = existence(aux)
    tm = t_tilde_m(aux.alpha)
    if not ok:
        return Runaway(aux.alpha, aux.beta, tm, margin)
    t_u, t_s = find_fixed_points(aux)
    k2 = aux.kappa2
    return TwoFixedPoints(
        alpha=aux.alpha,
        beta=aux.beta,
        t_tilde_m=tm,
        margin=margin,
        t_tilde_u=t_u,
        t_tilde_s=t_s,
        temp_unstable_K=-k2 / t_u,
        temp_stable_K=-k2 / t_s,
        roc_aux=(t_u, aux.upper),
        roc_temp_K=(-k2 * aux.alpha, -k2 / t_u),
        degenerate=margin < DEGENERATE_MARGIN,
    )


def effective_pc(siso: SisoParams, pc: float, ambient: float = 0.0) -> float:
    """Fold an ambient offset ``(1 - a) T_amb`` into the temperature-independent power."""
    return pc + (1.0 - siso.a) * ambient / siso.b


def analyze(siso: SisoParams, pc: float, voltage: float, lp: LeakageParams,
            ambient: float = 0.0) -> StabilityReport:
    """Classify the scalar loop and, when it is stable, locate its fixed points.

    ``ambient`` is the reference temperature of an ambient-referenced model
    (0 for the absolute convention).
    """
    return analyze_aux(to_auxiliary(siso, effective_pc(siso, pc, ambient), voltage, lp))
