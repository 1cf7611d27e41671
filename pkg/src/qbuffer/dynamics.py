"""Scalar decay models for the buffered pair probability versus time.

Two model families are implemented:

* PMD-driven models, where the phases grow like sqrt(L) along the fiber
  (prob_pa, prob_psy and their weighted sum prob_pasy);
* cavity-style models, where the harmonic argument is linear in time
  (cavity_p and the two limiting cases p1, p2, summed into p3).

Everything is stored in SI units (seconds, meters, rad/s, 1/m, s/sqrt(m));
constructors accept the usual lab units (GHz, ps/sqrt(km), 1/km, 1/ms) and
convert exactly once.  All model functions broadcast over numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import PmdPhases

SPEED_OF_LIGHT = 2.99792458e8  # m/s

# unit conversion constants
PS_PER_SQRT_KM = 1e-12 / math.sqrt(1000.0)  # -> s/sqrt(m)
PER_KM = 1e-3                               # -> 1/m
PER_MS = 1e3                                # -> 1/s


@dataclass(frozen=True)
class UnitContext:
    """Propagation constants tying buffer time to fiber length."""

    n_r: float = 1.468  # group index of standard single-mode fiber
    c: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if not self.n_r > 1.0:
            raise ValueError(f"refractive index must exceed 1, got {self.n_r}")


def length_from_time(t, units: UnitContext = UnitContext()):
    """Fiber length L = (c / n_r) t traversed during buffer time t."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("buffer time must be nonnegative")
    out = units.c / units.n_r * t
    return float(out) if out.ndim == 0 else out


def time_from_length(length, units: UnitContext = UnitContext()):
    """Buffer time t = L n_r / c spent in a fiber of length L."""
    length = np.asarray(length, dtype=float)
    if np.any(length < 0):
        raise ValueError("fiber length must be nonnegative")
    out = length * units.n_r / units.c
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PmdModelParams:
    """Parameters of the sqrt(L)-phase decay model (SI units).

    The two components carry free nonnegative weights a1, a2; the raw
    two-component sum at t = 0 equals a1 + a2, which plays the role of the
    modeled initial probability.  ``sign`` selects the branch of the
    counter-rotating component.
    """

    delta_omega: float         # rad/s
    d_p1: float                # s/sqrt(m)
    d_p2: float                # s/sqrt(m)
    mu: float                  # 1/m
    a1: float
    a2: float
    sign: int = +1

    def __post_init__(self) -> None:
        for name in ("delta_omega", "d_p1", "d_p2", "mu", "a1", "a2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.a1 < 0 or self.a2 < 0 or self.a1 + self.a2 <= 0:
            raise ValueError("weights must be nonnegative with a positive sum")
        if self.sign not in (+1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_lab_units(cls, freq_ghz: float, d_p1_ps_sqrt_km: float,
                       d_p2_ps_sqrt_km: float, mu_per_km: float,
                       a1: float, a2: float, sign: int = +1) -> "PmdModelParams":
        """Build from detuning frequency [GHz], PMD coefficients [ps/sqrt(km)]
        and loss [1/km]."""
        return cls(
            delta_omega=2.0 * math.pi * freq_ghz * 1e9,
            d_p1=d_p1_ps_sqrt_km * PS_PER_SQRT_KM,
            d_p2=d_p2_ps_sqrt_km * PS_PER_SQRT_KM,
            mu=mu_per_km * PER_KM,
            a1=a1, a2=a2, sign=sign,
        )

    def canonical(self) -> "PmdModelParams":
        """Order the components so that d_p1 <= d_p2 (weights follow)."""
        if self.d_p1 <= self.d_p2:
            return self
        return replace(self, d_p1=self.d_p2, d_p2=self.d_p1, a1=self.a2, a2=self.a1)


@dataclass(frozen=True)
class CavityModelParams:
    """Parameters of the linear-phase decay model (SI units).

    ``lambda_width`` is the reservoir spectral width; it enters only the
    spectral-density diagnostic, not the decay curves.
    """

    kappa1: float              # 1/s
    kappa2: float              # 1/s
    gamma0: float              # 1/s
    w1: float
    w2: float
    lambda_width: float = 1e6  # 1/s

    def __post_init__(self) -> None:
        for name in ("kappa1", "kappa2", "gamma0", "w1", "w2", "lambda_width"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative")
        if self.w1 + self.w2 <= 0:
            raise ValueError("weights must have a positive sum")

    @classmethod
    def from_lab_units(cls, kappa1_per_ms: float, kappa2_per_ms: float,
                       gamma0_per_ms: float, w1: float, w2: float,
                       lambda_per_ms: float = 1e3) -> "CavityModelParams":
        return cls(kappa1=kappa1_per_ms * PER_MS, kappa2=kappa2_per_ms * PER_MS,
                   gamma0=gamma0_per_ms * PER_MS, w1=w1, w2=w2,
                   lambda_width=lambda_per_ms * PER_MS)

    def canonical(self) -> "CavityModelParams":
        """Order the components so that kappa1 <= kappa2 (weights follow)."""
        if self.kappa1 <= self.kappa2:
            return self
        return replace(self, kappa1=self.kappa2, kappa2=self.kappa1,
                       w1=self.w2, w2=self.w1)


# JSON field names shared with the CLI config format.
_PMD_FIELDS = {
    "delta_omega_rad_s": "delta_omega",
    "d_p1_s_per_sqrt_m": "d_p1",
    "d_p2_s_per_sqrt_m": "d_p2",
    "mu_per_m": "mu",
    "a1": "a1",
    "a2": "a2",
    "sign": "sign",
}
_CAVITY_FIELDS = {
    "kappa1_per_s": "kappa1",
    "kappa2_per_s": "kappa2",
    "gamma0_per_s": "gamma0",
    "w1": "w1",
    "w2": "w2",
    "lambda_per_s": "lambda_width",
}


def params_to_dict(pmd: PmdModelParams, cavity: CavityModelParams,
                   units: UnitContext) -> dict:
    """Flat JSON-ready dict holding both parameter sets and the unit context."""
    out: dict = {"n_r": units.n_r}
    for key, attr in _PMD_FIELDS.items():
        out[key] = getattr(pmd, attr)
    for key, attr in _CAVITY_FIELDS.items():
        out[key] = getattr(cavity, attr)
    return out


def params_from_dict(data: dict) -> tuple[PmdModelParams, CavityModelParams, UnitContext]:
    """Inverse of :func:`params_to_dict`; raises KeyError on missing fields."""
    units = UnitContext(n_r=float(data["n_r"]))
    pmd = PmdModelParams(**{attr: (int(data[key]) if attr == "sign" else float(data[key]))
                            for key, attr in _PMD_FIELDS.items()})
    cavity = CavityModelParams(**{attr: float(data[key])
                                  for key, attr in _CAVITY_FIELDS.items()})
    return pmd, cavity, units


def params_to_json(pmd: PmdModelParams, cavity: CavityModelParams,
                   units: UnitContext) -> str:
    return json.dumps(params_to_dict(pmd, cavity, units), sort_keys=True, indent=2)


def params_from_json(text: str) -> tuple[PmdModelParams, CavityModelParams, UnitContext]:
    return params_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# sqrt(L) phase models
# ---------------------------------------------------------------------------

def pmd_phase(delta_omega: float, d_p: float, length):
    """Differential phase delta_omega * D_p * sqrt(L) accumulated over L meters."""
    length = np.asarray(length, dtype=float)
    if np.any(length < 0):
        raise ValueError("fiber length must be nonnegative")
    out = delta_omega * d_p * np.sqrt(length)
    return float(out) if out.ndim == 0 else out


def prob_pf(phases: PmdPhases, mu: float, length: float) -> float:
    """Pair probability after the polarization map, normalized to 1 at zero
    phase and zero loss:

        (1/4) exp(-2 mu L) [cos(dphi_h) + sin(dphi_h) - sin(dphi_v) + cos(dphi_v)]^2
    """
    if mu < 0 or length < 0:
        raise ValueError("mu and length must be nonnegative")
    bracket = (np.cos(phases.dphi_h) + np.sin(phases.dphi_h)
               - np.sin(phases.dphi_v) + np.cos(phases.dphi_v))
    return float(0.25 * np.exp(-2.0 * mu * length) * bracket**2)


def prob_pa(t, params: PmdModelParams, units: UnitContext = UnitContext()):
    """Counter-rotating component exp(-2 mu L) [cos(dphi1) +/- sin(dphi1)]^2,
    with dphi1 from d_p1 (unweighted)."""
    length = length_from_time(t, units)
    phi = params.delta_omega * params.d_p1 * np.sqrt(length)
    out = np.exp(-2.0 * params.mu * np.asarray(length)) * (
        np.cos(phi) + params.sign * np.sin(phi))**2
    return float(out) if np.ndim(out) == 0 else out


def prob_psy(t, params: PmdModelParams, units: UnitContext = UnitContext()):
    """Co-rotating component exp(-2 mu L) cos^2(dphi2), with dphi2 from d_p2
    (unweighted)."""
    length = length_from_time(t, units)
    phi = params.delta_omega * params.d_p2 * np.sqrt(length)
    out = np.exp(-2.0 * params.mu * np.asarray(length)) * np.cos(phi)**2
    return float(out) if np.ndim(out) == 0 else out


def prob_pasy(t, params: PmdModelParams, units: UnitContext = UnitContext()):
    """Weighted two-component PMD model a1 * prob_pa + a2 * prob_psy."""
    out = params.a1 * prob_pa(t, params, units) + params.a2 * prob_psy(t, params, units)
    return float(out) if np.ndim(out) == 0 else out


def prob_asym(phases: PmdPhases, mu: float, length: float, sign: int = +1) -> float:
    """Expanded seven-term pair probability for unequal phases.

    Evaluates, with s = sign selecting the rotation branch,

        exp(-2 mu L) [ 2 + 2 cos(dv) cos(dh) - 2 sin(dh) sin(dv)
                       + s (  2 cos(dh) sin(dh) - 2 cos(dh) sin(dv)
                            - 2 cos(dv) sin(dv) + 2 cos(dv) sin(dh) ) ]

    For s = +1 this equals 4 * prob_pf of the same phases (the unnormalized
    square of the four-term bracket).
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if mu < 0 or length < 0:
        raise ValueError("mu and length must be nonnegative")
    ch, sh = np.cos(phases.dphi_h), np.sin(phases.dphi_h)
    cv, sv = np.cos(phases.dphi_v), np.sin(phases.dphi_v)
    bracket = (2.0 + 2.0 * cv * ch - 2.0 * sh * sv
               + sign * (2.0 * ch * sh - 2.0 * ch * sv - 2.0 * cv * sv + 2.0 * cv * sh))
    return float(np.exp(-2.0 * mu * length) * bracket)


def asym_series_residual(phases: PmdPhases, mu: float, length: float) -> float:
    """Gap between prob_asym (+ branch) and its small-angle expansion through
    the terms quadratic in the phases:

        exp(-2 mu L) [ 4 + 4 (dh - dv) - (dh + dv)^2 ]

    When the phases scale like sqrt(L) the leading omitted term is cubic, so
    the residual shrinks like L^(3/2).
    """
    dh, dv = phases.dphi_h, phases.dphi_v
    truncated = np.exp(-2.0 * mu * length) * (4.0 + 4.0 * (dh - dv) - (dh + dv)**2)
    return float(abs(prob_asym(phases, mu, length, +1) - truncated))


# ---------------------------------------------------------------------------
# linear-phase (cavity-style) models
# ---------------------------------------------------------------------------

def _sinhc(x: np.ndarray) -> np.ndarray:
    """sinh(x)/x, stable at 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


def cavity_p(t, kappa: float, gamma0: float):
    """Qubit survival probability in the coupled-mode model, p(0) = 1.

    p(t) = exp(-gamma0 t / 2) [cos(delta t / 4) + (gamma0/delta) sin(delta t / 4)]^2
    with delta = sqrt(16 kappa^2 - gamma0^2).  For 4 kappa < gamma0 the root
    is imaginary and the harmonics turn hyperbolic; at 4 kappa = gamma0 the
    analytic limit [1 + gamma0 t / 4]^2 applies.  All three branches are the
    same analytic function, so the value is continuous in the parameters.
    """
    if kappa < 0 or gamma0 < 0:
        raise ValueError("kappa and gamma0 must be nonnegative")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    disc = 16.0 * kappa**2 - gamma0**2
    if disc > 0.0:
        delta = math.sqrt(disc)
        x = delta * t / 4.0
        # (gamma0/delta) sin(delta t/4) written via sinc to stay smooth as disc -> 0
        bracket = np.cos(x) + gamma0 * (t / 4.0) * np.sinc(x / np.pi)
        out = np.exp(-gamma0 * t / 2.0) * bracket**2
    elif disc < 0.0:
        delta = math.sqrt(-disc)
        x = delta * t / 4.0
        big = x > 30.0
        # log-domain evaluation where sinh/cosh would overflow
        bracket_small = np.cosh(np.where(big, 0.0, x)) + gamma0 * (t / 4.0) * _sinhc(np.where(big, 0.0, x))
        out_small = np.exp(-gamma0 * t / 2.0) * bracket_small**2
        log_out_big = (-gamma0 * t / 2.0 + 2.0 * x
                       + 2.0 * np.log((1.0 + gamma0 / delta) / 2.0))
        out = np.where(big, np.exp(log_out_big), out_small)
    else:
        out = np.exp(-gamma0 * t / 2.0) * (1.0 + gamma0 * t / 4.0)**2
    return float(out) if out.ndim == 0 else out


def p1(t, kappa1: float, gamma0: float):
    """Component with the counter-rotating bracket:
    exp(-gamma0 t/2) [cos(kappa1 t / sqrt2) + sin(kappa1 t / sqrt2)]^2."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    x = kappa1 * t / math.sqrt(2.0)
    out = np.exp(-gamma0 * t / 2.0) * (np.cos(x) + np.sin(x))**2
    return float(out) if out.ndim == 0 else out


def p2(t, kappa2: float, gamma0: float):
    """Component with the plain harmonic: exp(-gamma0 t/2) cos^2(kappa2 t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = np.exp(-gamma0 * t / 2.0) * np.cos(kappa2 * t)**2
    return float(out) if out.ndim == 0 else out


def p3(t, params: CavityModelParams):
    """Weighted two-component cavity model w1 * p1 + w2 * p2."""
    out = (params.w1 * p1(t, params.kappa1, params.gamma0)
           + params.w2 * p2(t, params.kappa2, params.gamma0))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# regime classification and auxiliary models
# ---------------------------------------------------------------------------

REGIME_MARKOVIAN = "Markovian"
REGIME_NON_MARKOVIAN = "NonMarkovian"
REGIME_BOUNDARY = "Boundary"

_BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeResult:
    regime: str
    delta: float                # |sqrt(16 kappa^2 - gamma0^2)|, 1/s
    delta_is_imaginary: bool


def classify_regime(kappa: float, gamma0: float) -> RegimeResult:
    """Classify the dynamics by the sign of 16 kappa^2 - gamma0^2.

    Non-Markovian when 4 kappa > gamma0, Markovian when 4 kappa < gamma0,
    Boundary when equal to within a relative 1e-12.  The criterion depends
    only on the ratio, so joint rescaling of both rates never changes it.
    """
    if kappa < 0 or gamma0 < 0:
        raise ValueError("kappa and gamma0 must be nonnegative")
    four_kappa = 4.0 * kappa
    scale = max(four_kappa, gamma0)
    if abs(four_kappa - gamma0) <= _BOUNDARY_RTOL * scale:
        return RegimeResult(REGIME_BOUNDARY, 0.0, False)
    disc = 16.0 * kappa**2 - gamma0**2
    if disc > 0:
        return RegimeResult(REGIME_NON_MARKOVIAN, math.sqrt(disc), False)
    return RegimeResult(REGIME_MARKOVIAN, math.sqrt(-disc), True)


def lorentzian_spectral_density(omega: float, omega0: float, gamma0: float,
                                lambda_width: float) -> float:
    """Effective reservoir spectral density
    gamma0 Lambda^2 / ((omega0 - omega)^2 + Lambda^2)."""
    if lambda_width <= 0:
        raise ValueError("spectral width must be positive")
    detune = omega0 - omega
    return float(gamma0 * lambda_width**2 / (detune**2 + lambda_width**2))


def markovian_exponential(t, p0: float, rate: float):
    """Memoryless control model p0 * exp(-rate * t)."""
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"initial probability must lie in (0, 1], got {p0}")
    if rate < 0.0:
        raise ValueError(f"decay rate must be nonnegative, got {rate}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = p0 * np.exp(-rate * t)
    return float(out) if out.ndim == 0 else out
