"""Weighted nonlinear least-squares fits of the decay models to (t, P) data.

The two-component models are fitted over parameters rescaled to lab units
(ps/sqrt(km), 1/km, 1/ms) so every free parameter is O(1); SI magnitudes like
D_p ~ 1e-17 s/sqrt(m) would otherwise wreck finite-difference Jacobians.

Initialization (when no explicit guess is given) is a deterministic scan:
a crude exponential pre-fit pins the envelope rate, a coarse grid over the
two phase parameters with the component weights solved linearly (NNLS) at
each grid point ranks candidate basins, and the top few candidates are each
polished by a trust-region least-squares pass, keeping the best.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares, nnls

from .dynamics import (PER_KM, PER_MS, PS_PER_SQRT_KM, CavityModelParams,
                       PmdModelParams, UnitContext)


class FittingError(RuntimeError):
    pass


@dataclass(frozen=True)
class DataSeries:
    """Measured probability series: strictly increasing times, optional sigmas."""

    t: np.ndarray       # seconds
    p: np.ndarray
    sigma: np.ndarray   # per-point uncertainty; 1.0 when unknown

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        p = np.asarray(self.p, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if t.ndim != 1 or t.shape != p.shape or t.shape != sigma.shape:
            raise ValueError("t, p and sigma must be 1-d arrays of equal length")
        if not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if np.any(sigma < 0):
            raise ValueError("uncertainties must be nonnegative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_points(cls, t: Sequence[float], p: Sequence[float],
                    sigma: Optional[Sequence[float]] = None) -> "DataSeries":
        t = np.asarray(t, dtype=float)
        if sigma is None:
            sigma = np.ones_like(t)
        return cls(t, np.asarray(p, dtype=float), np.asarray(sigma, dtype=float))

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class ExponentialParams:
    p0: float
    rate: float  # 1/s


@dataclass(frozen=True)
class FitResult:
    """Outcome of one model fit.

    ``covariance_diag`` holds per-parameter variance estimates in the same
    (SI) units as the parameter object, in the documented free-parameter
    order; ``at_bounds`` names parameters pinned at a bound.
    """

    model: str  # 'pasy', 'p3' or 'exp'
    params: object
    residual_norm: float
    covariance_diag: tuple[float, ...]
    converged: bool
    iterations: int
    at_bounds: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.residual_norm < 0:
            raise ValueError("residual norm must be nonnegative")


PASY_FREE_PARAMS = ("d_p1", "d_p2", "mu", "a1", "a2")
P3_FREE_PARAMS = ("kappa1", "kappa2", "gamma0", "w1", "w2")

# lab-unit scale of each free parameter relative to SI
_PASY_SCALES = np.array([PS_PER_SQRT_KM, PS_PER_SQRT_KM, PER_KM, 1.0, 1.0])
_P3_SCALES = np.array([PER_MS, PER_MS, PER_MS, 1.0, 1.0])


def _pasy_lab_model(t: np.ndarray, x: np.ndarray, delta_omega: float,
                    units: UnitContext, sign: int) -> np.ndarray:
    dp1, dp2, mu_km, a1, a2 = x
    length = units.c / units.n_r * t
    root = np.sqrt(length)
    ph1 = delta_omega * dp1 * PS_PER_SQRT_KM * root
    ph2 = delta_omega * dp2 * PS_PER_SQRT_KM * root
    att = np.exp(-2.0 * mu_km * PER_KM * length)
    return (a1 * att * (np.cos(ph1) + sign * np.sin(ph1)) ** 2
            + a2 * att * np.cos(ph2) ** 2)


def _p3_lab_model(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    k1, k2, g0, w1, w2 = x
    tm = t * 1e3  # ms
    env = np.exp(-g0 * tm / 2.0)
    b1 = np.cos(k1 * tm / math.sqrt(2.0)) + np.sin(k1 * tm / math.sqrt(2.0))
    return w1 * env * b1 ** 2 + w2 * env * np.cos(k2 * tm) ** 2


def _envelope_prefit(t_scaled: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """Slope/intercept of ln p against scaled time, ignoring nonpositive points."""
    mask = p > 0
    if mask.sum() < 2:
        raise FittingError("too few positive points for the envelope pre-fit")
    slope, intercept = np.polyfit(t_scaled[mask], np.log(p[mask]), 1)
    return float(slope), float(intercept)


def _nnls_weights(c1: np.ndarray, c2: np.ndarray, p: np.ndarray,
                  sigma: np.ndarray) -> tuple[np.ndarray, float]:
    design = np.column_stack([c1, c2]) / sigma[:, None]
    weights, norm = nnls(design, p / sigma)
    return weights, norm * norm


def _top_candidates(cands: list[tuple[float, np.ndarray]], key_index: int,
                    rel_gap: float, k_top: int) -> list[np.ndarray]:
    """Best-scoring candidates, de-duplicated along one distinguishing axis."""
    cands.sort(key=lambda c: c[0])
    picked: list[np.ndarray] = []
    for _, x in cands:
        ref = x[key_index]
        if all(abs(ref - other[key_index]) > rel_gap * max(other[key_index], 1e-9)
               for other in picked):
            picked.append(x)
        if len(picked) >= k_top:
            break
    return picked


def _scan_pasy(t: np.ndarray, p: np.ndarray, sigma: np.ndarray,
               delta_omega: float, units: UnitContext, sign: int) -> list[np.ndarray]:
    length = units.c / units.n_r * t
    root = np.sqrt(length)
    slope, _ = _envelope_prefit(t, p)
    mu0 = max(-slope * units.n_r / (2.0 * units.c) / PER_KM, 1e-9)
    # widest phase observable on this record sets the dp2 grid ceiling
    dp_hi = math.pi / max(delta_omega * PS_PER_SQRT_KM * root[-1], 1e-30)
    cands: list[tuple[float, np.ndarray]] = []
    for mu_c in (0.75 * mu0, mu0, 1.25 * mu0):
        att = np.exp(-2.0 * mu_c * PER_KM * length)
        for dp2 in np.linspace(dp_hi / 120.0, 1.2 * dp_hi, 90):
            ph2 = delta_omega * dp2 * PS_PER_SQRT_KM * root
            c2 = att * np.cos(ph2) ** 2
            for dp1 in np.concatenate([[0.0], np.geomspace(dp_hi / 400.0, 1.2 * dp_hi, 26)]):
                if dp1 > dp2:
                    continue
                ph1 = delta_omega * dp1 * PS_PER_SQRT_KM * root
                c1 = att * (np.cos(ph1) + sign * np.sin(ph1)) ** 2
                weights, sse = _nnls_weights(c1, c2, p, sigma)
                cands.append((sse, np.array([dp1, dp2, mu_c,
                                             max(weights[0], 1e-6),
                                             max(weights[1], 1e-6)])))
    return _top_candidates(cands, key_index=1, rel_gap=0.05, k_top=4)


def _scan_p3(t: np.ndarray, p: np.ndarray, sigma: np.ndarray) -> list[np.ndarray]:
    tm = t * 1e3
    slope, _ = _envelope_prefit(tm, p)
    g0_0 = max(-2.0 * slope, 1e-3)
    k_hi = 0.5 * math.pi / max(float(np.median(np.diff(tm))), 1e-12)
    cands: list[tuple[float, np.ndarray]] = []
    for g0c in (0.7 * g0_0, g0_0, 1.3 * g0_0):
        env = np.exp(-g0c * tm / 2.0)
        for k2 in np.linspace(k_hi / 150.0, k_hi, 90):
            c2 = env * np.cos(k2 * tm) ** 2
            for k1 in np.concatenate([[0.0], np.geomspace(k_hi / 400.0, k_hi, 26)]):
                if k1 > k2:
                    continue
                x1 = k1 * tm / math.sqrt(2.0)
                c1 = env * (np.cos(x1) + np.sin(x1)) ** 2
                weights, sse = _nnls_weights(c1, c2, p, sigma)
                cands.append((sse, np.array([k1, k2, g0c,
                                             max(weights[0], 1e-6),
                                             max(weights[1], 1e-6)])))
    return _top_candidates(cands, key_index=1, rel_gap=0.05, k_top=4)


def _polish(model, t, p, sigma, x0, bounds):
    # central-difference Jacobian with relative step 1e-6; parameters are in
    # lab units so every magnitude is O(1e-3..1)
    fun = lambda x: (model(t, x) - p) / sigma
    return least_squares(fun, np.clip(x0, bounds[0], bounds[1]),
                         bounds=bounds, method="trf", jac="3-point",
                         diff_step=1e-6, xtol=1e-12, ftol=1e-12, gtol=1e-13,
                         max_nfev=4000)


def _covariance_diag(result, n_points: int, n_free: int,
                     scales: np.ndarray, sigmas_known: bool) -> tuple[float, ...]:
    jac = result.jac
    jtj = jac.T @ jac
    cov = np.linalg.pinv(jtj)
    if not sigmas_known and n_points > n_free:
        cov = cov * (2.0 * result.cost / (n_points - n_free))
    return tuple(float(v) for v in np.diag(cov) * scales ** 2)


def _bound_flags(x: np.ndarray, bounds, names) -> tuple[str, ...]:
    lo, hi = bounds
    flags = []
    for value, lo_i, hi_i, name in zip(x, lo, hi, names):
        if value <= lo_i + 1e-9 * (1.0 + abs(lo_i)):
            flags.append(name)
        elif np.isfinite(hi_i) and value >= hi_i - 1e-9 * (1.0 + abs(hi_i)):
            flags.append(name)
    return tuple(flags)


def _fit_two_component(model, t, p, sigma, candidates, bounds, names,
                       scales, sigmas_known):
    """Polish every candidate, keep the best, and resolve label order.

    If the winning solution has its components in non-canonical order
    (parameter 1 above parameter 2), refitting from the label-swapped point
    is attempted; the ordered solution is preferred whenever its cost is not
    worse by more than a relative 1e-9.
    """
    best = None
    for x0 in candidates:
        res = _polish(model, t, p, sigma, x0, bounds)
        if best is None or res.cost < best.cost:
            best = res
    if best.x[0] > best.x[1]:
        swapped = best.x.copy()
        swapped[[0, 1]] = swapped[[1, 0]]
        swapped[[3, 4]] = swapped[[4, 3]]
        res2 = _polish(model, t, p, sigma, swapped, bounds)
        if res2.x[0] <= res2.x[1] and res2.cost <= best.cost * (1.0 + 1e-9):
            best = res2
    converged = best.status > 0
    residual_norm = float(math.sqrt(2.0 * best.cost))
    cov = _covariance_diag(best, len(t), len(names), scales, sigmas_known)
    flags = _bound_flags(best.x, bounds, names)
    return best, residual_norm, cov, converged, flags


def _default_bounds() -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(5), np.full(5, np.inf)


def fit_pasy(data: DataSeries, init: Optional[PmdModelParams] = None,
             bounds: Optional[tuple[Sequence[float], Sequence[float]]] = None,
             units: UnitContext = UnitContext()) -> FitResult:
    """Fit the sqrt(L)-phase model; free parameters (d_p1, d_p2, mu, a1, a2).

    The detuning delta_omega and the sign branch are taken from ``init`` when
    given and are held fixed (defaults: 2 pi x 200 GHz, +).  ``bounds`` are
    (lo, hi) arrays over the free parameters in lab units
    (ps/sqrt(km), ps/sqrt(km), 1/km, 1, 1); all-zero lower bounds by default.
    """
    if len(data) < 6:
        raise FittingError(f"need at least 6 points for 5 free parameters, got {len(data)}")
    delta_omega = init.delta_omega if init is not None else 2.0 * math.pi * 200e9
    sign = init.sign if init is not None else +1
    sigma = np.where(data.sigma > 0, data.sigma, 1.0)
    sigmas_known = bool(np.any(data.sigma != 1.0))
    lo, hi = bounds if bounds is not None else _default_bounds()
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    model = lambda t, x: _pasy_lab_model(t, x, delta_omega, units, sign)
    if init is not None:
        candidates = [np.array([init.d_p1 / PS_PER_SQRT_KM, init.d_p2 / PS_PER_SQRT_KM,
                                init.mu / PER_KM, init.a1, init.a2])]
    else:
        candidates = _scan_pasy(data.t, data.p, sigma, delta_omega, units, sign)
    best, residual_norm, cov, converged, flags = _fit_two_component(
        model, data.t, data.p, sigma, candidates, (lo, hi),
        PASY_FREE_PARAMS, _PASY_SCALES, sigmas_known)
    dp1, dp2, mu_km, a1, a2 = best.x
    params = PmdModelParams(delta_omega=delta_omega,
                            d_p1=dp1 * PS_PER_SQRT_KM, d_p2=dp2 * PS_PER_SQRT_KM,
                            mu=mu_km * PER_KM, a1=a1, a2=a2, sign=sign)
    return FitResult("pasy", params, residual_norm, cov, converged,
                     int(best.nfev), flags)


def fit_p3(data: DataSeries, init: Optional[CavityModelParams] = None,
           bounds: Optional[tuple[Sequence[float], Sequence[float]]] = None
           ) -> FitResult:
    """Fit the linear-phase model; free parameters (kappa1, kappa2, gamma0, w1, w2).

    ``bounds`` are (lo, hi) arrays over the free parameters in 1/ms (rates)
    and raw weights.
    """
    if len(data) < 6:
        raise FittingError(f"need at least 6 points for 5 free parameters, got {len(data)}")
    sigma = np.where(data.sigma > 0, data.sigma, 1.0)
    sigmas_known = bool(np.any(data.sigma != 1.0))
    lo, hi = bounds if bounds is not None else _default_bounds()
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if init is not None:
        candidates = [np.array([init.kappa1 / PER_MS, init.kappa2 / PER_MS,
                                init.gamma0 / PER_MS, init.w1, init.w2])]
        lambda_width = init.lambda_width
    else:
        candidates = _scan_p3(data.t, data.p, sigma)
        lambda_width = 1e6
    best, residual_norm, cov, converged, flags = _fit_two_component(
        _p3_lab_model, data.t, data.p, sigma, candidates, (lo, hi),
        P3_FREE_PARAMS, _P3_SCALES, sigmas_known)
    k1, k2, g0, w1, w2 = best.x
    params = CavityModelParams(kappa1=k1 * PER_MS, kappa2=k2 * PER_MS,
                               gamma0=g0 * PER_MS, w1=w1, w2=w2,
                               lambda_width=lambda_width)
    return FitResult("p3", params, residual_norm, cov, converged,
                     int(best.nfev), flags)


def fit_exponential(data: DataSeries) -> FitResult:
    """Closed-form weighted linear fit of p0 * exp(-rate t) on log p."""
    if len(data) < 2:
        raise FittingError(f"need at least 2 points, got {len(data)}")
    if np.any(data.p <= 0):
        raise FittingError("exponential fit requires strictly positive p")
    sigmas_known = bool(np.any(data.sigma != 1.0))
    # sigma on p maps to sigma/p on ln p
    w = data.p / data.sigma if sigmas_known else np.ones_like(data.p)
    design = np.column_stack([np.ones_like(data.t), -data.t])
    lhs = design * w[:, None]
    rhs = np.log(data.p) * w
    coef, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    ln_p0, rate = coef
    p0 = float(np.exp(ln_p0))
    resid = (p0 * np.exp(-rate * data.t) - data.p) / data.sigma
    cov_ln = np.linalg.pinv(lhs.T @ lhs)
    if not sigmas_known and len(data) > 2:
        log_resid = rhs - lhs @ coef
        cov_ln = cov_ln * float(log_resid @ log_resid) / (len(data) - 2)
    cov = (float(cov_ln[0, 0]) * p0 ** 2, float(cov_ln[1, 1]))
    return FitResult("exp", ExponentialParams(p0, float(rate)),
                     float(np.linalg.norm(resid)), cov, True, 1)


@dataclass(frozen=True)
class ModelComparison:
    residual_norm_a: float
    residual_norm_b: float
    reduced_chisq_a: float
    reduced_chisq_b: float
    winner: str  # 'a', 'b' or 'tie'


_N_FREE = {"pasy": 5, "p3": 5, "exp": 2}


def _predict(fit: FitResult, t: np.ndarray,
             units: UnitContext = UnitContext()) -> np.ndarray:
    if fit.model == "pasy":
        p = fit.params
        x = np.array([p.d_p1 / PS_PER_SQRT_KM, p.d_p2 / PS_PER_SQRT_KM,
                      p.mu / PER_KM, p.a1, p.a2])
        return _pasy_lab_model(t, x, p.delta_omega, units, p.sign)
    if fit.model == "p3":
        p = fit.params
        x = np.array([p.kappa1 / PER_MS, p.kappa2 / PER_MS, p.gamma0 / PER_MS,
                      p.w1, p.w2])
        return _p3_lab_model(t, x)
    if fit.model == "exp":
        return fit.params.p0 * np.exp(-fit.params.rate * t)
    raise ValueError(f"unknown model {fit.model!r}")


def model_comparison(data: DataSeries, fit_a: FitResult, fit_b: FitResult,
                     units: UnitContext = UnitContext()) -> ModelComparison:
    """Compare two fits of the same data by reduced chi-square.

    Each fit's stored residual norm must match the norm recomputed from
    ``data``; a mismatch means the fit belongs to different data and is
    rejected.
    """
    sigma = np.where(data.sigma > 0, data.sigma, 1.0)
    norms = []
    for fit in (fit_a, fit_b):
        resid = (_predict(fit, data.t, units) - data.p) / sigma
        norm = float(np.linalg.norm(resid))
        if abs(norm - fit.residual_norm) > 1e-6 * (1.0 + fit.residual_norm):
            raise ValueError(
                f"{fit.model} fit does not correspond to this data "
                f"(stored residual {fit.residual_norm:.6g}, recomputed {norm:.6g})")
        norms.append(norm)
    chisq = []
    for fit, norm in zip((fit_a, fit_b), norms):
        dof = max(len(data) - _N_FREE[fit.model], 1)
        chisq.append(norm ** 2 / dof)
    if abs(chisq[0] - chisq[1]) < 1e-9:
        winner = "tie"
    else:
        winner = "a" if chisq[0] < chisq[1] else "b"
    return ModelComparison(norms[0], norms[1], chisq[0], chisq[1], winner)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

SERIES_CSV_HEADER = "t_s,p,sigma"


def series_from_csv(text: str) -> DataSeries:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0].strip() != SERIES_CSV_HEADER:
        raise ValueError(f"expected header {SERIES_CSV_HEADER!r}")
    rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
    if any(len(r) != 3 for r in rows):
        raise ValueError("every data row must have t_s,p,sigma")
    t, p, sigma = (np.array(col) for col in zip(*rows))
    return DataSeries(t, p, sigma)


def series_to_csv(data: DataSeries) -> str:
    buf = io.StringIO()
    buf.write(SERIES_CSV_HEADER + "\n")
    for t, p, s in zip(data.t, data.p, data.sigma):
        buf.write(f"{format(t, '.17g')},{format(p, '.17g')},{format(s, '.17g')}\n")
    return buf.getvalue()


def fit_result_to_dict(fit: FitResult) -> dict:
    out: dict = {
        "model": fit.model,
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "at_bounds": list(fit.at_bounds),
        "covariance_diag": list(fit.covariance_diag),
    }
    if fit.model == "pasy":
        p = fit.params
        out.update({"delta_omega_rad_s": p.delta_omega,
                    "d_p1_s_per_sqrt_m": p.d_p1, "d_p2_s_per_sqrt_m": p.d_p2,
                    "mu_per_m": p.mu, "a1": p.a1, "a2": p.a2, "sign": p.sign})
    elif fit.model == "p3":
        p = fit.params
        out.update({"kappa1_per_s": p.kappa1, "kappa2_per_s": p.kappa2,
                    "gamma0_per_s": p.gamma0, "w1": p.w1, "w2": p.w2,
                    "lambda_per_s": p.lambda_width})
    elif fit.model == "exp":
        out.update({"p0": fit.params.p0, "rate_per_s": fit.params.rate})
    return out


def fit_result_to_json(fit: FitResult) -> str:
    return json.dumps(fit_result_to_dict(fit), sort_keys=True, indent=2)
