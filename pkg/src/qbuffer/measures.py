"""Quantum-information measures of the Werner family and threshold solvers.

All measures are closed-form functions of the Werner probability P, in bits.
The x log2 x terms use the entropy convention x log2 x -> 0 as x -> 0.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect, brentq


def _xlog2(x: float) -> float:
    """x * log2(x) with the continuous extension 0 at x = 0."""
    if x < 0.0:
        raise ValueError(f"xlog2 argument must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    return x * np.log2(x)


def _check_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner probability must lie in [0, 1], got {p}")
    return float(p)


def total_correlation(p: float) -> float:
    """Mutual information of the Werner state:
    (3(1-P)/4) log2(1-P) + ((1+3P)/4) log2(1+3P)."""
    p = _check_p(p)
    return 0.75 * _xlog2(1.0 - p) + 0.25 * _xlog2(1.0 + 3.0 * p)


def classical_correlation(p: float) -> float:
    """Classical part of the correlation:
    ((1-P)/2) log2(1-P) + ((1+P)/2) log2(1+P)."""
    p = _check_p(p)
    return 0.5 * _xlog2(1.0 - p) + 0.5 * _xlog2(1.0 + p)


def discord(p: float) -> float:
    """Quantum discord: total minus classical correlation."""
    return total_correlation(p) - classical_correlation(p)


def concurrence(p: float) -> float:
    """Entanglement monotone max(0, (3P - 1)/2); zero at and below P = 1/3."""
    p = _check_p(p)
    return max(0.0, (3.0 * p - 1.0) / 2.0)


@dataclass(frozen=True)
class CorrelationReport:
    """All four measures evaluated at one Werner probability."""

    p: float
    total: float
    classical: float
    discord: float
    concurrence: float


def correlation_report(p: float) -> CorrelationReport:
    total = total_correlation(p)
    classical = classical_correlation(p)
    # discord defined by subtraction so the identity total = classical + discord
    # holds exactly
    return CorrelationReport(p, total, classical, total - classical, concurrence(p))


REPORT_CSV_HEADER = "t_s,L_m,P,total,classical,discord,concurrence"


def reports_to_csv(rows: list[tuple[float, float, CorrelationReport]]) -> str:
    """Render (t, L, report) rows in the fixed CSV schema."""
    buf = io.StringIO()
    buf.write(REPORT_CSV_HEADER + "\n")
    for t, length, rep in rows:
        fields = (t, length, rep.p, rep.total, rep.classical, rep.discord,
                  rep.concurrence)
        buf.write(",".join(format(v, ".12g") for v in fields) + "\n")
    return buf.getvalue()


def solve_level_crossing(model: Callable[[float], float], level: float,
                         bracket: tuple[float, float],
                         grid_points: int = 10_000,
                         residual_tol: float = 1e-9) -> Optional[float]:
    """Earliest time in ``bracket`` where ``model`` crosses ``level``.

    The bracket is first subdivided on a uniform grid to isolate the first
    sign change (oscillatory models cross many times), then the root is
    refined until |model(t*) - level| < residual_tol.  Returns None when no
    sign change exists on the grid.
    """
    t_lo, t_hi = bracket
    if not t_hi > t_lo:
        raise ValueError("bracket must satisfy t_hi > t_lo")
    grid = np.linspace(t_lo, t_hi, grid_points)
    values = np.array([model(t) - level for t in grid])
    exact = np.nonzero(values == 0.0)[0]
    changes = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
    first_exact = exact[0] if exact.size else None
    first_change = changes[0] if changes.size else None
    if first_exact is not None and (first_change is None or first_exact <= first_change):
        return float(grid[first_exact])
    if first_change is None:
        return None
    i = first_change
    root = brentq(lambda t: model(t) - level, grid[i], grid[i + 1],
                  xtol=1e-18 * max(1.0, abs(grid[i + 1])), rtol=8.9e-16, maxiter=200)
    if abs(model(root) - level) > residual_tol:
        raise RuntimeError(
            f"root refinement stalled: residual {abs(model(root) - level):.3g}")
    return float(root)


def discord_concurrence_crossover() -> float:
    """The unique P in (1/3, 1) where discord equals concurrence.

    Found by bisection; discord exceeds concurrence just above 1/3 and falls
    below it before P reaches 1 (both equal 1 exactly at P = 1, which is not
    a crossing of interest).
    """
    gap = lambda p: discord(p) - concurrence(p)
    return float(bisect(gap, 0.34, 0.999, xtol=1e-9))
