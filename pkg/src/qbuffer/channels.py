"""Decoherence channels acting on the buffered photon pair.

Three mechanisms: the birefringence-induced polarization rotation (PMD),
amplitude damping of the buffered arm, and scalar fiber attenuation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import SingleQubitOperator, apply_operator, make_werner


@dataclass(frozen=True)
class PmdPhases:
    """Phase pulled onto each polarization component by the fiber birefringence.

    Angles are in radians and unbounded (they wrap).
    """

    dphi_h: float
    dphi_v: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.dphi_h) and np.isfinite(self.dphi_v)):
            raise ValueError("PMD phases must be finite")


def pmd_operator(phases: PmdPhases) -> SingleQubitOperator:
    """Polarization map of the buffered (idler) photon.

    Sends H -> cos(dphi_h) H + sin(dphi_h) V and
          V -> cos(dphi_v) V - sin(dphi_v) H.
    Unitary only when the two phases coincide.
    """
    ch, sh = np.cos(phases.dphi_h), np.sin(phases.dphi_h)
    cv, sv = np.cos(phases.dphi_v), np.sin(phases.dphi_v)
    matrix = np.array([[ch, -sv], [sh, cv]], dtype=complex)
    return SingleQubitOperator(matrix, "idler")


def amplitude_damping_kraus(xi: float) -> tuple[SingleQubitOperator, SingleQubitOperator]:
    """Kraus pair of the amplitude-damping channel with decay probability xi.

    Gamma0 = diag(1, sqrt(1-xi)) attenuates the V amplitude; Gamma1 moves
    population V -> H with weight sqrt(xi).  The pair satisfies
    Gamma0^dag Gamma0 + Gamma1^dag Gamma1 = I.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"damping probability must lie in [0, 1], got {xi}")
    gamma0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - xi)]], dtype=complex)
    gamma1 = np.array([[0.0, np.sqrt(xi)], [0.0, 0.0]], dtype=complex)
    return (SingleQubitOperator(gamma0, "idler"), SingleQubitOperator(gamma1, "idler"))


def damping_feed_operator(xi: float) -> SingleQubitOperator:
    """Population-feed operator sqrt(xi) |V><H| on the buffered arm.

    Companion of Gamma0 in :func:`damp_werner`.  It moves population H -> V,
    the direction matching the excited-H/ground-V reading of the buffer
    (Gamma1 of :func:`amplitude_damping_kraus` moves it the other way and is
    the trace-preserving partner for arbitrary inputs).
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"damping probability must lie in [0, 1], got {xi}")
    feed = np.array([[0.0, 0.0], [np.sqrt(xi), 0.0]], dtype=complex)
    return SingleQubitOperator(feed, "idler")


def damp_werner(p: float, xi: float) -> np.ndarray:
    """Werner state after amplitude relaxation of the buffered arm.

    Operator-sum action of diag(1, sqrt(1-xi)) together with the H -> V
    population feed sqrt(xi)|V><H| (see :func:`damping_feed_operator`), which
    yields the closed form

        diag( (1+p)/4,
              (1-p)(1-xi)/4 + (1+p) xi/4,
              (1-p)/4,
              (1+p)(1-xi)/4 + (1-p) xi/4 )

    with corner coherences p sqrt(1-xi)/2.  This pair is trace-preserving on
    the Werner family (though not universally), keeps the maximally mixed
    state fixed, and reproduces the single-element probability estimators
    p'11 = p, p'22 = p(1-2 xi), p'14 = p sqrt(1-xi) extracted downstream by
    tomography.
    """
    rho = make_werner(p)
    gamma0, _ = amplitude_damping_kraus(xi)
    feed = damping_feed_operator(xi)
    return apply_operator(rho, gamma0) + apply_operator(rho, feed)


def attenuation_factor(mu: float, length: float) -> float:
    """Two-pass intensity attenuation exp(-2 mu L) for loss mu [1/m] over L [m]."""
    if mu < 0.0:
        raise ValueError(f"loss parameter must be nonnegative, got {mu}")
    if length < 0.0:
        raise ValueError(f"fiber length must be nonnegative, got {length}")
    return float(np.exp(-2.0 * mu * length))
