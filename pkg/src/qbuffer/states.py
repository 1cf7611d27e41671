"""Two-qubit polarization states and basic operator algebra.

Conventions used throughout the package:

* computational basis order (|HH>, |HV>, |VH>, |VV>), with the signal
  photon as the left tensor factor and the idler as the right one;
* derived single-photon states D = (H+V)/sqrt(2), A = (H-V)/sqrt(2),
  R = (H-iV)/sqrt(2), L = (H+iV)/sqrt(2);
* pure states are complex 4-vectors, density matrices complex 4x4 arrays.

All functions are pure and never mutate their arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BASIS_LABELS = ("HH", "HV", "VH", "VV")

KET_H = np.array([1.0, 0.0], dtype=complex)
KET_V = np.array([0.0, 1.0], dtype=complex)
KET_D = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_A = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
KET_R = np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0)
KET_L = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)

SINGLE_QUBIT_KETS = {"H": KET_H, "V": KET_V, "D": KET_D, "A": KET_A,
                     "R": KET_R, "L": KET_L}

# Numerical tolerances for the density-matrix contract.
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
MIN_EIGENVALUE = -1e-9


@dataclass(frozen=True)
class ValidationReport:
    """Residuals of the density-matrix contract, plus the overall verdict."""

    hermiticity_residual: float
    trace_residual: float
    min_eigenvalue: float

    @property
    def hermitian_ok(self) -> bool:
        return self.hermiticity_residual <= HERMITICITY_TOL

    @property
    def trace_ok(self) -> bool:
        return self.trace_residual <= TRACE_TOL

    @property
    def psd_ok(self) -> bool:
        return self.min_eigenvalue >= MIN_EIGENVALUE

    @property
    def passed(self) -> bool:
        return self.hermitian_ok and self.trace_ok and self.psd_ok


@dataclass(frozen=True)
class SingleQubitOperator:
    """A 2x2 operator tagged with the photon arm it acts on.

    Non-unitary operators are allowed; unitarity is asserted only where a
    particular construction claims it.
    """

    matrix: np.ndarray
    arm: str  # 'signal' or 'idler'

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"operator matrix must be 2x2, got {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise ValueError("operator matrix must have finite entries")
        if self.arm not in ("signal", "idler"):
            raise ValueError(f"arm must be 'signal' or 'idler', got {self.arm!r}")
        object.__setattr__(self, "matrix", m)

    def embedded(self) -> np.ndarray:
        """Return the 4x4 two-qubit embedding (op (x) I or I (x) op)."""
        eye = np.eye(2, dtype=complex)
        if self.arm == "signal":
            return np.kron(self.matrix, eye)
        return np.kron(eye, self.matrix)


def make_bell_phi_plus() -> np.ndarray:
    """The maximally entangled state (|HH> + |VV>)/sqrt(2)."""
    return np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)


def product_ket(signal: str, idler: str) -> np.ndarray:
    """Two-photon product state |signal> (x) |idler> from polarization labels."""
    try:
        ks = SINGLE_QUBIT_KETS[signal]
        ki = SINGLE_QUBIT_KETS[idler]
    except KeyError as exc:
        raise ValueError(f"unknown polarization label {exc.args[0]!r}") from None
    return np.kron(ks, ki)


def check_pure_state(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Validate a pure-state vector (4 complex amplitudes, unit norm)."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (4,):
        raise ValueError(f"pure state must have 4 amplitudes, got {psi.shape}")
    norm2 = float(np.sum(np.abs(psi) ** 2))
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"pure state norm^2 = {norm2} deviates from 1 by more than {tol}")
    return psi


def make_werner(p: float) -> np.ndarray:
    """Werner state: the Bell projector mixed with identity.

    W = p |phi+><phi+| + (1-p)/4 * I, for mixing probability p in [0, 1].
    Diagonal ((1+p)/4, (1-p)/4, (1-p)/4, (1+p)/4), corner entries p/2.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner probability must lie in [0, 1], got {p}")
    bell = make_bell_phi_plus()
    return p * np.outer(bell, bell.conj()) + (1.0 - p) / 4.0 * np.eye(4, dtype=complex)


def validate(rho: np.ndarray) -> ValidationReport:
    """Report how far a matrix deviates from being a physical two-qubit state.

    Never raises: reconstruction noise routinely produces slightly unphysical
    matrices, and callers need the residuals to decide.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(rho.trace() - 1.0))
    # eigvalsh needs an exactly Hermitian input; symmetrize first
    sym = 0.5 * (rho + rho.conj().T)
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    return ValidationReport(herm, trace, min_eig)


def require_valid(rho: np.ndarray) -> np.ndarray:
    """Return rho as a complex array, raising if it fails validation."""
    rho = np.asarray(rho, dtype=complex)
    report = validate(rho)
    if not report.passed:
        raise ValueError(
            "invalid density matrix: "
            f"hermiticity residual {report.hermiticity_residual:.3g}, "
            f"trace residual {report.trace_residual:.3g}, "
            f"min eigenvalue {report.min_eigenvalue:.3g}"
        )
    return rho


def apply_operator(rho: np.ndarray, op: SingleQubitOperator) -> np.ndarray:
    """Conjugate rho by a single-arm operator: K rho K^dag with K = op (x) I or I (x) op.

    The result is not renormalized; Kraus pairs summing to a trace-preserving
    map rely on this.
    """
    k = op.embedded()
    return k @ np.asarray(rho, dtype=complex) @ k.conj().T


def overlap(psi: np.ndarray, rho: np.ndarray) -> float:
    """Projection probability <psi|rho|psi> of a state onto a pure state.

    ``rho`` may also be a pure-state vector, in which case this is the
    squared inner product |<psi|phi>|^2.
    """
    psi = check_pure_state(psi)
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        phi = check_pure_state(rho)
        return float(np.abs(psi.conj() @ phi) ** 2)
    return float(np.real(psi.conj() @ rho @ psi))


def rho_to_json(rho: np.ndarray) -> str:
    """Serialize a 4x4 matrix as row-major nested lists of [re, im] pairs."""
    rho = np.asarray(rho, dtype=complex)
    rows = [[[float(z.real), float(z.imag)] for z in row] for row in rho]
    return json.dumps(rows)


def rho_from_json(text: str) -> np.ndarray:
    """Inverse of :func:`rho_to_json`."""
    rows = json.loads(text)
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ValueError("expected a 4x4 array of [re, im] pairs")
    return np.array([[complex(re, im) for re, im in row] for row in rows])
