"""Simulated two-photon state tomography and density-matrix reconstruction.

The measurement set is the 16-setting product grid {H, V, D, R} x {H, V, D, R},
which is informationally complete for two qubits.  Coincidence and accidental
counts are modeled as independent Poisson draws; reconstruction offers a
linear-inversion oracle (exact but possibly unphysical) and a maximum-
likelihood estimate constrained to physical states through the T^dag T
parametrization.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .states import product_ket, require_valid

SETTING_LABELS = ("H", "V", "D", "R")


@dataclass(frozen=True)
class MeasurementSetting:
    """One analyzer configuration: a polarization label per arm."""

    signal: str
    idler: str

    def __post_init__(self) -> None:
        if self.signal not in SETTING_LABELS or self.idler not in SETTING_LABELS:
            raise ValueError(
                f"settings must use labels {SETTING_LABELS}, got "
                f"({self.signal!r}, {self.idler!r})")


SETTINGS = tuple(MeasurementSetting(s, i)
                 for s in SETTING_LABELS for i in SETTING_LABELS)


def projector(setting: MeasurementSetting) -> np.ndarray:
    """Pure product state |signal> (x) |idler> the setting projects onto."""
    return product_ket(setting.signal, setting.idler)


@dataclass(frozen=True)
class TomographyRecord:
    """Raw counts of one acquisition.

    ``coincidences`` and ``accidentals`` are Poisson draws for simulated
    acquisitions but may be real-valued for expected-value (noise-free)
    records.
    """

    setting: MeasurementSetting
    coincidences: float
    accidentals: float
    gates: int

    def __post_init__(self) -> None:
        if self.gates <= 0:
            raise ValueError("gate count must be positive")
        if self.coincidences < 0 or self.accidentals < 0:
            raise ValueError("counts must be nonnegative")
        if self.coincidences > self.gates:
            raise ValueError("coincidences cannot exceed the gate count")


@dataclass(frozen=True)
class CorrectedRecord:
    """Accidental-subtracted counts, clamped at zero."""

    setting: MeasurementSetting
    count: float
    gates: int


DEFAULT_PAIR_RATE = 1e-3  # expected true pairs per gate at unit projection


def simulate_counts(rho: np.ndarray, n_gates: int, accidental_rate: float,
                    seed: int, pair_rate: float = DEFAULT_PAIR_RATE
                    ) -> list[TomographyRecord]:
    """Draw Poisson counts for all 16 settings.

    True-coincidence mean per setting is n_gates * pair_rate * <proj|rho|proj>;
    accidentals contribute an independent Poisson term to the coincidence
    window and are estimated separately from a delayed-gate draw of the same
    mean.  Identical seeds give identical records.
    """
    rho = require_valid(rho)
    if not 0.0 <= accidental_rate < 1.0:
        raise ValueError("accidental rate must lie in [0, 1)")
    if n_gates <= 0 or pair_rate < 0:
        raise ValueError("n_gates must be positive and pair_rate nonnegative")
    rng = np.random.default_rng(seed)
    acc_mean = n_gates * accidental_rate
    records = []
    for setting in SETTINGS:
        psi = projector(setting)
        prob = max(float(np.real(psi.conj() @ rho @ psi)), 0.0)
        true_counts = rng.poisson(n_gates * pair_rate * prob)
        acc_in_window = rng.poisson(acc_mean)
        acc_estimate = rng.poisson(acc_mean)
        cc = min(int(true_counts + acc_in_window), n_gates)
        records.append(TomographyRecord(setting, float(cc), float(acc_estimate),
                                        n_gates))
    return records


def expected_counts(rho: np.ndarray, n_gates: int, accidental_rate: float = 0.0,
                    pair_rate: float = DEFAULT_PAIR_RATE) -> list[TomographyRecord]:
    """Noise-free records carrying the expected values of the count model."""
    rho = require_valid(rho)
    if not 0.0 <= accidental_rate < 1.0:
        raise ValueError("accidental rate must lie in [0, 1)")
    acc_mean = n_gates * accidental_rate
    records = []
    for setting in SETTINGS:
        psi = projector(setting)
        prob = max(float(np.real(psi.conj() @ rho @ psi)), 0.0)
        mean = n_gates * pair_rate * prob
        records.append(TomographyRecord(setting, mean + acc_mean, acc_mean, n_gates))
    return records


def subtract_accidentals(records: list[TomographyRecord]) -> list[CorrectedRecord]:
    """Subtract each record's accidental estimate, clamping at zero."""
    return [CorrectedRecord(r.setting, max(0.0, r.coincidences - r.accidentals),
                            r.gates) for r in records]


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------

class TomographyError(RuntimeError):
    pass


_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# Orthonormal Hermitian basis under the Hilbert-Schmidt inner product.
_HERM_BASIS = tuple(np.kron(a, b) / 2.0 for a in _PAULIS for b in _PAULIS)

_RECT_SETTINGS = tuple(MeasurementSetting(s, i) for s in "HV" for i in "HV")


def _frequencies(records: list[CorrectedRecord]) -> tuple[list[MeasurementSetting], np.ndarray, float]:
    """Normalize corrected counts by the pair-number estimate.

    The rectilinear quartet (H/V on both arms) forms a complete basis whose
    probabilities sum to one, so its summed counts estimate the produced
    pair number.
    """
    by_setting = {r.setting: r for r in records}
    missing = [s for s in _RECT_SETTINGS if s not in by_setting]
    if missing:
        raise TomographyError(f"records lack the rectilinear settings {missing}")
    n_pairs = sum(by_setting[s].count for s in _RECT_SETTINGS)
    if n_pairs <= 0:
        raise TomographyError("total rectilinear counts must be positive")
    settings = [r.setting for r in records]
    freqs = np.array([r.count for r in records]) / n_pairs
    return settings, freqs, float(n_pairs)


def design_matrix(settings: list[MeasurementSetting]) -> np.ndarray:
    """Linear map from Hermitian-basis coefficients to setting probabilities."""
    rows = []
    for setting in settings:
        psi = projector(setting)
        rows.append([float(np.real(psi.conj() @ basis @ psi))
                     for basis in _HERM_BASIS])
    return np.array(rows)


def linear_inversion(records: list[CorrectedRecord]) -> np.ndarray:
    """Solve the 16x16 linear system for the state; exact on clean data.

    The result is Hermitian with unit trace but can carry negative
    eigenvalues when the counts are noisy; it is returned as a raw matrix,
    not a validated state.
    """
    settings, freqs, _ = _frequencies(records)
    a = design_matrix(settings)
    if np.linalg.matrix_rank(a, tol=1e-10) < 16:
        raise TomographyError("degenerate settings: design matrix is singular")
    coeffs = np.linalg.solve(a, freqs)
    rho = sum(c * b for c, b in zip(coeffs, _HERM_BASIS))
    # x over the Hermitian basis gives an exactly Hermitian matrix up to
    # floating error; tidy it and renormalize the trace
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.real(rho.trace())


@dataclass(frozen=True)
class ReconstructionResult:
    rho_hat: np.ndarray
    log_likelihood: float   # Poisson log-likelihood without the ln(n!) data term
    iterations: int
    converged: bool


# Lower-triangular parametrization: 4 real diagonal entries followed by
# (re, im) pairs for the strictly-lower entries in this fixed order.
_LOWER_ENTRIES = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))


def _t_from_params(theta: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = theta[:4]
    for j, (r, c) in enumerate(_LOWER_ENTRIES):
        t[r, c] = theta[4 + 2 * j] + 1j * theta[5 + 2 * j]
    return t


def _params_from_t(t: np.ndarray) -> np.ndarray:
    theta = np.zeros(16)
    theta[:4] = np.real(np.diag(t))
    for j, (r, c) in enumerate(_LOWER_ENTRIES):
        theta[4 + 2 * j] = t[r, c].real
        theta[5 + 2 * j] = t[r, c].imag
    return theta


def _rho_from_t(t: np.ndarray) -> np.ndarray:
    gram = t.conj().T @ t
    return gram / np.real(gram.trace())


def _lower_factor(gram: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T^dag T equal to the given PSD matrix.

    Cholesky produces L with gram = L L^dag; conjugating by the index-reversal
    permutation turns that into the T^dag T form while keeping T triangular
    in the lower half.
    """
    flip = np.fliplr(np.eye(4))
    l = np.linalg.cholesky(flip @ gram @ flip)
    return flip @ l.conj().T @ flip


def reconstruct_mle(records: list[CorrectedRecord], max_iter: int = 10_000
                    ) -> ReconstructionResult:
    """Maximum-likelihood state estimate from corrected counts.

    The state is parametrized as rho = T^dag T / tr(T^dag T) with T lower
    triangular (16 real parameters); the overall scale of T doubles as the
    pair-number estimate, so the Poisson rates are m_k = |T psi_k|^2 and the
    objective is the (constant-free) Poisson log-likelihood
    sum_k [n_k ln m_k - m_k].  Convergence is declared when the per-iteration
    improvement falls below 1e-10 or the gradient norm below 1e-8.
    """
    settings = [r.setting for r in records]
    counts = np.array([r.count for r in records], dtype=float)
    if np.any(counts < 0):
        raise TomographyError("corrected counts must be nonnegative")
    if counts.sum() <= 0:
        raise TomographyError("all counts are zero; nothing to reconstruct")
    psis = np.array([projector(s) for s in settings])  # (K, 4)

    def rates(t: np.ndarray) -> np.ndarray:
        u = psis @ t.T                    # row k = T psi_k
        return np.maximum(np.sum(np.abs(u) ** 2, axis=1), 1e-300)

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        t = _t_from_params(theta)
        u = psis @ t.T
        m = np.maximum(np.sum(np.abs(u) ** 2, axis=1), 1e-300)
        f = float(np.sum(m - counts * np.log(m)))
        # dm_k/dT_{rc} = 2 Re(conj(u_kr) psi_kc); weight w_k = 1 - n_k/m_k
        w = 1.0 - counts / m
        g_mat = np.einsum("k,kr,kc->rc", w, u.conj(), psis)
        grad = np.zeros(16)
        grad[:4] = 2.0 * np.real(np.diagonal(g_mat))
        for j, (r, c) in enumerate(_LOWER_ENTRIES):
            grad[4 + 2 * j] = 2.0 * np.real(g_mat[r, c])
            grad[5 + 2 * j] = -2.0 * np.imag(g_mat[r, c])
        return f, grad

    # Start from the linear-inversion estimate, clipped to a physical state
    # and rescaled so the initial rates match the data.
    try:
        rho_lin = linear_inversion(records)
        eigvals, eigvecs = np.linalg.eigh(rho_lin)
        eigvals = np.maximum(eigvals, 1e-6)
        rho0 = (eigvecs * eigvals) @ eigvecs.conj().T
        rho0 /= np.real(rho0.trace())
    except TomographyError:
        rho0 = np.eye(4, dtype=complex) / 4.0
    probs0 = np.maximum(np.real(np.einsum("ki,ij,kj->k", psis.conj(), rho0, psis)),
                        1e-12)
    scale = counts.sum() / probs0.sum()
    theta0 = _params_from_t(_lower_factor(scale * rho0))

    result = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                      options={"maxiter": max_iter, "maxfun": 4 * max_iter,
                               "ftol": 1e-15, "gtol": 1e-10})
    theta = result.x
    t = _t_from_params(theta)
    rho_hat = _rho_from_t(t)
    grad_norm = float(np.linalg.norm(objective(theta)[1]))
    converged = bool(result.success) or grad_norm < 1e-8
    m = rates(t)
    log_likelihood = float(np.sum(counts * np.log(m) - m))
    rho_hat = require_valid(rho_hat)
    return ReconstructionResult(rho_hat, log_likelihood, int(result.nit), converged)


# ---------------------------------------------------------------------------
# state functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WernerEstimators:
    """The six single-element probability estimators and their mean.

    p1/p2 come from the outer diagonal entries, p3/p4 from the corner
    coherences (real parts), p5/p6 from the inner diagonal entries;
    ``imag_residual`` reports the discarded imaginary magnitude of the
    corners.
    """

    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p6: float
    imag_residual: float

    @property
    def mean(self) -> float:
        return (self.p1 + self.p2 + self.p3 + self.p4 + self.p5 + self.p6) / 6.0


def werner_estimators(rho: np.ndarray) -> WernerEstimators:
    rho = np.asarray(rho, dtype=complex)
    return WernerEstimators(
        p1=float(4.0 * rho[0, 0].real - 1.0),
        p2=float(4.0 * rho[3, 3].real - 1.0),
        p3=float(2.0 * rho[0, 3].real),
        p4=float(2.0 * rho[3, 0].real),
        p5=float(1.0 - 4.0 * rho[1, 1].real),
        p6=float(1.0 - 4.0 * rho[2, 2].real),
        imag_residual=float(max(abs(rho[0, 3].imag), abs(rho[3, 0].imag))),
    )


def estimate_werner_probability(rho: np.ndarray) -> float:
    """Arithmetic mean of the six single-element Werner-probability estimators."""
    return werner_estimators(rho).mean


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    sqrt_rho = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    inner_vals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.maximum(inner_vals, 0.0))) ** 2)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of the difference of two Hermitian matrices."""
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

RECORDS_CSV_HEADER = "signal,idler,coincidences,accidentals,gates"


def records_to_csv(records: list[TomographyRecord]) -> str:
    buf = io.StringIO()
    buf.write(RECORDS_CSV_HEADER + "\n")
    for r in records:
        buf.write(f"{r.setting.signal},{r.setting.idler},"
                  f"{format(r.coincidences, '.17g')},"
                  f"{format(r.accidentals, '.17g')},{r.gates}\n")
    return buf.getvalue()


def records_from_csv(text: str) -> list[TomographyRecord]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0].strip() != RECORDS_CSV_HEADER:
        raise ValueError(f"expected header {RECORDS_CSV_HEADER!r}")
    records = []
    for ln in lines[1:]:
        signal, idler, cc, ac, gates = ln.split(",")
        records.append(TomographyRecord(MeasurementSetting(signal, idler),
                                        float(cc), float(ac), int(gates)))
    return records
