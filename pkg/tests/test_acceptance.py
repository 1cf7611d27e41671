"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  Two checks are expected to fail and are left failing on purpose:

* criterion 01 pins delta = 5271.9 +/- 0.5 s^-1, but exact evaluation of
  sqrt(16 * 4281^2 - 16292^2) gives 5272.77 s^-1, outside the pinned window;
  the classifier implements the formula, not the mistyped constant.
* criterion 07 demands every parameter of the sqrt(t)-phase model recover
  within 10% under 2% noise; the Cramer-Rao bound for d_p1 at these
  parameter magnitudes exceeds 90% on any fiber-scale record (its phase
  never leaves the linear regime), so no estimator can meet that tolerance.
  All other parameters do recover within 10%.
"""

import math

import numpy as np
import pytest

from qbuffer import cli
from qbuffer.channels import PmdPhases, amplitude_damping_kraus, damp_werner
from qbuffer.dynamics import (CavityModelParams, PmdModelParams, UnitContext,
                              cavity_p, classify_regime, length_from_time,
                              markovian_exponential, prob_asym, prob_pasy,
                              prob_pf, asym_series_residual)
from qbuffer.fitting import DataSeries, fit_p3, fit_pasy
from qbuffer.measures import (concurrence, discord, discord_concurrence_crossover,
                              solve_level_crossing, total_correlation,
                              classical_correlation)
from qbuffer.states import make_werner
from qbuffer.tomography import (estimate_werner_probability, expected_counts,
                                fidelity, linear_inversion, reconstruct_mle,
                                simulate_counts, subtract_accidentals,
                                trace_distance)

UNITS = UnitContext()
GATES = 100_000_000


def check(criterion: int, title: str, checks: list[tuple[str, bool]]) -> None:
    ok = all(good for _, good in checks)
    line = f"criterion {criterion:02d} [{title}]: {'PASS' if ok else 'FAIL'}"
    if not ok:
        line += " — failing: " + "; ".join(name for name, good in checks if not good)
    print(line)
    assert ok, line


def test_criterion_01_regime_classification():
    result = classify_regime(4281.0, 16292.0)
    # exact formula value: sqrt(16 * 4281^2 - 16292^2) = 5272.7708...;
    # the pinned window [5271.4, 5272.4] excludes it, so the delta check fails
    check(1, "regime classification", [
        ("regime is NonMarkovian", result.regime == "NonMarkovian"),
        ("4 kappa = 17124 exceeds gamma0", 4 * 4281.0 == 17124.0 > 16292.0),
        (f"delta {result.delta:.2f} within 5271.9 +/- 0.5",
         abs(result.delta - 5271.9) <= 0.5),
    ])


def test_criterion_02_discord_concurrence_crossover():
    p_star = discord_concurrence_crossover()
    check(2, "discord-concurrence crossover", [
        (f"crossover {p_star:.4f} in [0.5225, 0.5235]",
         0.5225 <= p_star <= 0.5235),
    ])


def test_criterion_03_separability_point():
    check(3, "separability point", [
        ("concurrence(1/3) is exactly zero", concurrence(1.0 / 3.0) == 0.0),
        ("discord(1/3) = 0.1258 +/- 0.001",
         abs(discord(1.0 / 3.0) - 0.1258) <= 0.001),
    ])


def test_criterion_04_bell_state_measures():
    check(4, "pure Bell measures", [
        ("total(1) = 2", abs(total_correlation(1.0) - 2.0) <= 1e-12),
        ("classical(1) = 1", abs(classical_correlation(1.0) - 1.0) <= 1e-12),
        ("discord(1) = 1", abs(discord(1.0) - 1.0) <= 1e-12),
        ("concurrence(1) = 1", abs(concurrence(1.0) - 1.0) <= 1e-12),
    ])


def test_criterion_05_amplitude_damping_identities():
    grid = np.linspace(0.0, 1.0, 21)
    worst_matrix = 0.0
    worst_avg = 0.0
    for p in grid:
        for xi in grid:
            closed = np.zeros((4, 4), dtype=complex)
            closed[0, 0] = (1 + p) / 4
            closed[1, 1] = (1 - p) * (1 - xi) / 4 + (1 + p) * xi / 4
            closed[2, 2] = (1 - p) / 4
            closed[3, 3] = (1 + p) * (1 - xi) / 4 + (1 - p) * xi / 4
            closed[0, 3] = closed[3, 0] = p * math.sqrt(1 - xi) / 2
            worst_matrix = max(worst_matrix,
                               float(np.abs(damp_werner(p, xi) - closed).max()))
            got = estimate_werner_probability(damp_werner(p, xi))
            expect = p * (4 - 4 * xi + 2 * math.sqrt(1 - xi)) / 6
            worst_avg = max(worst_avg, abs(got - expect))
    worst_approx = 0.0
    for p in grid:
        for xi in np.linspace(0.0, 0.04, 21):
            exact = p * (4 - 4 * xi + 2 * math.sqrt(1 - xi)) / 6
            approx = p * (6 - 5 * xi) / 6
            bound = 2e-4 * p if p > 0 else 2e-4
            worst_approx = max(worst_approx, abs(exact - approx) - bound)
    completeness = 0.0
    for xi in grid:
        g0, g1 = amplitude_damping_kraus(xi)
        total = g0.matrix.conj().T @ g0.matrix + g1.matrix.conj().T @ g1.matrix
        completeness = max(completeness, float(np.abs(total - np.eye(2)).max()))
    check(5, "amplitude damping identities", [
        (f"closed-form match {worst_matrix:.2e} < 1e-12", worst_matrix < 1e-12),
        (f"estimator average {worst_avg:.2e} < 1e-12", worst_avg < 1e-12),
        ("linearized average within 2e-4 p for xi <= 0.04", worst_approx <= 0.0),
        ("Kraus completeness < 1e-12", completeness < 1e-12),
    ])


def test_criterion_06_tomography_round_trip():
    corrected = subtract_accidentals(expected_counts(make_werner(0.75), GATES))
    mle = reconstruct_mle(corrected)
    p_hat = estimate_werner_probability(mle.rho_hat)
    dist = trace_distance(mle.rho_hat, linear_inversion(corrected))
    truth = make_werner(0.9)
    good = 0
    for seed in range(20):
        records = simulate_counts(truth, GATES, 0.0, seed=seed)
        result = reconstruct_mle(subtract_accidentals(records))
        if fidelity(truth, result.rho_hat) >= 0.995:
            good += 1
    check(6, "tomography round trip", [
        (f"noiseless extracted P = {p_hat:.6f} within 0.75 +/- 1e-4",
         abs(p_hat - 0.75) <= 1e-4),
        (f"MLE vs linear inversion trace distance {dist:.2e} < 1e-6",
         dist < 1e-6),
        (f"noisy fidelity >= 0.995 in {good}/20 seeds", good >= 18),
    ])


TRUTH_PMD = PmdModelParams.from_lab_units(200.0, 0.0017, 0.047, 0.006, 0.5, 0.5)
TRUTH_CAVITY = CavityModelParams(kappa1=753.0, kappa2=3528.0, gamma0=16292.0,
                                 w1=0.5, w2=0.5)


def _pmd_errors(params: PmdModelParams) -> np.ndarray:
    return np.abs(np.array([
        (params.d_p1 - TRUTH_PMD.d_p1) / TRUTH_PMD.d_p1,
        (params.d_p2 - TRUTH_PMD.d_p2) / TRUTH_PMD.d_p2,
        (params.mu - TRUTH_PMD.mu) / TRUTH_PMD.mu,
        (params.a1 - TRUTH_PMD.a1) / TRUTH_PMD.a1,
        (params.a2 - TRUTH_PMD.a2) / TRUTH_PMD.a2,
    ]))


def _cavity_errors(params: CavityModelParams) -> np.ndarray:
    return np.abs(np.array([
        (params.kappa1 - TRUTH_CAVITY.kappa1) / TRUTH_CAVITY.kappa1,
        (params.kappa2 - TRUTH_CAVITY.kappa2) / TRUTH_CAVITY.kappa2,
        (params.gamma0 - TRUTH_CAVITY.gamma0) / TRUTH_CAVITY.gamma0,
        (params.w1 - TRUTH_CAVITY.w1) / TRUTH_CAVITY.w1,
        (params.w2 - TRUTH_CAVITY.w2) / TRUTH_CAVITY.w2,
    ]))


def test_criterion_07_fit_round_trips():
    from qbuffer.dynamics import p3 as p3_model

    # noiseless round trips on the documented 50-point window
    t50 = np.linspace(0.0, 1.5e-3, 50)
    fit_a = fit_pasy(DataSeries.from_points(t50, prob_pasy(t50, TRUTH_PMD, UNITS)))
    fit_b = fit_p3(DataSeries.from_points(t50, p3_model(t50, TRUTH_CAVITY)))
    clean_a = float(_pmd_errors(fit_a.params).max())
    clean_b = float(_cavity_errors(fit_b.params).max())

    # noisy Monte Carlo, 2% relative noise with known sigma, 20 seeds each;
    # recovery measured as the per-parameter mean error across seeds.
    # The pasy window extends past the cos^2 null near 3.5 ms, where the two
    # components separate; d_p1 stays unidentifiable regardless (CRLB > 0.9).
    t_pasy = np.linspace(0.0, 5e-3, 300)
    y_pasy = prob_pasy(t_pasy, TRUTH_PMD, UNITS)
    errs_a = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sigma = 0.02 * np.abs(y_pasy)
        noisy = y_pasy + rng.normal(0.0, sigma)
        fit = fit_pasy(DataSeries(t_pasy, noisy, sigma))
        errs_a.append(_pmd_errors(fit.params))
    mean_a = np.mean(errs_a, axis=0)

    y_p3 = p3_model(t50, TRUTH_CAVITY)
    errs_b = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sigma = 0.02 * np.abs(y_p3)
        noisy = y_p3 + rng.normal(0.0, sigma)
        fit = fit_p3(DataSeries(t50, noisy, sigma))
        errs_b.append(_cavity_errors(fit.params))
    mean_b = np.mean(errs_b, axis=0)

    names = ("d_p1", "d_p2", "mu", "a1", "a2")
    noisy_a_checks = [
        (f"noisy pasy {name} mean error {err:.1%} within 10%", err < 0.10)
        for name, err in zip(names, mean_a)]
    check(7, "fit round trips", [
        (f"noiseless pasy recovery {clean_a:.2e} within 1%", clean_a < 0.01),
        (f"noiseless p3 recovery {clean_b:.2e} within 1%", clean_b < 0.01),
        *noisy_a_checks,
        (f"noisy p3 mean errors {np.array2string(mean_b, precision=3)} within 10%",
         bool(np.all(mean_b < 0.10))),
    ])


def test_criterion_08_markovian_control():
    mu = 6e-6
    rate = 2 * mu * UNITS.c / UNITS.n_r
    model = lambda t: markovian_exponential(t, 1.0, rate)
    t_star = solve_level_crossing(model, 1.0 / 3.0, (0.0, 10e-3))
    closed = math.log(3.0) / rate
    length_km = length_from_time(t_star, UNITS) / 1e3
    check(8, "Markovian control crossing", [
        (f"L* = {length_km:.4f} km within 91.55 +/- 0.01",
         abs(length_km - 91.55) <= 0.01),
        (f"solver vs closed form relative gap {abs(t_star - closed) / closed:.2e} < 1e-6",
         abs(t_star - closed) / closed < 1e-6),
    ])


def test_criterion_09_model_structure():
    config = cli.build_config({})
    rows = cli.cmd_sweep(config).splitlines()[1:]
    cols = np.array([[float(v) for v in row.split(",")] for row in rows])
    t = cols[:, 0]
    d_pasy = np.diff(cols[:, 2])
    d_p3 = np.diff(cols[:, 3])
    early = d_pasy[t[:-1] < 0.5e-3]
    p3_extrema = int(np.sum(np.diff(np.sign(d_p3[d_p3 != 0])) != 0))
    pasy_extrema = int(np.sum(np.diff(np.sign(early[early != 0])) != 0))
    check(9, "model oscillation structure", [
        (f"p3 sweep column has {p3_extrema} local extrema (need >= 1)",
         p3_extrema >= 1),
        ("pasy sweep column has no extremum before 0.5 ms", pasy_extrema == 0),
    ])


def test_criterion_10_algebraic_equivalences():
    rng = np.random.default_rng(101)
    worst_eq = 0.0
    for _ in range(1000):
        dh, dv = rng.uniform(-np.pi, np.pi, 2)
        mu, length = rng.uniform(0, 1e-5), rng.uniform(0, 2e5)
        lhs = prob_asym(PmdPhases(dh, dv), mu, length, +1)
        rhs = 4.0 * prob_pf(PmdPhases(dh, dv), mu, length)
        worst_eq = max(worst_eq, abs(lhs - rhs))

    b_h, b_v = 0.22, 0.13
    lengths = 1.0 * 0.5 ** np.arange(0, 8)
    resid = [asym_series_residual(PmdPhases(b_h * math.sqrt(L), b_v * math.sqrt(L)),
                                  0.0, L) for L in lengths]
    orders = np.log2(np.array(resid[:-1]) / np.array(resid[1:]))
    order_ok = bool(np.all((orders > 1.3) & (orders < 1.7)))

    gamma0 = 16292.0
    kappa = gamma0 / 4.0
    worst_gap = 0.0
    for t in np.linspace(0.0, 10.0 / gamma0, 40):
        at = cavity_p(t, kappa, gamma0)
        for side in (1 - 1e-6, 1 + 1e-6):
            gap = abs(cavity_p(t, kappa * side, gamma0) - at) / max(at, 1e-30)
            worst_gap = max(worst_gap, gap)
    check(10, "algebraic equivalences", [
        (f"seven-term expansion equals squared bracket (worst {worst_eq:.2e} < 1e-12)",
         worst_eq < 1e-12),
        (f"series residual order {np.mean(orders):.2f} within 1.5 +/- 0.2", order_ok),
        (f"boundary continuity {worst_gap:.2e} < 1e-4", worst_gap < 1e-4),
    ])
