"""Unit tests for count simulation and state reconstruction."""

import numpy as np
import pytest

from qbuffer.channels import damp_werner
from qbuffer.states import make_bell_phi_plus, make_werner, validate
from qbuffer.tomography import (SETTINGS, CorrectedRecord, MeasurementSetting,
                                TomographyError, TomographyRecord, design_matrix,
                                estimate_werner_probability, expected_counts,
                                fidelity, linear_inversion, projector,
                                reconstruct_mle, records_from_csv,
                                records_to_csv, simulate_counts,
                                subtract_accidentals, trace_distance,
                                werner_estimators)

GATES = 100_000_000  # 1e5 expected pairs per setting at the default pair rate


class TestSettingsAndProjectors:
    def test_sixteen_distinct(self):
        assert len(SETTINGS) == 16
        assert len(set(SETTINGS)) == 16

    def test_projector_examples(self):
        np.testing.assert_allclose(projector(MeasurementSetting("H", "H")),
                                   [1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(projector(MeasurementSetting("D", "D")),
                                   [0.5, 0.5, 0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(projector(MeasurementSetting("R", "R")),
                                   [0.5, -0.5j, -0.5j, -0.5], atol=1e-15)

    def test_informationally_complete(self):
        a = design_matrix([r for r in SETTINGS])
        assert np.linalg.matrix_rank(a) == 16
        assert np.linalg.cond(a) < 1e4

    def test_label_validation(self):
        with pytest.raises(ValueError):
            MeasurementSetting("H", "L")


class TestSimulateCounts:
    def test_deterministic_per_seed(self):
        rho = make_werner(0.8)
        a = simulate_counts(rho, GATES, 1e-6, seed=42)
        b = simulate_counts(rho, GATES, 1e-6, seed=42)
        assert a == b
        c = simulate_counts(rho, GATES, 1e-6, seed=43)
        assert a != c

    def test_orthogonal_setting_sees_only_accidentals(self):
        bell = np.outer(make_bell_phi_plus(), make_bell_phi_plus().conj())
        records = simulate_counts(bell, GATES, 0.0, seed=1)
        by_setting = {r.setting: r for r in records}
        assert by_setting[MeasurementSetting("H", "V")].coincidences == 0
        assert by_setting[MeasurementSetting("V", "H")].coincidences == 0

    def test_uniform_state_rates(self):
        records = simulate_counts(np.eye(4) / 4, GATES, 0.0, seed=5)
        counts = np.array([r.coincidences for r in records])
        # every setting projects with probability 1/4
        np.testing.assert_allclose(counts, GATES * 1e-3 / 4, rtol=0.02)

    def test_rejects_invalid_state(self):
        with pytest.raises(ValueError):
            simulate_counts(np.eye(4), GATES, 0.0, seed=1)

    def test_expected_counts_noise_free(self):
        records = expected_counts(make_werner(0.75), GATES, accidental_rate=1e-6)
        by_setting = {r.setting: r for r in records}
        hh = by_setting[MeasurementSetting("H", "H")]
        assert hh.coincidences == pytest.approx(GATES * 1e-3 * (1.75 / 4) + GATES * 1e-6)
        assert hh.accidentals == pytest.approx(GATES * 1e-6)


class TestSubtractAccidentals:
    def test_plain_subtraction(self):
        rec = TomographyRecord(MeasurementSetting("H", "H"), 100, 20, 10_000)
        assert subtract_accidentals([rec])[0].count == 80

    def test_clamped_at_zero(self):
        rec = TomographyRecord(MeasurementSetting("H", "H"), 5, 9, 10_000)
        assert subtract_accidentals([rec])[0].count == 0

    def test_no_accidentals_unchanged(self):
        recs = expected_counts(make_werner(0.5), GATES)
        corrected = subtract_accidentals(recs)
        for r, c in zip(recs, corrected):
            assert c.count == pytest.approx(r.coincidences)


class TestLinearInversion:
    def test_recovers_werner(self):
        corrected = subtract_accidentals(expected_counts(make_werner(0.8), GATES))
        rho = linear_inversion(corrected)
        assert np.abs(rho - make_werner(0.8)).max() < 1e-10

    def test_recovers_bell(self):
        bell = np.outer(make_bell_phi_plus(), make_bell_phi_plus().conj())
        corrected = subtract_accidentals(expected_counts(bell, GATES))
        rho = linear_inversion(corrected)
        assert np.abs(rho - bell).max() < 1e-10

    def test_uniform_counts_give_maximally_mixed(self):
        corrected = [CorrectedRecord(s, 1000.0, GATES) for s in SETTINGS]
        rho = linear_inversion(corrected)
        assert np.abs(rho - np.eye(4) / 4).max() < 1e-10

    def test_degenerate_settings_rejected(self):
        rect = [s for s in SETTINGS if s.signal in "HV" and s.idler in "HV"]
        corrected = [CorrectedRecord(s, 100.0, GATES) for s in rect * 4]
        with pytest.raises(TomographyError):
            linear_inversion(corrected)

    def test_missing_rectilinear_quartet_rejected(self):
        # the H/V quartet provides the pair-number normalization
        partial = [CorrectedRecord(s, 100.0, GATES) for s in SETTINGS
                   if s != MeasurementSetting("H", "H")]
        with pytest.raises(TomographyError, match="rectilinear"):
            linear_inversion(partial)

    def test_can_return_unphysical_matrix(self):
        # crafted counts push an eigenvalue negative; the oracle must not hide it
        counts = {s: 0.0 for s in SETTINGS}
        counts[MeasurementSetting("H", "H")] = 1000.0
        counts[MeasurementSetting("V", "V")] = 1000.0
        counts[MeasurementSetting("D", "D")] = 1500.0
        counts[MeasurementSetting("R", "R")] = 1500.0
        corrected = [CorrectedRecord(s, counts[s], GATES) for s in SETTINGS]
        rho = linear_inversion(corrected)
        assert np.linalg.eigvalsh(rho)[0] < -1e-3
        assert np.real(rho.trace()) == pytest.approx(1.0, abs=1e-12)


class TestReconstructMle:
    def test_noiseless_bell_fidelity(self):
        bell_vec = make_bell_phi_plus()
        bell = np.outer(bell_vec, bell_vec.conj())
        corrected = subtract_accidentals(expected_counts(bell, GATES))
        result = reconstruct_mle(corrected)
        assert result.converged
        assert np.real(bell_vec.conj() @ result.rho_hat @ bell_vec) >= 0.9999

    def test_noiseless_werner_round_trip(self):
        corrected = subtract_accidentals(expected_counts(make_werner(0.75), GATES))
        result = reconstruct_mle(corrected)
        assert estimate_werner_probability(result.rho_hat) == pytest.approx(0.75,
                                                                            abs=1e-4)
        oracle = linear_inversion(corrected)
        assert trace_distance(result.rho_hat, oracle) < 1e-6

    def test_output_always_physical(self):
        # adversarial input whose linear inversion has a negative eigenvalue
        counts = {s: 0.0 for s in SETTINGS}
        counts[MeasurementSetting("H", "H")] = 1000.0
        counts[MeasurementSetting("V", "V")] = 1000.0
        counts[MeasurementSetting("D", "D")] = 1500.0
        counts[MeasurementSetting("R", "R")] = 1500.0
        corrected = [CorrectedRecord(s, counts[s], GATES) for s in SETTINGS]
        result = reconstruct_mle(corrected)
        assert validate(result.rho_hat).passed

    def test_poisson_noise_fidelity(self):
        truth = make_werner(0.9)
        good = 0
        for seed in range(20):
            records = simulate_counts(truth, GATES, 0.0, seed=seed)
            result = reconstruct_mle(subtract_accidentals(records))
            assert result.converged
            if fidelity(truth, result.rho_hat) >= 0.995:
                good += 1
        assert good >= 18

    def test_all_zero_counts_rejected(self):
        corrected = [CorrectedRecord(s, 0.0, GATES) for s in SETTINGS]
        with pytest.raises(TomographyError):
            reconstruct_mle(corrected)


class TestWernerExtraction:
    @pytest.mark.parametrize("p", np.linspace(0.0, 1.0, 21))
    def test_identity_on_werner(self, p):
        assert estimate_werner_probability(make_werner(p)) == pytest.approx(p,
                                                                            abs=1e-12)

    def test_maximally_mixed_gives_zero(self):
        assert estimate_werner_probability(np.eye(4) / 4) == pytest.approx(0.0,
                                                                           abs=1e-12)

    def test_damped_state_average_identity(self):
        for p in (0.3, 0.9):
            for xi in (0.01, 0.04, 0.3):
                got = estimate_werner_probability(damp_werner(p, xi))
                expect = p * (4 - 4 * xi + 2 * np.sqrt(1 - xi)) / 6
                assert got == pytest.approx(expect, abs=1e-12)

    def test_strictly_decreasing_in_damping(self):
        xis = np.linspace(0.0, 1.0, 40)
        for p in (0.25, 0.75, 1.0):
            vals = [estimate_werner_probability(damp_werner(p, xi)) for xi in xis]
            assert np.all(np.diff(vals) < 0)

    def test_imaginary_residual_reported(self):
        rho = make_werner(0.6).astype(complex)
        rho[0, 3] += 1e-3j
        rho[3, 0] -= 1e-3j
        est = werner_estimators(rho)
        assert est.imag_residual == pytest.approx(1e-3, abs=1e-12)


class TestStateFunctionals:
    def test_fidelity_of_identical_states(self):
        w = make_werner(0.37)
        assert fidelity(w, w) == pytest.approx(1.0, abs=1e-10)

    def test_fidelity_pure_vs_mixed(self):
        bell_vec = make_bell_phi_plus()
        bell = np.outer(bell_vec, bell_vec.conj())
        for p in (0.2, 0.7):
            # for a pure target, fidelity is the overlap (1 + 3p)/4; rank
            # deficiency of the projector costs a few digits
            assert fidelity(bell, make_werner(p)) == pytest.approx((1 + 3 * p) / 4,
                                                                   abs=1e-7)

    def test_trace_distance_bounds(self):
        a = make_werner(1.0)
        b = np.eye(4) / 4
        d = trace_distance(a, b)
        assert 0 < d <= 1
        assert trace_distance(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_trace_distance_of_orthogonal_projectors(self):
        v1 = np.zeros((4, 4)); v1[0, 0] = 1.0
        v2 = np.zeros((4, 4)); v2[1, 1] = 1.0
        assert trace_distance(v1, v2) == pytest.approx(1.0, abs=1e-12)


class TestRecordsCsv:
    def test_round_trip(self):
        records = simulate_counts(make_werner(0.8), GATES, 1e-6, seed=9)
        text = records_to_csv(records)
        assert text.splitlines()[0] == "signal,idler,coincidences,accidentals,gates"
        again = records_from_csv(text)
        assert again == records

    def test_header_checked(self):
        with pytest.raises(ValueError):
            records_from_csv("a,b,c\n1,2,3\n")


class TestRecordValidation:
    def test_counts_cannot_exceed_gates(self):
        with pytest.raises(ValueError):
            TomographyRecord(MeasurementSetting("H", "H"), 11, 0, 10)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            TomographyRecord(MeasurementSetting("H", "H"), -1, 0, 10)
