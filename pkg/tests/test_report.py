import numpy as np
import pytest

from rvehom.report import (
    CSV_HEADER,
    ComparisonRow,
    baseline_row,
    e1_orthotropic_closed_form,
    effective_moduli,
    failed_row,
    model_row,
    read_csv,
    relative_deviations,
    rows_to_csv,
    write_csv,
)
from rvehom.tensors import IsotropicMaterial, StiffnessTensor, iso_stiffness

NU3 = 1.0 / 3.0
MATRIX = IsotropicMaterial(1.0, NU3)


def orthotropic_voigt():
    """An orthotropic stiffness with no normal-shear coupling."""
    v = np.zeros((6, 6))
    v[:3, :3] = [[5.0, 1.2, 0.9], [1.2, 4.0, 1.1], [0.9, 1.1, 3.5]]
    v[3, 3], v[4, 4], v[5, 5] = 1.1, 1.3, 1.5
    return v


def tensor_from_voigt(v):
    from rvehom.tensors import MANDEL_WEIGHTS

    return StiffnessTensor(v * np.outer(MANDEL_WEIGHTS, MANDEL_WEIGHTS))


class TestEffectiveModuli:
    def test_matrix_identity(self):
        em = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        assert em.k_eff == pytest.approx(1.0, abs=1e-12)
        assert em.mu_eff == pytest.approx(0.375, abs=1e-12)
        assert em.e1_eff == pytest.approx(1.0, abs=1e-12)
        assert em.k_norm == pytest.approx(1.0, abs=1e-12)
        assert em.mu_norm == pytest.approx(1.0, abs=1e-12)
        assert em.e1_norm == pytest.approx(1.0, abs=1e-12)

    def test_linearity(self):
        c = StiffnessTensor(2.0 * iso_stiffness(MATRIX).mandel)
        em = effective_moduli(c, MATRIX)
        assert em.k_norm == pytest.approx(2.0, abs=1e-12)
        assert em.mu_norm == pytest.approx(2.0, abs=1e-12)
        assert em.e1_norm == pytest.approx(2.0, abs=1e-12)

    def test_orthotropic_closed_form_agrees_with_inversion(self):
        c = tensor_from_voigt(orthotropic_voigt())
        em = effective_moduli(c, MATRIX)
        assert em.e1_eff == pytest.approx(e1_orthotropic_closed_form(c),
                                          rel=1e-12)

    def test_isotropic_consistency(self):
        mat = IsotropicMaterial(3.0, 0.27)
        em = effective_moduli(iso_stiffness(mat), mat)
        e_from_k_mu = 9.0 * em.k_eff * em.mu_eff / (3.0 * em.k_eff + em.mu_eff)
        assert em.e1_eff == pytest.approx(e_from_k_mu, rel=1e-8)

    def test_scale_invariance(self):
        c = tensor_from_voigt(orthotropic_voigt())
        em1 = effective_moduli(c, MATRIX)
        scaled_matrix = IsotropicMaterial(7.0, NU3)
        em2 = effective_moduli(StiffnessTensor(7.0 * c.mandel), scaled_matrix)
        assert em2.k_norm == pytest.approx(em1.k_norm, rel=1e-12)
        assert em2.mu_norm == pytest.approx(em1.mu_norm, rel=1e-12)
        assert em2.e1_norm == pytest.approx(em1.e1_norm, rel=1e-12)


class TestDeviations:
    def test_identical_inputs_zero(self):
        em = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        assert relative_deviations(em, em) == (0.0, 0.0, 0.0)

    def test_ten_percent(self):
        base = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        model = effective_moduli(
            StiffnessTensor(1.1 * iso_stiffness(MATRIX).mandel), MATRIX
        )
        dk, dmu, de = relative_deviations(model, base)
        assert dk == pytest.approx(10.0, abs=1e-9)
        assert dmu == pytest.approx(10.0, abs=1e-9)
        assert de == pytest.approx(10.0, abs=1e-9)

    def test_sign_convention_overestimation_positive(self):
        base = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        softer = effective_moduli(
            StiffnessTensor(0.9 * iso_stiffness(MATRIX).mandel), MATRIX
        )
        dk, _, _ = relative_deviations(softer, base)
        assert dk < 0


class TestCsv:
    def _rows(self):
        em = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        return [
            baseline_row("rve1", 10.0, em),
            model_row("rve1", "mt", 10.0, em, em),
            failed_row("rve1", "fft", 100.0),
        ]

    def test_header_exact(self):
        csv = rows_to_csv(self._rows())
        assert csv.splitlines()[0] == CSV_HEADER

    def test_baseline_rows_have_zero_deltas(self):
        csv = rows_to_csv(self._rows())
        fields = csv.splitlines()[1].split(",")
        assert fields[1] == "fft"
        assert fields[6:] == ["0", "0", "0"]

    def test_failed_row_flagged(self):
        csv = rows_to_csv(self._rows())
        assert "FAILED" in csv.splitlines()[3]

    def test_round_trip_and_determinism(self, tmp_path):
        rows = self._rows()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(rows, p1)
        write_csv(rows, p2)
        assert p1.read_bytes() == p2.read_bytes()
        parsed = read_csv(p1)
        assert len(parsed) == 3
        assert parsed[0]["model"] == "fft"
        assert float(parsed[1]["K_norm"]) == pytest.approx(1.0)

    def test_zero_baseline_raises(self):
        em = effective_moduli(iso_stiffness(MATRIX), MATRIX)
        zero = ComparisonRow("x", "mt", 1.0, None, None, None, None)
        bad = type(em)(1, 1, 1, 0.0, 1.0, 1.0)
        with pytest.raises(ZeroDivisionError):
            relative_deviations(em, bad)
        assert zero.failed is False
