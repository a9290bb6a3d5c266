"""Scalar effective properties and cross-method comparison rows.

The bulk and shear moduli come from the index contractions of the rank-4
tensor; the directional Young's modulus in direction 1 comes from inverting
the full 6x6 stiffness matrix, which stays valid when the homogenized
tensor is only statistically isotropic.  The closed-form expression for an
exactly orthotropic matrix is kept as a cross-check.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from rvehom.tensors import IsotropicMaterial, StiffnessTensor, invert4

CSV_HEADER = (
    "rve_id,model,contrast,K_norm,mu_norm,E1_norm,"
    "deltaK_pct,deltaMu_pct,deltaE_pct"
)

FFT_MODEL = "fft"


@dataclass(frozen=True)
class EffectiveModuli:
    k_eff: float
    mu_eff: float
    e1_eff: float
    k_norm: float
    mu_norm: float
    e1_norm: float


@dataclass(frozen=True)
class ComparisonRow:
    rve_id: str
    model: str
    contrast: float
    moduli: EffectiveModuli | None
    delta_k: float | None
    delta_mu: float | None
    delta_e: float | None
    failed: bool = False


def effective_moduli(
    c: StiffnessTensor, matrix: IsotropicMaterial
) -> EffectiveModuli:
    """Effective bulk, shear and direction-1 Young's moduli of ``c``,
    plus the same values normalized by the matrix properties."""
    comp = c.components
    k = float(np.einsum("iijj->", comp)) / 9.0
    mu = (3.0 * float(np.einsum("ijij->", comp))
          - float(np.einsum("iijj->", comp))) / 30.0
    s = invert4(c)
    e1 = 1.0 / s.to_voigt()[0, 0]
    return EffectiveModuli(
        k_eff=k,
        mu_eff=mu,
        e1_eff=e1,
        k_norm=k / matrix.bulk,
        mu_norm=mu / matrix.shear,
        e1_norm=e1 / matrix.young,
    )


def e1_orthotropic_closed_form(c: StiffnessTensor) -> float:
    """Direction-1 Young's modulus assuming an exactly orthotropic matrix.

    Valid only when normal-shear coupling vanishes; used as a cross-check
    against the full-inversion value for near-orthotropic tensors.
    """
    m = c.to_voigt()
    num = (
        m[0, 0] * m[1, 1] * m[2, 2]
        + 2.0 * m[0, 1] * m[1, 2] * m[2, 0]
        - m[0, 1] ** 2 * m[2, 2]
        - m[1, 2] ** 2 * m[0, 0]
        - m[0, 2] ** 2 * m[1, 1]
    )
    den = m[1, 1] * m[2, 2] - m[1, 2] ** 2
    return num / den


def relative_deviations(
    model: EffectiveModuli, baseline: EffectiveModuli
) -> tuple[float, float, float]:
    """Percent deviations of the normalized moduli from the baseline;
    positive values mean the model overestimates."""
    for value in (baseline.k_norm, baseline.mu_norm, baseline.e1_norm):
        if value == 0.0:
            raise ZeroDivisionError("baseline modulus is zero")
    return (
        100.0 * (model.k_norm - baseline.k_norm) / baseline.k_norm,
        100.0 * (model.mu_norm - baseline.mu_norm) / baseline.mu_norm,
        100.0 * (model.e1_norm - baseline.e1_norm) / baseline.e1_norm,
    )


def baseline_row(rve_id: str, contrast: float,
                 moduli: EffectiveModuli) -> ComparisonRow:
    return ComparisonRow(rve_id, FFT_MODEL, contrast, moduli, 0.0, 0.0, 0.0)


def model_row(
    rve_id: str,
    model: str,
    contrast: float,
    moduli: EffectiveModuli,
    baseline: EffectiveModuli | None,
) -> ComparisonRow:
    if baseline is None:
        return ComparisonRow(rve_id, model, contrast, moduli, None, None, None)
    dk, dmu, de = relative_deviations(moduli, baseline)
    return ComparisonRow(rve_id, model, contrast, moduli, dk, dmu, de)


def failed_row(rve_id: str, model: str, contrast: float) -> ComparisonRow:
    return ComparisonRow(rve_id, model, contrast, None, None, None, None,
                         failed=True)


def _fmt(value: float | None, failed: bool) -> str:
    if failed:
        return "FAILED"
    if value is None:
        return ""
    return format(value, ".9g")


def rows_to_csv(rows: list[ComparisonRow]) -> str:
    """Render comparison rows with the fixed header; deterministic for
    identical inputs."""
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in rows:
        m = r.moduli
        fields = [
            r.rve_id,
            r.model,
            format(r.contrast, ".9g"),
            _fmt(m.k_norm if m else None, r.failed),
            _fmt(m.mu_norm if m else None, r.failed),
            _fmt(m.e1_norm if m else None, r.failed),
            _fmt(r.delta_k, r.failed),
            _fmt(r.delta_mu, r.failed),
            _fmt(r.delta_e, r.failed),
        ]
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def write_csv(rows: list[ComparisonRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path) -> list[dict]:
    """Parse a comparison CSV back into dictionaries (strings preserved
    for FAILED markers)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]
