"""Rank-4 elasticity tensor algebra.

Stiffness tensors are stored in an orthonormal (Mandel) 6x6 basis, in which
double contraction of minor-symmetric rank-4 tensors is an ordinary matrix
product and tensor inversion is matrix inversion.  The 3x3x3x3 component view
is reconstructed from the matrix on demand, so converting to the 6x6 matrix
and back is lossless by construction.

Frame changes use the z-x-z Euler-angle rotation matrix common in texture
analysis (Bunge convention), mapping inclusion-local components to the global
frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Index pairs of the 6-component ordering: 11, 22, 33, 23, 13, 12.
MANDEL_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

_SQRT2 = math.sqrt(2.0)

#: Orthonormal-basis weights: w_I = 1 for normal, sqrt(2) for shear rows.
MANDEL_WEIGHTS = np.array([1.0, 1.0, 1.0, _SQRT2, _SQRT2, _SQRT2])

ORTHOGONALITY_TOL = 1e-8
CONDITION_LIMIT = 1e12


class SingularTensorError(ValueError):
    """Raised when a rank-4 tensor is numerically singular in its 6x6 view."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"6x6 matrix view is numerically singular "
            f"(condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e})"
        )


class StiffnessTensor:
    """Minor-symmetric rank-4 tensor backed by its orthonormal 6x6 matrix.

    The matrix entries are M_IJ = w_I w_J C_ijkl for the index pairs in
    :data:`MANDEL_PAIRS`.  ``components`` rebuilds the full 3x3x3x3 array;
    because both directions read the same stored matrix, a round trip
    through :meth:`to6x6` / :meth:`from6x6` reproduces components exactly.
    """

    __slots__ = ("_mandel", "_components")

    def __init__(self, mandel: np.ndarray):
        m = np.asarray(mandel, dtype=float)
        if m.shape != (6, 6):
            raise ValueError(f"expected a (6, 6) matrix, got shape {m.shape}")
        m = m.copy()
        m.flags.writeable = False
        self._mandel = m
        self._components = None

    @classmethod
    def from_components(cls, components: np.ndarray) -> "StiffnessTensor":
        """Build from a 3x3x3x3 array, symmetrizing over both minor index pairs."""
        c = np.asarray(components, dtype=float)
        if c.shape != (3, 3, 3, 3):
            raise ValueError(f"expected shape (3, 3, 3, 3), got {c.shape}")
        c = 0.25 * (c + c.transpose(1, 0, 2, 3)
                    + c.transpose(0, 1, 3, 2) + c.transpose(1, 0, 3, 2))
        m = np.empty((6, 6))
        for i, (a, b) in enumerate(MANDEL_PAIRS):
            for j, (k, l) in enumerate(MANDEL_PAIRS):
                m[i, j] = MANDEL_WEIGHTS[i] * MANDEL_WEIGHTS[j] * c[a, b, k, l]
        return cls(m)

    @classmethod
    def from6x6(cls, mandel: np.ndarray) -> "StiffnessTensor":
        return cls(mandel)

    def to6x6(self) -> np.ndarray:
        """Orthonormal-basis 6x6 matrix (read-only view)."""
        return self._mandel

    @property
    def mandel(self) -> np.ndarray:
        return self._mandel

    @property
    def components(self) -> np.ndarray:
        """Full 3x3x3x3 component array (read-only, cached)."""
        if self._components is None:
            c = np.empty((3, 3, 3, 3))
            for i, (a, b) in enumerate(MANDEL_PAIRS):
                for j, (k, l) in enumerate(MANDEL_PAIRS):
                    v = self._mandel[i, j] / (MANDEL_WEIGHTS[i] * MANDEL_WEIGHTS[j])
                    c[a, b, k, l] = c[b, a, k, l] = c[a, b, l, k] = c[b, a, l, k] = v
            c.flags.writeable = False
            self._components = c
        return self._components

    def to_voigt(self) -> np.ndarray:
        """Unweighted 6x6 stiffness matrix (entries equal tensor components)."""
        w = np.outer(MANDEL_WEIGHTS, MANDEL_WEIGHTS)
        return self._mandel / w

    def __repr__(self) -> str:
        return f"StiffnessTensor(mandel=\n{self._mandel!r})"


@dataclass(frozen=True)
class EulerAngles:
    """z-x-z Euler angles (phi1, Phi, phi2), Bunge convention, in radians.

    Canonical ranges: phi1, phi2 in [0, 2*pi), Phi in [0, pi].
    """

    phi1: float
    Phi: float
    phi2: float

    def __post_init__(self):
        two_pi = 2.0 * math.pi
        object.__setattr__(self, "phi1", self.phi1 % two_pi)
        object.__setattr__(self, "phi2", self.phi2 % two_pi)
        Phi = self.Phi
        if -1e-12 <= Phi < 0.0:
            Phi = 0.0
        elif math.pi < Phi <= math.pi + 1e-12:
            Phi = math.pi
        if not 0.0 <= Phi <= math.pi:
            raise ValueError(f"Phi = {self.Phi} outside [0, pi]")
        object.__setattr__(self, "Phi", Phi)


@dataclass(frozen=True)
class IsotropicMaterial:
    """Isotropic linear-elastic material given by Young's modulus and Poisson ratio."""

    young: float
    poisson: float

    def __post_init__(self):
        if not self.young > 0.0:
            raise ValueError(f"Young's modulus must be positive, got {self.young}")
        if not -1.0 < self.poisson < 0.5:
            raise ValueError(
                f"Poisson ratio must lie in (-1, 0.5), got {self.poisson}"
            )

    @property
    def bulk(self) -> float:
        return self.young / (3.0 * (1.0 - 2.0 * self.poisson))

    @property
    def shear(self) -> float:
        return self.young / (2.0 * (1.0 + self.poisson))

    @property
    def lame_lambda(self) -> float:
        return (self.young * self.poisson
                / ((1.0 + self.poisson) * (1.0 - 2.0 * self.poisson)))

    @classmethod
    def from_bulk_shear(cls, bulk: float, shear: float) -> "IsotropicMaterial":
        young = 9.0 * bulk * shear / (3.0 * bulk + shear)
        poisson = (3.0 * bulk - 2.0 * shear) / (2.0 * (3.0 * bulk + shear))
        return cls(young, poisson)


def iso_stiffness(mat: IsotropicMaterial) -> StiffnessTensor:
    """Isotropic stiffness C_ijkl = lam d_ij d_kl + mu (d_ik d_jl + d_il d_jk)."""
    lam, mu = mat.lame_lambda, mat.shear
    m = np.zeros((6, 6))
    m[:3, :3] = lam
    m[np.diag_indices(3)] += 2.0 * mu
    m[3, 3] = m[4, 4] = m[5, 5] = 2.0 * mu
    return StiffnessTensor(m)


def bunge_matrix(angles: EulerAngles) -> np.ndarray:
    """Rotation matrix mapping inclusion-local components to the global frame.

    Rows/columns follow the z-x-z (Bunge) convention; the result is orthogonal
    with determinant +1.
    """
    c1, s1 = math.cos(angles.phi1), math.sin(angles.phi1)
    c, s = math.cos(angles.Phi), math.sin(angles.Phi)
    c2, s2 = math.cos(angles.phi2), math.sin(angles.phi2)
    return np.array([
        [c1 * c2 - s1 * s2 * c, -c1 * s2 - s1 * c2 * c, s1 * s],
        [s1 * c2 + c1 * s2 * c, -s1 * s2 + c1 * c2 * c, -c1 * s],
        [s2 * s, c2 * s, c],
    ])


def _check_orthogonal(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"rotation matrix must be (3, 3), got {m.shape}")
    defect = np.linalg.norm(m.T @ m - np.eye(3))
    if defect > ORTHOGONALITY_TOL:
        raise ValueError(
            f"matrix is not orthogonal: ||m^T m - I|| = {defect:.3e}"
        )
    return m


def mandel_rotation(m: np.ndarray) -> np.ndarray:
    """6x6 orthogonal matrix representing rotation of symmetric 2nd-order tensors.

    For a symmetric S with Mandel vector s, the rotated tensor m S m^T has
    Mandel vector R s.  Rank-4 tensors rotate as R M R^T.
    """
    r = np.empty((6, 6))
    for i, (a, b) in enumerate(MANDEL_PAIRS):
        for j, (k, l) in enumerate(MANDEL_PAIRS):
            val = m[a, k] * m[b, l] + m[a, l] * m[b, k]
            r[i, j] = 0.5 * MANDEL_WEIGHTS[i] * MANDEL_WEIGHTS[j] * val
    return r


def rotate_rank4(tensor: StiffnessTensor, m: np.ndarray) -> StiffnessTensor:
    """Apply K'_ijkl = m_im m_jn m_ko m_lp K_mnop for an orthogonal m."""
    m = _check_orthogonal(m)
    r = mandel_rotation(m)
    return StiffnessTensor(r @ tensor.mandel @ r.T)


def contract22(a: StiffnessTensor, b: StiffnessTensor) -> StiffnessTensor:
    """Double contraction A : B of two minor-symmetric rank-4 tensors."""
    return StiffnessTensor(a.mandel @ b.mandel)


def invert4(a: StiffnessTensor) -> StiffnessTensor:
    """Inverse on symmetric second-order tensors: invert4(A) : A = identity4()."""
    cond = np.linalg.cond(a.mandel)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularTensorError(cond)
    return StiffnessTensor(np.linalg.inv(a.mandel))


def identity4() -> StiffnessTensor:
    """Symmetric fourth-order identity I_ijkl = (d_ik d_jl + d_il d_jk) / 2."""
    return StiffnessTensor(np.eye(6))


def average4(weighted: list[tuple[float, StiffnessTensor]]) -> StiffnessTensor:
    """Weight-normalized average of rank-4 tensors."""
    if not weighted:
        raise ValueError("cannot average an empty list")
    total = sum(w for w, _ in weighted)
    if total <= 0.0:
        raise ValueError(f"weights must sum to a positive value, got {total}")
    m = sum(w * t.mandel for w, t in weighted) / total
    return StiffnessTensor(m)


def kelvin_eigenvalues(a: StiffnessTensor) -> np.ndarray:
    """Eigenvalues of the symmetrized 6x6 view, ascending.

    An isotropic tensor has eigenvalue 3K once and 2*mu with multiplicity 5.
    """
    m = 0.5 * (a.mandel + a.mandel.T)
    return np.linalg.eigvalsh(m)


def isotropy_defect(a: StiffnessTensor) -> float:
    """Relative distance to the closest isotropic tensor.

    Projects onto the isotropic subspace (via the trace contractions for the
    bulk and shear parts) and returns ||C - C_iso|| / ||C_iso||.
    """
    c = a.components
    k = np.einsum("iijj->", c) / 9.0
    mu = (3.0 * np.einsum("ijij->", c) - np.einsum("iijj->", c)) / 30.0
    iso = np.zeros((6, 6))
    iso[:3, :3] = k - 2.0 * mu / 3.0
    iso[np.diag_indices(6)] += 2.0 * mu
    return float(np.linalg.norm(a.mandel - iso) / np.linalg.norm(iso))
