"""Mean-field homogenization estimates for particle-reinforced composites.

Implements the interaction (Morris) tensor of an ellipsoidal inclusion by
numerical quadrature over the unit sphere, and three strain-localization
models built on it: Mori-Tanaka, Lielens' interpolation, and a normalized
self-consistent scheme.  All models return the effective stiffness through
the common assembly

    C = C_m + sum_i f_i (C_i - C_m) : A_i,

where the A_i are normalized so that their volume average over the whole
cell (matrix included) is the fourth-order identity.

Tensors carried per inclusion family are computed in the family's local
frame (axes aligned with the ellipsoid semi-axes) and rotated to the global
frame before averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from rvehom.tensors import (
    EulerAngles,
    IsotropicMaterial,
    StiffnessTensor,
    bunge_matrix,
    contract22,
    iso_stiffness,
    mandel_rotation,
)

DEFAULT_N_POLAR = 64
DEFAULT_N_AZIMUTH = 128

_SPHERE_AXES = (1.0, 1.0, 1.0)


class SingularAcousticTensor(ValueError):
    """The acoustic tensor K(xi) is singular at a quadrature node.

    This signals a reference stiffness that is not positive definite.
    """


class NonConvergence(RuntimeError):
    """Fixed-point iteration on the effective stiffness failed to converge."""

    def __init__(self, iterations: int, last_change: float):
        self.iterations = iterations
        self.last_change = last_change
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last relative change {last_change:.3e})"
        )


@dataclass(frozen=True)
class InclusionFamily:
    """Inclusions sharing one shape, orientation and material.

    fraction is the family's volume fraction of the whole cell; the matrix
    fraction is implied as one minus the sum over families.
    """

    fraction: float
    material: IsotropicMaterial
    semi_axes: tuple[float, float, float]
    orientation: EulerAngles = EulerAngles(0.0, 0.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ValueError(f"family fraction must be in [0, 1), got {self.fraction}")
        a1, a2, a3 = self.semi_axes
        if not (a1 > 0 and a2 > 0 and a3 > 0):
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")

    @property
    def shape_key(self) -> tuple[float, float]:
        """Aspect-ratio signature used to group families of the same shape."""
        a1, a2, a3 = self.semi_axes
        return (round(a1 / a3, 9), round(a2 / a3, 9))


@lru_cache(maxsize=512)
def _sphere_quadrature(n_polar: int, n_azimuth: int):
    """Unit-sphere nodes and weights.

    Polar direction: Gauss-Legendre in theta on the two panels [0, pi/2] and
    [pi/2, pi] (half the nodes each), which clusters nodes at the poles and
    the equator where elongated and flattened inclusion integrands vary
    fastest.  Azimuth: uniform rule, spectrally accurate for the periodic
    direction.  Weights sum to one (the 1/4pi normalization is included).
    """
    t, w = np.polynomial.legendre.leggauss(max(n_polar // 2, 1))
    theta = np.concatenate([0.25 * np.pi * (t + 1.0),
                            0.25 * np.pi * (t + 1.0) + 0.5 * np.pi])
    w_polar = np.concatenate([w, w]) * 0.25 * np.pi * np.sin(theta)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    n_nodes = theta.size * n_azimuth
    dirs = np.empty((n_nodes, 3))
    dirs[:, 0] = np.outer(sin_t, np.cos(phi)).ravel()
    dirs[:, 1] = np.outer(sin_t, np.sin(phi)).ravel()
    dirs[:, 2] = np.outer(cos_t, np.ones(n_azimuth)).ravel()
    weights = np.outer(w_polar, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)).ravel()
    weights /= 4.0 * np.pi
    dirs.flags.writeable = False
    weights.flags.writeable = False
    return dirs, weights


def morris_tensor(
    c_ref: StiffnessTensor,
    a1: float,
    a2: float,
    a3: float,
    n_polar: int = DEFAULT_N_POLAR,
    n_azimuth: int = DEFAULT_N_AZIMUTH,
) -> StiffnessTensor:
    """Interaction tensor of an ellipsoid embedded in the reference medium.

    Integrates the inverse acoustic tensor K_jp(xi) = C_ijpl xi_i xi_l over
    the unit sphere, with the wave vector components scaled by the inverse
    semi-axes, and symmetrizes over both minor index pairs.  For an isotropic
    reference and a sphere this reproduces the classical Eshelby construction
    (the Eshelby tensor is ``morris : c_ref``).

    The integrand is homogeneous of degree zero in xi, so only the semi-axis
    ratios matter; axes are normalized internally.

    Raises
    ------
    SingularAcousticTensor
        If K(xi) is singular at any node, which signals a reference
        stiffness that is not positive definite.
    """
    if not (a1 > 0 and a2 > 0 and a3 > 0):
        raise ValueError(f"semi-axes must be positive, got {(a1, a2, a3)}")
    return _morris_cached(
        c_ref.mandel.tobytes(), _axis_key(a1, a2, a3), n_polar, n_azimuth
    )


def _axis_key(a1: float, a2: float, a3: float) -> tuple[float, float, float]:
    amax = max(a1, a2, a3)
    return (a1 / amax, a2 / amax, a3 / amax)


def _polar_permutation(axes) -> np.ndarray | None:
    """Permutation matrix moving the most distinct semi-axis to the pole.

    Aligning the odd axis of a spheroid with the quadrature's polar axis
    makes the integrand azimuth-independent, which the node layout resolves
    best.  Returns None when the axes are all alike (sphere).
    """
    la = np.log(np.asarray(axes))
    dev = np.abs(la - np.median(la))
    if dev.max() < 1e-12:
        return None
    polar = int(np.argmax(dev))
    if polar == 2:
        return None
    order = [i for i in range(3) if i != polar] + [polar]
    m = np.zeros((3, 3))
    for new, old in enumerate(order):
        m[new, old] = 1.0
    return m


@lru_cache(maxsize=512)
def _morris_cached(c_ref_bytes, axes, n_polar, n_azimuth) -> StiffnessTensor:
    c_ref = np.frombuffer(c_ref_bytes).reshape(6, 6)
    perm = _polar_permutation(axes)
    if perm is not None:
        r = mandel_rotation(perm)
        c_work = StiffnessTensor(r @ c_ref @ r.T)
        axes_work = tuple(np.asarray(axes)[np.argmax(perm, axis=1)])
    else:
        c_work = StiffnessTensor(c_ref)
        axes_work = axes
    c = c_work.components
    dirs, weights = _sphere_quadrature(n_polar, n_azimuth)
    xi = dirs / np.asarray(axes_work)
    acoustic = np.einsum("ijpl,ni,nl->njp", c, xi, xi)
    acoustic = 0.5 * (acoustic + acoustic.transpose(0, 2, 1))
    # positive definiteness via leading principal minors
    m1 = acoustic[:, 0, 0]
    m2 = (acoustic[:, 0, 0] * acoustic[:, 1, 1]
          - acoustic[:, 0, 1] * acoustic[:, 1, 0])
    m3 = np.linalg.det(acoustic)
    scale = np.abs(np.einsum("njj->n", acoustic)) / 3.0
    tol = 1e-12
    if np.any(m1 <= tol * scale) or np.any(m2 <= tol * scale**2) \
            or np.any(m3 <= tol * scale**3):
        raise SingularAcousticTensor(
            "acoustic tensor is singular or indefinite on the quadrature "
            "sphere; the reference stiffness is not positive definite"
        )
    inv = np.linalg.inv(acoustic)
    raw = np.einsum("n,nik,nj,nl->ijkl", weights, inv, xi, xi, optimize=True)
    sym = 0.25 * (raw + raw.transpose(1, 0, 2, 3)
                  + raw.transpose(0, 1, 3, 2) + raw.transpose(1, 0, 3, 2))
    result = StiffnessTensor.from_components(sym)
    if perm is not None:
        r = mandel_rotation(perm)
        result = StiffnessTensor(r.T @ result.mandel @ r)
    return result


def eshelby_tensor(
    c_ref: StiffnessTensor,
    a1: float,
    a2: float,
    a3: float,
    n_polar: int = DEFAULT_N_POLAR,
    n_azimuth: int = DEFAULT_N_AZIMUTH,
) -> StiffnessTensor:
    """Eshelby tensor S = morris_tensor : c_ref for the given ellipsoid."""
    return contract22(morris_tensor(c_ref, a1, a2, a3, n_polar, n_azimuth), c_ref)


def localize_sc(
    c_inclusion: StiffnessTensor,
    c_medium: StiffnessTensor,
    morris: StiffnessTensor,
) -> StiffnessTensor:
    """Self-consistent strain localization [I + E : (C_i - C)]^-1.

    All arguments must be expressed in the same (inclusion-local) frame;
    ``morris`` is the interaction tensor of the inclusion shape in the
    embedding medium ``c_medium``.
    """
    m = np.eye(6) + morris.mandel @ (c_inclusion.mandel - c_medium.mandel)
    return StiffnessTensor(np.linalg.inv(m))


def _family_frames(families):
    """Rotation matrices (local -> global) in Mandel 6x6 form."""
    return [mandel_rotation(bunge_matrix(f.orientation)) for f in families]


def _matrix_fraction(families) -> float:
    total = sum(f.fraction for f in families)
    if total >= 1.0:
        raise ValueError(f"family fractions sum to {total}; must be < 1")
    return 1.0 - total


def _assemble(cm: np.ndarray, families, a_globals) -> StiffnessTensor:
    """C = C_m + sum_i f_i (C_i - C_m) : A_i with already-normalized A_i."""
    c = cm.copy()
    for fam, a in zip(families, a_globals):
        ci = iso_stiffness(fam.material).mandel
        c += fam.fraction * (ci - cm) @ a
    return StiffnessTensor(c)


def _normalize(families, a_globals, a_matrix: np.ndarray):
    """Divide localization tensors by their cell average.

    Returns the normalized per-family tensors and the normalized matrix
    tensor; after this step, f_m A_m + sum f_i A_i is the identity.
    """
    fm = _matrix_fraction(families)
    avg = fm * a_matrix + sum(
        f.fraction * a for f, a in zip(families, a_globals)
    )
    norm = np.linalg.inv(avg)
    return [a @ norm for a in a_globals], a_matrix @ norm


def _dilute_local(family, c_embed: StiffnessTensor, n_polar, n_azimuth) -> np.ndarray:
    """Dilute localization of one family in the embedding medium ``c_embed``.

    ``c_embed`` must already be expressed in the family's local frame.
    """
    e = morris_tensor(c_embed, *family.semi_axes, n_polar, n_azimuth).mandel
    ci = iso_stiffness(family.material).mandel
    return np.linalg.inv(np.eye(6) + e @ (ci - c_embed.mandel))


def homogenize_mt(
    families: list[InclusionFamily],
    matrix: IsotropicMaterial,
    n_polar: int = DEFAULT_N_POLAR,
    n_azimuth: int = DEFAULT_N_AZIMUTH,
) -> StiffnessTensor:
    """Mori-Tanaka estimate: dilute localizations in the matrix medium,
    renormalized by their cell average (matrix term = identity)."""
    cm_t = iso_stiffness(matrix)
    frames = _family_frames(families)
    a_globals = [
        r @ _dilute_local(f, cm_t, n_polar, n_azimuth) @ r.T
        for f, r in zip(families, frames)
    ]
    a_norm, _ = _normalize(families, a_globals, np.eye(6))
    return _assemble(cm_t.mandel, families, a_norm)


def lielens_interpolation(f_shape: float) -> float:
    """Volume-fraction dependent weight f = f_shape (1 + f_shape) / 2."""
    return 0.5 * f_shape * (1.0 + f_shape)


def _blend_inverses(a_lower: np.ndarray, a_upper: np.ndarray, f: float) -> np.ndarray:
    """[(1-f) A_lower^-1 + f A_upper^-1]^-1, with exact endpoints."""
    if f == 0.0:
        return a_lower
    if f == 1.0:
        return a_upper
    blended = (1.0 - f) * np.linalg.inv(a_lower) + f * np.linalg.inv(a_upper)
    return np.linalg.inv(blended)


def homogenize_lielens(
    families: list[InclusionFamily],
    matrix: IsotropicMaterial,
    n_polar: int = DEFAULT_N_POLAR,
    n_azimuth: int = DEFAULT_N_AZIMUTH,
) -> StiffnessTensor:
    """Lielens' estimate, interpolating between the dilute localization in
    the matrix (lower) and the inverse configuration where the inclusion
    material is the embedding medium (upper).

    The interpolation weight of each family depends on the total volume
    fraction of its shape group.
    """
    cm_t = iso_stiffness(matrix)
    shape_fractions: dict = {}
    for f in families:
        shape_fractions[f.shape_key] = shape_fractions.get(f.shape_key, 0.0) + f.fraction

    frames = _family_frames(families)
    a_globals = []
    for fam, r in zip(families, frames):
        ci_t = iso_stiffness(fam.material)
        a_lower = _dilute_local(fam, cm_t, n_polar, n_azimuth)
        e_incl = morris_tensor(ci_t, *fam.semi_axes, n_polar, n_azimuth).mandel
        a_upper = np.linalg.inv(
            np.eye(6) + e_incl @ (cm_t.mandel - ci_t.mandel)
        )
        f_int = lielens_interpolation(shape_fractions[fam.shape_key])
        a_star = _blend_inverses(a_lower, a_upper, f_int)
        a_globals.append(r @ a_star @ r.T)
    a_norm, _ = _normalize(families, a_globals, np.eye(6))
    return _assemble(cm_t.mandel, families, a_norm)


def homogenize_nsc(
    families: list[InclusionFamily],
    matrix: IsotropicMaterial,
    n_polar: int = DEFAULT_N_POLAR,
    n_azimuth: int = DEFAULT_N_AZIMUTH,
    tol: float = 1e-8,
    max_iterations: int = 500,
) -> StiffnessTensor:
    """Normalized self-consistent estimate.

    Each family (and the matrix, treated as a spherical phase) is embedded in
    the current effective medium; the localizations are normalized by their
    cell average and the effective stiffness is reassembled until the fixed
    point converges.  Starts from the arithmetic (Voigt) phase average.

    Raises
    ------
    NonConvergence
        After ``max_iterations`` sweeps without the relative update dropping
        below ``tol``.
    """
    cm = iso_stiffness(matrix).mandel
    fm = _matrix_fraction(families)
    frames = _family_frames(families)
    rotations = [bunge_matrix(f.orientation) for f in families]

    c = fm * cm + sum(
        f.fraction * iso_stiffness(f.material).mandel for f in families
    )
    last_change = math.inf
    for _ in range(max_iterations):
        a_globals = []
        for fam, r3, r6 in zip(families, rotations, frames):
            c_loc = StiffnessTensor(r6.T @ c @ r6)
            e = morris_tensor(c_loc, *fam.semi_axes, n_polar, n_azimuth)
            a_loc = localize_sc(iso_stiffness(fam.material), c_loc, e)
            a_globals.append(r6 @ a_loc.mandel @ r6.T)
        c_t = StiffnessTensor(c)
        e_m = morris_tensor(c_t, *_SPHERE_AXES, n_polar, n_azimuth)
        a_matrix = localize_sc(iso_stiffness(matrix), c_t, e_m).mandel
        a_norm, _ = _normalize(families, a_globals, a_matrix)
        c_new = _assemble(cm, families, a_norm).mandel
        last_change = np.linalg.norm(c_new - c) / np.linalg.norm(c)
        c = c_new
        if last_change <= tol:
            return StiffnessTensor(c)
    raise NonConvergence(max_iterations, last_change)


def families_from_realization(
    realization, inclusion_material: IsotropicMaterial
) -> list[InclusionFamily]:
    """Group a packing's inclusions by shape and orientation.

    Spheres collapse into a single unoriented family; every distinct
    (semi-axes, orientation) pair of ellipsoids becomes its own family.
    The inclusions' positions are irrelevant to mean-field estimates.
    """
    volume = realization.cell_edge**3
    groups: dict = {}
    for inc in realization.inclusions:
        a1, a2, a3 = inc.semi_axes
        if inc.is_sphere:
            key = ("sphere", round(a1, 12))
            orientation = EulerAngles(0.0, 0.0, 0.0)
        else:
            key = ("ellipsoid", round(a1, 12), round(a2, 12), round(a3, 12),
                   round(inc.orientation.phi1, 12),
                   round(inc.orientation.Phi, 12),
                   round(inc.orientation.phi2, 12))
            orientation = inc.orientation
        frac = (4.0 / 3.0) * math.pi * a1 * a2 * a3 / volume
        if key in groups:
            prev = groups[key]
            groups[key] = InclusionFamily(
                prev.fraction + frac, inclusion_material, prev.semi_axes,
                prev.orientation,
            )
        else:
            groups[key] = InclusionFamily(
                frac, inclusion_material, (a1, a2, a3), orientation
            )
    return list(groups.values())
