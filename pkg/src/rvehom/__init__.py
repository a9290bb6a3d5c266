"""Periodic particle-composite RVEs and their homogenized elastic stiffness.

Pipeline: generate a periodic packing of spheres/ellipsoids (`generate`),
voxelize it (`voxels`), solve for the effective stiffness with the
Fourier-space full-field scheme (`fft`) or with mean-field estimates
(`meanfield`), and compare effective moduli across methods (`report`).
"""

from rvehom.fft import SolverSettings, homogenized_stiffness_fft, solve_load_case
from rvehom.generate import (
    Inclusion,
    RveRealization,
    RveSpec,
    generate,
    md_generate,
    rsa_generate,
)
from rvehom.meanfield import (
    InclusionFamily,
    eshelby_tensor,
    families_from_realization,
    homogenize_lielens,
    homogenize_mt,
    homogenize_nsc,
    morris_tensor,
)
from rvehom.report import effective_moduli, relative_deviations
from rvehom.tensors import (
    EulerAngles,
    IsotropicMaterial,
    StiffnessTensor,
    bunge_matrix,
    iso_stiffness,
    rotate_rank4,
)
from rvehom.voxels import VoxelGrid, voxelize

__version__ = "0.1.0"

__all__ = [
    "EulerAngles",
    "Inclusion",
    "InclusionFamily",
    "IsotropicMaterial",
    "RveRealization",
    "RveSpec",
    "SolverSettings",
    "StiffnessTensor",
    "VoxelGrid",
    "bunge_matrix",
    "effective_moduli",
    "eshelby_tensor",
    "families_from_realization",
    "generate",
    "homogenize_lielens",
    "homogenize_mt",
    "homogenize_nsc",
    "homogenized_stiffness_fft",
    "iso_stiffness",
    "md_generate",
    "morris_tensor",
    "relative_deviations",
    "rotate_rank4",
    "rsa_generate",
    "solve_load_case",
    "voxelize",
    "__version__",
]
