"""Pixelization of a packing into a periodic phase-index grid.

A voxel belongs to an inclusion when its center, mapped into the inclusion's
local frame (nearest periodic image), lies inside the ellipsoid.  No
sub-voxel anti-aliasing is applied: the grid is binary per phase, and the
voxel-counted volume fractions converge to the analytic ones at first order
in the grid spacing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rvehom.generate import RveRealization
from rvehom.tensors import bunge_matrix

MATRIX_PHASE = 0


@dataclass(frozen=True)
class VoxelGrid:
    """Periodic n^3 grid of small-integer phase ids (0 = matrix)."""

    n: int
    phases: np.ndarray
    cell_edge: float
    phase_table: dict

    def __post_init__(self):
        if self.phases.shape != (self.n, self.n, self.n):
            raise ValueError(
                f"phase array shape {self.phases.shape} does not match n={self.n}"
            )

    def counted_fractions(self) -> dict:
        """Voxel-count fraction per phase label."""
        total = self.phases.size
        return {
            label: float(np.count_nonzero(self.phases == pid)) / total
            for pid, label in self.phase_table.items()
        }


def phase_ids_for(realization: RveRealization) -> dict:
    """Stable shape -> phase-id assignment (alphabetical, matrix = 0)."""
    shapes = sorted({inc.shape for inc in realization.inclusions})
    return {shape: k + 1 for k, shape in enumerate(shapes)}


def voxelize(realization: RveRealization, n: int) -> VoxelGrid:
    """Rasterize the packing on an n^3 grid by the voxel-center test.

    Inclusions are painted in list order, so later entries win the
    (measure-zero) ties on shared boundaries.  Inclusions longer than the
    cell edge are handled by testing every periodic image whose extent can
    reach a voxel.
    """
    if n < 8:
        raise ValueError(f"resolution n={n} is below the minimum of 8")
    cell = realization.cell_edge
    h = cell / n
    phases = np.zeros((n, n, n), dtype=np.uint8)
    ids = phase_ids_for(realization)

    for inc in realization.inclusions:
        pid = ids[inc.shape]
        m = bunge_matrix(inc.orientation)
        a = np.asarray(inc.semi_axes)
        # Axis-aligned extent of the rotated ellipsoid.
        extent = np.sqrt((m**2) @ (a**2))
        center = np.asarray(inc.center)
        axis_idx = []
        axis_off = []
        for k in range(3):
            lo = int(np.floor((center[k] - extent[k]) / h - 0.5))
            hi = int(np.ceil((center[k] + extent[k]) / h - 0.5))
            idx = np.arange(lo, hi + 1)
            axis_idx.append(idx % n)
            axis_off.append((idx + 0.5) * h - center[k])
        dx, dy, dz = np.meshgrid(*axis_off, indexing="ij")
        rel = np.stack([dx, dy, dz], axis=-1)
        local = rel @ m  # row-vector form of m^T (x - c)
        inside = np.sum((local / a) ** 2, axis=-1) <= 1.0
        if not inside.any():
            continue
        gx, gy, gz = np.meshgrid(*axis_idx, indexing="ij")
        phases[gx[inside], gy[inside], gz[inside]] = pid

    table = {MATRIX_PHASE: "matrix"}
    table.update({pid: shape for shape, pid in ids.items()})
    return VoxelGrid(n=n, phases=phases, cell_edge=cell, phase_table=table)


def export_raw(grid: VoxelGrid, path) -> None:
    """Write raw little-endian uint8 phases (x varying fastest) plus a JSON
    sidecar describing the grid, for external volume viewers."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(grid.phases.transpose(2, 1, 0)).tobytes())
    sidecar = {
        "n": grid.n,
        "cell_edge": grid.cell_edge,
        "phase_table": {str(k): v for k, v in grid.phase_table.items()},
        "order": "x-fastest",
        "dtype": "uint8",
    }
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_raw(path) -> VoxelGrid:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json"), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    n = sidecar["n"]
    raw = np.fromfile(path, dtype=np.uint8)
    phases = raw.reshape(n, n, n).transpose(2, 1, 0).copy()
    return VoxelGrid(
        n=n,
        phases=phases,
        cell_edge=sidecar["cell_edge"],
        phase_table={int(k): v for k, v in sidecar["phase_table"].items()},
    )
