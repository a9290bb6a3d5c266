"""Named unit-cell compositions used throughout the studies.

``rve1`` through ``rve5`` are the morphology-comparison cells (mixtures,
pure ellipsoids at two aspect ratios, dense spheres); the ``ellipsoids-*``
series sweeps the volume fraction of ten aspect-ratio-5 ellipsoids from 4%
to 30%.  Dense cells use the relaxation generator, dilute ones the
sequential one.

The ellipsoid-series and dense cells enforce a surface clearance between
inclusions: without it, relaxed packings end up touching to within float
precision, and the rasterized near-contacts weld into artificial stiff
bridges that dominate the full-field stiffness at high contrast.
"""

from __future__ import annotations

import math

from rvehom.generate import RveSpec
from rvehom.tensors import EulerAngles

_OBLIQUE_PAIR = (
    EulerAngles(math.pi / 5.0, math.pi / 3.0, math.pi / 7.0),
    EulerAngles(4.0 * math.pi / 3.0, 2.0 * math.pi / 5.0, 5.0 * math.pi / 4.0),
)

PRESETS: dict[str, RveSpec] = {
    "rve1": RveSpec(
        sphere_count=10, sphere_fraction=0.05,
        ellipsoid_count=10, ellipsoid_fraction=0.067, aspect_ratio=10.0,
        generator="rsa",
    ),
    "rve2": RveSpec(
        ellipsoid_count=10, ellipsoid_fraction=0.098, aspect_ratio=10.0,
        generator="rsa",
    ),
    "rve3": RveSpec(
        ellipsoid_count=10, ellipsoid_fraction=0.30, aspect_ratio=5.0,
        generator="md", clearance=0.10,
    ),
    "rve4": RveSpec(
        sphere_count=2, sphere_fraction=0.05,
        ellipsoid_count=2, ellipsoid_fraction=0.067, aspect_ratio=5.0,
        orientations=_OBLIQUE_PAIR,
        generator="rsa",
    ),
    "rve5": RveSpec(
        sphere_count=10, sphere_fraction=0.50,
        generator="md", clearance=0.03,
    ),
}

for _pct in (4, 8, 12, 16, 20, 30):
    PRESETS[f"ellipsoids-{_pct}"] = RveSpec(
        ellipsoid_count=10,
        ellipsoid_fraction=_pct / 100.0,
        aspect_ratio=5.0,
        generator="rsa" if _pct <= 16 else "md",
        clearance=0.10,
    )


def get_preset(name: str) -> RveSpec:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}") from None
