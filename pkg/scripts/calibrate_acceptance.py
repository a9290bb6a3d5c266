"""One-off calibration run collecting the numbers the acceptance suite pins.

Writes progressive JSON lines to stdout; run with python -u.
"""
import json
import math
import time

import numpy as np

from rvehom.cli import StudyConfig, run_sweep
from rvehom.fft import SolverSettings, homogenized_stiffness_fft
from rvehom.generate import Inclusion, RveRealization, generate
from rvehom.meanfield import families_from_realization, homogenize_lielens, homogenize_mt
from rvehom.presets import get_preset
from rvehom.report import effective_moduli, relative_deviations
from rvehom.tensors import IsotropicMaterial
from rvehom.voxels import voxelize

MATRIX = IsotropicMaterial(1.0, 1 / 3)


def emit(tag, **kw):
    print(json.dumps({"tag": tag, **kw}), flush=True)


def row_dict(r):
    out = {"model": r.model, "contrast": r.contrast, "failed": r.failed}
    if r.moduli:
        out.update(K=r.moduli.k_norm, mu=r.moduli.mu_norm, E1=r.moduli.e1_norm)
    if r.delta_k is not None:
        out.update(dK=r.delta_k, dmu=r.delta_mu, dE=r.delta_e)
    return out


# (a) rve1 default full sweep, basic scheme, timed  (criteria 5, 8, 9)
t0 = time.perf_counter()
real1 = generate(get_preset("rve1"), 11)
cfg = StudyConfig()  # defaults: n=64, contrasts 1..100, all models, basic
rows, failed = run_sweep(cfg, "rve1", real1)
elapsed = time.perf_counter() - t0
emit("rve1_sweep", elapsed=elapsed, failed=failed,
     rows=[row_dict(r) for r in rows])

# (b) rve3 contrasts 10..100, accelerated baseline  (criterion 6)
t0 = time.perf_counter()
real3 = generate(get_preset("rve3"), 9)
cfg3 = StudyConfig(contrasts=(10.0, 20.0, 50.0, 100.0),
                   solver=SolverSettings(scheme="accelerated"))
rows3, _ = run_sweep(cfg3, "rve3", real3)
emit("rve3", elapsed=time.perf_counter() - t0,
     rows=[row_dict(r) for r in rows3])

# (c) fraction series at 400 (and 200 for the 30% cell)  (criterion 7)
for pct in (4, 8, 12, 16, 20, 30):
    t0 = time.perf_counter()
    preset = get_preset(f"ellipsoids-{pct}")
    real = generate(preset, 1)
    contrasts = (400.0,) if pct != 30 else (200.0, 400.0)
    cfgs = StudyConfig(contrasts=contrasts, models=("fft", "mt", "lielens"),
                       solver=SolverSettings(scheme="accelerated"))
    rows_s, _ = run_sweep(cfgs, f"ellipsoids-{pct}", real)
    emit(f"series_{pct}", elapsed=time.perf_counter() - t0,
         rows=[row_dict(r) for r in rows_s])

# (d) dilute n=128 cross-validation, default basic scheme  (criterion 4)
t0 = time.perf_counter()
r = (0.01 * 3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
real_d = RveRealization(1.0, (Inclusion("sphere", (0.5, 0.5, 0.5),
                                        (r, r, r)),), 0)
grid = voxelize(real_d, 128)
incl = IsotropicMaterial(10.0, 1 / 3)
c_fft = homogenized_stiffness_fft(grid, {"matrix": MATRIX, "sphere": incl})
em = effective_moduli(c_fft, MATRIX)
fams = families_from_realization(real_d, incl)
em_mt = effective_moduli(homogenize_mt(fams, MATRIX), MATRIX)
dk, dmu, de = relative_deviations(em, em_mt)
emit("dilute128", elapsed=time.perf_counter() - t0, dK=dk, dmu=dmu, dE=de)
