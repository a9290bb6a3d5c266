"""Refresh criterion 6/7 numbers with clearance-enforced presets."""
import json
import time

from rvehom.cli import StudyConfig, run_sweep
from rvehom.fft import SolverSettings
from rvehom.generate import audit_no_intersections, generate
from rvehom.presets import get_preset


def emit(tag, **kw):
    print(json.dumps({"tag": tag, **kw}), flush=True)


def row_dict(r):
    out = {"model": r.model, "contrast": r.contrast, "failed": r.failed}
    if r.moduli:
        out.update(K=r.moduli.k_norm, mu=r.moduli.mu_norm, E1=r.moduli.e1_norm)
    if r.delta_k is not None:
        out.update(dK=r.delta_k, dmu=r.delta_mu, dE=r.delta_e)
    return out


# generation feasibility for the clearance presets
for name, seed in (("rve3", 9), ("rve5", 11), ("ellipsoids-20", 1),
                   ("ellipsoids-30", 1)):
    t0 = time.perf_counter()
    real = generate(get_preset(name), seed)
    emit("gen", name=name, seed=seed, elapsed=time.perf_counter() - t0,
         stats={k: v for k, v in real.stats.items()
                if k != "penetration_history"},
         audit=audit_no_intersections(real))

# criterion 6: rve3 across contrasts
t0 = time.perf_counter()
real3 = generate(get_preset("rve3"), 9)
cfg3 = StudyConfig(contrasts=(10.0, 20.0, 50.0, 100.0),
                   solver=SolverSettings(scheme="accelerated"))
rows3, _ = run_sweep(cfg3, "rve3", real3)
emit("rve3", elapsed=time.perf_counter() - t0,
     rows=[row_dict(r) for r in rows3])

# criterion 7: fraction series
for pct in (4, 8, 12, 16, 20, 30):
    t0 = time.perf_counter()
    real = generate(get_preset(f"ellipsoids-{pct}"), 1)
    contrasts = (400.0,) if pct != 30 else (200.0, 400.0)
    cfg = StudyConfig(contrasts=contrasts, models=("fft", "mt", "lielens"),
                      solver=SolverSettings(scheme="accelerated"))
    rows, _ = run_sweep(cfg, f"e{pct}", real)
    emit(f"series_{pct}", elapsed=time.perf_counter() - t0,
         rows=[row_dict(r) for r in rows])
