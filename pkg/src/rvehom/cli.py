"""Command-line interface wiring generation, voxelization and both
homogenization routes into comparison sweeps.

Subcommands: generate, voxelize, fft, meanfield, sweep, validate.
Exit codes: 0 success, 2 configuration error, 3 solver non-convergence on
every contrast, 4 generation failure (jamming or relaxation).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rvehom import fft as fftmod
from rvehom import generate as gen
from rvehom import meanfield as mf
from rvehom import report
from rvehom.presets import PRESETS, get_preset
from rvehom.tensors import EulerAngles, IsotropicMaterial, iso_stiffness
from rvehom.voxels import export_raw, voxelize

log = logging.getLogger("rvehom")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_GENERATION = 4

DEFAULT_CONTRASTS = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
EXTENDED_CONTRASTS = (200.0, 400.0)
ALL_MODELS = ("fft", "mt", "lielens", "nsc")

#: Deterministic row ordering within one contrast.
_MODEL_ORDER = {name: k for k, name in enumerate(ALL_MODELS)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    """Resolved study parameters; CLI flags override config-file keys."""

    rve_preset: str | None = None
    rve_path: str | None = None
    rve_spec: gen.RveSpec | None = None
    seed: int = 0
    resolution: int = 64
    contrasts: tuple[float, ...] = DEFAULT_CONTRASTS
    models: tuple[str, ...] = ALL_MODELS
    matrix: IsotropicMaterial = IsotropicMaterial(1.0, 1.0 / 3.0)
    solver: fftmod.SolverSettings = fftmod.SolverSettings()
    out: str = "out"
    figures: bool = True
    gen_max_attempts: int = 100_000
    gen_max_sweeps: int = 10_000

    def validate(self) -> "StudyConfig":
        if not self.models:
            raise ConfigError("at least one model must be requested")
        unknown = set(self.models) - set(ALL_MODELS)
        if unknown:
            raise ConfigError(f"unknown models: {sorted(unknown)}")
        if any(c < 1.0 for c in self.contrasts):
            raise ConfigError("contrasts must be >= 1")
        if not self.contrasts:
            raise ConfigError("at least one contrast must be requested")
        return self


def _spec_from_dict(doc: dict) -> gen.RveSpec:
    kwargs = dict(doc)
    orientations = kwargs.get("orientations", "random")
    if isinstance(orientations, list):
        kwargs["orientations"] = tuple(EulerAngles(*o) for o in orientations)
    try:
        return gen.RveSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid rve spec: {exc}") from exc


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build_config(args: argparse.Namespace) -> StudyConfig:
    doc = load_config(args.config) if getattr(args, "config", None) else {}
    cfg = StudyConfig()

    rve_doc = doc.get("rve", {})
    updates: dict = {}
    if "preset" in rve_doc:
        updates["rve_preset"] = rve_doc["preset"]
    if "path" in rve_doc:
        updates["rve_path"] = rve_doc["path"]
    if "spec" in rve_doc:
        updates["rve_spec"] = _spec_from_dict(rve_doc["spec"])
    for key in ("seed", "resolution", "out", "figures"):
        if key in doc:
            updates[key] = doc[key]
    if "contrasts" in doc:
        updates["contrasts"] = tuple(float(c) for c in doc["contrasts"])
    if "models" in doc:
        updates["models"] = tuple(doc["models"])
    if "matrix" in doc:
        m = doc["matrix"]
        updates["matrix"] = IsotropicMaterial(m["young"], m["poisson"])
    if "solver" in doc:
        s = doc["solver"]
        updates["solver"] = fftmod.SolverSettings(
            tolerance=s.get("tolerance", 1e-6),
            max_iterations=s.get("max_iterations", 5000),
            scheme=s.get("scheme", "basic"),
        )
    if "generation" in doc:
        g = doc["generation"]
        if "max_attempts" in g:
            updates["gen_max_attempts"] = g["max_attempts"]
        if "max_sweeps" in g:
            updates["gen_max_sweeps"] = g["max_sweeps"]
    cfg = replace(cfg, **updates)

    overrides: dict = {}
    if getattr(args, "preset", None):
        overrides["rve_preset"] = args.preset
    if getattr(args, "realization", None):
        overrides["rve_path"] = args.realization
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "resolution", None) is not None:
        overrides["resolution"] = args.resolution
    if getattr(args, "contrasts", None):
        overrides["contrasts"] = tuple(
            float(c) for c in args.contrasts.split(",")
        )
    if getattr(args, "models", None):
        overrides["models"] = tuple(args.models.split(","))
    if getattr(args, "out", None):
        overrides["out"] = args.out
    if getattr(args, "scheme", None):
        overrides["solver"] = replace(cfg.solver, scheme=args.scheme)
    if getattr(args, "tolerance", None) is not None:
        overrides["solver"] = replace(
            overrides.get("solver", cfg.solver), tolerance=args.tolerance
        )
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    return replace(cfg, **overrides).validate()


def _resolve_realization(cfg: StudyConfig, out_dir: Path):
    """Load or generate the packing named by the config."""
    if cfg.rve_path:
        return gen.load(cfg.rve_path), Path(cfg.rve_path).stem
    if cfg.rve_preset:
        spec = get_preset(cfg.rve_preset)
        name = cfg.rve_preset
    elif cfg.rve_spec is not None:
        spec = cfg.rve_spec
        name = "custom"
    else:
        raise ConfigError(
            "no RVE given: use --preset, --realization, or a config rve entry"
        )
    t0 = time.perf_counter()
    realization = gen.generate(spec, cfg.seed,
                               max_attempts=cfg.gen_max_attempts,
                               max_sweeps=cfg.gen_max_sweeps)
    log.info("generated %s in %.2f s (%s)", name, time.perf_counter() - t0,
             realization.stats)
    path = out_dir / f"{name}.json"
    gen.save(realization, path)
    log.info("wrote %s", path)
    return realization, name


def _materials_for(realization, matrix: IsotropicMaterial, contrast: float):
    inclusion = IsotropicMaterial(matrix.young * contrast, matrix.poisson)
    labels = {inc.shape for inc in realization.inclusions}
    materials = {"matrix": matrix}
    materials.update({label: inclusion for label in labels})
    return materials, inclusion


def _meanfield_for(model: str, families, matrix, quadrature=None):
    kwargs = {}
    if quadrature:
        kwargs = {"n_polar": quadrature, "n_azimuth": 2 * quadrature}
    if model == "mt":
        return mf.homogenize_mt(families, matrix, **kwargs)
    if model == "lielens":
        return mf.homogenize_lielens(families, matrix, **kwargs)
    if model == "nsc":
        return mf.homogenize_nsc(families, matrix, **kwargs)
    raise ConfigError(f"unknown mean-field model {model!r}")


def run_sweep(cfg: StudyConfig, rve_id: str, realization) -> tuple[list, int]:
    """All (contrast, model) rows for one realization.

    Returns the rows and the count of contrasts whose baseline failed.
    """
    rows: list[report.ComparisonRow] = []
    want_fft = "fft" in cfg.models
    meanfield_models = [m for m in cfg.models if m != "fft"]
    grid = None
    if want_fft:
        t0 = time.perf_counter()
        grid = voxelize(realization, cfg.resolution)
        log.info("voxelized %s at n=%d in %.2f s", rve_id, cfg.resolution,
                 time.perf_counter() - t0)
    failed_contrasts = 0
    for contrast in sorted(cfg.contrasts):
        materials, inclusion_mat = _materials_for(
            realization, cfg.matrix, contrast
        )
        baseline = None
        if want_fft:
            t0 = time.perf_counter()
            try:
                c_fft = fftmod.homogenized_stiffness_fft(
                    grid, materials, cfg.solver
                )
                baseline = report.effective_moduli(c_fft, cfg.matrix)
                rows.append(report.baseline_row(rve_id, contrast, baseline))
                log.info("fft contrast %g done in %.1f s", contrast,
                         time.perf_counter() - t0)
            except fftmod.NonConvergence as exc:
                log.warning("fft contrast %g failed: %s", contrast, exc)
                rows.append(report.failed_row(rve_id, report.FFT_MODEL,
                                              contrast))
                failed_contrasts += 1
        families = mf.families_from_realization(realization, inclusion_mat)
        for model in meanfield_models:
            t0 = time.perf_counter()
            try:
                c_model = _meanfield_for(model, families, cfg.matrix)
            except mf.NonConvergence as exc:
                log.warning("%s contrast %g failed: %s", model, contrast, exc)
                rows.append(report.failed_row(rve_id, model, contrast))
                continue
            moduli = report.effective_moduli(c_model, cfg.matrix)
            rows.append(report.model_row(rve_id, model, contrast, moduli,
                                         baseline))
            log.info("%s contrast %g done in %.2f s", model, contrast,
                     time.perf_counter() - t0)
    rows.sort(key=lambda r: (r.contrast, _MODEL_ORDER.get(r.model, 99)))
    return rows, failed_contrasts


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = build_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        realization, name = _resolve_realization(cfg, out_dir)
    except (gen.JammingError, gen.NonConvergence) as exc:
        log.error("generation failed: %s", exc)
        return EXIT_GENERATION
    fractions = gen.volume_fraction(realization)
    print(f"{name}: {len(realization.inclusions)} inclusions")
    for shape, frac in sorted(fractions.items()):
        target = realization.target_fractions.get(shape)
        target_txt = f" (target {target:.4f})" if target is not None else ""
        print(f"  {shape}: volume fraction {frac:.4f}{target_txt}")
    return EXIT_OK


def cmd_voxelize(args) -> int:
    cfg = build_config(args)
    if not cfg.rve_path:
        raise ConfigError("voxelize requires --realization")
    realization = gen.load(cfg.rve_path)
    grid = voxelize(realization, cfg.resolution)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_path = out_dir / f"{Path(cfg.rve_path).stem}_n{cfg.resolution}.raw"
    export_raw(grid, raw_path)
    print(f"wrote {raw_path} (+ sidecar)")
    for label, frac in sorted(grid.counted_fractions().items()):
        print(f"  {label}: voxel fraction {frac:.4f}")
    return EXIT_OK


def _print_moduli_table(rows) -> None:
    print("rve_id model contrast K_norm mu_norm E1_norm dK% dmu% dE%")
    for r in rows:
        if r.failed:
            print(f"{r.rve_id} {r.model} {r.contrast:g} FAILED")
            continue
        m = r.moduli
        deltas = (
            f" {r.delta_k:+.2f} {r.delta_mu:+.2f} {r.delta_e:+.2f}"
            if r.delta_k is not None else ""
        )
        print(
            f"{r.rve_id} {r.model} {r.contrast:g} "
            f"{m.k_norm:.6f} {m.mu_norm:.6f} {m.e1_norm:.6f}" + deltas
        )


def cmd_fft(args) -> int:
    cfg = build_config(args)
    if not cfg.rve_path:
        raise ConfigError("fft requires --realization")
    realization = gen.load(cfg.rve_path)
    rve_id = Path(cfg.rve_path).stem
    grid = voxelize(realization, cfg.resolution)
    out_dir = Path(cfg.out)
    rows = []
    failures = 0
    for contrast in sorted(cfg.contrasts):
        materials, _ = _materials_for(realization, cfg.matrix, contrast)
        logs: dict = {} if args.log_convergence else None
        try:
            c_fft = fftmod.homogenized_stiffness_fft(
                grid, materials, cfg.solver, residual_logs=logs
            )
        except fftmod.NonConvergence as exc:
            log.warning("contrast %g failed: %s", contrast, exc)
            rows.append(report.failed_row(rve_id, report.FFT_MODEL, contrast))
            failures += 1
            continue
        moduli = report.effective_moduli(c_fft, cfg.matrix)
        rows.append(report.baseline_row(rve_id, contrast, moduli))
        if logs is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            for case, history in logs.items():
                path = out_dir / (
                    f"{rve_id}_c{contrast:g}_case{case}_convergence.csv"
                )
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write("iteration,residual\n")
                    for k, res in enumerate(history, start=1):
                        fh.write(f"{k},{res:.9e}\n")
    _print_moduli_table(rows)
    if args.csv:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{rve_id}_fft.csv"
        report.write_csv(rows, path)
        print(f"wrote {path}")
    return EXIT_SOLVER if failures == len(cfg.contrasts) else EXIT_OK


def cmd_meanfield(args) -> int:
    cfg = build_config(args)
    if not cfg.rve_path:
        raise ConfigError("meanfield requires --realization")
    models = [m for m in cfg.models if m != "fft"]
    if not models:
        raise ConfigError("no mean-field models requested")
    realization = gen.load(cfg.rve_path)
    rve_id = Path(cfg.rve_path).stem
    rows = []
    for contrast in sorted(cfg.contrasts):
        _, inclusion_mat = _materials_for(realization, cfg.matrix, contrast)
        families = mf.families_from_realization(realization, inclusion_mat)
        for model in models:
            try:
                c_model = _meanfield_for(model, families, cfg.matrix)
            except mf.NonConvergence as exc:
                log.warning("%s contrast %g failed: %s", model, contrast, exc)
                rows.append(report.failed_row(rve_id, model, contrast))
                continue
            moduli = report.effective_moduli(c_model, cfg.matrix)
            rows.append(report.model_row(rve_id, model, contrast, moduli, None))
    _print_moduli_table(rows)
    if args.csv:
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{rve_id}_meanfield.csv"
        report.write_csv(rows, path)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        realization, rve_id = _resolve_realization(cfg, out_dir)
    except (gen.JammingError, gen.NonConvergence) as exc:
        log.error("generation failed: %s", exc)
        return EXIT_GENERATION
    t0 = time.perf_counter()
    rows, failed_contrasts = run_sweep(cfg, rve_id, realization)
    log.info("sweep finished in %.1f s", time.perf_counter() - t0)
    csv_path = out_dir / f"{rve_id}_sweep.csv"
    report.write_csv(rows, csv_path)
    print(f"wrote {csv_path}")
    if cfg.figures:
        from rvehom.figures import render_sweep_figures

        for path in render_sweep_figures(rows, out_dir, rve_id):
            print(f"wrote {path}")
    _print_moduli_table(rows)
    if "fft" in cfg.models and failed_contrasts == len(cfg.contrasts):
        return EXIT_SOLVER
    return EXIT_OK


def _validate_checks(quadrature: int | None):
    """Analytic-oracle suite; yields (name, max deviation, tolerance)."""
    nu = 1.0 / 3.0
    matrix = IsotropicMaterial(1.0, nu)
    quad_kwargs = {}
    if quadrature:
        quad_kwargs = {"n_polar": quadrature, "n_azimuth": 2 * quadrature}

    c_m = iso_stiffness(matrix)
    s = mf.eshelby_tensor(c_m, 1.0, 1.0, 1.0, **quad_kwargs).components
    s1111 = (7.0 - 5.0 * nu) / (15.0 * (1.0 - nu))
    s1122 = (5.0 * nu - 1.0) / (15.0 * (1.0 - nu))
    dev = max(abs(s[0, 0, 0, 0] - s1111), abs(s[0, 0, 1, 1] - s1122))
    yield "sphere-eshelby", dev, 1e-6

    inclusion = IsotropicMaterial(10.0, nu)
    fam = [mf.InclusionFamily(0.3, inclusion, (1.0, 1.0, 1.0))]
    c_mt = _meanfield_for("mt", fam, matrix, quadrature)
    em = report.effective_moduli(c_mt, matrix)
    km, gm, ki, gi = (matrix.bulk, matrix.shear, inclusion.bulk,
                      inclusion.shear)
    f = 0.3
    k_hs = km + f / (1.0 / (ki - km) + 3.0 * (1.0 - f) / (3.0 * km + 4.0 * gm))
    g_hs = gm + f / (
        1.0 / (gi - gm)
        + 6.0 * (1.0 - f) * (km + 2.0 * gm) / (5.0 * gm * (3.0 * km + 4.0 * gm))
    )
    dev = max(abs(em.k_eff - k_hs), abs(em.mu_eff - g_hs))
    yield "mori-tanaka-bound", dev, 1e-6

    n = 16
    phases = np.zeros((n, n, n), dtype=np.uint8)
    phases[n // 2:, :, :] = 1
    from rvehom.voxels import VoxelGrid

    grid = VoxelGrid(n, phases, 1.0, {0: "matrix", 1: "layer"})
    materials = {"matrix": matrix, "layer": inclusion}
    c_lam = fftmod.homogenized_stiffness_fft(
        grid, materials, fftmod.SolverSettings(tolerance=1e-10)
    ).to_voigt()
    lam = (matrix.lame_lambda, inclusion.lame_lambda)
    mu = (matrix.shear, inclusion.shear)
    p = tuple(la + 2 * m for la, m in zip(lam, mu))
    avg = lambda v: 0.5 * v[0] + 0.5 * v[1]  # noqa: E731
    c1111 = 1.0 / avg(tuple(1.0 / x for x in p))
    c1212 = 1.0 / avg(tuple(1.0 / m for m in mu))
    dev = max(abs(c_lam[0, 0] - c1111) / c1111,
              abs(c_lam[5, 5] - c1212) / c1212)
    yield "fft-laminate", dev, 1e-6

    spec = gen.RveSpec(sphere_count=2, sphere_fraction=0.1)
    realization = gen.rsa_generate(spec, seed=7)
    grid = voxelize(realization, 16)
    materials = {"matrix": matrix, "sphere": matrix}
    em = report.effective_moduli(
        fftmod.homogenized_stiffness_fft(grid, materials), matrix
    )
    fams = mf.families_from_realization(realization, matrix)
    devs = [abs(em.k_norm - 1), abs(em.mu_norm - 1), abs(em.e1_norm - 1)]
    for model in ("mt", "lielens", "nsc"):
        emm = report.effective_moduli(
            _meanfield_for(model, fams, matrix, quadrature), matrix
        )
        devs += [abs(emm.k_norm - 1), abs(emm.mu_norm - 1),
                 abs(emm.e1_norm - 1)]
    yield "contrast-one-identity", max(devs), 1e-4


def cmd_validate(args) -> int:
    failures = 0
    for name, dev, tol in _validate_checks(args.quadrature):
        status = "PASS" if dev <= tol else "FAIL"
        if status == "FAIL":
            failures += 1
        print(f"{status} {name}: max deviation {dev:.3e} (tolerance {tol:g})")
    return EXIT_OK if failures == 0 else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON study config; flags override")
    sub.add_argument("--seed", type=int, help="generator seed")
    sub.add_argument("--resolution", type=int, help="voxels per cell edge")
    sub.add_argument("--contrasts",
                     help="comma list of stiffness contrasts, e.g. 1,10,100")
    sub.add_argument("--models", help="comma list from: fft,mt,lielens,nsc")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--scheme", choices=("basic", "accelerated"),
                     help="fixed-point scheme")
    sub.add_argument("--tolerance", type=float,
                     help="solver equilibrium tolerance")
    sub.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvehom",
        description=(
            "Generate periodic particle composites and compare their "
            "homogenized stiffness across full-field and mean-field methods."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("generate", help="create a packing and write its JSON")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="named cell composition")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser("voxelize", help="rasterize a packing to a phase grid")
    p.add_argument("--realization", help="packing JSON from 'generate'")
    _add_common(p)
    p.set_defaults(func=cmd_voxelize)

    p = subs.add_parser("fft", help="full-field effective moduli per contrast")
    p.add_argument("--realization", help="packing JSON from 'generate'")
    p.add_argument("--csv", action="store_true", help="also write a CSV")
    p.add_argument("--log-convergence", action="store_true",
                   help="write per-load-case residual CSVs")
    _add_common(p)
    p.set_defaults(func=cmd_fft)

    p = subs.add_parser("meanfield",
                        help="mean-field effective moduli per contrast")
    p.add_argument("--realization", help="packing JSON from 'generate'")
    p.add_argument("--csv", action="store_true", help="also write a CSV")
    _add_common(p)
    p.set_defaults(func=cmd_meanfield)

    p = subs.add_parser(
        "sweep",
        help="full comparison over contrasts; writes CSV and figures",
    )
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--realization", help="packing JSON from 'generate'")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("validate", help="run the analytic-oracle suite")
    p.add_argument("--quadrature", type=int,
                   help="override quadrature order (degraded runs)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False)
        else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except gen.JammingError as exc:
        log.error("%s", exc)
        return EXIT_GENERATION


if __name__ == "__main__":
    sys.exit(main())
