"""Figure rendering for sweep reports.

Renders the normalized effective moduli and the relative deviations as
functions of the stiffness contrast, one line per model, to PNG files next
to the delimited output.  Uses the non-interactive backend so the functions
are safe in headless runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from rvehom.report import ComparisonRow, FFT_MODEL  # noqa: E402

_MODULI_FIELDS = (
    ("k_norm", r"$K_\mathrm{eff}/K_m$"),
    ("mu_norm", r"$\mu_\mathrm{eff}/\mu_m$"),
    ("e1_norm", r"$E_\mathrm{1,eff}/E_m$"),
)
_DELTA_FIELDS = (
    ("delta_k", r"$\delta K$ (%)"),
    ("delta_mu", r"$\delta\mu$ (%)"),
    ("delta_e", r"$\delta E$ (%)"),
)
_STYLE = {
    FFT_MODEL: dict(color="black", marker="s", linestyle="-"),
    "mt": dict(color="tab:blue", marker="o", linestyle="--"),
    "lielens": dict(color="tab:red", marker="^", linestyle="-."),
    "nsc": dict(color="tab:green", marker="d", linestyle=":"),
}


def _by_model(rows: list[ComparisonRow]) -> dict[str, list[ComparisonRow]]:
    grouped: dict[str, list[ComparisonRow]] = {}
    for row in rows:
        if row.failed or row.moduli is None:
            continue
        grouped.setdefault(row.model, []).append(row)
    for model_rows in grouped.values():
        model_rows.sort(key=lambda r: r.contrast)
    return grouped


def plot_moduli_vs_contrast(rows: list[ComparisonRow], path, title=None) -> None:
    grouped = _by_model(rows)
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6), sharex=True)
    for ax, (attr, label) in zip(axes, _MODULI_FIELDS):
        for model, model_rows in grouped.items():
            ax.plot(
                [r.contrast for r in model_rows],
                [getattr(r.moduli, attr) for r in model_rows],
                label=model,
                markersize=4,
                **_STYLE.get(model, {}),
            )
        ax.set_xlabel("contrast $E_i/E_m$")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=9)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_deviations_vs_contrast(rows: list[ComparisonRow], path, title=None) -> None:
    grouped = _by_model(rows)
    grouped.pop(FFT_MODEL, None)
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6), sharex=True)
    for ax, (attr, label) in zip(axes, _DELTA_FIELDS):
        for model, model_rows in grouped.items():
            pts = [(r.contrast, getattr(r, attr)) for r in model_rows
                   if getattr(r, attr) is not None]
            if not pts:
                continue
            ax.plot(
                [p[0] for p in pts],
                [p[1] for p in pts],
                label=model,
                markersize=4,
                **_STYLE.get(model, {}),
            )
        ax.axhline(0.0, color="gray", linewidth=0.8)
        ax.set_xlabel("contrast $E_i/E_m$")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=9)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figures(rows: list[ComparisonRow], out_dir, rve_id: str) -> list:
    """Write both sweep figures; returns the created paths."""
    from pathlib import Path

    out_dir = Path(out_dir)
    moduli_path = out_dir / f"{rve_id}_moduli.png"
    deviations_path = out_dir / f"{rve_id}_deviations.png"
    plot_moduli_vs_contrast(rows, moduli_path, title=rve_id)
    plot_deviations_vs_contrast(rows, deviations_path, title=rve_id)
    return [moduli_path, deviations_path]
