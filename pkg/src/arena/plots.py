"""Figure rendering for experiment and bound reports.

All entry points take precomputed rows or evaluations, write a PNG next to
the corresponding CSV, and return the written path.  The Agg backend is
forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _mechanism_series(summary_rows):
    """Split summary rows into {spa: poa} style scalars and per-alpha curves."""
    flat = {}
    curves = {}
    for r in summary_rows:
        if r["mean_poa"] == "":
            continue
        poa = float(r["mean_poa"])
        if r["alpha"] == "":
            flat[r["mechanism"]] = poa
        else:
            curves.setdefault(r["mechanism"], []).append((float(r["alpha"]), poa))
    for mech in curves:
        curves[mech].sort()
    return flat, curves


def plot_poa_curves(summary_rows, setup: str, path) -> Path:
    """Mean PoA versus alpha, one curve per parameterized mechanism, with
    flat mechanisms (spa/fpa) drawn as horizontal reference lines."""
    flat, curves = _mechanism_series(summary_rows)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for mech, pts in sorted(curves.items()):
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker="o", markersize=3, label=mech)
    for mech, poa in sorted(flat.items()):
        ax.axhline(poa, linestyle="--", linewidth=1, label=f"{mech} (flat)")
    ax.set_xlabel("alpha")
    ax.set_ylabel("mean PoA over converged trials")
    ax.set_title(f"setup ({setup})")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bound_components(evaluation, path) -> Path:
    """The three pieces whose pointwise minimum the bound maximizes:
    the per-beta shared-query curve (dash-dot), the sure-win horizontal
    (dotted), and the gamma horizontal (dashed), plus the solid 1/1.8
    reference line."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(evaluation.betas, evaluation.g_curve, linestyle="-.",
            label="shared-query g(beta)")
    ax.axhline(evaluation.term_eta_alpha, linestyle=":",
               label="sure-win term")
    ax.axhline(evaluation.term_gamma, linestyle="--", label="gamma term")
    ax.axhline(1.0 / 1.8, linestyle="-", linewidth=1, color="black",
               label="1/1.8 reference")
    ax.set_xscale("log")
    ax.set_xlabel("beta")
    ax.set_ylabel("welfare fraction")
    ax.set_title(f"{evaluation.variant} bound, alpha={evaluation.alpha:g}, "
                 f"gamma={evaluation.gamma:g}, f={evaluation.f_value:.6f}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_lower_bound_ratios(rows, kind: str, path) -> Path:
    """Measured versus predicted PoA for generated lower-bound instances."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if kind == "rtruth":
        xs = [float(r["alpha"]) for r in rows]
        ax.set_xlabel("alpha")
        ax.plot(xs, [float(r["limit_ratio"]) for r in rows], linestyle="-.",
                label="eps -> 0 limit")
    else:
        xs = [float(r["b2"]) for r in rows]
        ax.set_xscale("log")
        ax.set_xlabel("large bid b2")
        ax.axhline(2.0, linestyle="-.", label="limit 2")
    ax.plot(xs, [float(r["measured_ratio"]) for r in rows], marker="o",
            label="measured")
    ax.plot(xs, [float(r["predicted_ratio"]) for r in rows], marker="x",
            linestyle="none", label="predicted")
    ax.set_ylabel("lw_opt / lw_eq")
    ax.set_title(f"{kind} lower-bound instances")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
