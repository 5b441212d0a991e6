"""Seeded experiment harness: instances, dynamics sweeps, CSV emission.

Reproducibility contract: all randomness flows from numpy's counter-based
Philox generator.  The experiment seed feeds a SeedSequence whose spawned
children drive the per-trial instance draws, so trial i's instance does
not depend on how many trials run, in which order, or on how many worker
threads are used.  Dynamics themselves are deterministic.  Floats are
written with repr (shortest round-trip form), so rerunning a config yields
byte-identical CSV files.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Instance
from .equilibrium import run_dynamics
from .errors import InvalidInstanceError
from .mechanisms import FPA, RFPA, RTRUTH, SPA, MechanismSpec

SETUPS = ("a", "b", "c", "d")

#: default alpha grid for the parameterized mechanisms
DEFAULT_ALPHAS = tuple(round(1.05 + 0.05 * k, 2) for k in range(20))

EXPERIMENT_COLUMNS = ["trial", "setup", "mechanism", "alpha", "converged",
                      "iterations", "lw_eq", "lw_opt", "poa", "gamma_achieved"]
SUMMARY_COLUMNS = ["setup", "mechanism", "alpha", "n_trials", "n_converged",
                   "n_not_converged", "mean_poa", "mean_lw_eq"]


def worker_count() -> int:
    """Worker pool size; the ARENA_THREADS environment variable overrides."""
    env = os.environ.get("ARENA_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


def gen_instance(setup: str, queries: int = 50, rng=None) -> Instance:
    """Draw one two-advertiser instance for the given setup.

    (a) uniform values in [0.3, 1] per query;
    (b) each advertiser independently draws all its values either from
        [1, 1.2] or from [0.3, 0.5], a fair coin per advertiser;
    (c) fixed two-query instance [[1, 0.01], [0.01, 0.99]];
    (d) fixed single-query instance [[1], [0.9]].
    """
    if setup in ("c", "d"):
        values = (np.array([[1.0, 0.01], [0.01, 0.99]]) if setup == "c"
                  else np.array([[1.0], [0.9]]))
        return Instance(values=values, targets=np.ones(2))
    if setup not in SETUPS:
        raise InvalidInstanceError(f"unknown setup {setup!r}")
    if rng is None:
        rng = np.random.default_rng()
    if setup == "a":
        values = rng.uniform(0.3, 1.0, size=(2, queries))
    else:
        rows = []
        for _ in range(2):
            lo, hi = (1.0, 1.2) if rng.random() < 0.5 else (0.3, 0.5)
            rows.append(rng.uniform(lo, hi, size=queries))
        values = np.vstack(rows)
    return Instance(values=values, targets=np.ones(2))


@dataclass(frozen=True)
class ExperimentConfig:
    setup: str = "a"
    mechanisms: tuple = (SPA, RFPA, RTRUTH)
    alphas: tuple = DEFAULT_ALPHAS
    trials: int = 20
    queries: int = 50
    seed: int = 7
    max_rounds: int = 500
    out_dir: str | None = None

    def mechanism_specs(self) -> list[MechanismSpec]:
        specs = []
        for kind in self.mechanisms:
            if kind == SPA:
                specs.append(MechanismSpec.spa())
            elif kind == FPA:
                specs.append(MechanismSpec.fpa())
            elif kind == RFPA:
                specs.extend(MechanismSpec.rfpa(a) for a in self.alphas)
            elif kind == RTRUTH:
                specs.extend(MechanismSpec.rtruth(a) for a in self.alphas)
            else:
                raise InvalidInstanceError(f"unknown mechanism {kind!r}")
        return specs


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: list
    csv_path: Path | None = None
    summary_path: Path | None = None
    plot_paths: list = field(default_factory=list)


def _trial_rows(args) -> list:
    config, trial = args
    child = np.random.SeedSequence(config.seed).spawn(config.trials)[trial]
    rng = np.random.Generator(np.random.Philox(child))
    instance = gen_instance(config.setup, config.queries, rng)
    rows = []
    for spec in config.mechanism_specs():
        rep = run_dynamics(instance, spec, max_rounds=config.max_rounds)
        rows.append({
            "trial": trial,
            "setup": config.setup,
            "mechanism": spec.kind,
            "alpha": "" if spec.alpha is None else repr(float(spec.alpha)),
            "converged": str(rep.converged),
            "iterations": rep.rounds,
            "lw_eq": repr(float(rep.lw_eq)),
            "lw_opt": repr(float(rep.lw_opt)),
            "poa": repr(float(rep.poa)),
            "gamma_achieved": repr(float(rep.gamma_achieved)),
        })
    return rows


def summarize(rows: list) -> list:
    """Aggregate mean PoA per (setup, mechanism, alpha) over converged
    trials; non-converged runs are excluded from means and counted."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["setup"], r["mechanism"], r["alpha"]), []).append(r)
    out = []
    for (setup, mech, alpha), rs in groups.items():
        conv = [r for r in rs if r["converged"] == "True"]
        poas = [float(r["poa"]) for r in conv]
        lws = [float(r["lw_eq"]) for r in conv]
        out.append({
            "setup": setup, "mechanism": mech, "alpha": alpha,
            "n_trials": len(rs), "n_converged": len(conv),
            "n_not_converged": len(rs) - len(conv),
            "mean_poa": repr(float(np.mean(poas))) if poas else "",
            "mean_lw_eq": repr(float(np.mean(lws))) if lws else "",
        })
    out.sort(key=lambda r: (r["setup"], r["mechanism"],
                            float(r["alpha"]) if r["alpha"] else 0.0))
    return out


def write_csv(path: Path, rows: list, columns: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def run_experiment(config: ExperimentConfig, *, plots: bool = True) -> ExperimentResult:
    """Run the full (mechanism, alpha, trial) grid for one setup.

    Emits experiment_<setup>.csv (one row per run) plus the per-group
    summary CSV, and renders the mean-PoA-versus-alpha plot when an output
    directory is configured.
    """
    if config.setup in ("c", "d"):
        config = replace(config, queries=2 if config.setup == "c" else 1)
    jobs = [(config, t) for t in range(config.trials)]
    workers = worker_count()
    if workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial_rows, jobs))
    else:
        per_trial = [_trial_rows(j) for j in jobs]
    rows = [r for chunk in per_trial for r in chunk]
    summary = summarize(rows)

    csv_path = summary_path = None
    plot_paths = []
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"experiment_{config.setup}.csv"
        summary_path = out / f"experiment_{config.setup}_summary.csv"
        write_csv(csv_path, rows, EXPERIMENT_COLUMNS)
        write_csv(summary_path, summary, SUMMARY_COLUMNS)
        if plots:
            from .plots import plot_poa_curves
            plot_paths.append(plot_poa_curves(
                summary, config.setup, out / f"experiment_{config.setup}.png"))
    return ExperimentResult(config=config, rows=rows, summary=summary,
                            csv_path=csv_path, summary_path=summary_path,
                            plot_paths=plot_paths)


# ---------------------------------------------------------------------------
# bound and lower-bound reports
# ---------------------------------------------------------------------------

BOUND_COLUMNS = ["alpha", "gamma", "beta", "g", "term_eta_alpha", "term_gamma", "f"]
LB_COLUMNS = ["kind", "alpha", "b1", "b2", "eps", "predicted_ratio",
              "measured_ratio", "ratio_rel_err", "limit_ratio", "gamma", "gamma_ok"]


def run_bound_report(out_dir, variant: str = "rfpa", alpha: float = 1.4,
                     gamma: float | None = None, *, beta_points: int = 4096,
                     plots: bool = True):
    """Evaluate the bound at (alpha, gamma) and dump the beta curve as CSV.

    gamma defaults to the best weight found at that alpha.  Returns the
    evaluation plus the written paths.
    """
    from .bounds import evaluate_welfare_bound, optimize_welfare_bound

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if gamma is None:
        gamma = optimize_welfare_bound(variant, alpha=alpha).gamma
    ev = evaluate_welfare_bound(alpha, gamma, variant, beta_points=beta_points)
    rows = [{
        "alpha": repr(float(ev.alpha)),
        "gamma": repr(float(ev.gamma)),
        "beta": repr(float(b)),
        "g": repr(float(g)),
        "term_eta_alpha": repr(float(ev.term_eta_alpha)),
        "term_gamma": repr(float(ev.term_gamma)),
        "f": repr(float(ev.f_value)),
    } for b, g in zip(ev.betas, ev.g_curve)]
    csv_path = out / f"bounds_{variant}.csv"
    write_csv(csv_path, rows, BOUND_COLUMNS)
    paths = [csv_path]
    if plots:
        from .plots import plot_bound_components
        paths.append(plot_bound_components(ev, out / f"bounds_{variant}.png"))
    return ev, paths


def run_lower_bound_report(out_dir, kind: str = "rtruth", *, alphas=None,
                           eps: float = 1e-3, b1: float = 1.0, b2_list=None,
                           gamma: float = 1e-2, plots: bool = True):
    """Generate and verify lower-bound instances; dump one CSV row each.

    kind rtruth sweeps alpha; kinds fpa/spa sweep the large bid b2.
    """
    from .bounds import (make_deterministic_lb_instance, make_rtruth_lb_instance,
                         rtruth_lower_bound_ratio, verify_lower_bound)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    if kind == "rtruth":
        if alphas is None:
            alphas = [round(1.1 + 0.1 * k, 10) for k in range(10)]
        for a in alphas:
            lb = make_rtruth_lb_instance(float(a), eps)
            chk = verify_lower_bound(lb)
            rows.append({
                "kind": kind, "alpha": repr(float(a)), "b1": "", "b2": "",
                "eps": repr(float(eps)),
                "predicted_ratio": repr(float(lb.predicted_ratio)),
                "measured_ratio": repr(float(chk.measured_ratio)),
                "ratio_rel_err": repr(float(chk.ratio_rel_err)),
                "limit_ratio": repr(float(rtruth_lower_bound_ratio(float(a)))),
                "gamma": repr(float(lb.gamma)),
                "gamma_ok": str(chk.gamma_check.is_equilibrium),
            })
    elif kind in ("fpa", "spa"):
        if b2_list is None:
            b2_list = [1e2, 1e3, 1e4]
        for b2 in b2_list:
            lb = make_deterministic_lb_instance(kind, b1=b1, b2=float(b2),
                                                eps=eps, gamma=gamma)
            chk = verify_lower_bound(lb)
            rows.append({
                "kind": kind, "alpha": "", "b1": repr(float(b1)),
                "b2": repr(float(b2)), "eps": repr(float(eps)),
                "predicted_ratio": repr(float(lb.predicted_ratio)),
                "measured_ratio": repr(float(chk.measured_ratio)),
                "ratio_rel_err": repr(float(chk.ratio_rel_err)),
                "limit_ratio": repr(2.0),
                "gamma": repr(float(lb.gamma)),
                "gamma_ok": str(chk.gamma_check.is_equilibrium),
            })
    else:
        raise InvalidInstanceError(f"unknown lower-bound kind {kind!r}")
    csv_path = out / f"lower_bound_{kind}.csv"
    write_csv(csv_path, rows, LB_COLUMNS)
    paths = [csv_path]
    if plots:
        from .plots import plot_lower_bound_ratios
        paths.append(plot_lower_bound_ratios(rows, kind, out / f"lower_bound_{kind}.png"))
    return rows, paths
