"""Command line entry points.

Subcommands:

* run     seeded dynamics sweep over a (mechanism, alpha, trial) grid
* bounds  evaluate the welfare bound and dump its beta curve
* lb      generate and verify a lower-bound instance family
* verify  execute the acceptance checks and print one line per criterion
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (DEFAULT_ALPHAS, ExperimentConfig, run_bound_report,
                          run_experiment, run_lower_bound_report)


def parse_alphas(text: str) -> tuple:
    """Parse an alpha grid given either as lo:hi:step or as a comma list."""
    text = text.strip()
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(f"bad alpha range {text!r}")
        n = int((hi - lo) / step + 1e-9) + 1
        return tuple(round(lo + k * step, 10) for k in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _add_run(sub):
    p = sub.add_parser("run", help="run equilibrium dynamics over a trial grid")
    p.add_argument("--setup", default="a", choices=("a", "b", "c", "d"))
    p.add_argument("--mechanisms", default="spa,rfpa,rtruth",
                   help="comma list from spa,fpa,rfpa,rtruth")
    p.add_argument("--alphas", type=parse_alphas, default=DEFAULT_ALPHAS,
                   help="lo:hi:step or comma list, for rfpa/rtruth")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--max-rounds", type=int, default=500)
    p.add_argument("--out", default="results")
    p.add_argument("--no-plots", action="store_true")


def _add_bounds(sub):
    p = sub.add_parser("bounds", help="evaluate the liquid-welfare bound")
    p.add_argument("--variant", default="rfpa", choices=("rfpa", "rtruth"))
    p.add_argument("--alpha", type=float, default=1.4)
    p.add_argument("--gamma", type=float, default=None,
                   help="weight on the has-a-share term; optimized when omitted")
    p.add_argument("--beta-points", type=int, default=4096)
    p.add_argument("--out", default="results")
    p.add_argument("--no-plots", action="store_true")


def _add_lb(sub):
    p = sub.add_parser("lb", help="generate and verify lower-bound instances")
    p.add_argument("--kind", default="rtruth", choices=("rtruth", "fpa", "spa"))
    p.add_argument("--alpha", type=float, default=1.4)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--b1", type=float, default=1.0)
    p.add_argument("--b2", type=float, default=None,
                   help="single large bid; default sweeps 1e2,1e3,1e4")
    p.add_argument("--gamma", type=float, default=1e-2)
    p.add_argument("--out", default="results")
    p.add_argument("--no-plots", action="store_true")


def _add_verify(sub):
    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="results/verify")
    p.add_argument("--criteria", default=None,
                   help="comma list of criterion numbers; default all")


def _cmd_run(args) -> int:
    mechanisms = tuple(m.strip() for m in args.mechanisms.split(",") if m.strip())
    config = ExperimentConfig(setup=args.setup, mechanisms=mechanisms,
                              alphas=tuple(args.alphas), trials=args.trials,
                              queries=args.queries, seed=args.seed,
                              max_rounds=args.max_rounds, out_dir=args.out)
    result = run_experiment(config, plots=not args.no_plots)
    print(f"wrote {result.csv_path}")
    print(f"wrote {result.summary_path}")
    for p in result.plot_paths:
        print(f"wrote {p}")
    for row in result.summary:
        label = row["mechanism"] if row["alpha"] == "" else \
            f"{row['mechanism']}({row['alpha']})"
        mean = row["mean_poa"] if row["mean_poa"] else "n/a"
        print(f"  {row['setup']} {label}: mean PoA {mean} "
              f"({row['n_converged']}/{row['n_trials']} converged)")
    return 0


def _cmd_bounds(args) -> int:
    ev, paths = run_bound_report(args.out, args.variant, args.alpha, args.gamma,
                                 beta_points=args.beta_points,
                                 plots=not args.no_plots)
    for p in paths:
        print(f"wrote {p}")
    print(f"{ev.variant} alpha={ev.alpha:g} gamma={ev.gamma:g}: "
          f"f={ev.f_value!r} (PoA bound {ev.poa_bound!r})")
    print(f"  sure-win term {ev.term_eta_alpha!r}, gamma term {ev.term_gamma!r}, "
          f"min_beta g {ev.g_min!r} at beta={ev.g_argmin!r}")
    return 0


def _cmd_lb(args) -> int:
    b2_list = None if args.b2 is None else [args.b2]
    rows, paths = run_lower_bound_report(
        args.out, args.kind, alphas=[args.alpha] if args.kind == "rtruth" else None,
        eps=args.eps, b1=args.b1, b2_list=b2_list, gamma=args.gamma,
        plots=not args.no_plots)
    for p in paths:
        print(f"wrote {p}")
    ok = True
    for r in rows:
        tag = f"alpha={r['alpha']}" if r["alpha"] else f"b2={r['b2']}"
        print(f"  {r['kind']} {tag}: predicted {r['predicted_ratio']} "
              f"measured {r['measured_ratio']} gamma_ok={r['gamma_ok']}")
        ok = ok and r["gamma_ok"] == "True"
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    from .acceptance import run_acceptance

    numbers = None
    if args.criteria:
        numbers = [int(x) for x in args.criteria.split(",") if x.strip()]
    results = run_acceptance(out_dir=args.out, seed=args.seed, numbers=numbers)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(r.line)
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="arena",
        description="prior-free auto-bidding auction simulator and verifier")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_bounds(sub)
    _add_lb(sub)
    _add_verify(sub)
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "bounds": _cmd_bounds,
               "lb": _cmd_lb, "verify": _cmd_verify}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
