"""Command-line entry point: ``twrs run | convergence | complexity``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict

from .sim import (DESIGNS, ExperimentScenario, aggregates_table, complexity_report,
                  convergence_traces, load_scenario, run_experiment)


def _cmd_run(args) -> int:
    scen = load_scenario(args.scenario)
    aggs, _, _ = run_experiment(scen, args.out, workers=args.workers)
    table = aggregates_table(aggs)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(table)
    sys.stdout.write(table)
    return 0


def _cmd_convergence(args) -> int:
    scen = load_scenario(args.scenario)
    designs = [d.strip() for d in args.designs.split(",") if d.strip()]
    for d in designs:
        if d not in DESIGNS or d in ("none", "bs"):
            raise SystemExit("convergence needs an iterative design, got %r" % d)
    rows = convergence_traces(scen, designs, P_db=args.P_db, tol=args.tol)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["design", "realization", "iteration", "objective"])
        for d, r, i, v in rows:
            w.writerow([d, r, i, "%.10g" % v])
    last = defaultdict(dict)
    for d, r, i, _ in rows:
        last[d][r] = i
    for d in designs:
        its = sorted(last[d].values())
        if its:
            print("%-10s runs=%d median_iterations=%d max=%d"
                  % (d, len(its), its[len(its) // 2], its[-1]))
    return 0


def _cmd_complexity(args) -> int:
    if args.scenario:
        scen = load_scenario(args.scenario)
        N, M, K, samples = scen.N, scen.M, scen.K, scen.rand_samples
        eps = args.eps if args.eps is not None else scen.config.eps
    else:
        N, M, K, samples = args.N, args.M, args.K, args.samples
        eps = args.eps if args.eps is not None else 1e-7
    rep = complexity_report(N, M, K, eps, l_RS=args.l_rs, l_J=args.l_j, samples=samples)
    rep.update({"N": N, "M": M, "K": K})
    print(json.dumps(rep, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twrs", description="Two-way relay precoding simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo sweep, one CSV row per trial")
    r.add_argument("--scenario", required=True, help="JSON or key=value scenario file")
    r.add_argument("--out", required=True, help="per-trial CSV output path")
    r.add_argument("--workers", type=int, default=None, help="process count (default: scenario)")
    r.add_argument("--summary", default=None, help="also write per-point aggregates here")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("convergence", help="objective traces per iteration")
    c.add_argument("--scenario", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--designs", default="rs-mse,joint-mse")
    c.add_argument("--P-db", dest="P_db", type=float, default=None,
                   help="grid point (default: first of snr_grid_db)")
    c.add_argument("--tol", type=float, default=None)
    c.set_defaults(func=_cmd_convergence)

    x = sub.add_parser("complexity", help="closed-form design complexity estimates")
    x.add_argument("--scenario", default=None)
    x.add_argument("--N", type=int, default=2)
    x.add_argument("--M", type=int, default=2)
    x.add_argument("--K", type=int, default=2)
    x.add_argument("--eps", type=float, default=None)
    x.add_argument("--l-rs", dest="l_rs", type=float, default=20)
    x.add_argument("--l-j", dest="l_j", type=float, default=10)
    x.add_argument("--samples", type=int, default=2000)
    x.set_defaults(func=_cmd_complexity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print("twrs: error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
