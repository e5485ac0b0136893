"""Command-line interface: solve single instances, run benchmark sweeps,
generate uniform instances and fit the transition policy.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .cascade import CascadeConfig, solve
from .core import BksRegistry, TspInstance, Metric, parse_tsplib, serialize_tsplib
from .eax import EaxConfig
from .errors import DegenerateSamples, TspCascadeError
from .ls import LsConfig
from .trace import ConvergenceTrace
from .transition import (LinearPolicy, collect_policy_samples, fit_policy,
                         gap_curve)

EXIT_PARSE_ERROR = 2
EXIT_CONFIG_ERROR = 3
EXIT_DEGENERATE = 4

SEED_START = 42
SEED_STEP = 60

CSV_HEADER = ["instance", "n", "run", "seed", "length", "bks", "gap", "t_trans",
              "wall_s"]


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-max", type=float, default=10.0, help="runtime budget (s)")
    p.add_argument("--t-trans", type=float, default=None,
                   help="fixed transition time (s); overrides the policy")
    p.add_argument("--gamma", type=int, default=20, help="neighbors per node")
    p.add_argument("--eta", type=float, default=0.5,
                   help="random cycle-selection probability")
    p.add_argument("--pop", type=int, default=100, help="population size")
    p.add_argument("--nch", type=int, default=30, help="offspring per pair")
    p.add_argument("--weights", type=str, default=None, help="UNGW weight file")
    p.add_argument("--policy", type=str, default=None, help="policy file")
    p.add_argument("--seed", type=int, default=SEED_START)
    p.add_argument("--iter-budget", type=int, default=None,
                   help="deterministic move-evaluation budget instead of wall time")


def _config_from_args(args, seed: int | None = None) -> CascadeConfig:
    policy = None
    if args.policy:
        policy = LinearPolicy.from_text(Path(args.policy).read_text())
    return CascadeConfig(
        t_max=args.t_max,
        t_trans_override=args.t_trans,
        ls=LsConfig(),
        eax=EaxConfig(population_size=args.pop, n_children=args.nch, eta=args.eta),
        gamma=args.gamma,
        weights_path=args.weights,
        policy=policy,
        seed=args.seed if seed is None else seed,
        iter_budget=args.iter_budget,
    )


def cmd_solve(args) -> int:
    try:
        inst = parse_tsplib(Path(args.instance).read_text())
    except (OSError, TspCascadeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    best, trace, report = solve(inst, cfg)
    out = {"name": inst.name, "n": inst.n, "length": best.length,
           "t_trans": report["t_trans"], "seed": cfg.seed}
    if args.bks is not None:
        out["gap"] = (best.length - args.bks) / args.bks
    print(json.dumps(out))
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_jsonl())
    return 0


def _bench_one(task):
    path, cfg_kwargs, run_idx, seed = task
    inst = parse_tsplib(Path(path).read_text())
    cfg = CascadeConfig(seed=seed, **cfg_kwargs)
    t0 = time.monotonic()
    best, trace, report = solve(inst, cfg)
    return {
        "instance": inst.name or Path(path).stem,
        "n": inst.n,
        "run": run_idx,
        "seed": seed,
        "length": best.length,
        "t_trans": report["t_trans"],
        "wall_s": time.monotonic() - t0,
        "trace": trace.to_jsonl(),
    }


def _worker_count() -> int:
    env = os.environ.get("UNICS_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def cmd_bench(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bks_reg = {}
    if args.bks_file:
        bks_reg = BksRegistry.parse(Path(args.bks_file).read_text()).lengths

    cfg_kwargs = dict(
        t_max=args.t_max, t_trans_override=args.t_trans,
        eax=EaxConfig(population_size=args.pop, n_children=args.nch,
                      eta=args.eta),
        gamma=args.gamma, weights_path=args.weights,
        iter_budget=args.iter_budget,
    )
    if args.policy:
        cfg_kwargs["policy"] = LinearPolicy.from_text(Path(args.policy).read_text())

    tasks = []
    for entry in manifest:
        for run_idx in range(args.runs):
            seed = args.seed + SEED_STEP * run_idx
            tasks.append((entry["path"], cfg_kwargs, run_idx, seed))

    rows, failures = [], []
    workers = _worker_count()
    if workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_bench_one, t): t for t in tasks}
            for fut in concurrent.futures.as_completed(futures):
                try:
                    rows.append(fut.result())
                except Exception as exc:  # per-instance failure is recorded
                    failures.append((futures[fut][0], str(exc)))
                    print(f"error: {futures[fut][0]}: {exc}", file=sys.stderr)
    else:
        for t in tasks:
            try:
                rows.append(_bench_one(t))
            except Exception as exc:
                failures.append((t[0], str(exc)))
                print(f"error: {t[0]}: {exc}", file=sys.stderr)
    if not rows:
        return 1
    rows.sort(key=lambda r: (r["instance"], r["run"]))

    bks_by_name = dict(bks_reg)
    for entry in manifest:
        if "bks" in entry:
            name = parse_tsplib(Path(entry["path"]).read_text()).name \
                or Path(entry["path"]).stem
            bks_by_name[name] = entry["bks"]

    traces: dict[str, dict[str, ConvergenceTrace]] = {}
    with open(out_dir / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in rows:
            bks = bks_by_name.get(row["instance"])
            gap = (row["length"] - bks) / bks if bks else ""
            writer.writerow([row["instance"], row["n"], row["run"], row["seed"],
                             row["length"], bks if bks else "", gap,
                             row["t_trans"], f"{row['wall_s']:.3f}"])
            traces.setdefault(row["instance"], {})[f"run{row['run']}"] = \
                ConvergenceTrace.from_jsonl(row["trace"])

    aggregates = {}
    for name in sorted({r["instance"] for r in rows}):
        lengths = [r["length"] for r in rows if r["instance"] == name]
        bks = bks_by_name.get(name)
        agg = {"best_length": min(lengths),
               "avg_length": sum(lengths) / len(lengths), "runs": len(lengths)}
        if bks:
            gaps = [(length - bks) / bks for length in lengths]
            agg["best_gap"] = min(gaps)
            agg["avg_gap"] = sum(gaps) / len(gaps)
            agg["new_best"] = min(lengths) < bks
        aggregates[name] = agg
    group = {}
    gapped = [a for a in aggregates.values() if "avg_gap" in a]
    if gapped:
        group = {"best_gap": sum(a["best_gap"] for a in gapped) / len(gapped),
                 "avg_gap": sum(a["avg_gap"] for a in gapped) / len(gapped)}
    report = {"instances": aggregates, "group": group,
              "failures": failures}
    (out_dir / "report.json").write_text(json.dumps(report, indent=2))

    if args.curves:
        horizon = max(1, int(round(args.t_max)))
        from .plots import plot_convergence, plot_gap_bars
        for name, per_run in traces.items():
            bks = bks_by_name.get(name)
            if bks:
                with open(out_dir / f"{name}_gap_curve.csv", "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["t"] + sorted(per_run))
                    curves = {label: gap_curve(tr, bks, horizon)
                              for label, tr in per_run.items()}
                    for t in range(horizon):
                        writer.writerow([t + 1] + [curves[lbl][t]
                                                   for lbl in sorted(per_run)])
            plot_convergence(per_run, bks, out_dir / f"{name}_convergence.png",
                             title=name)
        if gapped:
            plot_gap_bars({n: a for n, a in aggregates.items() if "avg_gap" in a},
                          out_dir / "gaps.png")
    return 0


def cmd_gen(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for idx in range(args.count):
        coords = np.floor(rng.random((args.n, 2)) * 1_000_000.0)
        name = f"uniform{args.n}_{idx}"
        inst = TspInstance(name=name, coords=coords, metric=Metric.EUC_2D)
        (out_dir / f"{name}.tsp").write_text(serialize_tsplib(inst))
        print(out_dir / f"{name}.tsp")
    return 0


def cmd_fit_policy(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    instances = [parse_tsplib(Path(e["path"]).read_text()) for e in manifest]
    bks = {}
    for inst, entry in zip(instances, manifest):
        if "bks" in entry:
            bks[inst.name] = entry["bks"]
    grid = [float(g) for g in args.grid.split(",")]

    base = dict(
        eax=EaxConfig(population_size=args.pop, n_children=args.nch,
                      eta=args.eta),
        gamma=args.gamma, weights_path=args.weights,
    )

    def solve_fn(inst, t_trans, budget):
        cfg = CascadeConfig(t_max=budget, t_trans_override=t_trans,
                            seed=args.seed, iter_budget=args.iter_budget, **base)
        _, trace, _ = solve(inst, cfg)
        return trace

    samples = collect_policy_samples(
        instances, grid, args.t_max, solve_fn,
        bks_lookup=lambda inst: bks.get(inst.name),
        interval=args.interval)
    for n, t in samples:
        print(f"sample: n={n} t_trans={t}")
    try:
        policy = fit_policy(samples)
    except DegenerateSamples as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    Path(args.out).write_text(policy.to_text())
    print(f"fitted: a={policy.slope} b={policy.intercept}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tspcascade",
        description="Cascaded TSP solver and benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one TSPLIB instance")
    p.add_argument("instance")
    _add_solver_flags(p)
    p.add_argument("--bks", type=int, default=None)
    p.add_argument("--trace-out", type=str, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a benchmark manifest")
    p.add_argument("manifest")
    _add_solver_flags(p)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", type=str, default="bench_out")
    p.add_argument("--bks-file", type=str, default=None)
    p.add_argument("--curves", action="store_true",
                   help="write per-second gap curves and figures")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate uniform instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=SEED_START)
    p.add_argument("--out", type=str, default=".")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit-policy", help="fit the transition-time policy")
    p.add_argument("manifest")
    _add_solver_flags(p)
    p.add_argument("--grid", type=str, required=True,
                   help="comma-separated transition times (s)")
    p.add_argument("--interval", type=float, default=1.0,
                   help="gap sampling interval (s)")
    p.add_argument("--out", type=str, default="policy.txt")
    p.set_defaults(func=cmd_fit_policy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "n", None) is not None and args.command == "gen" and args.n < 3:
        print("error: n must be >= 3", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
