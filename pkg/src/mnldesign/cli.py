"""Command-line front end: ``mnldesign {gen,design,bsi,bench-lmo,check}``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .assortment import true_gap
from .bsi import BsiConfig, run_bsi
from .design import frank_wolfe, init_design
from .lmo import BACKENDS, BudgetExceeded, lmo_brute, lmo_lifted
from .mnl import load_instance, save_instance
from .sim import Environment, gen_instance

SCHEMA_VERSION = 1
DESIGN_COLUMNS = ["backend", "iters", "g_cert", "eps_lift", "seconds"]
BSI_AGG_COLUMNS = ["N", "K", "backend", "mean_tau", "std_tau", "correct_frac"]
BENCH_COLUMNS = ["N", "K", "combinations", "backend", "mean_seconds", "std_seconds", "runs"]
BENCH_RUN_COLUMNS = ["N", "K", "backend", "seed", "seconds", "status", "value"]


# ----------------------------------------------------------------------------
# argument helpers


def parse_seeds(text: str) -> list:
    """'0-9' -> 0..9, '1,4,7' -> [1, 4, 7], '5' -> [5]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("no seeds given")
    return out


def worker_count(args) -> int:
    if getattr(args, "deterministic", False):
        return 1
    if getattr(args, "workers", None):
        return args.workers
    try:
        return max(1, int(os.environ.get("MNLDESIGN_WORKERS", "1")))
    except ValueError:
        return 1


def _add_instance_args(p, seed_default=0):
    g = p.add_argument_group("instance (load with --instance or generate)")
    g.add_argument("--instance", type=Path, help="instance JSON written by `gen`")
    g.add_argument("--n", type=int, default=10, help="number of arms N")
    g.add_argument("--k", type=int, default=2, help="capacity K")
    g.add_argument("--d", type=int, default=3, help="feature dimension d")
    g.add_argument("--b", type=float, default=1.0, help="parameter radius B")
    g.add_argument("--seed", type=int, default=seed_default, help="instance seed")
    g.add_argument("--gap-margin", type=float, default=1e-6,
                   help="reject instances whose revenue gap is below this")


def _instance(args):
    if args.instance is not None:
        return load_instance(args.instance)
    return gen_instance(args.n, args.k, args.d, args.b, args.seed, args.gap_margin)


def _common_flags(p):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--deterministic", action="store_true",
                   help="one worker, no wall-clock limits, no timing fields")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default: MNLDESIGN_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mnldesign",
                                description="Optimal designs and best-assortment identification "
                                            "for MNL choice models.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    _add_instance_args(g)
    g.add_argument("--out", type=Path, default=Path("instance.json"), help="output JSON path")

    d = sub.add_parser("design", help="run Frank-Wolfe at a nominal parameter")
    _add_instance_args(d)
    _common_flags(d)
    d.add_argument("--theta0", default="star",
                   help="'star' (theta*), 'zero', or a JSON file holding a list")
    d.add_argument("--backend", choices=BACKENDS, default="brute")
    d.add_argument("--epsilon", type=float, default=0.1)
    d.add_argument("--eps-lmo", type=float, default=0.0)
    d.add_argument("--iter-cap", type=int, default=10_000)
    d.add_argument("--bigm", choices=("tight", "coarse"), default="tight")
    d.add_argument("--lmo-timeout", type=float, default=120.0,
                   help="seconds per MILP call (ignored with --deterministic)")

    b = sub.add_parser("bsi", help="run best-assortment identification over seeds")
    _add_instance_args(b)
    _common_flags(b)
    b.add_argument("--seeds", type=parse_seeds, default=[0], help="e.g. 0-9 or 1,3,5")
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--lam", type=float, default=1.0)
    b.add_argument("--epsilon", type=float, default=0.1)
    b.add_argument("--eps-lmo", type=float, default=0.1)
    b.add_argument("--backend", choices=BACKENDS, default="brute")
    b.add_argument("--kappa-mode", choices=("oracle", "bound"), default="oracle")
    b.add_argument("--const-scale", type=float, default=0.1)
    b.add_argument("--round-cap", type=int, default=10_000_000)
    b.add_argument("--check-every", type=int, default=1,
                   help="evaluate the stopping rule every this many rounds")

    bl = sub.add_parser("bench-lmo", help="time one LMO call per backend on fresh designs")
    _common_flags(bl)
    bl.add_argument("--n", type=int, nargs="+", default=[30, 50])
    bl.add_argument("--k", type=int, nargs="+", default=[3, 4])
    bl.add_argument("--d", type=int, default=5)
    bl.add_argument("--b", type=float, default=1.0)
    bl.add_argument("--seeds", type=parse_seeds, default=list(range(10)))
    bl.add_argument("--backend", choices=BACKENDS, nargs="+", default=list(BACKENDS))
    bl.add_argument("--eps-lmo", type=float, default=0.1)
    bl.add_argument("--timeout", type=float, default=120.0,
                    help="seconds per LMO call; a timed-out cell is reported as --")

    c = sub.add_parser("check", help="run the oracle suite")
    c.add_argument("--only", nargs="+", help="run only these checks")
    c.add_argument("--list", action="store_true", help="list checks and exit")
    c.add_argument("--corrupt-bigm", type=int, metavar="SEED", default=None,
                   help="negative control: shrink one big-M constant before the MILP checks")
    c.add_argument("--out", type=Path, default=None, help="write the JSON manifest here")
    return p


# ----------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    inst = _instance(args)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(inst, args.out)
    S, gap = true_gap(inst)
    print(f"wrote {args.out}: N={inst.N} K={inst.K} d={inst.d} B={inst.B} "
          f"S*={list(S)} gap={gap:.6g}")
    return 0


def _theta0(value: str, inst):
    if value == "star":
        if inst.theta_star is None:
            raise SystemExit("instance has no theta_star; pass --theta0 zero or a file")
        return inst.theta_star
    if value == "zero":
        return np.zeros(inst.d)
    return np.asarray(json.loads(Path(value).read_text()), dtype=float)


def cmd_design(args) -> int:
    inst = _instance(args)
    theta0 = _theta0(args.theta0, inst)
    if args.backend == "milp" and not 0 < args.epsilon - args.eps_lmo / inst.d <= 1:
        raise SystemExit("--epsilon minus --eps-lmo/d must lie in (0, 1] for the milp backend")
    opts = {}
    if args.backend == "milp":
        opts = {"mode": args.bigm,
                "time_limit": None if args.deterministic else args.lmo_timeout}
    rep = frank_wolfe(inst, theta0, args.epsilon, args.backend, args.eps_lmo,
                      iter_cap=args.iter_cap, seed=args.seed, lmo_options=opts)
    args.out.mkdir(parents=True, exist_ok=True)
    data = rep.to_dict()
    data["schema"] = SCHEMA_VERSION
    if args.deterministic:
        data["seconds"] = 0.0
    with open(args.out / "fw_report.json", "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
    row = [args.backend, rep.iterations, repr(rep.final_g), repr(rep.eps_lift),
           "0" if args.deterministic else f"{rep.seconds:.3f}"]
    with open(args.out / "design_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DESIGN_COLUMNS)
        w.writerow(row)
    print(",".join(DESIGN_COLUMNS))
    print(",".join(str(x) for x in row))
    if not rep.certified:
        print(f"warning: stopped with status {rep.status}", file=sys.stderr)
    return 0


def _bsi_one(job):
    inst, cfg_kwargs, seed, out, deterministic = job
    cfg = BsiConfig(seed=seed, **cfg_kwargs)
    tr = run_bsi(Environment(inst, seed), cfg)
    tr.write_csv(out / f"trace_seed{seed}.csv")
    summ = tr.summary()
    summ["schema"] = SCHEMA_VERSION
    if deterministic:
        summ["seconds"] = 0.0
    with open(out / f"summary_seed{seed}.json", "w") as fh:
        json.dump(summ, fh, indent=1)
        fh.write("\n")
    return seed, tr.tau, tr.correct


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def cmd_bsi(args) -> int:
    inst = _instance(args)
    args.out.mkdir(parents=True, exist_ok=True)
    lmo_options = {}
    if args.backend == "milp" and not args.deterministic:
        lmo_options = {"time_limit": 120.0}
    cfg_kwargs = dict(delta=args.delta, lam=args.lam, eps=args.epsilon, eps_lmo=args.eps_lmo,
                      backend=args.backend, kappa_mode=args.kappa_mode,
                      const_scale=args.const_scale, round_cap=args.round_cap,
                      stop_check_every=args.check_every, lmo_options=lmo_options)
    BsiConfig(**cfg_kwargs).check_eps(inst.d)
    jobs = [(inst, cfg_kwargs, s, args.out, args.deterministic) for s in args.seeds]
    results = sorted(_map(_bsi_one, jobs, worker_count(args)))
    taus = np.array([r[1] for r in results], dtype=float)
    known = [r[2] for r in results if r[2] is not None]
    frac = float(np.mean(known)) if known else float("nan")
    row = [inst.N, inst.K, args.backend, repr(float(taus.mean())),
           repr(float(taus.std(ddof=1)) if taus.size > 1 else 0.0), repr(frac)]
    with open(args.out / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BSI_AGG_COLUMNS)
        w.writerow(row)
    for seed, tau, ok in results:
        print(f"seed={seed} tau={tau} correct={ok}")
    print(",".join(BSI_AGG_COLUMNS))
    print(",".join(str(x) for x in row))
    return 0


def _bench_one(job):
    """One (N, K, backend) cell over its seeds; stops at the first timeout."""
    N, K, d, B, backend, seeds, eps_lmo, timeout = job
    runs = []
    for seed in seeds:
        inst = gen_instance(N, K, d, B, seed)
        theta0 = inst.theta_star
        des = init_design(inst, theta0, seed=seed)
        t0 = time.perf_counter()
        status = "ok"
        value = float("nan")
        try:
            if backend == "brute":
                value = lmo_brute(inst, theta0, np.linalg.inv(des.M), time_limit=timeout).value
            elif backend == "lifted":
                value = lmo_lifted(inst, theta0, np.linalg.inv(des.Mt)).value
            else:
                from .milp import lmo_milp
                res = lmo_milp(inst, theta0, np.linalg.inv(des.M), eps_lmo, time_limit=timeout)
                value = res.value
                if res.stats["status"] not in ("optimal", "gap_reached"):
                    status = "timeout"
        except BudgetExceeded:
            status = "timeout"
        secs = time.perf_counter() - t0
        if timeout is not None and secs > timeout:
            status = "timeout"
        runs.append((N, K, backend, seed, secs, status, value))
        if status == "timeout":
            break
    return runs


def cmd_bench_lmo(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    timeout = None if args.deterministic else args.timeout
    jobs = [(N, K, args.d, args.b, be, args.seeds, args.eps_lmo, timeout)
            for N in args.n for K in args.k for be in args.backend]
    cells = _map(_bench_one, jobs, worker_count(args))
    runs = sorted((r for cell in cells for r in cell), key=lambda r: (r[0], r[1], r[2], r[3]))
    with open(args.out / "bench_lmo_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_RUN_COLUMNS)
        for N, K, be, seed, secs, status, value in runs:
            w.writerow([N, K, be, seed, "0" if args.deterministic else f"{secs:.6f}",
                        status, repr(value)])
    table = bench_table(runs)
    with open(args.out / "bench_lmo.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        w.writerows(table)
    print(",".join(BENCH_COLUMNS))
    for row in table:
        print(",".join(str(x) for x in row))
    return 0


def bench_table(runs) -> list:
    """Table rows per (N, K, backend): mean and sd of seconds, or -- after a timeout."""
    cells: dict = {}
    for N, K, be, seed, secs, status, _ in runs:
        cells.setdefault((N, K, be), []).append((secs, status))
    rows = []
    for (N, K, be), rs in sorted(cells.items()):
        if any(st == "timeout" for _, st in rs):
            rows.append([N, K, math.comb(N, K), be, "--", "--", len(rs)])
            continue
        t = np.array([s for s, _ in rs])
        sd = float(t.std(ddof=1)) if t.size > 1 else 0.0
        rows.append([N, K, math.comb(N, K), be, f"{t.mean():.6f}", f"{sd:.6f}", len(rs)])
    return rows


def cmd_check(args) -> int:
    from .checks import REGISTRY, corrupt_big_m, manifest, run_checks
    if args.list:
        for name, (module, _) in REGISTRY.items():
            print(f"{module}.{name}")
        return 0
    hook = None if args.corrupt_bigm is None else corrupt_big_m(args.corrupt_bigm)
    names = args.only
    if hook is not None and names is None:
        names = ["milp_exactness"]
    results = run_checks(names, bigm_hook=hook, log=sys.stdout)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed in {sum(r.seconds for r in results):.1f}s")
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(manifest(results))
    return 0 if n_ok == len(results) else 1


COMMANDS = {"gen": cmd_gen, "design": cmd_design, "bsi": cmd_bsi,
            "bench-lmo": cmd_bench_lmo, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
