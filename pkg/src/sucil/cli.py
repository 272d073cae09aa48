"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 the run finished
without a certificate (evaluation budget exhausted) or a convexity probe
found a violation.  Results go to ``--out`` or, when omitted, to the
directory named by ``SUCIL_OUTPUT_DIR`` (default ``./sucil-results``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path


from . import bench
from .errors import SucilError
from .geometry import MEMBER_TOL, POISED_TOL
from .problems import PROBLEM_NAMES, _REGISTRY, convexity_probe, get_problem
from .solver import BOUND_TOL, VARIANTS, VariantConfig, initial_stencil, solve, variant_name
from .underestimator import DEFAULT_MEMORY_BUDGET, Domain

OUTPUT_ENV = "SUCIL_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "sucil-results"))


def _target(path, default_name: str, force: bool) -> Path:
    p = Path(path) if path else _output_dir() / default_name
    if p.exists() and not force:
        raise UsageError(f"{p} exists; pass --force to overwrite")
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _domain(args) -> Domain:
    lo, hi = args.box
    if lo > hi:
        raise UsageError(f"--box lower {lo} exceeds upper {hi}")
    return Domain.box(args.n, lo, hi)


def _variant_list(text: str) -> list:
    try:
        return [variant_name(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _add_common(p, problem=True):
    if problem:
        p.add_argument("--problem", required=True, help=f"one of {', '.join(PROBLEM_NAMES)}")
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--box", type=int, nargs=2, default=(-4, 4), metavar=("LO", "HI"))
    p.add_argument("--abhi-cyclic", action="store_true",
                   help="pair the last abhi coordinate with the first")
    p.add_argument("--out", help="result path (default under $%s)" % OUTPUT_ENV)
    p.add_argument("--force", action="store_true", help="overwrite existing results")


def _add_tolerances(p):
    p.add_argument("--poised-tol", type=float, default=POISED_TOL)
    p.add_argument("--member-tol", type=float, default=MEMBER_TOL)
    p.add_argument("--bound-tol", type=float, default=BOUND_TOL)
    p.add_argument("--delta-min", type=int, default=1)
    p.add_argument("--memory-budget", type=int, default=DEFAULT_MEMORY_BUDGET, help="bytes")
    p.add_argument("--serial", action="store_true", help="disable parallel kernels")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sucil", description="Certified minimization of convex functions on integer boxes.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance")
    _add_common(p)
    _add_tolerances(p)
    p.add_argument("--variant", default="SUCIL", help=", ".join(VARIANTS))
    p.add_argument("--budget", type=int, help="evaluation limit (default |domain|)")
    p.add_argument("--x0", type=int, nargs="+", help="starting point")
    p.add_argument("--seed", type=int, default=0, help="unused by the solver; recorded only")

    p = sub.add_parser("bench", help="run the benchmark suite and write profiles")
    _add_common(p, problem=False)
    _add_tolerances(p)
    p.add_argument("--n", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--problems", default=",".join(PROBLEM_NAMES))
    p.add_argument("--variants", default="SUCIL,SUCIL-noTR,SUCIL-ideal1,SUCIL-ideal2")
    p.add_argument("--budget", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--literal-cap", action="store_true",
                   help="count budget-capped runs at their capped value in profiles")
    p.add_argument("--with-reference", action="store_true",
                   help="add the shipped third-party reference counts to the profiles")
    p.add_argument("--seed", type=int, default=0, help="unused by the solver; recorded only")

    p = sub.add_parser("export-milp", help="write the lower-bounding MILP in LP format")
    _add_common(p)
    p.add_argument("--iters", type=int, default=1, help="model instance to export (1 = after the stencil)")
    p.add_argument("--x0", type=int, nargs="+")
    p.add_argument("--no-good", action="store_true", help="add no-good cuts at evaluated points")
    p.add_argument("--single-big-m", action="store_true", help="one M_eta for all cut rows")
    p.add_argument("--l-f", type=float, help="valid lower bound of f on the box")

    p = sub.add_parser("probe-convexity", help="spot-check discrete convexity of a problem")
    _add_common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("list-problems", help="print the problem registry")
    return ap


def _cfg(args, name=None, budget=None) -> VariantConfig:
    return VariantConfig(name=name or args.variant, delta_min=args.delta_min, budget=budget,
                         x0=getattr(args, "x0", None), poised_tol=args.poised_tol,
                         member_tol=args.member_tol, bound_tol=args.bound_tol,
                         parallel=not args.serial, memory_budget=args.memory_budget)


def _dump(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _summary_lines(record: dict, keys) -> list:
    return [f"{k:>14}: {record[k]}" for k in keys]


def cmd_solve(args) -> int:
    dom = _domain(args)
    prob = get_problem(args.problem, args.n, args.abhi_cyclic)
    if args.x0 is not None and len(args.x0) != args.n:
        raise UsageError(f"--x0 needs {args.n} values")
    cfg = _cfg(args, budget=args.budget)
    x0 = args.x0 if args.x0 is not None else prob.default_start(dom.lower, dom.upper)
    initial_stencil(x0, dom)  # fail fast with a recentering hint
    out = _target(args.out, f"solve_{prob.name}_n{args.n}_{cfg.name}.json", args.force)
    cert = solve(prob, dom, cfg)
    rec = cert.to_record()
    rec["fstar_known"] = prob.fstar
    rec["abhi_cyclic"] = bool(args.abhi_cyclic)
    rec["seed"] = args.seed
    _dump(out, rec)
    status = "certified" if cert.certified else "NOT certified (budget exhausted)"
    print(f"{cfg.name} on {prob.name} n={args.n} box={tuple(args.box)}: {status}")
    print("\n".join(_summary_lines(rec, ["x", "f", "lower", "upper", "evaluations", "first_opt", "x0"])))
    print(f"{'result':>14}: {out}")
    return 0 if cert.certified else 2


def cmd_bench(args) -> int:
    variants = _variant_list(args.variants)
    problems = [p.strip() for p in args.problems.split(",") if p.strip()]
    lo, hi = args.box
    inst = bench.standard_instances(args.n, problems, lo, hi, args.abhi_cyclic)
    outdir = Path(args.out) if args.out else _output_dir() / "bench"
    if outdir.exists() and any(outdir.iterdir()) and not args.force:
        raise UsageError(f"{outdir} is not empty; pass --force to overwrite")
    base = _cfg(args, name=variants[0])

    def progress(r):
        state = "error" if r.error else ("ok" if r.certified else "capped")
        print(f"  {r.solver:<13} {r.problem:<7} n={r.n} N={r.N_terminate} first={r.N_first_opt} "
              f"{state} {r.wall_time:.1f}s", flush=True)

    records = bench.run_suite(inst, variants, args.budget, args.jobs, base, progress)
    all_recs = list(records)
    if args.with_reference:
        ref = [r for r in bench.reference_records() if r.solver not in {"SUCIL", "SUCIL-ideal1"}
               and r.n in set(args.n) and r.problem in set(problems)]
        all_recs += ref
    paths = bench.write_outputs(all_recs, outdir, args.literal_cap)
    summary = {"records": len(records), "certified": sum(bool(r.certified) for r in records),
               "errors": sum(r.error is not None for r in records),
               "best_fraction": {m: {c.solver: float(c.rho(1.0)[0])
                                     for c in bench.make_profile(all_recs, m, args.literal_cap)}
                                 for m in bench.METRICS},
               "files": {k: str(v) for k, v in paths.items()}, "seed": args.seed}
    _dump(outdir / "summary.json", summary)
    print(f"{summary['records']} runs, {summary['certified']} certified, {summary['errors']} errors")
    for m, fr in summary["best_fraction"].items():
        print(f"  best-or-tied share ({m}): " + ", ".join(f"{s} {v:.3f}" for s, v in sorted(fr.items())))
    print(f"  results in {outdir}")
    return 0 if summary["certified"] == summary["records"] else 2


def cmd_export(args) -> int:
    from . import milp_export as mx

    dom = _domain(args)
    prob = get_problem(args.problem, args.n, args.abhi_cyclic)
    if args.iters < 1:
        raise UsageError("--iters must be at least 1")
    out = _target(args.out, f"cpf_{prob.name}_n{args.n}_k{args.iters}.lp", args.force)
    inst = None
    for inst in mx.cpf_sequence(prob, dom, args.iters, args.x0):
        pass
    model = mx.build_cpf(inst.points, inst.fvals, dom, with_no_good=args.no_good,
                         per_cut_big_m=not args.single_big_m, l_f=args.l_f)
    mx.export_lp(model, out)
    side = out.with_name(out.name + ".constants.txt")
    side.write_text(model.constants.describe())
    rec = {"problem": prob.name, "n": args.n, "box": list(args.box), "instance": inst.k,
           "cuts": len(model.cuts), "points": [list(map(int, p)) for p in inst.points],
           "lower": inst.lower, "upper": inst.upper, "next_point": inst.next_point,
           "counts": model.counts(), "constants": {k: v for k, v in asdict(model.constants).items()
                                                   if k not in ("M_cut", "provenance")},
           "lp": str(out), "sidecar": str(side)}
    _dump(out.with_name(out.name + ".json"), rec)
    if inst.k < args.iters:
        print(f"bound closed after {inst.k} instances; exported instance {inst.k}")
    print(f"instance {inst.k}: {rec['cuts']} cuts, counts {rec['counts']}")
    print(f"  bound {inst.lower:.6g} <= f* <= {inst.upper:.6g}; next point {inst.next_point}")
    print(f"  wrote {out} and {side}")
    return 0


def cmd_probe(args) -> int:
    dom = _domain(args)
    prob = get_problem(args.problem, args.n, args.abhi_cyclic)
    rep = convexity_probe(prob, dom, args.trials, args.seed)
    rec = {"problem": prob.name, "n": args.n, "box": list(args.box), "seed": args.seed,
           "passed": rep.passed, "trials": rep.trials, "witness": rep.witness}
    if args.out:
        _dump(_target(args.out, "", args.force), rec)
    print(f"{prob.name} n={args.n}: {'pass' if rep.passed else 'FAIL'} after {rep.trials} trials")
    if rep.witness:
        print(f"  witness {rep.witness}")
    return 0 if rep.passed else 2


def cmd_list(args) -> int:
    print(f"{'name':<8} {'min n':>5}  {'optimizer':<10} f*(n=3)")
    for name in PROBLEM_NAMES:
        spec = get_problem(name, max(3, _REGISTRY[name][3]))
        print(f"{name:<8} {spec.min_n:>5}  {spec.optimizer:<10} {spec.fstar:g}")
    return 0


_COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "export-milp": cmd_export,
             "probe-convexity": cmd_probe, "list-problems": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "n", None) is not None and not isinstance(args.n, list) and args.n < 1:
            raise UsageError("--n must be positive")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SucilError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
