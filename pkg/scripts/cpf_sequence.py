"""Sequence of all-cut models along a run, with sizes and bounds.

For each instance prints the number of poised cuts, the lower bound from the
model, the incumbent (including the value at the bound minimizer), the next
point and the closed-form binary count.  Optionally writes each model as LP.

    python3 scripts/cpf_sequence.py --problem abhi --n 3 --box -2 2 --iters 12
"""
import argparse
import math
from pathlib import Path

import numpy as np

from sucil.milp_export import build_cpf, closed_form_counts, cpf_sequence, export_lp
from sucil.problems import get_problem
from sucil.underestimator import Domain


def trunc1(v):
    return math.trunc(v * 10) / 10


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="abhi")
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--box", type=int, nargs=2, default=(-2, 2))
    ap.add_argument("--iters", type=int, default=12)
    ap.add_argument("--lp-dir", help="write instance k to <dir>/cpf_k.lp (slow for large k)")
    args = ap.parse_args()

    prob = get_problem(args.problem, args.n)
    dom = Domain.box(args.n, *args.box)
    x0 = np.zeros(args.n, dtype=np.int64)
    print(f"{'k':>3} {'cuts':>6} {'LB':>9} {'UB':>9} {'binaries':>9}  next")
    for inst in cpf_sequence(prob, dom, args.iters, x0=x0):
        ub = inst.upper
        if inst.next_point is not None:
            ub = min(ub, prob(np.array(inst.next_point)))
        counts = closed_form_counts(args.n, inst.n_cuts, len(inst.points), dom.widths, True)
        print(f"{inst.k:>3} {inst.n_cuts:>6} {trunc1(inst.lower):>9} {trunc1(ub):>9} "
              f"{counts['binaries']:>9}  {inst.next_point}")
        if args.lp_dir:
            out = Path(args.lp_dir)
            out.mkdir(parents=True, exist_ok=True)
            export_lp(build_cpf(inst.points, inst.fvals, dom, with_no_good=True), out / f"cpf_{inst.k}.lp")


if __name__ == "__main__":
    main()
