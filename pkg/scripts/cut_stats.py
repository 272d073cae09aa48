"""Per-iteration cut statistics for one solver run.

Prints how many index combinations were enumerated, how many were poised,
how many raised the bound somewhere and how many raised it past the
incumbent, together with the bounds and timings.

    python3 scripts/cut_stats.py --problem abhi --n 3 --variant sucil
    python3 scripts/cut_stats.py --problem quad --n 4 --csv quad4.csv
"""
import argparse
import csv
from dataclasses import asdict

from sucil.problems import get_problem
from sucil.solver import VariantConfig, solve, variant_name
from sucil.underestimator import Domain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="abhi")
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--variant", default="sucil")
    ap.add_argument("--box", type=int, nargs=2, default=(-4, 4))
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args()

    dom = Domain.box(args.n, *args.box)
    cert = solve(get_problem(args.problem, args.n), dom, VariantConfig(variant_name(args.variant)))
    rows = [asdict(s) for s in cert.iterations]
    cols = ["iteration", "evaluations", "total", "poised", "updating", "pruning",
            "active_size", "lower", "upper", "seconds"]
    print(" ".join(f"{c:>11}" for c in cols))
    for r in rows:
        print(" ".join(f"{r[c]:>11.4g}" if isinstance(r[c], float) else f"{r[c]:>11}" for c in cols))
    print(f"{'certified' if cert.certified else 'NOT certified'}: x={cert.x} f={cert.f} "
          f"after {cert.evaluations} evaluations (first optimum at {cert.first_opt})")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
