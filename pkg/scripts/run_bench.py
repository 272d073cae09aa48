"""Run the benchmark suite and write run tables plus performance profiles.

Thin wrapper over ``sucil bench`` with the defaults used for the reported
comparisons (n = 3 and 4, all eight problems, box [-4, 4]^n).

    python3 scripts/run_bench.py --out results/bench
    python3 scripts/run_bench.py --n 3 --variants sucil,ideal1 --with-reference
"""
import argparse
import sys

from sucil.cli import main


def parse():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--variants", default="sucil,notr,ideal1,ideal2")
    ap.add_argument("--problems", default="abhi,quad,KLT,maxq,mxhilb,LQ,CB3I,CB3II")
    ap.add_argument("--out", default="results/bench")
    ap.add_argument("--with-reference", action="store_true",
                    help="add the transcribed external-solver rows to the profiles")
    ap.add_argument("--force", action="store_true")
    return ap.parse_args()


if __name__ == "__main__":
    a = parse()
    argv = ["bench", "--n", *map(str, a.n), "--variants", a.variants, "--problems", a.problems,
            "--out", a.out]
    if a.with_reference:
        argv.append("--with-reference")
    if a.force:
        argv.append("--force")
    sys.exit(main(argv))
