"""Side-by-side evaluation counts: this implementation vs the transcribed tables.

For each problem, runs SUCIL and the ideal1 variant at the requested dimension
and prints (N_terminate, N_first_opt) next to the published pair.

    python3 scripts/compare_reference.py --n 3
"""
import argparse

from sucil.bench import ingest_reference, run_suite, standard_instances

TABLE_FOR_N = {3: "C1", 4: "C2", 5: "C3"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3, choices=sorted(TABLE_FOR_N))
    ap.add_argument("--variants", default="SUCIL,SUCIL-ideal1")
    args = ap.parse_args()
    variants = args.variants.split(",")

    ref = {(r.solver, r.problem): r for r in ingest_reference(TABLE_FOR_N[args.n])}
    ours = run_suite(standard_instances((args.n,)), variants)
    print(f"{'problem':<8} {'variant':<13} {'ours (N, first)':>16} {'published':>12} {'time':>7}")
    for r in ours:
        pub = ref.get((r.solver, r.problem))
        pub_s = f"({pub.N_terminate}, {pub.N_first_opt})" if pub else "-"
        mark = "" if r.certified else "  not certified"
        print(f"{r.problem:<8} {r.solver:<13} {f'({r.N_terminate}, {r.N_first_opt})':>16} "
              f"{pub_s:>12} {r.wall_time:6.1f}s{mark}")


if __name__ == "__main__":
    main()
