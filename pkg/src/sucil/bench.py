"""Batch runs over the test set and performance profiles.

CSV schemas
-----------
metric file (one per metric)::

    solver,problem,n,N,ratio

profile samples::

    metric,solver,alpha,rho

reference fixtures (shipped under ``sucil/data``), comparison tables::

    table,n,problem,solver,N_terminate,N_first_opt

replication tables (``replication`` is 1..20 or ``floor_mean``)::

    table,n,problem,replication,N_terminate,N_first_opt

Lines starting with ``#`` are provenance comments.  Non-finite values are
written as ``inf``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import threading
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import MissingPair, SchemaMismatch, SucilError
from .problems import PROBLEM_NAMES, get_problem
from .solver import VariantConfig, solve
from .underestimator import Domain

log = logging.getLogger(__name__)

METRICS = ("terminate", "first_opt")
REFERENCE_TABLES = {"C1": 3, "C2": 4, "C3": 5, "C4": 3, "C5": 4, "C6": 5}
_CMP_HEADER = ["table", "n", "problem", "solver", "N_terminate", "N_first_opt"]
_REP_HEADER = ["table", "n", "problem", "replication", "N_terminate", "N_first_opt"]


@dataclass
class RunRecord:
    solver: str
    problem: str
    n: int
    N_terminate: Optional[int]
    N_first_opt: Optional[int]
    certified: Optional[bool]
    wall_time: float = 0.0
    cut_stats: list = field(default_factory=list, repr=False)
    external: bool = False
    error: Optional[str] = None
    source: str = ""

    @property
    def key(self) -> tuple:
        return (self.problem, self.n)

    def metric(self, name: str, literal_cap: bool = False) -> float:
        if self.error is not None:
            return math.inf
        if name == "terminate":
            if self.N_terminate is None:
                return math.inf
            if self.certified is False and not literal_cap:
                return math.inf
            return float(self.N_terminate)
        if name == "first_opt":
            return math.inf if self.N_first_opt is None else float(self.N_first_opt)
        raise ValueError(f"unknown metric {name!r}; choose from {METRICS}")


def standard_instances(ns: Sequence[int] = (3, 4, 5), problems: Sequence[str] = PROBLEM_NAMES,
                       lo: int = -4, hi: int = 4, abhi_cyclic: bool = False) -> list:
    """``(ProblemSpec, Domain)`` pairs on the box ``[lo, hi]^n``."""
    return [(get_problem(p, n, abhi_cyclic), Domain.box(n, lo, hi)) for n in ns for p in problems]


def run_one(problem, dom: Domain, cfg: VariantConfig) -> RunRecord:
    t0 = time.perf_counter()
    try:
        cert = solve(problem, dom, cfg)
    except (SucilError, MemoryError) as exc:
        log.warning("%s on %s n=%d failed: %s", cfg.name, problem.name, dom.n, exc)
        return RunRecord(cfg.name, problem.name, dom.n, None, None, False,
                         time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")
    return RunRecord(cfg.name, problem.name, dom.n, cert.evaluations, cert.first_opt,
                     cert.certified, time.perf_counter() - t0, cut_stats=cert.iterations)


def run_suite(instances: Iterable, variants: Sequence[str], budget: Optional[int] = None,
              jobs: int = 1, base: Optional[VariantConfig] = None, progress=None) -> list:
    """Run every variant on every ``(problem, domain)`` instance.

    Solver failures are captured in the record's ``error`` field.  The result
    is sorted canonically by (n, problem, solver) whatever the completion order.
    """
    base = base or VariantConfig()
    tasks = [(p, d, replace(base, name=v, budget=budget)) for p, d in instances for v in variants]
    out: list = []
    lock = threading.Lock()

    def work(task):
        rec = run_one(*task)
        with lock:
            out.append(rec)
            if progress is not None:
                progress(rec)

    if jobs <= 1:
        for t in tasks:
            work(t)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, tasks))
    return sort_records(out)


def sort_records(records: Iterable[RunRecord]) -> list:
    return sorted(records, key=lambda r: (r.n, r.problem, r.solver))


# --------------------------------------------------------------------------
# profiles


@dataclass
class ProfileCurve:
    solver: str
    metric: str
    ratios: np.ndarray  # one per problem, sorted ascending (inf for failures)
    problems: int

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.ratios[np.isfinite(self.ratios)])

    def rho(self, alpha) -> np.ndarray:
        a = np.atleast_1d(np.asarray(alpha, dtype=float))
        return np.searchsorted(self.ratios, a, side="right") / self.problems

    def samples(self) -> tuple:
        """Step-function corners ``(alpha, rho)`` starting at alpha = 1."""
        xs = np.unique(np.concatenate([[1.0], self.breakpoints]))
        return xs, self.rho(xs)


def performance_table(records: Sequence[RunRecord], metric: str,
                      literal_cap: bool = False) -> tuple:
    """``(solvers, problems, N matrix, ratio matrix)``; raises :class:`MissingPair`."""
    solvers = sorted({r.solver for r in records})
    problems = sorted({r.key for r in records}, key=lambda k: (k[1], k[0]))
    cell: dict = {}
    for r in records:
        k = (r.solver, r.key)
        if k in cell:
            raise ValueError(f"duplicate record for {r.solver} on {r.problem} n={r.n}")
        cell[k] = r
    missing = [(s, p) for s in solvers for p in problems if (s, p) not in cell]
    if missing:
        s, (p, n) = missing[0]
        raise MissingPair(f"{len(missing)} (solver, problem) pairs missing, e.g. {s} on {p} n={n}")
    N = np.array([[cell[(s, p)].metric(metric, literal_cap) for p in problems] for s in solvers])
    best = N.min(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.isfinite(N), N / best, np.inf)
    ratio[:, ~np.isfinite(best)] = np.inf
    return solvers, problems, N, ratio


def make_profile(records: Sequence[RunRecord], metric: str = "terminate",
                 literal_cap: bool = False) -> list:
    """One curve per solver: share of problems within a factor alpha of the best.

    Budget-capped runs count as never terminating unless ``literal_cap``.
    Tied best solvers all get ratio 1.
    """
    solvers, problems, _, ratio = performance_table(records, metric, literal_cap)
    return [ProfileCurve(s, metric, np.sort(ratio[i]), len(problems)) for i, s in enumerate(solvers)]


def best_fraction(curves: Sequence[ProfileCurve], solver: str) -> float:
    for c in curves:
        if c.solver == solver:
            return float(c.rho(1.0)[0])
    raise KeyError(solver)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    return str(v)


def metric_csv(records: Sequence[RunRecord], metric: str, literal_cap: bool = False) -> str:
    solvers, problems, N, ratio = performance_table(records, metric, literal_cap)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["solver", "problem", "n", "N", "ratio"])
    rows = []
    for i, s in enumerate(solvers):
        for j, (p, n) in enumerate(problems):
            nv = N[i, j]
            rows.append((n, p, s, _fmt(int(nv)) if np.isfinite(nv) else "inf", _fmt(float(ratio[i, j]))))
    for n, p, s, nv, rv in sorted(rows):
        w.writerow([s, p, n, nv, rv])
    return buf.getvalue()


def profile_csv(curves_by_metric: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "solver", "alpha", "rho"])
    for metric in sorted(curves_by_metric):
        for c in sorted(curves_by_metric[metric], key=lambda c: c.solver):
            xs, ys = c.samples()
            for x, y in zip(xs, ys):
                w.writerow([metric, c.solver, _fmt(float(x)), _fmt(float(y))])
    return buf.getvalue()


def runs_csv(records: Sequence[RunRecord], with_time: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["solver", "problem", "n", "N_terminate", "N_first_opt", "certified", "error"]
    w.writerow(head + (["wall_time"] if with_time else []))
    for r in sort_records(records):
        row = [r.solver, r.problem, r.n, _fmt(r.N_terminate), _fmt(r.N_first_opt),
               "" if r.certified is None else int(r.certified), r.error or ""]
        w.writerow(row + ([f"{r.wall_time:.3f}"] if with_time else []))
    return buf.getvalue()


def write_outputs(records: Sequence[RunRecord], outdir, literal_cap: bool = False) -> dict:
    """Write runs, per-metric and profile CSVs into ``outdir``; returns the paths."""
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"runs": outdir / "runs.csv"}
    paths["runs"].write_text(runs_csv(records))
    curves = {}
    for m in METRICS:
        paths[m] = outdir / f"{m}.csv"
        paths[m].write_text(metric_csv(records, m, literal_cap))
        curves[m] = make_profile(records, m, literal_cap)
    paths["profile"] = outdir / "profile.csv"
    paths["profile"].write_text(profile_csv(curves))
    return paths


# --------------------------------------------------------------------------
# reference data


def reference_path(table: str):
    if table not in REFERENCE_TABLES:
        raise KeyError(f"unknown reference table {table!r}; choose from {', '.join(REFERENCE_TABLES)}")
    return resources.files("sucil") / "data" / f"table_{table}.csv"


def _read_rows(text: str, where: str) -> tuple:
    header, rows = None, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = cells
            if header not in (_CMP_HEADER, _REP_HEADER):
                raise SchemaMismatch(f"{where}:{lineno}: unexpected header {cells}")
            continue
        if len(cells) != len(header):
            raise SchemaMismatch(f"{where}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            row = dict(zip(header, cells))
            row["n"] = int(row["n"])
            row["N_terminate"] = int(row["N_terminate"])
            row["N_first_opt"] = int(row["N_first_opt"])
        except ValueError as exc:
            raise SchemaMismatch(f"{where}:{lineno}: {exc}") from None
        if row["N_first_opt"] > row["N_terminate"] and header == _CMP_HEADER:
            log.debug("%s:%d first-hit count exceeds terminate count", where, lineno)
        rows.append(row)
    if header is None:
        raise SchemaMismatch(f"{where}: no header row")
    return header, rows


def ingest_reference(source, where: Optional[str] = None) -> list:
    """Read a reference table (path, fixture name such as ``"C1"`` or file object).

    Replication tables contribute a single MATSuMoTo record per problem taken
    from the printed ``floor_mean`` row.
    """
    if isinstance(source, str) and source in REFERENCE_TABLES:
        text = reference_path(source).read_text()
        where = where or f"table_{source}.csv"
    elif hasattr(source, "read"):
        text = source.read()
        where = where or getattr(source, "name", "<stream>")
    else:
        with open(source) as fh:
            text = fh.read()
        where = where or str(source)
    header, rows = _read_rows(text, where)
    out = []
    for r in rows:
        if header == _REP_HEADER:
            if r["replication"] != "floor_mean":
                continue
            solver = "MATSuMoTo"
        else:
            solver = r["solver"]
        out.append(RunRecord(solver, r["problem"], r["n"], r["N_terminate"], r["N_first_opt"],
                             None, external=True, source=r["table"]))
    return sort_records(out)


def replication_summary(source) -> dict:
    """``{problem: (printed floor-mean pair, recomputed floor-mean pair)}`` for a replication table."""
    text = reference_path(source).read_text() if source in REFERENCE_TABLES else open(source).read()
    header, rows = _read_rows(text, str(source))
    if header != _REP_HEADER:
        raise SchemaMismatch(f"{source}: not a replication table")
    reps, printed = defaultdict(list), {}
    for r in rows:
        pair = (r["N_terminate"], r["N_first_opt"])
        if r["replication"] == "floor_mean":
            printed[r["problem"]] = pair
        else:
            reps[r["problem"]].append(pair)
    out = {}
    for p, pair in printed.items():
        vals = np.array(reps[p], dtype=float)
        out[p] = (pair, tuple(int(math.floor(v)) for v in vals.mean(axis=0)))
    return out


def reference_records(tables: Sequence[str] = ("C1", "C2", "C3"),
                      solvers: Optional[Sequence[str]] = None) -> list:
    recs = [r for t in tables for r in ingest_reference(t)]
    if solvers is not None:
        keep = set(solvers)
        recs = [r for r in recs if r.solver in keep]
    return recs
