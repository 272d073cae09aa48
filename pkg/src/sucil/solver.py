"""Certified minimization of convex black-box functions on a lattice domain.

The loop alternates between raising the bound table with conditional cuts
built from evaluated points and evaluating one new point.  It stops when the
smallest bound over the still-undecided points reaches the best observed
value, which certifies global optimality.

Four variants differ in which evaluated points feed the cuts and in how the
next point is chosen:

============  ==========  ===============================================
variant       cut points  next point
============  ==========  ===============================================
SUCIL         generators  argmin of the bound in an inf-norm trust region
SUCIL-noTR    generators  argmin of the bound over all active points
SUCIL-ideal1  all         argmin of the true f over active points
SUCIL-ideal2  generators  argmin of the true f over active points
============  ==========  ===============================================
"""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import EmptyActiveSet, StencilOutsideDomain
from .geometry import MEMBER_TOL, POISED_TOL, check_poised, facet_halfspaces, fit_secant
from .problems import CountingOracle, ProblemSpec
from .underestimator import (DEFAULT_MEMORY_BUDGET, Domain, EtaTable, generator_set,
                             init_table, merge_combinations, refresh_active)

log = logging.getLogger(__name__)

BOUND_TOL = 1e-9

# name -> (cut point policy, next-iterate policy)
VARIANTS = {
    "SUCIL": ("generators", "trust-region"),
    "SUCIL-noTR": ("generators", "global"),
    "SUCIL-ideal1": ("all", "ideal"),
    "SUCIL-ideal2": ("generators", "ideal"),
}

_ALIASES = {
    "sucil": "SUCIL", "sucil-notr": "SUCIL-noTR", "notr": "SUCIL-noTR",
    "sucil-ideal1": "SUCIL-ideal1", "ideal1": "SUCIL-ideal1",
    "sucil-ideal2": "SUCIL-ideal2", "ideal2": "SUCIL-ideal2",
}


def variant_name(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}") from None


@dataclass
class VariantConfig:
    name: str = "SUCIL"
    delta_min: int = 1
    budget: Optional[int] = None
    x0: Optional[Sequence[int]] = None
    # replaces the x0 +/- e_i stencil, e.g. for domains too thin to hold it
    initial_points: Optional[Sequence[Sequence[int]]] = None
    poised_tol: float = POISED_TOL
    member_tol: float = MEMBER_TOL
    bound_tol: float = BOUND_TOL
    parallel: bool = True
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        self.name = variant_name(self.name)
        if self.delta_min < 1:
            raise ValueError("delta_min must be at least 1")

    @property
    def point_policy(self) -> str:
        return VARIANTS[self.name][0]

    @property
    def next_policy(self) -> str:
        return VARIANTS[self.name][1]


@dataclass
class CutStats:
    iteration: int
    total: int
    poised: int
    updating: int
    pruning: int
    seconds: float
    source_size: int
    active_size: int
    lower: float
    upper: float
    evaluations: int


@dataclass
class SolverState:
    domain: Domain
    table: EtaTable
    points: list = field(default_factory=list)
    fvals: list = field(default_factory=list)
    index: list = field(default_factory=list)
    evaluated: np.ndarray = None
    incumbent: int = -1
    upper: float = np.inf
    lower: float = -np.inf
    delta: int = 1
    k: int = 0
    stats: list = field(default_factory=list)

    def __post_init__(self):
        if self.evaluated is None:
            self.evaluated = np.zeros(self.domain.size, dtype=bool)

    def record(self, x, fx: float) -> int:
        i = self.domain.index_of(x)
        if self.evaluated[i]:
            raise RuntimeError(f"point {tuple(x)} evaluated twice")
        self.evaluated[i] = True
        self.points.append(np.asarray(x, dtype=np.int64))
        self.fvals.append(float(fx))
        self.index.append(i)
        lid = len(self.points) - 1
        if fx < self.upper:
            self.upper = float(fx)
            self.incumbent = lid
        return lid

    @property
    def x_best(self) -> np.ndarray:
        return self.points[self.incumbent]


@dataclass
class Certificate:
    variant: str
    problem: str
    n: int
    box: tuple
    x0: tuple
    x: tuple
    f: float
    lower: float
    upper: float
    certified: bool
    evaluations: int
    first_opt: Optional[int]
    iterations: list
    evaluated: list = field(repr=False, default_factory=list)

    def to_record(self) -> dict:
        d = asdict(self)
        d.pop("evaluated")
        d["iterations"] = [asdict(s) for s in self.iterations]
        for key in ("lower", "upper", "f"):
            d[key] = _jsonable(d[key])
        for row in d["iterations"]:
            row["lower"] = _jsonable(row["lower"])
            row["upper"] = _jsonable(row["upper"])
        return d


def _jsonable(v: float):
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def initial_stencil(x0, dom: Domain) -> list:
    """``x0`` and its 2n lattice neighbours ``x0 +/- e_i``."""
    x0 = np.asarray(x0, dtype=np.int64)
    pts = [x0]
    for i in range(dom.n):
        for s in (1, -1):
            y = x0.copy()
            y[i] += s
            pts.append(y)
    bad = [p for p in pts if not dom.contains(p)]
    if bad:
        raise StencilOutsideDomain(bad)
    return pts


def enumerate_cuts(state: SolverState, source, tol: float = POISED_TOL) -> Iterator[tuple]:
    """Yield ``(ids, PoisedSet, Secant, ConeComplex)`` for each poised subset of ``source``.

    Subsets are taken in lexicographic order over the sorted log ids.
    """
    n = state.domain.n
    ids = sorted(int(i) for i in source)
    for combo in itertools.combinations(ids, n + 1):
        ps = check_poised([state.points[i] for i in combo], tol)
        if ps is None:
            continue
        sec = fit_secant(ps, [state.fvals[i] for i in combo])
        yield combo, ps, sec, facet_halfspaces(ps)


def step_radius(delta: int, improved: bool, delta_min: int = 1) -> int:
    if improved:
        return delta + 1
    return max(delta_min, delta // 2)


def _inf_dist(state: SolverState, active: np.ndarray) -> np.ndarray:
    return np.abs(state.domain.points[active] - state.x_best).max(axis=1)


def next_iterate_tr(state: SolverState, active: np.ndarray) -> int:
    """Bound minimizer within the trust region, widening it until it meets ``active``.

    Returns a domain index and leaves the (possibly widened) radius in ``state``.
    """
    if active.size == 0:
        raise EmptyActiveSet("no active point left to evaluate")
    dist = _inf_dist(state, active)
    state.delta = max(state.delta, int(dist.min()))
    cand = active[dist <= state.delta]
    return int(cand[np.argmin(state.table.eta[cand])])


def next_iterate_global(state: SolverState, active: np.ndarray) -> int:
    if active.size == 0:
        raise EmptyActiveSet("no active point left to evaluate")
    return int(active[np.argmin(state.table.eta[active])])


def brute_force_oracle(problem: Callable, dom: Domain,
                       memory_budget: int = DEFAULT_MEMORY_BUDGET) -> tuple:
    """Exhaustive scan; returns ``(min value, argmin points, all values)``.

    Argmin points come back in enumeration order.
    """
    if dom.size * 8 * (dom.n + 1) > memory_budget:
        from .errors import CapacityExceeded
        raise CapacityExceeded(f"{dom.size} points exceed the memory budget")
    vals = np.array([problem(p) for p in dom.points], dtype=float)
    fmin = float(vals.min())
    return fmin, dom.points[vals == fmin], vals


def _first_opt(fvals: list, fstar: Optional[float], tol: float) -> Optional[int]:
    if fstar is None:
        return None
    for i, v in enumerate(fvals):
        if v <= fstar + tol:
            return i + 1
    return None


def solve(problem: Callable, dom: Domain, cfg: Optional[VariantConfig] = None,
          callback: Optional[Callable[[SolverState], None]] = None) -> Certificate:
    """Minimize ``problem`` over ``dom`` and return an optimality certificate.

    When the evaluation budget runs out first, the best point found is
    returned with ``certified=False``.  ``callback`` (if given) is called with
    the state after every bound update.
    """
    cfg = cfg or VariantConfig()
    spec = problem if isinstance(problem, ProblemSpec) else None
    oracle = problem if isinstance(problem, CountingOracle) else CountingOracle(problem)
    budget = cfg.budget if cfg.budget is not None else dom.size

    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=np.int64)
    elif spec is not None:
        x0 = spec.default_start(dom.lower, dom.upper)
    else:
        from .problems import midpoint
        x0 = midpoint(dom.lower, dom.upper)
    if cfg.initial_points is not None:
        start = [np.asarray(p, dtype=np.int64) for p in cfg.initial_points]
        bad = [p for p in start if not dom.contains(p)]
        if bad:
            raise StencilOutsideDomain(bad)
    else:
        start = initial_stencil(x0, dom)

    state = SolverState(domain=dom, table=init_table(dom, cfg.memory_budget), delta=cfg.delta_min)
    true_f = None
    if cfg.next_policy == "ideal":
        _, _, true_f = brute_force_oracle(oracle.problem, dom, cfg.memory_budget)

    new = []
    for p in start:
        if len(state.points) >= budget:
            break
        new.append(state.record(p, oracle(p)))

    certified = False
    while True:
        t0 = time.perf_counter()
        active = refresh_active(state.table, state.evaluated, state.upper, cfg.bound_tol)
        if cfg.point_policy == "all":
            source = range(len(state.points))
        else:
            source = set(generator_set(state.table, active).tolist()) | set(new)
        counts = merge_combinations(
            state.table, active, source, new, np.array(state.points), np.array(state.fvals),
            state.upper, cfg.poised_tol, cfg.member_tol, cfg.parallel)
        active = refresh_active(state.table, state.evaluated, state.upper, cfg.bound_tol)
        lower = state.upper
        if active.size:
            lower = min(lower, float(state.table.eta[active].min()))
        state.lower = max(state.lower, lower)
        state.stats.append(CutStats(
            iteration=state.k, total=counts.total, poised=counts.poised,
            updating=counts.updating, pruning=counts.pruning,
            seconds=time.perf_counter() - t0, source_size=len(source),
            active_size=int(active.size), lower=state.lower, upper=state.upper,
            evaluations=len(state.points)))
        if callback is not None:
            callback(state)
        log.debug("iter %d evals %d l=%g u=%g |active|=%d combos=%d",
                  state.k, len(state.points), state.lower, state.upper, active.size, counts.total)
        if state.lower >= state.upper - cfg.bound_tol:
            certified = True
            break
        if len(state.points) >= budget:
            break

        if cfg.next_policy == "trust-region":
            j = next_iterate_tr(state, active)
        elif cfg.next_policy == "global":
            j = next_iterate_global(state, active)
        else:
            j = int(active[np.argmin(true_f[active])])
        x = dom.points[j]
        fx = oracle(x)
        improved = fx < state.upper
        new = [state.record(x, fx)]
        state.delta = step_radius(state.delta, improved, cfg.delta_min)
        state.k += 1

    fstar = spec.fstar if spec is not None else (state.upper if certified else None)
    return Certificate(
        variant=cfg.name,
        problem=spec.name if spec is not None else getattr(problem, "__name__", "custom"),
        n=dom.n, box=(dom.lower, dom.upper), x0=tuple(int(v) for v in x0),
        x=tuple(int(v) for v in state.x_best), f=state.upper,
        lower=state.lower if not certified else state.upper, upper=state.upper,
        certified=certified, evaluations=len(state.points),
        first_opt=_first_opt(state.fvals, fstar, cfg.bound_tol),
        iterations=state.stats, evaluated=[tuple(int(v) for v in p) for p in state.points])
