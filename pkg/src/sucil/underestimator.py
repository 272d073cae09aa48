"""Enumerative piecewise-linear lower bound over a finite lattice domain.

Every feasible point carries a bound ``eta`` (initially -inf) that is raised
by max-merging conditional cuts, plus the identifiers of the n+1 evaluated
points whose cut currently attains it.  Only the *active* points, those not
yet evaluated whose bound is still below the incumbent value, are ever
touched.  Active sets are sorted integer index arrays into the domain's
enumeration order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from . import _kernels
from .errors import CapacityExceeded, DimensionMismatch, EmptyActiveSet
from .geometry import MEMBER_TOL, POISED_TOL, ConeComplex, PoisedSet, Secant

DEFAULT_MEMORY_BUDGET = 2 * 1024**3
COMBO_CHUNK = 8192


@dataclass(frozen=True)
class Domain:
    """Box ``[lower, upper]`` intersected with Z^n, optionally thinned by ``mask``.

    Points are enumerated lexicographically with the first coordinate varying
    fastest.  ``mask`` (if given) is a boolean array over the full box in that
    order and selects the members of a sparse domain.
    """

    lower: tuple
    upper: tuple
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        lo = tuple(int(v) for v in np.atleast_1d(self.lower))
        hi = tuple(int(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) < 1:
            raise DimensionMismatch("lower and upper must have the same positive length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool).ravel()
            if m.shape[0] != self.box_size:
                raise DimensionMismatch(f"mask has {m.shape[0]} entries, box has {self.box_size}")
            if not m.any():
                raise ValueError("mask selects no points")
            object.__setattr__(self, "mask", m)

    @classmethod
    def box(cls, n: int, lo: int, hi: int) -> "Domain":
        return cls((lo,) * n, (hi,) * n)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower) + 1

    @property
    def box_size(self) -> int:
        return int(np.prod(self.widths, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.box_size if self.mask is None else int(self.mask.sum())

    @cached_property
    def _strides(self) -> np.ndarray:
        return np.concatenate([[1], np.cumprod(self.widths)[:-1]]).astype(np.int64)

    @cached_property
    def _compact(self) -> Optional[np.ndarray]:
        if self.mask is None:
            return None
        pos = np.full(self.box_size, -1, dtype=np.int64)
        pos[self.mask] = np.arange(self.size)
        return pos

    @cached_property
    def points(self) -> np.ndarray:
        """All members as an int64 array of shape (size, n) in enumeration order."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lower, self.upper)]
        # 'ij' meshgrid flattened in Fortran order puts the first coordinate fastest
        pts = np.ascontiguousarray(
            np.stack([g.ravel(order="F") for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        )
        if self.mask is not None:
            pts = pts[self.mask]
        return pts

    @cached_property
    def grid(self) -> np.ndarray:
        return self.points.astype(np.float64)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if x.shape != (self.n,):
            return False
        if np.any(x < self.lower) or np.any(x > self.upper):
            return False
        if self.mask is None:
            return True
        return bool(self.mask[int(np.dot(x - self.lower, self._strides))])

    def index_of(self, x) -> int:
        x = np.asarray(x, dtype=np.int64)
        if not self.contains(x):
            raise KeyError(f"{tuple(x)} is not in the domain")
        k = int(np.dot(x - np.array(self.lower), self._strides))
        return k if self._compact is None else int(self._compact[k])

    def bytes_per_point(self) -> int:
        # eta + generator ids + int and float coordinates
        return 8 * (1 + (self.n + 1) + 2 * self.n)


@dataclass
class EtaTable:
    domain: Domain
    eta: np.ndarray
    gen: np.ndarray

    @property
    def n(self) -> int:
        return self.domain.n


def init_table(dom: Domain, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> EtaTable:
    need = dom.size * dom.bytes_per_point()
    if need > memory_budget:
        raise CapacityExceeded(
            f"domain has {dom.size} points needing ~{need / 2**20:.0f} MiB; "
            f"budget is {memory_budget / 2**20:.0f} MiB"
        )
    eta = np.full(dom.size, -np.inf)
    gen = np.full((dom.size, dom.n + 1), -1, dtype=np.int64)
    return EtaTable(domain=dom, eta=eta, gen=gen)


def _as_restrict(table: EtaTable, restrict) -> np.ndarray:
    if restrict is None:
        return np.arange(table.domain.size, dtype=np.int64)
    return np.asarray(restrict, dtype=np.int64).ravel()


def update_eta(table: EtaTable, ps: PoisedSet, secant: Secant, cc: ConeComplex,
               restrict=None, ids=None, tol: float = MEMBER_TOL) -> int:
    """Max-merge one conditional cut into ``table`` on ``restrict``.

    ``ids`` are the generator identifiers recorded for the cut; by default the
    domain indices of the interpolation points.  Returns the number of entries
    whose bound strictly increased.
    """
    idx = _as_restrict(table, restrict)
    if ids is None:
        ids = [table.domain.index_of(p.astype(np.int64)) for p in ps.points]
    ids = np.asarray(ids, dtype=np.int64)
    if idx.size == 0:
        return 0
    x = table.domain.grid[idx]
    bary = x @ cc.normals.T + cc.offsets
    inside = (bary > tol).sum(axis=1) <= 1
    vals = x @ secant.c + secant.b
    better = inside & (vals > table.eta[idx])
    hit = idx[better]
    table.eta[hit] = vals[better]
    table.gen[hit] = ids
    return int(hit.size)


def table_min(table: EtaTable, restrict=None) -> tuple[float, int]:
    """Smallest bound on ``restrict`` and the first index attaining it."""
    idx = _as_restrict(table, restrict)
    if idx.size == 0:
        raise EmptyActiveSet("cannot take the minimum over an empty set")
    k = int(np.argmin(table.eta[idx]))
    return float(table.eta[idx[k]]), int(idx[k])


def generator_set(table: EtaTable, restrict=None) -> np.ndarray:
    idx = _as_restrict(table, restrict)
    g = table.gen[idx].ravel()
    return np.unique(g[g >= 0])


def refresh_active(table: EtaTable, evaluated, u: float, tol: float = 0.0) -> np.ndarray:
    """Indices of unevaluated points whose bound is still below ``u - tol``.

    A positive ``tol`` drops points whose bound sits within rounding of the
    incumbent value; the solver passes its bound-equality tolerance.
    """
    keep = table.eta < u - tol
    if isinstance(evaluated, np.ndarray) and evaluated.dtype == bool:
        keep &= ~evaluated
    else:
        ev = np.fromiter(evaluated, dtype=np.int64)
        keep[ev] = False
    return np.flatnonzero(keep)


@dataclass
class MergeCounts:
    total: int = 0
    poised: int = 0
    updating: int = 0
    pruning: int = 0
    improved: int = 0

    def __iadd__(self, other: "MergeCounts") -> "MergeCounts":
        self.total += other.total
        self.poised += other.poised
        self.updating += other.updating
        self.pruning += other.pruning
        self.improved += other.improved
        return self


def merge_combinations(table: EtaTable, active: np.ndarray, source: Iterable[int],
                       new: Iterable[int], points: np.ndarray, fvals: np.ndarray,
                       upper: float, poised_tol: float = POISED_TOL,
                       member_tol: float = MEMBER_TOL, parallel: bool = True,
                       chunk: int = COMBO_CHUNK) -> MergeCounts:
    """Apply every poised (n+1)-subset of ``source`` touching ``new``.

    ``points``/``fvals`` are the evaluation log; ``source`` and ``new`` hold
    log ids.  Subsets are visited in lexicographic order of sorted ids and
    applied exactly as a serial sequence of :func:`update_eta` calls would.
    """
    n = table.n
    d = n + 1
    ids = np.array(sorted(set(int(i) for i in source)), dtype=np.int64)
    new_set = set(int(i) for i in new)
    is_new = np.array([i in new_set for i in ids], dtype=np.bool_)
    counts = MergeCounts()
    if ids.size < d or not is_new.any():
        return counts

    pts = np.ascontiguousarray(points, dtype=np.float64)
    fv = np.ascontiguousarray(fvals, dtype=np.float64)
    active = np.ascontiguousarray(active, dtype=np.int64)
    factor = _kernels.factor_combos_parallel if parallel else _kernels.factor_combos_serial
    sweep = _kernels.sweep_parallel if parallel else _kernels.sweep_serial

    state = np.full(d, -1, dtype=np.int64)
    combos = np.empty((chunk, d), dtype=np.int64)
    poised = np.zeros(chunk, dtype=np.bool_)
    ainv = np.empty((chunk, d, d))
    coef = np.empty((chunk, d))
    done = False
    while not done:
        cnt, done = _kernels.fill_combos(state, is_new, combos)
        if cnt == 0:
            break
        counts.total += cnt
        factor(combos, cnt, ids, pts, fv, poised_tol, poised, ainv, coef)
        sel = np.flatnonzero(poised[:cnt]).astype(np.int64)
        counts.poised += sel.size
        if sel.size == 0 or active.size == 0:
            continue
        upd = np.zeros(sel.size, dtype=np.uint8)
        prn = np.zeros(sel.size, dtype=np.uint8)
        counts.improved += int(sweep(active, table.domain.grid, table.eta, table.gen, sel,
                                     combos, ids, ainv, coef, member_tol, upper, upd, prn))
        counts.updating += int(upd.sum())
        counts.pruning += int(prn.sum())
    return counts


def dump_csv(table: EtaTable, path, restrict=None) -> None:
    """Write ``coords..., eta, gen`` rows (gen ids joined by spaces)."""
    idx = _as_restrict(table, restrict)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(table.n)] + ["eta", "gen"])
        for k in idx:
            g = table.gen[k]
            w.writerow(list(table.domain.points[k]) + [repr(float(table.eta[k])),
                                                       " ".join(str(v) for v in g if v >= 0)])
