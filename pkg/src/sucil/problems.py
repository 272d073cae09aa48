"""Convex test objectives on the integer lattice and a counting black-box wrapper."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionTooSmall, UnknownProblem


def quad(x):
    x = np.asarray(x, dtype=float)
    return float(np.sum((x - 2.0) ** 2))


def klt(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    # centers c_i + 2e = 2e_i + e
    centers = 2.0 * np.eye(n) + 1.0
    return float(np.max(np.sum((x - centers) ** 2, axis=1)))


def mxhilb(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    i = np.arange(1, n + 1)[:, None]
    j = np.arange(1, n + 1)[None, :]
    return float(np.max(np.sum(np.abs(x[None, :] / (i + j - 1)), axis=1)))


def maxq(x):
    x = np.asarray(x, dtype=float)
    return float(np.max(x**2))


def lq(x):
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    return float(np.sum(np.maximum(-a - b, -a - b + a**2 + b**2 - 1.0)))


def cb3i(x):
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    terms = np.maximum.reduce([a**4 + b**2, (2.0 - a) ** 2 + (2.0 - b) ** 2, 2.0 * np.exp(-a + b)])
    return float(np.sum(terms))


def cb3ii(x):
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    return float(max(np.sum(a**4 + b**2),
                     np.sum((2.0 - a) ** 2 + (2.0 - b) ** 2),
                     np.sum(2.0 * np.exp(-a + b))))


_C1 = math.cos(math.pi / 8)
_C2 = math.sin(math.pi / 8)


def abhi(x, cyclic: bool = False):
    """Rotated, badly scaled quadratic centred at 2e.

    The chained term pairs x_i with x_{i+1} for i < n.  With ``cyclic`` the
    last coordinate is also paired with the first.
    """
    y = np.asarray(x, dtype=float) - 2.0
    a = y
    b = np.roll(y, -1)
    if not cyclic:
        a, b = a[:-1], b[:-1]
    return float(np.sum(64.0 * (_C1 * a - _C2 * b) ** 2 + (_C2 * a - _C1 * b) ** 2))


def _lq_optimal(x) -> bool:
    x = np.asarray(x)
    if np.any((x != 0) & (x != 1)):
        return False
    return not np.any((x[:-1] == 0) & (x[1:] == 0))


@dataclass(frozen=True)
class ProblemSpec:
    """A named objective with its known optimum.

    ``optimizer`` is one of ``"origin"``, ``"2e"``, ``"e"`` or ``"many"``; for
    ``"many"`` the predicate ``is_optimal`` decides membership.
    """

    name: str
    n: int
    func: Callable
    fstar: float
    optimizer: str
    min_n: int = 1
    is_optimal: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, x) -> float:
        return self.func(x)

    def xstar(self) -> Optional[np.ndarray]:
        return {"origin": np.zeros(self.n, dtype=np.int64),
                "2e": np.full(self.n, 2, dtype=np.int64),
                "e": np.ones(self.n, dtype=np.int64)}.get(self.optimizer)

    def default_start(self, lower, upper) -> np.ndarray:
        if self.name in ("maxq", "mxhilb"):
            return np.zeros(self.n, dtype=np.int64)
        return midpoint(lower, upper)


def midpoint(lower, upper) -> np.ndarray:
    s = np.asarray(lower, dtype=np.int64) + np.asarray(upper, dtype=np.int64)
    # integer division rounding toward zero
    return np.sign(s) * (np.abs(s) // 2)


# name -> (func, fstar(n), optimizer, min_n)
_REGISTRY = {
    "abhi": (abhi, lambda n: 0.0, "2e", 2),
    "quad": (quad, lambda n: 0.0, "2e", 1),
    "KLT": (klt, lambda n: float(n), "2e", 1),
    "maxq": (maxq, lambda n: 0.0, "origin", 1),
    "mxhilb": (mxhilb, lambda n: 0.0, "origin", 1),
    "LQ": (lq, lambda n: -(n - 1.0), "many", 2),
    "CB3I": (cb3i, lambda n: 2.0 * (n - 1), "e", 2),
    "CB3II": (cb3ii, lambda n: 2.0 * (n - 1), "e", 2),
}

PROBLEM_NAMES = tuple(_REGISTRY)


def _canonical(name: str) -> str:
    for key in _REGISTRY:
        if key.lower() == name.lower():
            return key
    raise UnknownProblem(f"unknown problem {name!r}; choose from {', '.join(_REGISTRY)}")


def get_problem(name: str, n: int, abhi_cyclic: bool = False) -> ProblemSpec:
    key = _canonical(name)
    func, fstar, opt, min_n = _REGISTRY[key]
    if n < min_n:
        raise DimensionTooSmall(f"{key} needs n >= {min_n}, got {n}")
    if key == "abhi" and abhi_cyclic:
        func = lambda x: abhi(x, cyclic=True)  # noqa: E731
    return ProblemSpec(name=key, n=n, func=func, fstar=fstar(n), optimizer=opt, min_n=min_n,
                       is_optimal=_lq_optimal if key == "LQ" else None)


def evaluate(name: str, x, abhi_cyclic: bool = False) -> float:
    x = np.asarray(x)
    return get_problem(name, x.size, abhi_cyclic)(x)


class CountingOracle:
    """Black-box wrapper that logs every evaluation and forbids repeats."""

    def __init__(self, problem: Callable):
        self.problem = problem
        self.points: list[tuple] = []
        self.values: list[float] = []
        self._seen: dict[tuple, int] = {}

    @property
    def count(self) -> int:
        return len(self.points)

    def __call__(self, x) -> float:
        key = tuple(int(v) for v in np.asarray(x).ravel())
        if key in self._seen:
            raise RuntimeError(f"point {key} requested twice (first at evaluation {self._seen[key] + 1})")
        val = float(self.problem(np.array(key)))
        self._seen[key] = len(self.points)
        self.points.append(key)
        self.values.append(val)
        return val


@dataclass
class ConvexityReport:
    passed: bool
    trials: int
    witness: Optional[dict] = None


def convexity_probe(problem, dom, trials: int = 1000, seed: int = 0,
                    tol: float = 1e-9) -> ConvexityReport:
    """Sample midpoint-type convex combinations inside ``dom`` and check f.

    Each trial picks y1, y2 in the domain with y1 + y2 even componentwise (or
    y1, y2, y3 with a lattice centroid) so that the combination lands on a
    lattice point, and checks ``f(x) <= sum lambda_i f(y_i)``.
    """
    f = problem if callable(problem) else get_problem(problem, dom.n)
    rng = np.random.default_rng(seed)
    pts = dom.points
    member = {tuple(p) for p in pts} if dom.mask is not None else None
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    for t in range(trials):
        k = 2 if t % 2 == 0 else 3
        ys = pts[rng.integers(0, len(pts), size=k - 1)]
        # choose the last point so the centroid is integral
        s = ys.sum(axis=0)
        last = pts[rng.integers(0, len(pts))].copy()
        last += (-(s + last)) % k
        if np.any(last > hi):
            last -= k * np.ceil((last - hi) / k).astype(np.int64)
        if np.any(last < lo):
            continue
        if member is not None and tuple(last) not in member:
            continue
        ys = np.vstack([ys, last])
        x = ys.sum(axis=0) // k
        if member is not None and tuple(x) not in member:
            continue
        fx = float(f(x))
        rhs = float(np.mean([f(y) for y in ys]))
        if fx > rhs + tol * max(1.0, abs(rhs)):
            return ConvexityReport(False, t + 1, {"x": x.tolist(), "ys": ys.tolist(),
                                                  "f(x)": fx, "average": rhs})
    return ConvexityReport(True, trials)
