"""Poisedness, secant fitting and cone representation for lattice point sets.

A set of n+1 points in Z^n is poised when the (n+1)x(n+1) matrix ``[X e]``
(points as rows, a trailing column of ones) is nonsingular.  For a poised set
the linear interpolant of f is a conditional cut: it underestimates a convex f
on the union of the n+1 cones ``cone(x_j - X)``.  Each cone is the
intersection of n halfspaces, one per facet of the simplex, so the whole union
is described by n+1 normalized facet functions.  With the normalization used
here (value 1 at the vertex opposite the facet), the facet functions are
exactly the barycentric coordinates of a point with respect to the simplex.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import AmbiguousMembership, DimensionMismatch, SingularSystem

POISED_TOL = 1e-8
MEMBER_TOL = 1e-9
INTERP_TOL = 1e-8


def _as_points(points) -> np.ndarray:
    try:
        X = np.array([np.asarray(p, dtype=float).ravel() for p in points])
    except ValueError as exc:
        raise DimensionMismatch("points must all have the same length") from exc
    if X.ndim != 2 or X.dtype == object:
        raise DimensionMismatch("points must all have the same length")
    return X


def interpolation_matrix(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass(frozen=True)
class PoisedSet:
    """n+1 affinely independent points with the QR factors of ``[X e]^T``."""

    points: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Secant:
    c: np.ndarray
    b: float

    def __call__(self, x) -> float:
        return float(np.dot(self.c, np.asarray(x, dtype=float)) + self.b)


@dataclass(frozen=True)
class ConeComplex:
    """Facet halfspaces ``normals[j] . x + offsets[j]`` of a poised set.

    Row j vanishes on every defining point except ``points[j]`` where it is 1.
    Halfspace j is ``{x : normals[j] . x + offsets[j] <= 0}``.
    """

    normals: np.ndarray
    offsets: np.ndarray
    owner: PoisedSet

    def values(self, x) -> np.ndarray:
        return self.normals @ np.asarray(x, dtype=float) + self.offsets


def check_poised(points: Sequence, tol: float = POISED_TOL) -> Optional[PoisedSet]:
    """Return a :class:`PoisedSet` for ``points`` or ``None`` when they are not poised.

    The triangular factor of ``[X e]^T`` is inspected; every diagonal
    magnitude must reach ``tol`` times the largest entry of the factor.
    """
    X = _as_points(points)
    n = X.shape[1]
    if X.shape[0] != n + 1:
        raise DimensionMismatch(f"need exactly {n + 1} points in dimension {n}, got {X.shape[0]}")
    A = interpolation_matrix(X)
    q, r = scipy.linalg.qr(A.T)
    diag = np.abs(np.diag(r))
    scale = np.abs(r).max()
    if scale == 0.0 or np.any(diag < tol * scale):
        return None
    return PoisedSet(points=X, q=q, r=r)


def fit_secant(ps: PoisedSet, fvals, tol: float = INTERP_TOL) -> Secant:
    """Solve ``[X e] [c; b] = f`` using the stored factors.

    ``[X e] = R^T Q^T``, so a forward substitution followed by a product with
    Q gives the coefficients.
    """
    f = np.asarray(fvals, dtype=float).ravel()
    if f.shape[0] != ps.n + 1:
        raise DimensionMismatch(f"expected {ps.n + 1} function values, got {f.shape[0]}")
    y = scipy.linalg.solve_triangular(ps.r, f, trans="T")
    coef = ps.q @ y
    A = interpolation_matrix(ps.points)
    # one refinement step removes the last-ulp error on exactly representable data
    coef = coef + ps.q @ scipy.linalg.solve_triangular(ps.r, f - A @ coef, trans="T")
    resid = np.abs(A @ coef - f).max()
    if not np.all(np.isfinite(coef)) or resid > tol * max(1.0, np.abs(f).max()):
        raise SingularSystem(f"interpolation residual {resid:.3e} exceeds tolerance")
    return Secant(c=coef[:-1], b=float(coef[-1]))


def facet_halfspaces(ps: PoisedSet) -> ConeComplex:
    """Facet functions of the simplex, via column deletion from the QR factors.

    Dropping column j of ``[X e]^T`` leaves an (n+1) x n matrix whose full QR
    has a last Q column orthogonal to the remaining points; that column is the
    facet through them.  It is scaled to equal 1 at the dropped point.
    """
    n = ps.n
    A = interpolation_matrix(ps.points)
    H = np.empty((n + 1, n + 1))
    for j in range(n + 1):
        q1, _ = scipy.linalg.qr_delete(ps.q, ps.r, j, 1, which="col", check_finite=False)
        v = q1[:, -1]
        H[j] = v / (A[j] @ v)
    return ConeComplex(normals=H[:, :n].copy(), offsets=H[:, n].copy(), owner=ps)


def cone_membership(x, cc: ConeComplex, j: int, tol: float = MEMBER_TOL) -> bool:
    """True iff ``x`` lies in ``cone(x_j - X)``, i.e. in every halfspace but the j-th."""
    vals = cc.values(x)
    others = np.delete(vals, j)
    return bool(np.all(others <= tol))


def locate_in_union(x, cc: ConeComplex, tol: float = MEMBER_TOL) -> Optional[int]:
    vals = cc.values(x)
    above = np.flatnonzero(vals > tol)
    if above.size == 1:
        return int(above[0])
    if above.size == 0:
        # barycentric coordinates sum to one, so this needs a huge tolerance
        raise AmbiguousMembership(f"point {tuple(x)} falls in every cone with tol={tol}")
    return None
