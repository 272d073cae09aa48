"""Independent reference computations used as test oracles.

Nothing here uses the package's QR-based geometry: cone coordinates come
from a plain linear solve of the ray system, secants from ``numpy.linalg``.
"""
import itertools

import numpy as np
from hypothesis import strategies as st


def secant_oracle(points, fvals):
    X = np.asarray(points, dtype=float)
    A = np.hstack([X, np.ones((len(X), 1))])
    sol = np.linalg.solve(A, np.asarray(fvals, dtype=float))
    return sol[:-1], sol[-1]


def ray_multipliers(points, j, x):
    """Solve ``x = x_j + sum_{l != j} lam_l (x_j - x_l)`` for lam (ordered by l)."""
    X = np.asarray(points, dtype=float)
    others = [l for l in range(len(X)) if l != j]
    D = np.stack([X[j] - X[l] for l in others], axis=1)
    return np.linalg.solve(D, np.asarray(x, dtype=float) - X[j])


def cones_containing(points, x, tol=1e-9):
    return [j for j in range(len(points)) if np.all(ray_multipliers(points, j, x) >= -tol)]


def is_affinely_independent(points):
    X = np.asarray(points, dtype=float)
    A = np.hstack([X, np.ones((len(X), 1))])
    return np.linalg.matrix_rank(A) == len(X)


def random_poised(rng, n, lo=-3, hi=3):
    while True:
        P = rng.integers(lo, hi + 1, size=(n + 1, n))
        if is_affinely_independent(P):
            return P


@st.composite
def poised_sets(draw, n_min=1, n_max=3, lo=-3, hi=3):
    n = draw(st.integers(n_min, n_max))
    pts = draw(st.lists(st.lists(st.integers(lo, hi), min_size=n, max_size=n),
                        min_size=n + 1, max_size=n + 1))
    P = np.array(pts, dtype=np.int64)
    from hypothesis import assume
    assume(is_affinely_independent(P))
    return P


def box_points(n, lo, hi):
    return np.array(list(itertools.product(range(lo, hi + 1), repeat=n)), dtype=np.int64)


def convex_quadratic(rng, n):
    B = rng.integers(-2, 3, size=(n, n)).astype(float)
    Q = B.T @ B + np.eye(n) * 0.5
    g = rng.integers(-3, 4, size=n).astype(float)
    return lambda x: float(np.asarray(x, float) @ Q @ np.asarray(x, float) + g @ np.asarray(x, float))
