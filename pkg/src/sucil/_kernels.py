"""Compiled inner loops for cut enumeration and the lower-bound sweep.

The solver spends nearly all of its time here: enumerating (n+1)-subsets of
evaluated points, factoring each interpolation matrix, and max-merging the
resulting conditional cuts into the bound table.  The sweep is parallel over
table entries, and every entry visits the cuts of a chunk in a fixed order, so
parallel and serial runs produce identical tables.
"""
import numba as nb
import numpy as np

if nb.config.THREADING_LAYER == "default":
    # the bundled TBB is too old and only produces a warning on probe
    nb.config.THREADING_LAYER = "omp"

_OPTS = dict(cache=True, nogil=True)


@nb.njit(**_OPTS)
def fill_combos(idx, is_new, out):
    """Write the next combinations of positions into ``out``.

    ``idx`` holds the current combination (positions into a sorted id list of
    length ``len(is_new)``) and is advanced in place through lexicographic
    order, skipping combinations that contain no position flagged in
    ``is_new``.  ``idx[0] == -1`` requests a fresh start.  Returns the number of
    rows written and whether the sequence is exhausted.
    """
    m = is_new.shape[0]
    k = idx.shape[0]
    # next flagged position at or after p (m when none)
    nxt = np.empty(m + 1, np.int64)
    nxt[m] = m
    for p in range(m - 1, -1, -1):
        nxt[p] = p if is_new[p] else nxt[p + 1]

    if k > m:
        return 0, True

    cnt = 0
    cap = out.shape[0]
    fresh = idx[0] < 0
    if fresh:
        for i in range(k):
            idx[i] = i
    while cnt < cap:
        if not fresh:
            # standard lexicographic successor
            i = k - 1
            while i >= 0 and idx[i] == m - k + i:
                i -= 1
            if i < 0:
                return cnt, True
            idx[i] += 1
            for t in range(i + 1, k):
                idx[t] = idx[t - 1] + 1
        fresh = False
        prefix_new = False
        for t in range(k - 1):
            if is_new[idx[t]]:
                prefix_new = True
                break
        if not prefix_new:
            jump = nxt[idx[k - 1]]
            if jump >= m:
                # nothing flagged can follow this prefix: exhaust its tail
                idx[k - 1] = m - 1
                continue
            idx[k - 1] = jump
        for t in range(k):
            out[cnt, t] = idx[t]
        cnt += 1
    return cnt, False


@nb.njit(**_OPTS)
def _qr_inverse(A, tol, Q, R, Ainv, work):
    """Householder QR of ``A.T``; fills ``Ainv`` with ``A^{-1}`` when poised.

    Returns False when some diagonal entry of R falls below ``tol`` times the
    largest magnitude in R.
    """
    d = A.shape[0]
    for i in range(d):
        for j in range(d):
            R[i, j] = A[j, i]
            Q[i, j] = 1.0 if i == j else 0.0
    for col in range(d - 1):
        norm = 0.0
        for i in range(col, d):
            norm += R[i, col] * R[i, col]
        norm = np.sqrt(norm)
        if norm == 0.0:
            continue
        alpha = -norm if R[col, col] >= 0.0 else norm
        vnorm = 0.0
        for i in range(col, d):
            work[i] = R[i, col]
        work[col] -= alpha
        for i in range(col, d):
            vnorm += work[i] * work[i]
        if vnorm == 0.0:
            continue
        # R <- (I - 2vv^T/v^Tv) R
        for j in range(col, d):
            s = 0.0
            for i in range(col, d):
                s += work[i] * R[i, j]
            s = 2.0 * s / vnorm
            for i in range(col, d):
                R[i, j] -= s * work[i]
        # Q <- Q (I - 2vv^T/v^Tv)
        for i in range(d):
            s = 0.0
            for t in range(col, d):
                s += Q[i, t] * work[t]
            s = 2.0 * s / vnorm
            for t in range(col, d):
                Q[i, t] -= s * work[t]
    scale = 0.0
    for i in range(d):
        for j in range(i, d):
            a = abs(R[i, j])
            if a > scale:
                scale = a
    if scale == 0.0:
        return False
    for i in range(d):
        if abs(R[i, i]) < tol * scale:
            return False
    # A^{-1} = Q R^{-T}, one column at a time
    for j in range(d):
        # forward substitution R^T y = e_j
        for i in range(d):
            s = 1.0 if i == j else 0.0
            for t in range(i):
                s -= R[t, i] * work[t]
            work[i] = s / R[i, i]
        for i in range(d):
            s = 0.0
            for t in range(d):
                s += Q[i, t] * work[t]
            Ainv[i, j] = s
    return True


@nb.njit(**_OPTS)
def _factor_one(b, combos, ids, points, fvals, tol, poised, ainv, coef, A, Q, R, work):
    d = A.shape[0]
    n = d - 1
    for r in range(d):
        pid = ids[combos[b, r]]
        for c in range(n):
            A[r, c] = points[pid, c]
        A[r, n] = 1.0
    ok = _qr_inverse(A, tol, Q, R, ainv[b], work)
    poised[b] = ok
    if ok:
        for i in range(d):
            s = 0.0
            for r in range(d):
                s += ainv[b, i, r] * fvals[ids[combos[b, r]]]
            coef[b, i] = s


def _make_factor(parallel):
    @nb.njit(parallel=parallel, **_OPTS)
    def factor_combos(combos, count, ids, points, fvals, tol, poised, ainv, coef):
        """Factor the interpolation matrix of each of the first ``count`` combos."""
        d = combos.shape[1]
        for b in nb.prange(count):
            A = np.empty((d, d))
            Q = np.empty((d, d))
            R = np.empty((d, d))
            work = np.empty(d)
            _factor_one(b, combos, ids, points, fvals, tol, poised, ainv, coef, A, Q, R, work)

    return factor_combos


SWEEP_BLOCK = 256


def _make_sweep(parallel):
    @nb.njit(parallel=parallel, **_OPTS)
    def sweep(active, grid, eta, gen, sel, combos, ids, ainv, coef, tol, upper, updating, pruning):
        """Max-merge the cuts ``sel`` (in order) into ``eta`` on the ``active`` entries.

        Entry p is inside cut b's union iff at most one barycentric coordinate
        of ``grid[p]`` exceeds ``tol``.  Active entries are processed in blocks
        small enough to stay in cache while every cut streams past them once;
        each entry still sees the cuts in order.  Returns the number of entries
        whose bound strictly increased.
        """
        d = coef.shape[1]
        n = d - 1
        nsel = sel.shape[0]
        na = active.shape[0]
        nblk = (na + SWEEP_BLOCK - 1) // SWEEP_BLOCK
        changed = np.zeros(na, np.uint8)
        for blk in nb.prange(nblk):
            lo = blk * SWEEP_BLOCK
            hi = min(na, lo + SWEEP_BLOCK)
            w = hi - lo
            pts = np.empty((n, w))
            cur = np.empty(w)
            val = np.empty(w)
            best = np.full(w, -1, np.int64)
            for a in range(w):
                p = active[lo + a]
                cur[a] = eta[p]
                for i in range(n):
                    pts[i, a] = grid[p, i]
            for s in range(nsel):
                b = sel[s]
                # cut values for the whole block first (vectorizes), membership
                # only where the value would raise the bound
                c0 = coef[b, n]
                for a in range(w):
                    val[a] = c0
                for i in range(n):
                    ci = coef[b, i]
                    for a in range(w):
                        val[a] += ci * pts[i, a]
                for a in range(w):
                    m = val[a]
                    if m <= cur[a]:
                        continue
                    npos = 0
                    for j in range(d):
                        v = ainv[b, n, j]
                        for i in range(n):
                            v += pts[i, a] * ainv[b, i, j]
                        if v > tol:
                            npos += 1
                            if npos > 1:
                                break
                    if npos > 1:
                        continue
                    cur[a] = m
                    best[a] = b
                    updating[s] = 1
                    if m >= upper:
                        pruning[s] = 1
            for a in range(w):
                if best[a] >= 0:
                    p = active[lo + a]
                    eta[p] = cur[a]
                    for r in range(d):
                        gen[p, r] = ids[combos[best[a], r]]
                    changed[lo + a] = 1
        total = 0
        for a in range(na):
            total += changed[a]
        return total

    return sweep


factor_combos_serial = _make_factor(False)
factor_combos_parallel = _make_factor(True)
sweep_serial = _make_sweep(False)
sweep_parallel = _make_sweep(True)
