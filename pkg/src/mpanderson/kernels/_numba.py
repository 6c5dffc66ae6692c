"""numba-compiled versions of the hot loops; same signatures as ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _next_perm(a):
    # in-place lexicographic successor; False when a was the last permutation
    n = a.shape[0]
    i = n - 2
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = n - 1
    while a[j] <= a[i]:
        j -= 1
    a[i], a[j] = a[j], a[i]
    lo, hi = i + 1, n - 1
    while lo < hi:
        a[lo], a[hi] = a[hi], a[lo]
        lo += 1
        hi -= 1
    return True


@njit(cache=True)
def _sym_dist_rows(X, Y):
    m, N, d = X.shape
    out = np.empty(m)
    perm = np.empty(N, dtype=np.int64)
    for r in range(m):
        for k in range(N):
            perm[k] = k
        best = np.inf
        while True:
            worst = 0.0
            for k in range(N):
                for c in range(d):
                    v = abs(X[r, perm[k], c] - Y[r, k, c])
                    if v > worst:
                        worst = v
            if worst < best:
                best = worst
            if not _next_perm(perm):
                break
        out[r] = best
    return out


def sym_dist_rows(X, Y):
    return _sym_dist_rows(np.ascontiguousarray(X, dtype=np.float64),
                          np.ascontiguousarray(Y, dtype=np.float64))


@njit(cache=True)
def _potential_diagonal(q, M, box_lo, shape, amps, fold, g, C_U, zeta, trunc):
    n, N, d = q.shape
    out = np.empty(n)
    strides = np.empty(d, dtype=np.int64)
    s = 1
    for c in range(d - 1, -1, -1):
        strides[c] = s
        s *= shape[c]
    first = np.empty(d, dtype=np.int64)
    shift = np.empty(d, dtype=np.int64)
    nshift = fold ** d
    for r in range(n):
        v = 0.0
        for j in range(N):
            for c in range(d):
                a = 2 * q[r, j, c] - fold * M
                first[c] = -((-a) // (2 * M)) - box_lo[c]
            for t in range(nshift):
                rem = t
                for c in range(d - 1, -1, -1):
                    shift[c] = rem % fold
                    rem //= fold
                flat = 0
                inside = True
                for c in range(d):
                    i = first[c] + shift[c]
                    if i < 0 or i >= shape[c]:
                        inside = False
                        break
                    flat += i * strides[c]
                if inside:
                    v += amps[flat]
                else:
                    v += np.nan
        u = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                dist = 0.0
                for c in range(d):
                    w = abs(q[r, i, c] - q[r, j, c]) / M
                    if w > dist:
                        dist = w
                if dist <= trunc:
                    u += C_U * np.exp(-dist ** zeta)
        out[r] = g * v + u
    return out


def potential_diagonal(q, M, box_lo, box_amps, fold, g, C_U, zeta, trunc):
    box_amps = np.asarray(box_amps, dtype=np.float64)
    return _potential_diagonal(
        np.ascontiguousarray(q, dtype=np.int64), int(M),
        np.asarray(box_lo, dtype=np.int64), np.asarray(box_amps.shape, dtype=np.int64),
        np.ascontiguousarray(box_amps).ravel(), int(fold), float(g), float(C_U),
        float(zeta), float(trunc),
    )


@njit(cache=True)
def _cell_sq_norms_1d(vec, cell_ids, n_cells):
    out = np.zeros(n_cells)
    for i in range(vec.shape[0]):
        out[cell_ids[i]] += vec[i] * vec[i]
    return out


@njit(cache=True)
def _cell_sq_norms_2d(vecs, cell_ids, n_cells):
    out = np.zeros((n_cells, vecs.shape[1]))
    for i in range(vecs.shape[0]):
        c = cell_ids[i]
        for k in range(vecs.shape[1]):
            out[c, k] += vecs[i, k] * vecs[i, k]
    return out


def cell_sq_norms(vecs, cell_ids, n_cells):
    vecs = np.ascontiguousarray(vecs, dtype=np.float64)
    cell_ids = np.ascontiguousarray(cell_ids, dtype=np.int64)
    if vecs.ndim == 1:
        return _cell_sq_norms_1d(vecs, cell_ids, int(n_cells))
    return _cell_sq_norms_2d(vecs, cell_ids, int(n_cells))
