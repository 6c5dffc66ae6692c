"""Pure-numpy reference versions of the hot loops."""

import itertools

import numpy as np


def sym_dist_rows(X, Y):
    X = np.asarray(X)
    Y = np.asarray(Y)
    N = X.shape[1]
    best = np.full(X.shape[0], np.inf)
    for perm in itertools.permutations(range(N)):
        d = np.abs(X[:, perm, :] - Y).reshape(X.shape[0], -1)
        d = d.max(axis=1) if d.shape[1] else np.zeros(X.shape[0])
        best = np.minimum(best, d)
    return best


def _ceil_div(a, b):
    return -((-a) // b)


def alloy_values(q, M, box_lo, box_amps, fold):
    """Alloy potential at one-particle points q/M (q: (n, d) ints).

    The bump attached to site a is the indicator of the half-open cube
    (a - fold/2, a + fold/2]^d, so the bumps tile R^d exactly fold^d times.
    Uncovered points give NaN.
    """
    q = np.asarray(q, dtype=np.int64)
    n, d = q.shape
    first = _ceil_div(2 * q - fold * M, 2 * M) - np.asarray(box_lo, dtype=np.int64)
    shape = np.asarray(box_amps.shape)
    out = np.zeros(n)
    for shift in itertools.product(range(fold), repeat=d):
        idx = first + np.asarray(shift, dtype=np.int64)
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        vals = np.full(n, np.nan)
        vals[ok] = box_amps[tuple(idx[ok].T)]
        out += vals
    return out


def pair_interaction(q, M, C_U, zeta, trunc):
    """Sum over pairs of C_U exp(-r^zeta), r the max-norm distance (q: (n, N, d) ints)."""
    q = np.asarray(q, dtype=np.int64)
    n, N, _ = q.shape
    out = np.zeros(n)
    for i in range(N):
        for j in range(i + 1, N):
            r = np.abs(q[:, i, :] - q[:, j, :]).max(axis=1) / M
            u = C_U * np.exp(-r ** zeta)
            u[r > trunc] = 0.0
            out += u
    return out


def potential_diagonal(q, M, box_lo, box_amps, fold, g, C_U, zeta, trunc):
    q = np.asarray(q, dtype=np.int64)
    n, N, d = q.shape
    v = np.zeros(n)
    for j in range(N):
        v += alloy_values(q[:, j, :], M, box_lo, box_amps, fold)
    return g * v + pair_interaction(q, M, C_U, zeta, trunc)


def cell_sq_norms(vecs, cell_ids, n_cells):
    vecs = np.asarray(vecs)
    if vecs.ndim == 1:
        return np.bincount(cell_ids, weights=vecs ** 2, minlength=n_cells)
    out = np.zeros((n_cells, vecs.shape[1]))
    np.add.at(out, cell_ids, vecs ** 2)
    return out
