"""Finite-difference Hamiltonians on N-particle cubes and their resolvents.

A cube of radius L around u is the open box |x - u| < L + 1/2.  With mesh
step h = 1/M the grid keeps every point q/M (q integer) strictly inside, and
the Dirichlet wall sits on the first excluded layer.  At h = 1 this is the
lattice (tight-binding) model on the 2L+1 sites per axis.

Grid nodes are ordered lexicographically over the N*d axes, particle-major,
so the one-particle factors of a product cube appear in Kronecker order.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .geometry import CubeSpec, Factorization, LatticeConfig, lattice_ball
from .randomfield import DisorderSample, InteractionSpec

RESONANCE_TOL = 1e-12
RESIDUAL_TOL = 1e-8
DENSE_CROSSCHECK_DIM = 2000
DIRECT_SOLVE_DIM = 50_000
SPECTRAL_SOLVE_DIM = 400


class OperatorError(ValueError):
    pass


class ResonantEnergyError(OperatorError):
    def __init__(self, E: float, distance: float, where: str = ""):
        self.E = E
        self.distance = distance
        msg = f"resonant energy E={E!r}: distance {distance:.3e} to the spectrum"
        super().__init__(msg + (f" ({where})" if where else ""))


class EigenSolverError(RuntimeError):
    """Eigensolver failure; ``diagnostics`` says what was attempted."""

    def __init__(self, msg: str, diagnostics: dict):
        self.diagnostics = diagnostics
        super().__init__(f"{msg}: {diagnostics}")


def _ceil_div(a, b):
    return -((-a) // b)


# -- grid -------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    cube: CubeSpec
    h: float = 1.0
    boundary: str = "dirichlet"

    def __post_init__(self):
        if self.boundary != "dirichlet":
            raise OperatorError("only Dirichlet boundary conditions are supported")
        if not self.h > 0:
            raise OperatorError(f"h must be positive, got {self.h}")
        M = round(1.0 / self.h)
        if M < 1 or abs(1.0 / M - self.h) > 1e-12:
            raise OperatorError(f"h not of form 1/M: {self.h}")

    @property
    def M(self) -> int:
        return round(1.0 / self.h)

    @property
    def D(self) -> int:
        return self.cube.dim

    @property
    def half_width(self) -> int:
        """Largest |offset| in mesh units: the biggest j with j/M < L + 1/2."""
        M = self.M
        return M * self.cube.L + (M + 1) // 2 - 1

    @property
    def n_axis(self) -> int:
        return 2 * self.half_width + 1

    @property
    def dim(self) -> int:
        return self.n_axis ** self.D

    @property
    def hopping(self) -> float:
        return float(self.M ** 2)

    @property
    def origin(self) -> np.ndarray:
        return self.M * np.asarray(self.cube.center.coords, dtype=np.int64)

    @cached_property
    def strides(self) -> np.ndarray:
        return self.n_axis ** np.arange(self.D - 1, -1, -1, dtype=np.int64)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Integer node coordinates q (point = q*h), shape (dim, N*d)."""
        J = self.half_width
        axis = np.arange(-J, J + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * self.D), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1) + self.origin

    @property
    def points(self) -> np.ndarray:
        return self.nodes / self.M

    def index_of(self, q) -> np.ndarray:
        """Flat node index of integer coordinates q, or -1 outside the grid."""
        q = np.atleast_2d(np.asarray(q, dtype=np.int64))
        off = q - self.origin + self.half_width
        ok = np.all((off >= 0) & (off < self.n_axis), axis=1)
        return np.where(ok, off @ self.strides, -1)

    @cached_property
    def offset_radius(self) -> np.ndarray:
        """max_i |q_i - M u_i| per node, in mesh units."""
        return np.abs(self.nodes - self.origin).max(axis=1)

    @cached_property
    def belt_mask(self) -> np.ndarray:
        """Nodes with |p - u| in (L - 1/2, L + 1/2)."""
        two_r = 2 * self.offset_radius
        return two_r > self.M * (2 * self.cube.L - 1)

    def cell_coords(self, q=None) -> np.ndarray:
        """Lattice cell of each node: the x with p in (x - 1/2, x + 1/2] per axis."""
        q = self.nodes if q is None else np.atleast_2d(np.asarray(q, dtype=np.int64))
        return _ceil_div(2 * q - self.M, 2 * self.M)

    @cached_property
    def cell_ids(self) -> np.ndarray:
        """Index of each node's cell within ``lattice_ball(cube)``."""
        return self.cell_index(self.cell_coords())

    @property
    def n_cells(self) -> int:
        return self.cube.cardinality

    @cached_property
    def cells(self) -> np.ndarray:
        return lattice_ball(self.cube)

    def cell_index(self, cells) -> np.ndarray:
        cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
        L = self.cube.L
        off = cells - np.asarray(self.cube.center.coords) + L
        if np.any((off < 0) | (off > 2 * L)):
            raise OperatorError(f"cell outside the cube: {cells[np.any((off < 0) | (off > 2 * L), axis=1)][0].tolist()}")
        return off @ ((2 * L + 1) ** np.arange(self.D - 1, -1, -1, dtype=np.int64))

    def cell_nodes(self, cell) -> np.ndarray:
        idx = int(self.cell_index(_coords(cell))[0])
        return np.flatnonzero(self.cell_ids == idx)

    @property
    def center_nodes(self) -> np.ndarray:
        return self.cell_nodes(self.cube.center.coords)

    def outer_layer(self) -> np.ndarray:
        """Integer coordinates of the nodes just outside the grid that touch it.

        Each such node differs from a grid node in exactly one axis, by one
        mesh step; these are the nodes the Dirichlet cut disconnects.
        """
        J = self.half_width
        inner = self.nodes - self.origin
        out = []
        for a in range(self.D):
            for s in (-1, 1):
                face = inner[inner[:, a] == s * J].copy()
                face[:, a] += s
                out.append(face)
        return np.concatenate(out) + self.origin

    def coupling_norm(self, kappa: float) -> float:
        """Operator norm of the hopping terms cut by the Dirichlet wall.

        Every outer node touches exactly one grid node, so the norm is
        kappa/h^2 times the square root of the largest number of cut bonds at
        a single grid node (N*d at a corner, twice that for a one-node grid).
        """
        deg = self.D if self.half_width >= 1 else 2 * self.D
        return kappa * self.hopping * math.sqrt(deg)

    def with_cube(self, cube: CubeSpec) -> "GridSpec":
        return GridSpec(cube, self.h, self.boundary)

    def to_dict(self) -> dict:
        return {"center": list(self.cube.center.coords), "L": self.cube.L, "N": self.cube.N,
                "d": self.cube.d, "h": self.h, "boundary": self.boundary,
                "points_per_axis": self.n_axis, "dim": self.dim}


def _coords(cell) -> tuple[int, ...]:
    if isinstance(cell, LatticeConfig):
        return cell.coords
    return tuple(int(c) for c in np.ravel(cell))


def dirichlet_laplacian_1d(n: int, M: int) -> sp.csr_matrix:
    """-d^2/dx^2 on n interior points with mesh 1/M."""
    main = np.full(n, 2.0 * M * M)
    off = np.full(n - 1, -1.0 * M * M)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def kinetic_matrix(grid: GridSpec, kappa: float) -> sp.csr_matrix:
    n, D = grid.n_axis, grid.D
    T = dirichlet_laplacian_1d(n, grid.M)
    out = sp.csr_matrix((grid.dim, grid.dim))
    for a in range(D):
        left = sp.identity(n ** a, format="csr")
        right = sp.identity(n ** (D - a - 1), format="csr")
        out = out + sp.kron(sp.kron(left, T), right, format="csr")
    return (kappa * out).tocsr()


def free_eigenvalues(grid: GridSpec, kappa: float) -> np.ndarray:
    """Closed-form spectrum of kappa * (-Laplacian) on the grid, sorted."""
    n, M = grid.n_axis, grid.M
    k = np.arange(1, n + 1)
    one = 2.0 * M * M * (1.0 - np.cos(k * np.pi / (n + 1)))
    total = np.zeros(1)
    for _ in range(grid.D):
        total = (total[:, None] + one[None, :]).ravel()
    return np.sort(kappa * total)


# -- operator ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    grid: GridSpec
    kappa: float
    disorder: DisorderSample | None
    interaction: InteractionSpec
    g: float
    tiling_fold: int
    matrix: sp.csr_matrix
    potential: np.ndarray
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def cube(self) -> CubeSpec:
        return self.grid.cube

    @cached_property
    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Full dense eigendecomposition, computed once."""
        with self._lock:
            if "_eigh" not in self.__dict__:
                w, v = np.linalg.eigh(self.dense)
                self.__dict__["_eigh"] = (w, v)
                self.__dict__["_eigvals"] = w
            return self.__dict__["_eigh"]

    def eigenvalues(self) -> np.ndarray:
        with self._lock:
            if "_eigvals" not in self.__dict__:
                self.__dict__["_eigvals"] = np.linalg.eigvalsh(self.dense)
            return self.__dict__["_eigvals"]

    def spectral_distance(self, E: float) -> float:
        """dist(E, spectrum)."""
        if self.dim <= SPECTRAL_SOLVE_DIM:
            self.eigh()
        if self.dim <= 6000 or "_eigvals" in self.__dict__:
            w = self.eigenvalues()
            i = np.searchsorted(w, E)
            cand = w[max(i - 1, 0):i + 1]
            return float(np.min(np.abs(cand - E)))
        v0 = np.full(self.dim, 1.0 / math.sqrt(self.dim))
        w = spla.eigsh(self.matrix, k=1, sigma=E, which="LM", v0=v0, return_eigenvectors=False)
        return float(abs(w[0] - E))

    def ground_energy(self) -> float:
        if self.dim <= 6000 or "_eigvals" in self.__dict__:
            return float(self.eigenvalues()[0])
        v0 = np.full(self.dim, 1.0 / math.sqrt(self.dim))
        return float(spla.eigsh(self.matrix, k=1, which="SA", v0=v0, return_eigenvectors=False)[0])

    def _factor(self, E: float):
        with self._lock:
            cache = self.__dict__.setdefault("_lu", {})
            if E not in cache:
                if len(cache) >= 4:
                    cache.pop(next(iter(cache)))
                A = (self.matrix - E * sp.identity(self.dim, format="csr")).tocsc()
                cache[E] = spla.splu(A)
            return cache[E]

    def resolvent_columns(self, E: float, cols) -> np.ndarray:
        """Columns (H - E)^{-1} e_j, j in ``cols``, with a residual check."""
        dist = self.spectral_distance(E)
        if dist <= RESONANCE_TOL:
            raise ResonantEnergyError(E, dist)
        cols = np.asarray(cols, dtype=np.int64)
        rhs = np.zeros((self.dim, cols.size))
        rhs[cols, np.arange(cols.size)] = 1.0
        if self.dim <= SPECTRAL_SOLVE_DIM:
            w, V = self.eigh()
            X = V @ (V[cols].T / (w - E)[:, None])
        elif self.dim <= DIRECT_SOLVE_DIM:
            X = self._factor(E).solve(rhs)
        else:  # pragma: no cover - desk-scale runs stay below the direct limit
            A = self.matrix - E * sp.identity(self.dim, format="csr")
            X = np.column_stack([spla.minres(A, rhs[:, j], rtol=1e-12)[0] for j in range(cols.size)])
        X = np.atleast_2d(X.reshape(self.dim, -1))
        res = self.matrix @ X - E * X - rhs
        worst = float(np.abs(res).max()) if res.size else 0.0
        if worst > RESIDUAL_TOL * max(1.0, float(np.abs(X).max())):
            raise OperatorError(f"linear solve residual {worst:.3e} exceeds tolerance at E={E}")
        return X

    def restrict(self, center, L: int) -> "DiscretizedOperator":
        """Principal sub-operator on the cube of radius L around ``center``.

        The sub-grid must lie inside this grid; the matrix is the
        corresponding principal submatrix, which equals a fresh assembly on
        the smaller cube with the same disorder sample.
        """
        c = LatticeConfig.of(_coords(center), self.cube.N, self.cube.d)
        sub = self.grid.with_cube(CubeSpec(c, int(L)))
        idx = self.grid.index_of(sub.nodes)
        if np.any(idx < 0):
            raise OperatorError(f"sub-cube at {c.coords} with L={L} leaves the grid")
        dense = None
        if self.dim <= 6000:
            dense = self.dense[np.ix_(idx, idx)]
            mat = sp.csr_matrix(dense)
        else:
            mat = self.matrix[idx][:, idx].tocsr()
        out = DiscretizedOperator(sub, self.kappa, self.disorder, self.interaction, self.g,
                                  self.tiling_fold, mat, self.potential[idx].copy())
        if dense is not None:
            out.__dict__["dense"] = dense
        return out

    def embedding(self, sub: "DiscretizedOperator") -> np.ndarray:
        idx = self.grid.index_of(sub.grid.nodes)
        if np.any(idx < 0):
            raise OperatorError("operator grid is not contained in this one")
        return idx

    def to_json(self) -> dict:
        coo = sp.triu(self.matrix).tocoo()
        return {
            "grid": self.grid.to_dict(),
            "kappa": self.kappa,
            "g": self.g,
            "tiling_fold": self.tiling_fold,
            "interaction": self.interaction.to_dict(),
            "disorder": None if self.disorder is None else self.disorder.to_json(),
            "nodes": self.grid.nodes.tolist(),
            "potential": self.potential.tolist(),
            "upper_triangle": {"rows": coo.row.tolist(), "cols": coo.col.tolist(),
                               "values": coo.data.tolist()},
        }


def assemble(grid: GridSpec, disorder: DisorderSample | None = None,
             interaction: InteractionSpec | None = None, g: float = 1.0,
             kappa: float = 0.5, tiling_fold: int = 1,
             decouple: tuple[int, ...] | None = None) -> DiscretizedOperator:
    """H = kappa * (-Laplacian_h) + g * sum_j V(x_j) + U(x) on ``grid``.

    ``decouple`` drops the interaction between the particles in that index
    set and the rest, giving the non-interacting operator of a factorization.
    """
    interaction = interaction or InteractionSpec(C_U=0.0)
    if kappa <= 0:
        raise OperatorError("kappa must be positive")
    N, d = grid.cube.N, grid.cube.d
    q = grid.nodes.reshape(-1, N, d)
    if g != 0:
        if disorder is None:
            raise OperatorError("insufficient disorder region: no disorder sample given")
        lo, arr = disorder.box()
        amps_lo, amps = lo, arr
    else:
        amps_lo, amps = np.zeros(d, dtype=np.int64), np.zeros((1,) * d)
    if g != 0:
        diag = kernels.potential_diagonal(q, grid.M, amps_lo, amps, tiling_fold, g,
                                          interaction.C_U, interaction.zeta,
                                          interaction.truncation_radius)
        if np.any(np.isnan(diag)):
            bad = grid.points[np.isnan(diag)][0]
            raise OperatorError(f"insufficient disorder region: bump coverage missing at {bad.tolist()}")
    else:
        diag = kernels.numpy_impl.pair_interaction(q, grid.M, interaction.C_U, interaction.zeta,
                                                   interaction.truncation_radius)
    if decouple is not None:
        diag = diag - cross_interaction(q, grid.M, decouple, interaction)
    H = kinetic_matrix(grid, kappa) + sp.diags(diag, format="csr")
    return DiscretizedOperator(grid, float(kappa), disorder, interaction, float(g),
                               int(tiling_fold), H.tocsr(), np.asarray(diag, dtype=float))


def cross_interaction(q, M: int, J, interaction: InteractionSpec) -> np.ndarray:
    """sum_{i in J, j not in J} U(|x_i - x_j|) at integer configurations q (n, N, d)."""
    q = np.asarray(q, dtype=np.int64)
    J = tuple(J)
    Jc = [j for j in range(q.shape[1]) if j not in J]
    out = np.zeros(q.shape[0])
    for i in J:
        for j in Jc:
            r = np.abs(q[:, i, :] - q[:, j, :]).max(axis=1) / M
            out += interaction.U(r)
    return out


# -- spectra ----------------------------------------------------------------

@dataclass
class SpectralData:
    window: tuple[float, float]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    cell_profiles: np.ndarray | None = None  # (n_cells, k): ||chi_x Psi||
    residuals: np.ndarray | None = None
    method: str = "dense"

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    def to_json(self) -> dict:
        return {"window": list(self.window), "eigenvalues": self.eigenvalues.tolist(),
                "residuals": None if self.residuals is None else self.residuals.tolist(),
                "method": self.method}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue", "residual"])
            for i, lam in enumerate(self.eigenvalues):
                r = "" if self.residuals is None else repr(float(self.residuals[i]))
                w.writerow([i, repr(float(lam)), r])


def _residuals(op: DiscretizedOperator, w, V) -> np.ndarray:
    if V.size == 0:
        return np.zeros(0)
    R = op.matrix @ V - V * w
    return np.linalg.norm(R, axis=0) / np.linalg.norm(V, axis=0)


def _sparse_window(op: DiscretizedOperator, lo: float, hi: float):
    c, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    v0 = np.full(op.dim, 1.0 / math.sqrt(op.dim))
    k = 8
    while True:
        if k >= op.dim - 1:
            return None
        try:
            w, V = spla.eigsh(op.matrix, k=k, sigma=c, which="LM", v0=v0, tol=1e-13)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError("shift-invert eigensolver did not converge",
                                   {"k": k, "sigma": c, "converged": len(exc.eigenvalues),
                                    "dim": op.dim}) from exc
        if np.max(np.abs(w - c)) > half:
            keep = (w >= lo) & (w <= hi)
            order = np.argsort(w[keep])
            return w[keep][order], V[:, keep][:, order]
        k *= 2


def spectrum_window(op: DiscretizedOperator, window, vectors: bool = True,
                    method: str = "auto") -> SpectralData:
    """All eigenvalues of ``op`` in the closed window, with residual checks."""
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise OperatorError(f"empty window [{lo}, {hi}]")
    if method not in ("auto", "dense", "sparse"):
        raise OperatorError(f"unknown method {method!r}")
    use_dense = method == "dense" or (method == "auto" and op.dim <= DENSE_CROSSCHECK_DIM)
    got = None if use_dense else _sparse_window(op, lo, hi)
    if got is None:
        if vectors:
            w_all, V_all = op.eigh()
        else:
            w_all, V_all = op.eigenvalues(), None
        keep = (w_all >= lo) & (w_all <= hi)
        w = w_all[keep]
        V = V_all[:, keep] if vectors else None
        used = "dense"
    else:
        w, V = got
        used = "sparse"
        if op.dim <= DENSE_CROSSCHECK_DIM:
            ref = op.eigenvalues()
            n_ref = int(np.count_nonzero((ref >= lo) & (ref <= hi)))
            if n_ref != w.size or (w.size and np.max(np.abs(ref[(ref >= lo) & (ref <= hi)] - w)) > 1e-8):
                raise EigenSolverError("sparse window disagrees with the dense solve",
                                       {"sparse_count": int(w.size), "dense_count": n_ref})
    res = profiles = None
    if V is not None:
        V = V / np.linalg.norm(V, axis=0, keepdims=True) if V.size else V
        res = _residuals(op, w, V)
        if res.size and res.max() > RESIDUAL_TOL:
            raise EigenSolverError("eigenpair residual above tolerance",
                                   {"max_residual": float(res.max()), "method": used})
        profiles = np.sqrt(kernels.cell_sq_norms(V, op.grid.cell_ids, op.grid.n_cells))
    return SpectralData((lo, hi), np.asarray(w), V, profiles, res, used)


# -- Green function probes --------------------------------------------------

@dataclass(frozen=True)
class GreenProbe:
    E: float
    x: tuple[int, ...]
    y: tuple[int, ...] | None
    block_norm: float
    dnorm: float | None = None


def _spec_norm(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A)[0])


def green_block(op: DiscretizedOperator, E: float, cell_x, cell_y) -> GreenProbe:
    """||chi_y G(E) chi_x|| for lattice cells x, y of the cube."""
    rows, cols = op.grid.cell_nodes(cell_y), op.grid.cell_nodes(cell_x)
    X = op.resolvent_columns(E, cols)
    return GreenProbe(float(E), _coords(cell_x), _coords(cell_y), _spec_norm(X[rows]))


def dnorm(op: DiscretizedOperator, E: float) -> float:
    """||1_belt G(E) chi_u||: the belt-to-center resolvent norm."""
    X = op.resolvent_columns(E, op.grid.center_nodes)
    return _spec_norm(X[op.grid.belt_mask])


def center_probe(op: DiscretizedOperator, E: float) -> GreenProbe:
    X = op.resolvent_columns(E, op.grid.center_nodes)
    u = op.cube.center.coords
    return GreenProbe(float(E), u, u, _spec_norm(X[op.grid.center_nodes]),
                      _spec_norm(X[op.grid.belt_mask]))


def boundary_block_norms(op: DiscretizedOperator, E: float, belt_only: bool = False) -> dict:
    """Per boundary cell y: ||chi_y G chi_u||, or ||1_belt chi_y G chi_u|| if ``belt_only``."""
    X = op.resolvent_columns(E, op.grid.center_nodes)
    out = {}
    L = op.cube.L
    u = np.asarray(op.cube.center.coords)
    cells = op.grid.cells
    on_bd = np.abs(cells - u).max(axis=1) == L if L > 0 else np.zeros(len(cells), bool)
    for ci in np.flatnonzero(on_bd):
        rows = op.grid.cell_ids == ci
        if belt_only:
            rows &= op.grid.belt_mask
        out[tuple(int(c) for c in cells[ci])] = _spec_norm(X[rows])
    return out


def dnorm_many(op: DiscretizedOperator, energies) -> np.ndarray:
    """dnorm at many energies from one eigendecomposition; inf where resonant."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    w, V = op.eigh()
    B = V[op.grid.belt_mask]           # (n_belt, n)
    C = V[op.grid.center_nodes]        # (n_c, n)
    out = np.empty(energies.size)
    chunk = max(1, 4_000_000 // max(1, B.shape[0] * C.shape[0] + V.shape[1]))
    for s in range(0, energies.size, chunk):
        e = energies[s:s + chunk]
        den = w[None, :] - e[:, None]
        res = np.min(np.abs(den), axis=1) <= RESONANCE_TOL
        den[res] = 1.0
        R = np.einsum("bn,en,cn->ebc", B, 1.0 / den, C, optimize=True)
        gram = np.einsum("ebc,ebk->eck", R, R)
        top = np.linalg.eigvalsh(gram)[:, -1]
        vals = np.sqrt(np.clip(top, 0.0, None))
        vals[res] = np.inf
        out[s:s + chunk] = vals
    return out


def boundary_max_many(op: DiscretizedOperator, energies) -> np.ndarray:
    """max over boundary cells y of ||chi_y G(E) chi_u|| at many energies; inf where resonant."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    w, V = op.eigh()
    L = op.cube.L
    if L == 0:
        raise OperatorError("a radius-0 cube has no boundary cells")
    u = np.asarray(op.cube.center.coords)
    cells = op.grid.cells
    bd = np.flatnonzero(np.abs(cells - u).max(axis=1) == L)
    row_sets = [np.flatnonzero(op.grid.cell_ids == ci) for ci in bd]
    rows = np.concatenate(row_sets)
    owner = np.repeat(np.arange(len(bd)), [len(r) for r in row_sets])
    B = V[rows]
    C = V[op.grid.center_nodes]
    out = np.empty(energies.size)
    chunk = max(1, 4_000_000 // max(1, B.shape[0] * C.shape[0] + V.shape[1]))
    for s in range(0, energies.size, chunk):
        e = energies[s:s + chunk]
        den = w[None, :] - e[:, None]
        res = np.min(np.abs(den), axis=1) <= RESONANCE_TOL
        den[res] = 1.0
        R = np.einsum("rn,en,cn->erc", B, 1.0 / den, C, optimize=True)
        gram = np.zeros((e.size, len(bd), C.shape[0], C.shape[0]))
        for j in range(len(bd)):
            Rj = R[:, owner == j, :]
            gram[:, j] = np.einsum("erc,erk->eck", Rj, Rj)
        top = np.linalg.eigvalsh(gram)[..., -1].max(axis=1)
        vals = np.sqrt(np.clip(top, 0.0, None))
        vals[res] = np.inf
        out[s:s + chunk] = vals
    return out


# -- tensor expansion -------------------------------------------------------

@dataclass(frozen=True)
class TensorReport:
    E: float
    residual_primed: float
    residual_double_primed: float
    orders_agree: float
    structure_error: float


def factor_operators(op: DiscretizedOperator, fac: Factorization):
    """The sub-operators on the J and J^c particle cubes, same disorder and mesh."""
    L = op.cube.L
    mk = lambda c: assemble(GridSpec(CubeSpec(c, L), op.grid.h), op.disorder,
                            op.interaction, op.g, op.kappa, op.tiling_fold)
    return mk(fac.center_J), mk(fac.center_Jc)


def _product_order(op_full, op1, op2, J) -> np.ndarray:
    N, d = op_full.cube.N, op_full.cube.d
    q = op_full.grid.nodes.reshape(-1, N, d)
    Jc = [j for j in range(N) if j not in J]
    i1 = op1.grid.index_of(q[:, list(J), :].reshape(q.shape[0], -1))
    i2 = op2.grid.index_of(q[:, Jc, :].reshape(q.shape[0], -1))
    if np.any(i1 < 0) or np.any(i2 < 0):
        raise OperatorError("full grid is not the product of the factor grids")
    return i1 * op2.dim + i2


def _resolvent_dense(A: np.ndarray, z: float, label: str) -> np.ndarray:
    w = np.linalg.eigvalsh(A)
    dist = float(np.min(np.abs(w - z)))
    if dist <= RESONANCE_TOL:
        raise ResonantEnergyError(z, dist, label)
    return np.linalg.inv(A - z * np.eye(A.shape[0]))


def tensor_green(op_full: DiscretizedOperator, op1: DiscretizedOperator,
                 op2: DiscretizedOperator, E: float, J=(0,)) -> TensorReport:
    """Compare direct G(E) with the two spectral tensor expansions.

    G = sum_a P'_a (x) G''(E - E'_a) = sum_b G'(E - E''_b) (x) P''_b, where
    (E'_a, Psi'_a) are eigenpairs of op1 and (E''_b, Psi''_b) of op2.
    """
    perm = _product_order(op_full, op1, op2, tuple(J))
    H1, H2 = op1.dense, op2.dense
    n1, n2 = H1.shape[0], H2.shape[0]
    product = np.kron(H1, np.eye(n2)) + np.kron(np.eye(n1), H2)
    structure = float(np.abs(op_full.dense - product[np.ix_(perm, perm)]).max())
    if structure > 1e-10:
        raise OperatorError(f"operator is not op1 (x) 1 + 1 (x) op2 (deviation {structure:.3e})")
    direct = _resolvent_dense(op_full.dense, E, "full operator")
    w1, V1 = np.linalg.eigh(H1)
    w2, V2 = np.linalg.eigh(H2)
    G_a = np.zeros((n1 * n2, n1 * n2))
    for a in range(n1):
        P = np.outer(V1[:, a], V1[:, a])
        G_a += np.kron(P, _resolvent_dense(H2, E - w1[a], f"a={a}"))
    G_b = np.zeros_like(G_a)
    for b in range(n2):
        P = np.outer(V2[:, b], V2[:, b])
        G_b += np.kron(_resolvent_dense(H1, E - w2[b], f"b={b}"), P)
    G_a, G_b = G_a[np.ix_(perm, perm)], G_b[np.ix_(perm, perm)]
    return TensorReport(float(E), float(np.abs(G_a - direct).max()),
                        float(np.abs(G_b - direct).max()),
                        float(np.abs(G_a - G_b).max()), structure)


def interaction_offdiag_norm(cube: CubeSpec, fac: Factorization, interaction: InteractionSpec,
                             mesh: float = 0.5, max_points: int = 2_000_000) -> float:
    """sup over the closed cube of sum_{i in J, j in J^c} U(|x_i - x_j|).

    The sup is taken on the mesh of step ``mesh`` through the closed cube,
    which contains every corner, hence every pair's closest approach.  When
    the mesh is too large to enumerate, the sum of per-pair sups (an upper
    bound) is returned instead.
    """
    M = round(1.0 / mesh)
    D = cube.dim
    span = M * (2 * cube.L + 1) + 1
    if span ** D > max_points:
        p = cube.center.points
        total = 0.0
        for i in fac.J:
            for j in fac.Jc:
                gap = max(0.0, float(np.abs(p[i] - p[j]).max()) - cube.diameter)
                total += float(interaction.U(gap))
        return total
    half = M * (2 * cube.L + 1)  # twice the half-width, in units of 1/(2M)
    axis = np.arange(-half, half + 1, 2, dtype=np.int64)
    grids = np.meshgrid(*([axis] * D), indexing="ij")
    q = np.stack([g.ravel() for g in grids], axis=1) + 2 * M * np.asarray(cube.center.coords)
    vals = cross_interaction(q.reshape(-1, cube.N, cube.d), 2 * M, fac.J, interaction)
    return float(vals.max())


def weyl_shift(op_int: DiscretizedOperator, op_ni: DiscretizedOperator) -> tuple[float, float]:
    """(max_i |lambda_i(H) - lambda_i(H_ni)|, sup-norm of H - H_ni); the first never exceeds the second."""
    shift = float(np.max(np.abs(op_int.eigenvalues() - op_ni.eigenvalues())))
    bound = float(np.max(np.abs(op_int.potential - op_ni.potential)))
    return shift, bound


# -- Combes-Thomas ----------------------------------------------------------

@dataclass(frozen=True)
class CTProfile:
    E: float
    radii: np.ndarray
    norms: np.ndarray
    rate: float
    intercept: float
    r2: float


def loglinear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares fit log(y) = a + b x; returns (b, a, R^2)."""
    x = np.asarray(x, dtype=float)
    ly = np.log(np.asarray(y, dtype=float))
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(coef[0]), r2


def combes_thomas_profile(op: DiscretizedOperator, E: float, radii=None) -> CTProfile:
    """Decay rate of max_y ||chi_y G_{cube_r(u)}(E) chi_u|| over boundary cells y, r = 1..L."""
    L = op.cube.L
    radii = np.arange(1, L + 1) if radii is None else np.asarray(radii)
    if len(radii) < 3:
        raise OperatorError("cube too small for a fit")
    E0 = op.ground_energy()
    if not E < E0:
        raise OperatorError(f"E={E} is not below the spectrum (ground energy {E0})")
    u = op.cube.center.coords
    norms = []
    for r in radii:
        sub = op if r == L else op.restrict(u, int(r))
        norms.append(max(boundary_block_norms(sub, E).values()))
    slope, icpt, r2 = loglinear_fit(radii, norms)
    return CTProfile(float(E), np.asarray(radii), np.asarray(norms), -slope, icpt, r2)


# -- eigenfunction decay inequality ------------------------------------------

@dataclass(frozen=True)
class EDIReport:
    x: tuple[int, ...]
    L: int
    eigenvalue: float
    skipped: bool
    lhs: float = float("nan")
    dnorm: float = float("nan")
    coupling: float = float("nan")
    outer_norm: float = float("nan")
    rhs: float = float("nan")
    holds: bool = True
    slack: float = float("nan")
    literal_rhs: float = float("nan")
    literal_holds: bool = True
    boundary_max_rhs: float = float("nan")
    boundary_prefactor: float = float("nan")
    reason: str = ""

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def edi_check(big: DiscretizedOperator, lam: float, psi: np.ndarray, x, L: int,
              floor: float = 1e-14) -> EDIReport:
    """Check ||chi_x Psi|| <= C * dnorm(G_sub(lam)) * ||1_out Psi|| for an eigenpair of ``big``.

    ``1_out`` is the layer of grid nodes just outside the sub-cube and C the
    norm of the hopping bonds the sub-cube's wall cuts.  The form without C,
    with the sub-cube's own belt in place of the outer layer, is reported as
    ``literal_*`` for comparison.
    """
    xc = _coords(x)
    gap = np.abs(np.asarray(xc) - np.asarray(big.cube.center.coords)).max()
    if gap + L + 1 > big.cube.L:
        raise OperatorError(f"sub-cube at {xc} with L={L} padded by 1 is not inside the cube")
    sub = big.restrict(xc, L)
    dist = sub.spectral_distance(lam)
    if dist <= RESONANCE_TOL:
        return EDIReport(xc, L, float(lam), True, reason=f"resonant sub-cube (distance {dist:.2e})")
    psi = np.asarray(psi, dtype=float)
    lhs = float(np.linalg.norm(psi[big.grid.cell_nodes(xc)]))
    dn = dnorm(sub, lam)
    outer_q = sub.grid.outer_layer()
    outer_idx = big.grid.index_of(outer_q)
    outer_norm = float(np.linalg.norm(psi[outer_idx[outer_idx >= 0]]))
    C = sub.grid.coupling_norm(big.kappa)
    rhs = C * dn * outer_norm
    sub_idx = big.embedding(sub)
    literal = dn * float(np.linalg.norm(psi[sub_idx[sub.grid.belt_mask]]))
    # boundary-max form: ||1_out Psi||^2 <= |Z| max_z ||chi_z Psi||^2 over cells z meeting the layer
    zcells = np.unique(big.grid.cell_coords(outer_q[outer_idx >= 0]), axis=0)
    zmax = max(float(np.linalg.norm(psi[big.grid.cell_nodes(z)])) for z in zcells)
    bmax = C * math.sqrt(len(zcells)) * dn * zmax
    pref = C * math.sqrt(len(zcells)) / float(L) ** big.cube.dim
    if lhs < floor and rhs < floor:
        slack, holds = 0.0, True
    else:
        slack = lhs / rhs if rhs > 0 else math.inf
        holds = lhs <= rhs * (1 + 1e-9) + floor
    return EDIReport(xc, L, float(lam), False, lhs, dn, C, outer_norm, rhs, holds, slack,
                     literal, lhs <= literal * (1 + 1e-9) + floor, bmax, pref)


def export_operator(op: DiscretizedOperator, path) -> None:
    with open(path, "w") as fh:
        json.dump(op.to_json(), fh)
