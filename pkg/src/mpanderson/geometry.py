"""Geometry of N-particle cubes on the lattice (Z^d)^N.

All distances use the max-norm.  A configuration of N particles in Z^d is
stored flat, as a tuple of N*d integers (particle-major order).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeConfig:
    """N points of Z^d, flattened to ``coords`` of length N*d."""

    coords: tuple[int, ...]
    N: int
    d: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.N < 1 or self.d < 1:
            raise GeometryError(f"need N >= 1 and d >= 1, got N={self.N}, d={self.d}")
        if len(self.coords) != self.N * self.d:
            raise GeometryError(
                f"expected {self.N * self.d} coordinates for N={self.N}, d={self.d}, "
                f"got {len(self.coords)}"
            )

    @classmethod
    def of(cls, coords, N: int | None = None, d: int = 1) -> "LatticeConfig":
        coords = tuple(int(c) for c in np.ravel(coords))
        if N is None:
            N = len(coords) // d
        return cls(coords, N, d)

    @property
    def points(self) -> np.ndarray:
        """The configuration as an (N, d) integer array."""
        return np.asarray(self.coords, dtype=np.int64).reshape(self.N, self.d)

    def particle(self, i: int) -> tuple[int, ...]:
        return self.coords[i * self.d:(i + 1) * self.d]

    def project(self, J) -> "LatticeConfig":
        return LatticeConfig(tuple(c for i in J for c in self.particle(i)), len(J), self.d)

    def __sub__(self, other: "LatticeConfig") -> np.ndarray:
        return np.subtract(self.coords, other.coords)


def max_norm(v) -> float:
    v = np.asarray(v)
    return float(np.max(np.abs(v))) if v.size else 0.0


@dataclass(frozen=True)
class CubeSpec:
    """The open cube of radius L + 1/2 around a lattice configuration."""

    center: LatticeConfig
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 0:
            raise GeometryError(f"radius must be a nonnegative integer, got {self.L}")

    @classmethod
    def around(cls, coords, L: int, N: int | None = None, d: int = 1) -> "CubeSpec":
        return cls(LatticeConfig.of(coords, N, d), int(L))

    @property
    def N(self) -> int:
        return self.center.N

    @property
    def d(self) -> int:
        return self.center.d

    @property
    def dim(self) -> int:
        return self.N * self.d

    @property
    def cardinality(self) -> int:
        return (2 * self.L + 1) ** self.dim

    @property
    def lattice_diameter(self) -> int:
        return 2 * self.L

    @property
    def diameter(self) -> int:
        return 2 * self.L + 1

    def contains(self, y) -> bool:
        """Membership of a continuum point in the open cube."""
        return max_norm(np.asarray(y, dtype=float) - np.asarray(self.center.coords)) < self.L + 0.5

    def with_radius(self, L: int) -> "CubeSpec":
        return CubeSpec(self.center, L)

    def moved(self, center) -> "CubeSpec":
        return CubeSpec(LatticeConfig.of(center, self.N, self.d), self.L)


def _box(center, lo: int, hi: int) -> np.ndarray:
    """Integer points center + k with every offset k_i in [lo, hi]."""
    c = np.asarray(center, dtype=np.int64)
    axis = np.arange(lo, hi + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * c.size), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1) + c


def lattice_ball(cube: CubeSpec) -> np.ndarray:
    """All y in (Z^d)^N with |y - u| <= L, as rows of an int array.

    Rows come in lexicographic order.  The count is (2L+1)^{Nd}.
    """
    return _box(cube.center.coords, -cube.L, cube.L)


def boundary_set(cube: CubeSpec) -> np.ndarray:
    """Lattice points at max-distance exactly L from the center."""
    if cube.L == 0:
        raise GeometryError("no boundary at radius zero")
    pts = lattice_ball(cube)
    off = np.abs(pts - np.asarray(cube.center.coords)).max(axis=1)
    return pts[off == cube.L]


def iter_configs(points: np.ndarray, N: int, d: int) -> Iterator[LatticeConfig]:
    for row in points:
        yield LatticeConfig(tuple(int(c) for c in row), N, d)


def sym_dist(x: LatticeConfig, y: LatticeConfig) -> float:
    """Symmetrized max-norm distance: min over particle permutations of |pi(x) - y|."""
    if (x.N, x.d) != (y.N, y.d):
        raise GeometryError(f"mismatched configurations: (N, d) = {(x.N, x.d)} vs {(y.N, y.d)}")
    return float(kernels.sym_dist_rows(x.points[None], y.points[None])[0])


def particle_diameter(u: LatticeConfig) -> float:
    """max_{i != j} |u_i - u_j|; zero for a single particle."""
    p = u.points
    if u.N < 2:
        return 0.0
    diffs = np.abs(p[:, None, :] - p[None, :, :]).max(axis=2)
    return float(diffs.max())


def wi_threshold(N: int, L: int, tau: float) -> float:
    return 3.0 * N * float(L) ** tau


def classify_interactivity(cube: CubeSpec, tau: float) -> str:
    """Return "WI" if the particle cluster is spread by at least 3 N L^tau, else "SI".

    Single-particle cubes are SI.  A configuration of zero diameter is SI at
    every radius, including L = 0 where the threshold itself vanishes.
    """
    if tau < 1:
        raise GeometryError(f"tau must be >= 1, got {tau}")
    if cube.N == 1:
        return "SI"
    diam = particle_diameter(cube.center)
    if diam > 0 and diam >= wi_threshold(cube.N, cube.L, tau):
        return "WI"
    return "SI"


@dataclass(frozen=True)
class Factorization:
    """Split of the particle indices {0..N-1} into J and its complement.

    Indices are zero-based.  ``separation`` is the max-norm distance between
    the one-particle projections of the two sub-cubes (open cubes of radius
    L + 1/2 around each particle position).
    """

    J: tuple[int, ...]
    Jc: tuple[int, ...]
    center_J: LatticeConfig
    center_Jc: LatticeConfig
    separation: float

    def __post_init__(self):
        if not self.J or not self.Jc:
            raise GeometryError("both parts of a factorization must be nonempty")
        if set(self.J) & set(self.Jc):
            raise GeometryError("factorization parts overlap")


def projection_separation(cube: CubeSpec, J, Jc) -> float:
    """Distance between the projections of the J- and Jc-particle sub-cubes."""
    p = cube.center.points
    gaps = np.abs(p[list(J)][:, None, :] - p[list(Jc)][None, :, :]).max(axis=2)
    return max(0.0, float(gaps.min()) - cube.diameter)


def _subsets_lex(N: int):
    idx = range(N)
    subsets = [c for r in range(1, N) for c in itertools.combinations(idx, r)]
    return sorted(subsets)


def canonical_factorization(cube: CubeSpec, tau: float) -> Factorization:
    """Lexicographically first split J | Jc whose projections are L^tau apart."""
    if classify_interactivity(cube, tau) != "WI":
        raise GeometryError("no factorization for strongly interactive cube")
    need = float(cube.L) ** tau
    for J in _subsets_lex(cube.N):
        Jc = tuple(i for i in range(cube.N) if i not in J)
        sep = projection_separation(cube, J, Jc)
        if sep > need:
            return Factorization(J, Jc, cube.center.project(J), cube.center.project(Jc), sep)
    # diam >= 3 N L^tau always leaves a gap wide enough for L >= 1 and N <= 3
    raise GeometryError(
        f"WI cube at {cube.center.coords} (L={cube.L}, tau={tau}) admits no split "
        f"with separation > {need}"
    )


def cubes_distant(x: LatticeConfig, y: LatticeConfig, L: int, a: float) -> bool:
    """Centers at max-distance >= a*L (inclusive)."""
    if (x.N, x.d) != (y.N, y.d):
        raise GeometryError("cubes must share N and d")
    return max_norm(x - y) >= a * L


def one_particle_sites(cube: CubeSpec, pad: int = 0) -> np.ndarray:
    """Sites of Z^d within L + pad of some particle position, sorted and unique."""
    pts = cube.center.points
    blocks = [_box(p, -cube.L - pad, cube.L + pad) for p in pts]
    return np.unique(np.concatenate(blocks), axis=0)
