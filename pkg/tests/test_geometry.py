import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpanderson.geometry import (
    CubeSpec, GeometryError, LatticeConfig, boundary_set, canonical_factorization,
    classify_interactivity, cubes_distant, lattice_ball, particle_diameter,
    projection_separation, sym_dist,
)


def brute_sym_dist(x, y, N, d):
    a = np.reshape(x, (N, d))
    b = np.reshape(y, (N, d))
    return min(np.abs(a[list(p)] - b).max() for p in itertools.permutations(range(N)))


@pytest.mark.parametrize("L,N,expected", [(5, 2, 121), (2, 3, 125), (0, 1, 1)])
def test_lattice_ball_counts(L, N, expected):
    assert len(lattice_ball(CubeSpec.around([0] * N, L))) == expected


def test_radius_zero_ball_is_center():
    pts = lattice_ball(CubeSpec.around([3, -1], 0, N=1, d=2))
    assert pts.tolist() == [[3, -1]]


def test_lattice_ball_exact_set():
    u = (2, -1)
    pts = {tuple(p) for p in lattice_ball(CubeSpec.around(u, 2)).tolist()}
    box = {(a, b) for a in range(-10, 10) for b in range(-10, 10)
           if max(abs(a - u[0]), abs(b - u[1])) <= 2}
    assert pts == box


@pytest.mark.parametrize("L,N,expected", [(5, 2, 40), (2, 2, 16)])
def test_boundary_counts(L, N, expected):
    assert len(boundary_set(CubeSpec.around([0] * N, L))) == expected


def test_boundary_1d():
    assert sorted(boundary_set(CubeSpec.around([7], 3)).ravel().tolist()) == [4, 10]


def test_boundary_radius_zero():
    with pytest.raises(GeometryError, match="no boundary at radius zero"):
        boundary_set(CubeSpec.around([0], 0))


def test_cube_diameters():
    c = CubeSpec.around([0, 0], 3)
    assert c.lattice_diameter == 6 and c.diameter == 7
    pts = lattice_ball(c)
    assert np.abs(pts[:, None] - pts[None]).max() == 6


def test_cells_inside_closed_cube():
    c = CubeSpec.around([1, 4], 2)
    for p in lattice_ball(c):
        for corner in itertools.product([-0.5, 0.5], repeat=2):
            assert np.abs(p + np.array(corner) - np.array([1, 4])).max() <= 2.5


def test_sym_dist_examples():
    x = LatticeConfig.of([0, 3])
    assert sym_dist(x, x) == 0
    assert sym_dist(x, LatticeConfig.of([3, 0])) == 0
    assert sym_dist(x, LatticeConfig.of([1, 5])) == 2


def test_sym_dist_mismatch():
    with pytest.raises(GeometryError):
        sym_dist(LatticeConfig.of([0, 1]), LatticeConfig.of([0, 1, 2]))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.data())
def test_sym_dist_matches_enumeration(N, d, data):
    c = st.lists(st.integers(-9, 9), min_size=N * d, max_size=N * d)
    x, y = data.draw(c), data.draw(c)
    got = sym_dist(LatticeConfig(tuple(x), N, d), LatticeConfig(tuple(y), N, d))
    assert got == brute_sym_dist(x, y, N, d)


def test_sym_dist_zero_iff_permutation(rng):
    for _ in range(300):
        x = rng.integers(-3, 4, 3)
        y = rng.integers(-3, 4, 3)
        zero = sym_dist(LatticeConfig.of(x), LatticeConfig.of(y)) == 0
        assert zero == (sorted(x.tolist()) == sorted(y.tolist()))


@pytest.mark.parametrize("u,L,tau,expected", [
    ((0, 0), 3, 2.0, "SI"),
    ((0, 100), 2, 2.0, "WI"),
    ((0, 23), 2, 2.0, "SI"),
    ((0, 24), 2, 2.0, "WI"),
    ((5,), 2, 2.0, "SI"),
])
def test_classify(u, L, tau, expected):
    assert classify_interactivity(CubeSpec.around(u, L), tau) == expected


def test_classify_rejects_small_tau():
    with pytest.raises(GeometryError):
        classify_interactivity(CubeSpec.around([0, 50], 1), 0.5)


def test_canonical_factorization_examples():
    f = canonical_factorization(CubeSpec.around([0, 100], 2), 2.0)
    assert f.J == (0,) and f.Jc == (1,) and f.separation >= 95 > 4
    f3 = canonical_factorization(CubeSpec.around([0, 1, 200], 2), 2.0)
    assert f3.J == (0, 1) and f3.Jc == (2,)
    assert f3.center_J.coords == (0, 1) and f3.center_Jc.coords == (200,)


def test_factorization_refuses_si():
    with pytest.raises(GeometryError, match="strongly interactive"):
        canonical_factorization(CubeSpec.around([0, 5], 2), 2.0)


def test_factorization_separation_recomputed(rng):
    for _ in range(200):
        u = rng.integers(-150, 150, 3)
        c = CubeSpec.around(u, int(rng.integers(1, 4)))
        if classify_interactivity(c, 1.5) != "WI":
            continue
        f = canonical_factorization(c, 1.5)
        # independent recomputation: gap between projected open cubes of radius L + 1/2
        p = np.asarray(u)
        gap = min(abs(p[i] - p[j]) for i in f.J for j in f.Jc) - (2 * c.L + 1)
        assert gap == projection_separation(c, f.J, f.Jc) == f.separation
        assert gap > c.L ** 1.5


def test_cubes_distant():
    x, y = LatticeConfig.of([0, 0]), LatticeConfig.of([16, 0])
    assert not cubes_distant(x, x, 2, 8)
    assert cubes_distant(x, y, 2, 8)
    assert not cubes_distant(x, y, 2, 9)


def test_particle_diameter():
    assert particle_diameter(LatticeConfig.of([4])) == 0
    assert particle_diameter(LatticeConfig.of([0, 7, -2])) == 9
