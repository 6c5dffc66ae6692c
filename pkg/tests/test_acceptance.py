"""Acceptance criteria, one test per criterion.

Each test prints a single "[criterion N] PASS/FAIL ..." line to the terminal
and asserts both the numerical condition and the wall-clock limit.
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from mpanderson import experiments as ex
from mpanderson import kernels
from mpanderson.geometry import (
    CubeSpec, GeometryError, LatticeConfig, boundary_set, canonical_factorization,
    classify_interactivity, lattice_ball, projection_separation, wi_threshold,
)
from mpanderson.msa import DescentBlocked, ScaleParams, exponent, gri_descent, validate_params
from mpanderson.operators import (
    GridSpec, assemble, dnorm, factor_operators, free_eigenvalues, green_block,
    spectrum_window, tensor_green,
)
from mpanderson.randomfield import InteractionSpec, region_for, sample_disorder

from conftest import make_op

pytestmark = pytest.mark.acceptance


class Clock:
    def __init__(self, n, title, limit):
        self.n, self.title, self.limit = n, title, limit
        self.t0 = time.perf_counter()

    def done(self, capsys, ok, detail):
        dt = time.perf_counter() - self.t0
        ok = bool(ok) and dt < self.limit
        with capsys.disabled():
            print(f"\n[criterion {self.n:2d}] {'PASS' if ok else 'FAIL'}  {self.title}: {detail}"
                  f" ({dt:.1f} s, limit {self.limit:.0f} s)")
        assert dt < self.limit, f"took {dt:.1f} s, limit {self.limit} s"
        return ok


# -- 1 -----------------------------------------------------------------------

def _brute_sym(P, Q):
    """Pairwise symmetrized distances between rows of P and Q (N particles, d = 1)."""
    N = P.shape[1]
    best = np.full((len(P), len(Q)), np.inf)
    for perm in itertools.permutations(range(N)):
        best = np.minimum(best, np.abs(P[:, None, list(perm)] - Q[None, :, :]).max(axis=2))
    return best


def _closed_cell_cover(belt, bnd):
    """Every belt point within 1/2 (max-norm) of some boundary lattice point."""
    ok = True
    for chunk in np.array_split(belt, max(1, len(belt) // 2000)):
        d = np.abs(chunk[:, None, :] - bnd[None, :, :]).max(axis=2).min(axis=1)
        ok &= bool(np.all(d <= 0.5 + 1e-12))
    return ok


def test_criterion_01_geometry(capsys):
    clk = Clock(1, "geometry oracles", 60)
    failures = []
    for N in (1, 2, 3):
        for L in range(0, 5):
            cube = CubeSpec.around([0] * N, L)
            pts = lattice_ball(cube)
            if len(pts) != (2 * L + 1) ** N or len({tuple(p) for p in pts.tolist()}) != len(pts):
                failures.append(("cardinality", N, L))
            if np.abs(pts).max(initial=0) > L:
                failures.append(("ball", N, L))
            if L == 0:
                continue
            bnd = boundary_set(cube).astype(float)
            for h in (1.0, 0.5, 0.25):
                grid = GridSpec(cube, h)
                belt = grid.points[grid.belt_mask]
                # the belt is exactly the part of the open cube outside the radius L - 1/2 cube
                off = np.abs(grid.points).max(axis=1)
                if not np.array_equal(grid.belt_mask, off > L - 0.5):
                    failures.append(("belt", N, L, h))
                if not _closed_cell_cover(belt, bnd):
                    failures.append(("belt cover", N, L, h))
            # pseudometric, checked on every pair and every triple of the ball
            D = kernels.sym_dist_rows(
                np.repeat(pts, len(pts), axis=0).reshape(-1, N, 1),
                np.tile(pts, (len(pts), 1)).reshape(-1, N, 1)).reshape(len(pts), len(pts))
            if not np.array_equal(D, _brute_sym(pts, pts)):
                failures.append(("sym_dist oracle", N, L))
            if not (np.array_equal(D, D.T) and np.all(np.diag(D) == 0)):
                failures.append(("symmetry", N, L))
            for j in range(len(pts)):
                if np.any(D > D[:, j, None] + D[None, j, :]):
                    failures.append(("triangle", N, L, j))
                    break
    # WI <=> factorization exists, on every configuration with u_0 = 0 and the
    # other particles within 1.25 times the threshold spread
    n_wi = n_cfg = 0
    for N in (2, 3):
        for tau in (1.0, 2.0):
            for L in range(1, 5):
                R = int(math.ceil(1.25 * wi_threshold(N, L, tau)))
                rng = range(-R, R + 1)
                for rest in itertools.product(rng, repeat=N - 1):
                    cube = CubeSpec.around((0,) + rest, L)
                    wi = classify_interactivity(cube, tau) == "WI"
                    try:
                        fac = canonical_factorization(cube, tau)
                        has = projection_separation(cube, fac.J, fac.Jc) > L ** tau
                    except GeometryError:
                        has = False
                    n_cfg += 1
                    n_wi += wi
                    if wi != has:
                        failures.append(("WI<=>factorization", cube.center.coords, L, tau))
    ok = clk.done(capsys, not failures,
                  f"{len(failures)} failures; {n_cfg} configurations for WI equivalence ({n_wi} WI)")
    assert ok, failures[:10]


# -- 2 -----------------------------------------------------------------------

def test_criterion_02_operators(capsys):
    clk = Clock(2, "operator correctness", 300)
    worst = {"free": 0.0, "window": 0.0, "green": 0.0, "dnorm": 0.0}
    for h in (1.0, 0.5, 0.25):
        for N, L in ((1, 4), (2, 2), (2, 4)):
            op = assemble(GridSpec(CubeSpec.around([0] * N, L), h), None, None, 0.0)
            w = op.eigenvalues()
            worst["free"] = max(worst["free"], float(np.abs(w - free_eigenvalues(op.grid, 0.5)).max()))
    # up to dim 1849 (h = 1/4, L = 5), both the dense and the sparse path
    for (L, h, seed, win, method) in [(4, 0.5, 1, (0, 6), "dense"), (10, 1.0, 2, (2, 5), "sparse"),
                                      (5, 0.25, 3, (4, 7), "sparse"), (3, 0.5, 4, (-1, 100), "dense")]:
        op = make_op(L=L, h=h, seed=seed)
        ref = np.linalg.eigvalsh(op.dense)
        ref = ref[(ref >= win[0]) & (ref <= win[1])]
        sd = spectrum_window(op, win, method=method)
        assert sd.count == ref.size > 0
        worst["window"] = max(worst["window"], float(np.abs(sd.eigenvalues - ref).max()))
    for seed, (L, h), E in itertools.product(range(3), [(2, 1.0), (2, 0.5), (3, 0.5)], (-0.7, 2.9, 5.3)):
        op = make_op(L=L, h=h, seed=seed)
        G = np.linalg.inv(op.dense - E * np.eye(op.dim))
        g = op.grid
        for x, y in [((0, 0), (L, -L)), ((1, 0), (0, L)), ((0, 0), (0, 0))]:
            ref = np.linalg.norm(G[np.ix_(g.cell_nodes(y), g.cell_nodes(x))], 2)
            got = green_block(op, E, x, y).block_norm
            worst["green"] = max(worst["green"], abs(got - ref) / max(ref, 1e-300))
        ref = np.linalg.svd(G[np.ix_(g.belt_mask, g.center_nodes)], compute_uv=False)[0]
        worst["dnorm"] = max(worst["dnorm"], abs(dnorm(op, E) - ref) / ref)
    ground = min(make_op(L=2, h=(1.0, 0.5)[s % 2], g=(0.5, 4.0, 16.0, 64.0)[s % 4], seed=10_000 + s,
                         C_U=(0.0, 1.0, 5.0)[s % 3]).ground_energy() for s in range(500))
    ok = (worst["free"] <= 1e-10 and worst["window"] <= 1e-8 and worst["green"] <= 1e-9
          and worst["dnorm"] <= 1e-9 and ground >= -1e-10)
    ok = clk.done(capsys, ok, f"free {worst['free']:.1e}, window {worst['window']:.1e}, "
                              f"green rel {worst['green']:.1e}, dnorm rel {worst['dnorm']:.1e}, "
                              f"min ground over 500 {ground:.3e}")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_03_tensor_identity(capsys):
    clk = Clock(3, "tensor identity", 120)
    worst = 0.0
    cases = list(itertools.product([(0, 20), (3, -17), (-5, 30), (0, 40), (2, 25)], [1.0, 0.5], [-0.4, 3.1]))
    for i, (center, h, E) in enumerate(cases):
        c = CubeSpec.around(center, 2)
        dis = sample_disorder(region_for(c), 77, i)
        full = assemble(GridSpec(c, h), dis, InteractionSpec(C_U=0.0), 8.0)
        fac = canonical_factorization(c, 1.5)
        a, b = factor_operators(full, fac)
        rep = tensor_green(full, a, b, E, fac.J)
        worst = max(worst, rep.residual_primed, rep.residual_double_primed)
    ok = clk.done(capsys, worst <= 1e-8 and len(cases) == 20,
                  f"max residual over both orders {worst:.1e} on {len(cases)} instances")
    assert ok


# -- 4, 5, 6 -------------------------------------------------------------------

def test_criterion_04_wegner(capsys):
    clk = Clock(4, "Wegner slope", 900)
    cfg = ex.make_config({"kind": "wegner", "samples": 2000, "model": {"g": 8.0}, "knobs": {"L": 4}})
    s = ex.summarize(cfg, ex.run_all(cfg))
    ok = 0.8 <= s["slope"] <= 1.2
    ok = clk.done(capsys, ok, f"slope {s['slope']:.3f} over s in [1e-3, 1e-1], "
                              f"E={cfg['knobs']['E']}, {s['samples']} samples")
    assert ok


def test_criterion_05_two_volume(capsys):
    clk = Clock(5, "two-volume slope", 900)
    cfg = ex.make_config({"kind": "evc2", "samples": 2000})
    s = ex.summarize(cfg, ex.run_all(cfg))
    disjoint = [p for p in s["pairs"] if p["disjoint"]]
    ok = bool(disjoint) and all(p["independent_structurally"] and 0.8 <= p["slope"] <= 1.2 for p in disjoint)
    parts = [f"{p['x']}/{p['y']} slope {p['slope']:.3f}"
             + ("" if p["disjoint"] else f" (shares {p['shared_sites']} sites, not tested)")
             for p in s["pairs"]]
    ok = clk.done(capsys, ok, "; ".join(parts))
    assert ok


def test_criterion_06_srcm(capsys):
    clk = Clock(6, "conditional mean regularity", 600)
    cfg = ex.make_config({"kind": "srcm", "samples": 2000})
    s = ex.summarize(cfg, ex.run_all(cfg))
    ok = (s["density_max_rel_error"] <= 0.10 and len(s["density_bins"]) > 0
          and 0.8 <= s["small_s_slope"] <= 1.2)
    ok = clk.done(capsys, ok, f"max density rel error {s['density_max_rel_error']:.3f} over "
                              f"{len(s['density_bins'])} bins, small-s slope {s['small_s_slope']:.3f}")
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_gri(capsys):
    clk = Clock(7, "GRI soundness", 600)
    sound = tried = blocked = 0
    i = 0
    while tried < 200 and i < 400:
        h, E = (1.0, 0.5)[i % 2], (0.3, 2.0, 4.5, 6.0)[(i // 2) % 4]
        op = make_op(center=(0, 0), L=6, h=h, g=8.0, seed=5000 + i)
        i += 1
        try:
            res = gri_descent(op, E, 2, compute_direct=True)
        except DescentBlocked:
            blocked += 1
            continue
        tried += 1
        sound += res.sound()
    ok = tried == 200 and sound == tried
    ok = clk.done(capsys, ok, f"{sound}/{tried} instances sound ({blocked} blocked descents skipped)")
    assert ok


# -- 8 and 11 share one decay run ------------------------------------------------

@pytest.fixture(scope="module")
def decay_run():
    t = time.perf_counter()
    cfg = ex.make_config({"kind": "decay", "samples": 50})
    s = ex.summarize(cfg, ex.run_all(cfg))
    return s, time.perf_counter() - t


def test_criterion_08_edi(capsys, decay_run):
    clk = Clock(8, "eigenfunction decay inequality", 600)
    s, dt = decay_run
    clk.t0 -= dt
    ok = s["edi_pairs"] >= 500 and s["edi_violations"] == 0
    ok = clk.done(capsys, ok, f"{s['edi_pairs']} pairs, {s['edi_violations']} violations, "
                              f"{s['edi_skipped_resonant']} resonant skips")
    assert ok


# -- 9 -------------------------------------------------------------------------

def test_criterion_09_scaling_step(capsys):
    clk = Clock(9, "scaling-step census", 1200)
    cfg = ex.make_config({"kind": "scaling_step", "samples": 300})
    s = ex.summarize(cfg, ex.run_all(cfg))
    ok = s["premises_true"] >= 200 and s["counterexamples"] == 0
    ok = clk.done(capsys, ok, f"{s['premises_true']} premise-true of {s['samples']}, "
                              f"{s['counterexamples']} counterexamples")
    assert ok


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_combes_thomas(capsys):
    clk = Clock(10, "Combes-Thomas", 300)
    cfg = ex.make_config({"kind": "ct", "samples": 100})
    s = ex.summarize(cfg, ex.run_all(cfg))
    ok = s["monotone_fraction"] >= 0.95 and s["free"]["rel_error"] <= 0.10
    ok = clk.done(capsys, ok, f"monotone fraction {s['monotone_fraction']:.2f}, free rate "
                              f"{s['free']['rate']:.4f} vs {s['free']['oracle']:.4f}")
    assert ok


# -- 11 ------------------------------------------------------------------------

def test_criterion_11_decay_and_ils(capsys, decay_run):
    clk = Clock(11, "decay and g-monotonicity", 1800)
    s, dt = decay_run
    clk.t0 -= dt
    med = [s["per_g"][k]["median_rate"] for k in ("1.0", "4.0", "16.0")]
    r2 = s["per_g"]["16.0"]["r2_fraction_ge_0_9"]
    cfg = ex.make_config({"kind": "ils", "samples": 500})
    il = ex.summarize(cfg, ex.run_all(cfg))
    stars = list(il["E_star"].values())
    ok = (None not in med and s["median_rate_monotone"] and r2 is not None and r2 >= 0.8
          and il["E_star_monotone"] and stars[-1] is not None)
    ok = clk.done(capsys, ok, f"median rates {[round(m, 3) for m in med]}, R2>=0.9 fraction at g=16 "
                              f"{r2:.2f}, E* {il['E_star']}")
    assert ok


# -- 12 ------------------------------------------------------------------------

def test_criterion_12_parameters(capsys):
    clk = Clock(12, "parameter engine", 1)
    good = dict(zeta=0.5, tau=2.5, alpha=6, beta=0.1, K=25, P_star=50, m_star=1, L0=16, N_star=2, d=1)
    p = ScaleParams.from_dict(good)
    ok = validate_params(p).passed
    fails = {"tau > max(1/zeta, 1)": dict(tau=1.0), "alpha > 2 tau": dict(alpha=4),
             "K + 1 > 4 alpha": dict(K=23)}
    for row, change in fails.items():
        rep = validate_params(ScaleParams.from_dict({**good, **change}))
        ok &= (not rep.passed) and row in rep.failing()
    for variant in ("four_alpha", "two_alpha"):
        q = ScaleParams.from_dict({**good, "exponent_base_variant": variant})
        ok &= all(4 * exponent(q, n, k) == 2 * exponent(q, n, k + 1)
                  and isinstance(exponent(q, n, k), Fraction) for n in (1, 2) for k in range(8))
    ok = clk.done(capsys, ok, "passing tuple, three failing tuples, exact exponent identity")
    assert ok


# -- 13 ------------------------------------------------------------------------

def test_criterion_13_reproducibility(capsys):
    clk = Clock(13, "reproducibility", 300)
    small = {
        "wegner": {}, "evc2": {}, "srcm": {}, "ils": {"knobs": {"E_step": 0.5}},
        "wi_prob": {"knobs": {"resamples": 3}}, "fe_to_ei": {}, "scaling_step": {},
        "decay": {}, "ct": {},
    }
    mismatched = []
    for kind, extra in small.items():
        cfg = ex.make_config({"kind": kind, "samples": 8, "seed": 2024, **extra})
        a = [ex.dumps(r) for r in ex.run_all(cfg, threads=1)]
        b = [ex.dumps(r) for r in ex.run_all(cfg, threads=8)]
        c = [ex.dumps(r) for r in ex.run_all(cfg, threads=1)]
        if not (a == b == c):
            mismatched.append(kind)
    ok = clk.done(capsys, not mismatched,
                  f"{len(small) - len(mismatched)}/{len(small)} kinds identical across threads {{1, 8}} and repeats")
    assert ok, mismatched
