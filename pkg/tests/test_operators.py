import json
import math

import numpy as np
import pytest

from mpanderson.geometry import CubeSpec, canonical_factorization, lattice_ball
from mpanderson.operators import (
    GridSpec, OperatorError, ResonantEnergyError, assemble, boundary_block_norms,
    boundary_max_many, center_probe, combes_thomas_profile, dnorm, dnorm_many, edi_check,
    export_operator, factor_operators, free_eigenvalues, green_block, interaction_offdiag_norm,
    spectrum_window, tensor_green, weyl_shift,
)
from mpanderson.randomfield import InteractionSpec, region_for, sample_disorder

from conftest import make_op


def free_op(center=(0,), L=1, h=1.0, kappa=0.5):
    return assemble(GridSpec(CubeSpec.around(center, L), h), None, None, 0.0, kappa)


@pytest.mark.parametrize("h,L,n", [(1.0, 3, 7), (0.5, 3, 13), (0.25, 2, 19)])
def test_points_per_axis(h, L, n):
    assert GridSpec(CubeSpec.around([0], L), h).n_axis == n


def test_grid_rejects_bad_h():
    with pytest.raises(OperatorError, match="1/M"):
        GridSpec(CubeSpec.around([0], 1), 0.3)


def test_free_closed_form_example():
    w = free_op().eigenvalues()
    k = np.arange(1, 4)
    assert np.allclose(w, 0.5 * (2 - 2 * np.cos(k * np.pi / 4)), atol=1e-12)
    sd = spectrum_window(free_op(), (0, 2))
    assert sd.count == 3 and np.allclose(sd.eigenvalues, w, atol=1e-12)


@pytest.mark.parametrize("h", [1.0, 0.5, 0.25])
def test_free_laplacian_matches_closed_form(h):
    op = assemble(GridSpec(CubeSpec.around([0, 0], 2), h), None, None, 0.0)
    assert np.abs(op.eigenvalues() - free_eigenvalues(op.grid, 0.5)).max() <= 1e-10 * max(1, op.eigenvalues()[-1])


def test_constant_amplitudes_shift():
    c = CubeSpec.around([0, 3], 2)
    dis = sample_disorder(region_for(c), 0, 0).constant(0.7)
    op = assemble(GridSpec(c, 0.5), dis, InteractionSpec(C_U=0.0), 3.0)
    free = assemble(GridSpec(c, 0.5), None, None, 0.0)
    assert np.allclose(op.eigenvalues(), free.eigenvalues() + 2 * 3.0 * 0.7, atol=1e-10)


def test_symmetric():
    op = make_op()
    assert abs(op.matrix - op.matrix.T).max() == 0


def test_insufficient_region():
    c = CubeSpec.around([0, 0], 2)
    dis = sample_disorder(np.arange(-1, 2)[:, None], 0, 0)
    with pytest.raises(OperatorError, match="insufficient disorder region"):
        assemble(GridSpec(c, 0.5), dis, None, 1.0)


def test_window_below_zero_is_empty():
    assert spectrum_window(make_op(), (-5, -1e-6)).count == 0


def test_empty_window_rejected():
    with pytest.raises(OperatorError):
        spectrum_window(make_op(), (2, 1))


def test_sparse_window_matches_dense():
    op = make_op(L=3, h=1.0, seed=4)  # 49-dim
    big = make_op(L=6, h=1.0, seed=4)  # 169-dim
    for o in (op, big):
        sd = spectrum_window(o, (3, 6), method="sparse")
        ref = o.eigenvalues()
        ref = ref[(ref >= 3) & (ref <= 6)]
        assert sd.count == ref.size
        assert np.abs(sd.eigenvalues - ref).max() <= 1e-8
        assert sd.residuals.max() <= 1e-8


def test_window_profiles_are_cell_norms():
    op = make_op(L=2, h=0.5)
    sd = spectrum_window(op, (0, 8))
    v = sd.eigenvectors[:, 0]
    cells = lattice_ball(op.cube)
    for j, c in enumerate(cells[:5]):
        assert sd.cell_profiles[j, 0] == pytest.approx(np.linalg.norm(v[op.grid.cell_nodes(c)]))
    assert np.allclose(np.linalg.norm(sd.eigenvectors, axis=0), 1)


def test_cells_partition_grid():
    g = GridSpec(CubeSpec.around([1, -2], 2), 0.5)
    counts = np.bincount(g.cell_ids, minlength=g.n_cells)
    assert counts.sum() == g.dim and counts.min() >= 1
    # point x + 1/2 belongs to cell x, the lexicographically smaller center
    q = np.array([[2 * 1 + 1, 2 * -2]])
    assert g.cell_coords(q).tolist() == [[1, -2]]


def test_belt_cover_by_boundary_cells():
    for h in (1.0, 0.5, 0.25):
        g = GridSpec(CubeSpec.around([0, 0, 0], 2), h)
        cells = g.cell_coords()[g.belt_mask]
        assert np.all(np.abs(cells).max(axis=1) == 2)


def test_green_block_trivial_bound_and_symmetry():
    op = make_op(seed=2)
    assert green_block(op, -10, (0, 0), (2, 1)).block_norm <= 0.1
    a = green_block(op, 2.5, (0, 0), (2, -1)).block_norm
    b = green_block(op, 2.5, (2, -1), (0, 0)).block_norm
    assert abs(a - b) <= 1e-10 * max(1, a)


def test_green_block_dense_inversion_5_points():
    op = make_op(center=(0,), L=2, h=1.0, g=2.0)
    G = np.linalg.inv(op.dense + np.eye(5))
    for x in range(-2, 3):
        for y in range(-2, 3):
            assert green_block(op, -1, (x,), (y,)).block_norm == pytest.approx(abs(G[y + 2, x + 2]), rel=1e-12)
    X = op.resolvent_columns(-1.0, np.arange(5))
    assert np.allclose(X, G, atol=1e-13)


def test_dnorm_dense_svd_oracle():
    for h, seed, E in [(1.0, 0, 3.3), (0.5, 1, 5.1), (0.5, 2, -0.5)]:
        op = make_op(L=2, h=h, seed=seed)
        G = np.linalg.inv(op.dense - E * np.eye(op.dim))
        ref = np.linalg.svd(G[np.ix_(op.grid.belt_mask, op.grid.center_nodes)], compute_uv=False)[0]
        assert abs(dnorm(op, E) - ref) <= 1e-9 * ref
        blocks = boundary_block_norms(op, E)
        belt_blocks = boundary_block_norms(op, E, belt_only=True)
        assert dnorm(op, E) <= sum(blocks.values()) * (1 + 1e-12)
        assert dnorm(op, E) >= max(belt_blocks.values()) * (1 - 1e-12)
        assert center_probe(op, E).dnorm == pytest.approx(dnorm(op, E), rel=1e-12)
        assert dnorm_many(op, [E])[0] == pytest.approx(ref, rel=1e-9)
        assert boundary_max_many(op, [E])[0] == pytest.approx(max(blocks.values()), rel=1e-9)
        assert dnorm(op, -10) <= 0.1


def test_resonant_energy_error():
    op = make_op(L=1, h=1.0)
    lam = float(op.eigenvalues()[2])
    with pytest.raises(ResonantEnergyError, match="resonant"):
        dnorm(op, lam)
    assert math.isinf(dnorm_many(op, [lam])[0])


def test_resolvent_residual():
    op = make_op(L=4, h=0.5, seed=3)  # 289-dim
    big = make_op(L=10, h=1.0, seed=3)  # 441-dim, factorization path
    for o, E in ((op, 4.2), (big, 2.2)):
        cols = o.grid.center_nodes
        X = o.resolvent_columns(E, cols)
        R = o.matrix @ X - E * X
        R[cols, np.arange(len(cols))] -= 1
        assert np.abs(R).max() <= 1e-8


def test_ground_energy_nonnegative():
    for s in range(30):
        assert make_op(L=2, h=0.5, seed=s, g=8).ground_energy() >= -1e-10


def test_dirichlet_monotonicity():
    for s in range(5):
        op = make_op(L=4, h=1.0, seed=s)
        for c, r in [((0, 0), 2), ((1, -1), 3), ((-2, 2), 1)]:
            assert op.restrict(c, r).ground_energy() >= op.ground_energy() - 1e-12


def test_restrict_matches_fresh_assembly():
    op = make_op(L=3, h=0.5, seed=9)
    sub = op.restrict((1, -1), 1)
    fresh = make_op(center=(1, -1), L=1, h=0.5, seed=9)
    assert np.allclose(sub.dense, fresh.dense)


def test_tensor_identity_example():
    c = CubeSpec.around([0, 20], 2)
    dis = sample_disorder(region_for(c), 0, 0)
    full = assemble(GridSpec(c, 0.5), dis, InteractionSpec(C_U=0.0), 8.0)
    fac = canonical_factorization(c, 1.5)
    a, b = factor_operators(full, fac)
    rep = tensor_green(full, a, b, 3.7, fac.J)
    assert rep.residual_primed <= 1e-8 and rep.residual_double_primed <= 1e-8
    assert rep.orders_agree <= 1e-8 and rep.structure_error <= 1e-10


def test_tensor_single_mode():
    c = CubeSpec.around([0, 30], 0)
    dis = sample_disorder(region_for(c), 1, 0)
    full = assemble(GridSpec(c, 1.0), dis, InteractionSpec(C_U=0.0), 2.0)
    fac = canonical_factorization(CubeSpec.around([0, 30], 1), 1.0)
    a = assemble(GridSpec(CubeSpec(fac.center_J, 0), 1.0), dis, None, 2.0)
    b = assemble(GridSpec(CubeSpec(fac.center_Jc, 0), 1.0), dis, None, 2.0)
    E = -0.3
    rep = tensor_green(full, a, b, E)
    e1, e2 = a.dense[0, 0], b.dense[0, 0]
    assert full.dim == 1
    assert np.linalg.inv(full.dense - E)[0, 0] == pytest.approx(1 / (e1 + e2 - E))
    assert rep.residual_primed <= 1e-14


def test_tensor_rejects_interacting():
    op = make_op(center=(0, 20), L=2, C_U=1.0)
    fac = canonical_factorization(op.cube, 1.5)
    a, b = factor_operators(op, fac)
    with pytest.raises(OperatorError):
        tensor_green(op, a, b, 1.0)


def test_offdiag_norm_example():
    c = CubeSpec.around([0, 100], 2)
    fac = canonical_factorization(c, 2.0)
    v = interaction_offdiag_norm(c, fac, InteractionSpec(C_U=1.0, zeta=1.0))
    assert v == pytest.approx(math.exp(-95), rel=1e-12)
    assert interaction_offdiag_norm(c, fac, InteractionSpec(1.0, 1.0, truncation_radius=50)) == 0
    z = InteractionSpec(C_U=2.0, zeta=0.5)
    assert interaction_offdiag_norm(c, fac, z) <= 1 * 2.0 * math.exp(-fac.separation ** 0.5) * (1 + 1e-12)


def test_weyl_perturbation():
    for s in range(5):
        a = make_op(center=(0, 20), L=2, seed=s, C_U=1.0)
        b = make_op(center=(0, 20), L=2, seed=s, C_U=0.0)
        shift, bound = weyl_shift(a, b)
        assert shift <= bound + 1e-12


def test_weyl_counting_grows():
    counts = [np.count_nonzero(make_op(L=L, h=0.5, seed=0).eigenvalues() <= 7.0) for L in (2, 3, 4)]
    assert counts[0] <= counts[1] <= counts[2]


def test_ct_free_oracle():
    op = free_op(L=10)
    prof = combes_thomas_profile(op, -1.0)
    assert prof.rate == pytest.approx(math.acosh(2.0), rel=0.1)
    assert prof.rate > 0


def test_ct_errors():
    with pytest.raises(OperatorError, match="too small"):
        combes_thomas_profile(free_op(L=2), -1)
    op = make_op(L=4, h=1.0)
    with pytest.raises(OperatorError, match="not below"):
        combes_thomas_profile(op, op.ground_energy())


def test_ct_rate_grows_with_gap():
    op = make_op(L=6, h=1.0, seed=5)
    E0 = op.ground_energy()
    rates = [combes_thomas_profile(op, E0 - g).rate for g in (0.5, 1, 2)]
    assert rates[0] <= rates[1] <= rates[2]


def test_edi_ground_state():
    op = make_op(L=8, h=1.0, g=16.0, seed=1)
    w, V = op.eigh()
    peak = op.grid.cells[np.argmax(np.abs(V[:, 0]))]
    x = tuple(int(v) for v in np.clip(peak, -5, 5))
    rep = edi_check(op, w[0], V[:, 0], x, 2)
    assert not rep.skipped and rep.holds
    assert rep.lhs <= rep.boundary_max_rhs * (1 + 1e-9)


def test_edi_away_from_support():
    op = make_op(L=6, h=1.0)
    psi = np.zeros(op.dim)
    psi[0] = 1.0
    rep = edi_check(op, 0.5, psi, (2, 2), 1)
    assert rep.holds and rep.lhs == 0


def test_edi_needs_interior():
    op = make_op(L=4, h=1.0)
    with pytest.raises(OperatorError):
        edi_check(op, 1.0, np.ones(op.dim), (2, 0), 2)


def test_export(tmp_path):
    op = make_op(L=1, h=1.0)
    export_operator(op, tmp_path / "op.json")
    d = json.loads((tmp_path / "op.json").read_text())
    assert d["grid"]["dim"] == op.dim
    sd = spectrum_window(op, (0, 100))
    sd.to_csv(tmp_path / "w.csv")
    assert len((tmp_path / "w.csv").read_text().splitlines()) == op.dim + 1
