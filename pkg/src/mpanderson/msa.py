"""Scale induction: parameters, cube predicates, and the deterministic scaling step."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .geometry import CubeSpec, LatticeConfig, classify_interactivity, max_norm
from .operators import (
    DiscretizedOperator,
    OperatorError,
    ResonantEnergyError,
    dnorm,
)

PARAM_KEYS = ("zeta", "tau", "alpha", "beta", "K", "P_star", "m_star", "L0", "N_star", "d")


class ParamError(ValueError):
    pass


class DescentBlocked(OperatorError):
    pass


class InconclusiveWindow(OperatorError):
    pass


@dataclass(frozen=True)
class ScaleParams:
    zeta: float
    tau: float
    alpha: int
    beta: float
    K: int
    P_star: float
    m_star: float
    L0: int
    N_star: int
    d: int
    exponent_base_variant: str = "four_alpha"
    delta_exponent: float = 1.0

    def __post_init__(self):
        if self.exponent_base_variant not in ("four_alpha", "two_alpha"):
            raise ParamError(f"unknown exponent base variant {self.exponent_base_variant!r}")
        if int(self.alpha) != self.alpha or int(self.L0) != self.L0:
            raise ParamError("alpha and L0 must be integers")
        if self.N_star < 1 or self.d < 1 or self.L0 < 1:
            raise ParamError("N_star, d and L0 must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleParams":
        missing = [k for k in PARAM_KEYS if k not in d]
        if missing:
            raise KeyError(f"missing scale parameters: {', '.join(missing)}")
        return cls(float(d["zeta"]), float(d["tau"]), int(d["alpha"]), float(d["beta"]),
                   int(d["K"]), float(d["P_star"]), float(d["m_star"]), int(d["L0"]),
                   int(d["N_star"]), int(d["d"]),
                   d.get("exponent_base_variant", "four_alpha"),
                   float(d.get("delta_exponent", 1.0)))

    def to_dict(self) -> dict:
        return asdict(self)


# -- sequences ----------------------------------------------------------------

def scale(p: ScaleParams, k: int) -> int:
    """L_k = L_0^(alpha^k), exact."""
    if k < 0:
        raise ParamError("k must be >= 0")
    return int(p.L0) ** (int(p.alpha) ** int(k))


def mass(p: ScaleParams, n: int) -> float:
    if not 1 <= n <= p.N_star:
        raise ParamError(f"need 1 <= n <= N*={p.N_star}, got {n}")
    return p.m_star * (1.0 + 3.0 * p.L0 ** (-p.delta_exponent + p.beta)) ** (p.N_star - n)


def _exact(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10 ** 12) if x != int(x) else Fraction(int(x))


def exponent(p: ScaleParams, n: int, k: int) -> Fraction:
    """P(n, k) = 2^k P* base^(N* - n), base 4*alpha or 2*alpha; exact rational."""
    if not 1 <= n <= p.N_star:
        raise ParamError(f"need 1 <= n <= N*={p.N_star}, got {n}")
    base = (4 if p.exponent_base_variant == "four_alpha" else 2) * int(p.alpha)
    return Fraction(2) ** int(k) * _exact(p.P_star) * Fraction(base) ** (p.N_star - n)


def gamma_annotation(m: float, L: float) -> float:
    return m * (1.0 + 0.5 * L ** (-1.0 / 8.0))


# -- parameter table ----------------------------------------------------------

@dataclass(frozen=True)
class ConstraintRow:
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool


@dataclass(frozen=True)
class ParamReport:
    rows: tuple[ConstraintRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failing(self) -> list[str]:
        return [r.name for r in self.rows if not r.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "rows": [asdict(r) for r in self.rows]}


def validate_params(p: ScaleParams) -> ParamReport:
    """Evaluate the eight constraint-table cells and the P(N) implication."""
    rows = []

    def row(name, lhs, rhs, rel):
        lhs, rhs = float(lhs), float(rhs)
        ok = {">": lhs > rhs, ">=": lhs >= rhs, "<": lhs < rhs, "==": math.isclose(lhs, rhs, rel_tol=1e-12)}[rel]
        rows.append(ConstraintRow(name, lhs, rhs, rel, bool(ok)))

    row("tau > max(1/zeta, 1)", p.tau, max(1.0 / p.zeta, 1.0) if p.zeta > 0 else math.inf, ">")
    row("alpha > 2 tau", p.alpha, 2 * p.tau, ">")
    beta_cap = min(0.25, p.zeta, 7.0 / (8.0 * p.alpha))
    rows.append(ConstraintRow("0 < beta < min(1/4, zeta, 7/(8 alpha))", float(p.beta), beta_cap, "<",
                              bool(0 < p.beta < beta_cap)))
    row("K + 1 > 4 alpha", p.K + 1, 4 * p.alpha, ">")
    table_m1 = p.m_star * (1.0 + 3.0 * p.L0 ** (-1.0 + p.beta)) ** (p.N_star - 1)
    row("m_N = m*(1 + 3 L0^(-1+beta))^(N*-N)", mass(p, 1), table_m1, "==")
    row("m* >= L0^(-1/2)", p.m_star, p.L0 ** -0.5, ">=")
    table_P1 = float(_exact(p.P_star) * (4 * p.alpha) ** (p.N_star - 1))
    row("P(N,k) = 2^k P* (4 alpha)^(N*-N)", float(exponent(p, 1, 0)), table_P1, "==")
    row("P* > 4 N* d alpha", p.P_star, 4 * p.N_star * p.d * p.alpha, ">")
    worst_gap, worst = math.inf, (0.0, 0.0)
    for n in range(1, p.N_star + 1):
        Pn = float(exponent(p, n, 0))
        need = max(4 * n * p.d, 2 * n * p.d * p.alpha)
        gap = min(Pn - p.P_star, p.P_star - need)
        if gap < worst_gap or (gap == worst_gap and Pn < worst[0]):
            worst_gap, worst = gap, (min(Pn, p.P_star), need)
    ok = worst_gap > 0 or (worst_gap == 0 and worst[0] > worst[1])
    rows.append(ConstraintRow("P(N) >= P* > max(4Nd, 2Nd alpha) for all N", worst[0], worst[1], ">", bool(ok)))
    return ParamReport(tuple(rows))


# -- predicates -------------------------------------------------------------

@dataclass
class PredicateVerdict:
    kind: str
    E: float
    param: float
    witness: dict
    center: tuple[int, ...] = ()
    L: int = 0
    k: int | None = None
    stride: int | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.kind in ("NS", "NR", "CNR", "good")

    def to_json(self) -> str:
        d = asdict(self)
        d["center"] = list(self.center)
        return json.dumps(d, default=_jsonable)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(type(o))


def write_verdicts(path, verdicts) -> None:
    with open(path, "a") as fh:
        for v in verdicts:
            fh.write(v.to_json() + "\n")


def ns_threshold(m: float, L: int, D: int, C_geom: float = 1.0) -> float:
    """Largest dnorm compatible with (E, m)-non-singularity."""
    return math.exp(-m * L) / (C_geom * (3.0 * L) ** D)


def ns_holds(dn: float, m: float, L: int, D: int, C_geom: float = 1.0) -> bool:
    return dn <= ns_threshold(m, L, D, C_geom)


def is_ns(op: DiscretizedOperator, E: float, m: float, C_geom: float = 1.0,
          k: int | None = None) -> PredicateVerdict:
    cube = op.cube
    try:
        dn = dnorm(op, E)
    except ResonantEnergyError as exc:
        return PredicateVerdict("S", E, m, {"dnorm": math.inf, "distance": exc.distance},
                                cube.center.coords, cube.L, k, flags=["resonant"])
    thr = ns_threshold(m, cube.L, cube.dim, C_geom)
    return PredicateVerdict("NS" if dn <= thr else "S", E, m,
                            {"dnorm": dn, "threshold": thr, "C_geom": C_geom},
                            cube.center.coords, cube.L, k)


def nr_threshold(beta: float, L: float) -> float:
    return math.exp(-float(L) ** beta)


def is_nr(op: DiscretizedOperator, E: float, beta: float, L_eff: float | None = None,
          window=None, k: int | None = None) -> PredicateVerdict:
    """NR iff dist(E, spectrum) >= exp(-L_eff^beta).

    With ``window`` only eigenvalues in that window are computed; if none
    lies closer than the window edges and the edges are within the
    threshold, the distance cannot be certified and InconclusiveWindow is
    raised.
    """
    L_eff = op.cube.L if L_eff is None else L_eff
    thr = nr_threshold(beta, L_eff)
    if window is None:
        dist = op.spectral_distance(E)
    else:
        from .operators import spectrum_window
        lo, hi = window
        if not lo <= E <= hi:
            raise InconclusiveWindow(f"E={E} outside window [{lo}, {hi}]")
        sd = spectrum_window(op, (lo, hi), vectors=False)
        inside = float(np.min(np.abs(sd.eigenvalues - E))) if sd.count else math.inf
        edge = min(E - lo, hi - E)
        if inside <= edge:
            dist = inside
        elif edge >= thr:
            dist = edge
        else:
            raise InconclusiveWindow(f"inconclusive window: edge distance {edge:.3e} below threshold {thr:.3e}")
    return PredicateVerdict("NR" if dist >= thr else "R", E, beta,
                            {"distance": dist, "threshold": thr, "L_eff": L_eff},
                            op.cube.center.coords, op.cube.L, k)


def center_stride(Lk: int) -> int:
    return 1 if Lk <= 4 else Lk // 4


def _thinned(lo: int, hi: int, stride: int) -> list[int]:
    vals = set(range(lo, hi + 1, stride))
    vals.add(hi)
    return sorted(v for v in vals if lo <= v <= hi)


def cnr_radii(Lk: int, Lk1: int, stride: int | None = None) -> list[int]:
    stride = center_stride(Lk) if stride is None else stride
    return _thinned(Lk, Lk1 - Lk, stride)


def is_cnr(parent: DiscretizedOperator, E: float, beta: float, Lk: int, Lk1: int,
           stride: int | None = None, k: int | None = None) -> PredicateVerdict:
    """NR with threshold exp(-L_{k+1}^beta) for every concentric radius in [L_k, L_{k+1} - L_k]."""
    radii = cnr_radii(Lk, Lk1, stride)
    if not radii:
        raise OperatorError(f"no concentric radii between {Lk} and {Lk1 - Lk}")
    thr = nr_threshold(beta, Lk1)
    u = parent.cube.center.coords
    dists, bad = {}, []
    for r in radii:
        sub = parent if r == parent.cube.L else parent.restrict(u, r)
        dists[r] = sub.spectral_distance(E)
        if dists[r] < thr:
            bad.append(r)
    return PredicateVerdict("CR" if bad else "CNR", E, beta,
                            {"distances": {str(r): v for r, v in dists.items()},
                             "threshold": thr, "failing_radii": bad},
                            u, parent.cube.L, k, stride if stride is not None else center_stride(Lk))


# -- good / bad -------------------------------------------------------------

def subcube_centers(parent: CubeSpec, Lk: int, stride: int = 1) -> list[tuple[int, ...]]:
    """Centers x with the radius-L_k cube inside the parent grid, on a stride lattice through u."""
    R = parent.L - Lk
    if R < 0:
        raise OperatorError(f"sub-scale {Lk} exceeds parent radius {parent.L}")
    offs = _thinned(-R, R, 1) if stride == 1 else sorted(
        set(range(0, R + 1, stride)) | set(range(0, -R - 1, -stride)) | {R, -R})
    u = np.asarray(parent.center.coords)
    grids = np.meshgrid(*([np.asarray(offs)] * parent.dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1) + u
    return [tuple(int(c) for c in row) for row in pts]


def subcube_verdicts(parent: DiscretizedOperator, E: float, m: float, Lk: int,
                     stride: int | None = None, C_geom: float = 1.0) -> dict:
    stride = center_stride(Lk) if stride is None else stride
    out = {}
    for x in subcube_centers(parent.cube, Lk, stride):
        v = is_ns(parent.restrict(x, Lk), E, m, C_geom)
        v.stride = stride
        out[x] = v
    return out


def classify_good_bad(parent: CubeSpec, verdicts: dict, p: ScaleParams, E: float, Lk: int,
                      stride: int | None = None, K: int | None = None,
                      k: int | None = None) -> PredicateVerdict:
    """E-bad iff some WI sub-cube is S, or K+1 SI singular sub-cubes are pairwise 9 N L_k^tau apart.

    The pairwise-distant family is chosen greedily in center order; the
    chosen family is stored as the witness.
    """
    stride = center_stride(Lk) if stride is None else stride
    K = p.K if K is None else K
    need = subcube_centers(parent, Lk, stride)
    missing = [x for x in need if x not in verdicts]
    if missing:
        raise OperatorError(f"missing sub-cube verdicts for centers {missing[:10]}"
                            + (f" and {len(missing) - 10} more" if len(missing) > 10 else ""))
    sep = 9.0 * parent.N * float(Lk) ** p.tau
    wi_sing, family = [], []
    for x in need:
        v = verdicts[x]
        if v.kind == "NS":
            continue
        sub = CubeSpec(LatticeConfig.of(x, parent.N, parent.d), Lk)
        if classify_interactivity(sub, p.tau) == "WI":
            wi_sing.append(x)
        elif all(max_norm(np.subtract(x, y)) >= sep for y in family):
            family.append(x)
    bad = bool(wi_sing) or len(family) >= K + 1
    n_sing = sum(1 for x in need if verdicts[x].kind != "NS")
    return PredicateVerdict("bad" if bad else "good", E, p.tau,
                            {"wi_singular": wi_sing, "si_family": family, "K": K,
                             "n_singular": n_sing, "n_checked": len(need)},
                            parent.center.coords, parent.L, k, stride)


# -- GRI descent ------------------------------------------------------------

@dataclass
class GRIResult:
    E: float
    sub_radius: int
    C_geom: float
    parent_norm: float
    bounds: dict
    direct: dict
    trace: list
    target: tuple[int, ...]
    iterations: int

    def sound(self, rtol: float = 1e-9) -> bool:
        return all(self.bounds[y] >= self.direct[y] * (1 - rtol) for y in self.direct)


def _layer_cells(parent: DiscretizedOperator, sub: DiscretizedOperator) -> np.ndarray:
    q = sub.grid.outer_layer()
    keep = parent.grid.index_of(q) >= 0
    return np.unique(parent.grid.cell_index(parent.grid.cell_coords(q[keep])))


def gri_descent(parent: DiscretizedOperator, E: float, ell: int,
                ns_oracle: Callable | dict | None = None, C_geom: float | None = None,
                beta: float | None = None, compute_direct: bool = True,
                stride: int = 1) -> GRIResult:
    """Certified bounds on ||chi_y G_parent(E) chi_u|| for every boundary cell y.

    For a sub-cube of radius ``ell`` around x inside the parent and a cell y
    at distance >= ell + 1 from x, the second resolvent identity gives

        ||chi_y G chi_x|| <= C * mult(x) * dnorm(G_sub(x)) * max_{z in Z(x)} ||chi_y G chi_z||

    with Z(x) the cells meeting the layer just outside the sub-cube, mult(x)
    = max((3 ell)^{Nd}, |Z(x)|) and C the norm of the cut bonds.  Starting
    from ||chi_y G chi_z|| <= ||G|| everywhere, the step is applied at every
    non-singular center until nothing improves (a monotone fixed point), so
    each value stays a valid upper bound.  Singular centers, per
    ``ns_oracle``, are never used as steps.  The trace follows the
    maximizing cells from u for the target with the largest bound.
    """
    cube = parent.cube
    D = cube.dim
    if C_geom is None:
        C_geom = parent.grid.coupling_norm(parent.kappa)
    dist = parent.spectral_distance(E)
    if dist <= 1e-12:
        raise ResonantEnergyError(E, dist, "parent cube")
    if beta is not None and dist < nr_threshold(beta, cube.L):
        raise DescentBlocked(f"parent cube is not non-resonant at E={E} (distance {dist:.3e})")
    base = 1.0 / dist
    grid = parent.grid
    cells = grid.cells
    u = np.asarray(cube.center.coords)
    u_idx = int(grid.cell_index(u)[0])
    ring = np.abs(cells - u).max(axis=1) == cube.L
    targets = cells[ring]
    centers = subcube_centers(cube, ell, stride)
    n_adm = len(centers)
    factor = np.full(n_adm, np.inf)
    dns = np.full(n_adm, np.inf)
    usable = np.zeros(n_adm, bool)
    zlists = []
    for i, x in enumerate(centers):
        sub = parent.restrict(x, ell)
        Z = _layer_cells(parent, sub)
        zlists.append(Z)
        try:
            dn = dnorm(sub, E)
        except ResonantEnergyError:
            continue
        if ns_oracle is None:
            ns = True
        elif isinstance(ns_oracle, dict):
            ns = ns_oracle[x].kind == "NS" if hasattr(ns_oracle[x], "kind") else bool(ns_oracle[x])
        else:
            ns = bool(ns_oracle(x, dn))
        dns[i] = dn
        mult = max((3.0 * ell) ** D, float(len(Z)))
        factor[i] = C_geom * mult * dn
        usable[i] = ns
    adm_idx = grid.cell_index(np.asarray(centers))
    if u_idx not in set(adm_idx[usable].tolist()):
        raise DescentBlocked(f"descent blocked: center sub-cube at {tuple(u)} is singular or resonant")
    maxZ = max(len(z) for z in zlists)
    n_cells = len(cells)
    Zpad = np.full((n_adm, maxZ), n_cells, dtype=np.int64)
    for i, z in enumerate(zlists):
        Zpad[i, :len(z)] = z
    far = np.abs(np.asarray(centers)[:, None, :] - targets[None, :, :]).max(axis=2) >= ell + 1
    active = far & usable[:, None]
    B = np.full((n_cells + 1, len(targets)), base)
    B[n_cells] = 0.0
    fac = np.where(usable, factor, 0.0)
    it = 0
    while it < n_cells + 1:
        it += 1
        cand = fac[:, None] * B[Zpad].max(axis=1)
        cur = B[adm_idx]
        new = np.where(active & (cand < cur), cand, cur)
        if np.array_equal(new, cur):
            break
        B[adm_idx] = new
    bounds = {tuple(int(c) for c in y): float(B[u_idx, j]) for j, y in enumerate(targets)}
    direct = {}
    if compute_direct:
        X = parent.resolvent_columns(E, grid.center_nodes)
        for j, y in enumerate(targets):
            rows = grid.cell_ids == grid.cell_index(y)[0]
            direct[tuple(int(c) for c in y)] = float(np.linalg.norm(X[rows], 2)) if rows.any() else 0.0
    jt = int(np.argmax(B[u_idx]))
    pos = {int(a): i for i, a in enumerate(adm_idx)}
    trace, cur_cell, seen = [], u_idx, set()
    while cur_cell in pos and cur_cell not in seen and B[cur_cell, jt] < base:
        seen.add(cur_cell)
        i = pos[cur_cell]
        Z = zlists[i]
        nxt = int(Z[np.argmax(B[Z, jt])])
        trace.append({"center": [int(c) for c in cells[cur_cell]], "dnorm": float(dns[i]),
                      "factor": float(factor[i]), "bound": float(B[cur_cell, jt]),
                      "next": [int(c) for c in cells[nxt]]})
        cur_cell = nxt
    trace.append({"terminal": [int(c) for c in cells[cur_cell]], "bound": float(B[cur_cell, jt])})
    return GRIResult(float(E), int(ell), float(C_geom), base, bounds, direct, trace,
                     tuple(int(c) for c in targets[jt]), it)


def calibrate_c_geom(parent: DiscretizedOperator, E: float, ell: int, stride: int = 1) -> dict:
    """Largest observed ||chi_y G chi_x|| / (dnorm(G_sub(x)) ||chi_y G 1_out(x)||).

    The ratio is bounded by the cut-bond norm ``certified``; the measured
    maximum is what a fitted constant would have to be on these instances.
    """
    grid = parent.grid
    G = np.linalg.inv(parent.dense - E * np.eye(parent.dim))
    best, n = 0.0, 0
    for x in subcube_centers(parent.cube, ell, stride):
        sub = parent.restrict(x, ell)
        try:
            dn = dnorm(sub, E)
        except ResonantEnergyError:
            continue
        out_idx = grid.index_of(sub.grid.outer_layer())
        out_idx = out_idx[out_idx >= 0]
        xn = grid.cell_nodes(x)
        far = np.abs(grid.cells - np.asarray(x)).max(axis=1) >= ell + 1
        for ci in np.flatnonzero(far):
            rows = np.flatnonzero(grid.cell_ids == ci)
            num = np.linalg.norm(G[np.ix_(rows, xn)], 2)
            den = dn * np.linalg.norm(G[np.ix_(rows, out_idx)], 2)
            if den > 0:
                best = max(best, num / den)
                n += 1
    return {"max_ratio": best, "pairs": n, "certified": grid.coupling_norm(parent.kappa)}


# -- scaling step -----------------------------------------------------------

@dataclass
class ScalingStepReport:
    center: tuple[int, ...]
    E: float
    Lk: int
    Lk1: int
    mass: float
    toy_mode: bool
    good: bool
    nr: bool
    cnr: bool
    ns: bool
    parent_dnorm: float
    ns_threshold: float
    n_singular_sub: int
    status: str
    gri_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def premises(self) -> bool:
        return self.good and self.nr and self.cnr

    @property
    def counterexample(self) -> bool:
        return self.premises and not self.ns

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        return d


def scaling_step_check(parent: DiscretizedOperator, E: float, p: ScaleParams, k: int = 0,
                       toy_mode: bool = False, Lk: int | None = None, Lk1: int | None = None,
                       K: int | None = None, C_geom: float = 1.0,
                       run_gri: bool = False) -> ScalingStepReport:
    """Evaluate "good and non-resonant implies non-singular" on one parent cube.

    Without ``toy_mode`` the scales are L_k and L_{k+1} of ``p``.  In toy
    mode ``Lk``/``Lk1`` (and optionally ``K``) are taken as given, which is
    not faithful to the scale sequence and is flagged in the report.
    """
    if toy_mode:
        if Lk is None or Lk1 is None:
            raise ParamError("toy mode needs explicit Lk and Lk1")
    else:
        Lk, Lk1 = scale(p, k), scale(p, k + 1)
    if parent.cube.L != Lk1:
        raise OperatorError(f"parent radius {parent.cube.L} does not match L_(k+1) = {Lk1}")
    N = parent.cube.N
    m = mass(p, min(N, p.N_star))
    stride = center_stride(Lk)
    verdicts = subcube_verdicts(parent, E, m, Lk, stride, C_geom)
    gb = classify_good_bad(parent.cube, verdicts, p, E, Lk, stride, K, k)
    nr = is_nr(parent, E, p.beta, Lk1, k=k)
    cnr = is_cnr(parent, E, p.beta, Lk, Lk1, stride, k)
    top = is_ns(parent, E, m, C_geom, k)
    premises = gb.kind == "good" and nr.kind == "NR" and cnr.kind == "CNR"
    ns_ok = top.kind == "NS"
    status = "vacuous" if not premises else ("holds" if ns_ok else "counterexample")
    rep = ScalingStepReport(parent.cube.center.coords, float(E), int(Lk), int(Lk1), m, toy_mode,
                            gb.kind == "good", nr.kind == "NR", cnr.kind == "CNR", ns_ok,
                            float(top.witness["dnorm"]),
                            ns_threshold(m, Lk1, parent.cube.dim, C_geom),
                            gb.witness["n_singular"], status)
    rep.details = {"stride": stride, "nr_distance": nr.witness["distance"],
                   "cnr_failing": cnr.witness["failing_radii"],
                   "K": gb.witness["K"], "wi_singular": bool(gb.witness["wi_singular"]),
                   "flags": ["toy scales"] if toy_mode else []}
    if run_gri and premises:
        try:
            res = gri_descent(parent, E, Lk, verdicts, compute_direct=True, stride=stride)
            rep.gri_bound = max(res.bounds.values())
            rep.details["gri_direct"] = max(res.direct.values())
            rep.details["gri_steps"] = len(res.trace) - 1
        except DescentBlocked as exc:
            rep.details["gri_error"] = str(exc)
    return rep
