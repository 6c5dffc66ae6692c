"""From fixed-energy to energy-interval bounds, on an energy grid.

F_x(E) is the largest boundary-cell block of the resolvent of the cube at
x, seen from its center cell.  Each record stores the runs of grid points
where F_x >= a_L (and likewise for y and for min(F_x, F_y)), so every
fixed-energy and interval-existence frequency can be recomputed exactly.
"""

from __future__ import annotations

import math

import numpy as np

from ..geometry import LatticeConfig, cubes_distant
from ..operators import boundary_max_many
from ..randomfield import ConfigError
from . import common
from .stats import estimate

DEFAULT_SAMPLES = 500
MODEL = {"g": 8.0, "h": 0.5}
KNOBS = {
    "L": 3,
    "x": [0, 8],
    "y": [24, 32],
    "E_star": 5.0,
    "n_grid": 2048,
    "resolution": None,  # None: E_star / 2048
    "a_L": 0.01,
    "b": None,  # None: the minimizer of the right-hand side
    "C3": 1.0,
    "distance_factor": None,  # None: 4N
}


def validate(cfg):
    k, m = cfg["knobs"], cfg["model"]
    if k["E_star"] <= 0 or k["n_grid"] < 1:
        raise ConfigError("need E_star > 0 and n_grid >= 1")
    res = k["E_star"] / 2048 if k["resolution"] is None else k["resolution"]
    step = k["E_star"] / k["n_grid"]
    if step > res * (1 + 1e-12):
        raise ConfigError(f"energy grid step {step:.3e} is coarser than the requested resolution {res:.3e}")
    if k["a_L"] <= 0 or (k["b"] is not None and k["b"] <= 0):
        raise ConfigError("a_L and b must be positive")
    fac = 4 * m["N"] if k["distance_factor"] is None else k["distance_factor"]
    a, b = LatticeConfig.of(k["x"], m["N"], m["d"]), LatticeConfig.of(k["y"], m["N"], m["d"])
    if not cubes_distant(a, b, k["L"], fac):
        raise ConfigError(f"cubes at {k['x']} and {k['y']} are not {fac}L-distant")


def energies(cfg) -> np.ndarray:
    k = cfg["knobs"]
    return np.linspace(0.0, k["E_star"], k["n_grid"] + 1)


def runs(mask) -> list[list[int]]:
    """Maximal runs of True as [first, last] index pairs."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    d = np.diff(m.astype(np.int8))
    starts, stops = np.flatnonzero(d == 1), np.flatnonzero(d == -1) - 1
    return [[int(a), int(b)] for a, b in zip(starts, stops)]


def sign_changes(mask) -> int:
    m = np.asarray(mask, bool)
    return int(np.count_nonzero(m[1:] != m[:-1]))


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    E = energies(cfg)
    cx, cy = common.cube(m, k["x"], k["L"]), common.cube(m, k["y"], k["L"])
    dis = common.disorder(cfg, common.region(m, cx, cy), i)
    out = {}
    masks = {}
    for key, c in (("x", cx), ("y", cy)):
        op = common.operator(cfg, c, dis)
        F = boundary_max_many(op, E)
        mask = F >= k["a_L"]
        w = common.window_eigs(op, k["E_star"])
        r = runs(mask)
        # runs not touching the grid ends are open intervals bounded by two sign changes
        inner = [q for q in r if q[0] > 0 and q[1] < E.size - 1]
        with_eig = sum(1 for q in inner if np.any((w >= E[q[0] - 1]) & (w <= E[q[1] + 1])))
        out[key] = {"runs": r, "sign_changes": sign_changes(mask), "inner_runs": len(inner),
                    "inner_runs_with_eigenvalue": with_eig,
                    "F_max": common_finite_max(F), "n_window": int(w.size)}
        masks[key] = mask
    out["joint"] = {"runs": runs(masks["x"] & masks["y"])}
    return out


def common_finite_max(F):
    f = F[np.isfinite(F)]
    return float(f.max()) if f.size else math.inf


def _mask(entry, size):
    m = np.zeros(size, bool)
    for a, b in entry["runs"]:
        m[a:b + 1] = True
    return m


def rhs(I: float, q: float, b: float, C3: float, L: int, N: int, d: int) -> float:
    return 2 * I * q / b + C3 * L ** (4 * N * d) * b


def summarize(cfg, records):
    k, m = cfg["knobs"], cfg["model"]
    E = energies(cfg)
    n = len(records)
    fixed = {}
    exists = {}
    for key in ("x", "y"):
        counts = np.zeros(E.size, dtype=int)
        for r in records:
            counts += _mask(r[key], E.size)
        fixed[key] = counts
        exists[key] = sum(1 for r in records if r[key]["runs"])
    q_L = float(max(fixed["x"].max(), fixed["y"].max()) / n)
    I = float(k["E_star"])
    vol = k["L"] ** (4 * m["N"] * m["d"])
    if k["b"] is None:
        b = math.sqrt(2 * I * q_L / (k["C3"] * vol)) if q_L > 0 else 1.0 / (k["C3"] * vol)
    else:
        b = float(k["b"])
    lhs = estimate(sum(1 for r in records if r["joint"]["runs"]), n)
    right = rhs(I, q_L, b, k["C3"], k["L"], m["N"], m["d"])
    bookkeeping = all(
        r[key]["sign_changes"] == 2 * len(r[key]["runs"])
        - sum(1 for a, z in r[key]["runs"] if a == 0) - sum(1 for a, z in r[key]["runs"] if z == E.size - 1)
        for r in records for key in ("x", "y"))
    inner = sum(r[key]["inner_runs"] for r in records for key in ("x", "y"))
    with_eig = sum(r[key]["inner_runs_with_eigenvalue"] for r in records for key in ("x", "y"))
    F_max = max(max(r["x"]["F_max"], r["y"]["F_max"]) for r in records)
    return {
        "samples": n,
        "grid_step": float(E[1] - E[0]) if E.size > 1 else 0.0,
        "a_L": k["a_L"],
        "q_L": q_L,
        "b": b,
        "interval_probability": lhs,
        "rhs": right,
        "lhs_le_rhs": lhs["p"] <= right,
        "fixed_le_interval": {key: bool(fixed[key].max() <= exists[key]) for key in ("x", "y")},
        "interval_existence": {key: exists[key] / n for key in ("x", "y")},
        "sign_change_bookkeeping": bookkeeping,
        "inner_runs": inner,
        "inner_runs_with_eigenvalue": with_eig,
        "F_max": F_max,
    }


def series(cfg, records):
    E = energies(cfg)
    n = len(records)
    fx = sum(_mask(r["x"], E.size) for r in records) / n
    fy = sum(_mask(r["y"], E.size) for r in records) / n
    return {"fe_to_ei_fixed": (["E", "P_x", "P_y"],
                               [(float(e), float(a), float(b)) for e, a, b in zip(E, fx, fy)])}
