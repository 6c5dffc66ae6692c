"""Two-volume eigenvalue concentration for pairs of distant cubes."""

from __future__ import annotations

import numpy as np

from ..geometry import LatticeConfig, cubes_distant
from ..randomfield import ConfigError
from . import common
from .config import check_s_grid
from .stats import estimate, loglog_slope

DEFAULT_SAMPLES = 2000
MODEL = {"g": 8.0, "h": 0.5}
# The first pair drives the fit.  (0,0)/(24,0) is kept as a diagnostic: the
# symmetric cube has near-degenerate exchange doublets and the two cubes
# share sites near the origin.
KNOBS = {
    "L": 3,
    "pairs": [[[0, 8], [24, 32]], [[0, 0], [24, 0]], [[0, 0], [24, 24]]],
    "E_star": 5.0,
    "distance_factor": None,  # None: 4N
    "s_grid": [float(x) for x in np.logspace(-3, -1, 9)],
}


def _factor(cfg):
    f = cfg["knobs"]["distance_factor"]
    return 4 * cfg["model"]["N"] if f is None else f


def validate(cfg):
    k, m = cfg["knobs"], cfg["model"]
    check_s_grid(k["s_grid"])
    if not k["pairs"]:
        raise ConfigError("no cube pairs given")
    for x, y in k["pairs"]:
        a = LatticeConfig.of(x, m["N"], m["d"])
        b = LatticeConfig.of(y, m["N"], m["d"])
        if not cubes_distant(a, b, k["L"], _factor(cfg)):
            raise ConfigError(f"cubes at {x} and {y} are not {_factor(cfg)}L-distant")


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    out = []
    for x, y in k["pairs"]:
        cx, cy = common.cube(m, x, k["L"]), common.cube(m, y, k["L"])
        rx, ry = common.region(m, cx), common.region(m, cy)
        shared = len({tuple(r) for r in rx.tolist()} & {tuple(r) for r in ry.tolist()})
        dis = common.disorder(cfg, common.region(m, cx, cy), i)
        a = common.window_eigs(common.operator(cfg, cx, dis), k["E_star"])
        b = common.window_eigs(common.operator(cfg, cy, dis), k["E_star"])
        dist = float(np.min(np.abs(a[:, None] - b[None, :]))) if a.size and b.size else None
        rec = {"dist": dist, "n_x": int(a.size), "n_y": int(b.size), "shared_sites": shared}
        if shared == 0:
            # structural independence: the x spectrum ignores every amplitude outside its own region
            other = common.disorder(cfg, ry, i, seed=(cfg["seed"] + 1) % 2 ** 64)
            alt = common.disorder(cfg, rx, i).merged(other)
            a2 = common.window_eigs(common.operator(cfg, cx, alt), k["E_star"])
            rec["x_invariant"] = bool(a2.size == a.size and np.array_equal(a2, a))
        out.append(rec)
    return {"pairs": out}


def _curve(cfg, records, j):
    s = np.asarray(cfg["knobs"]["s_grid"])
    d = np.array([np.inf if r["pairs"][j]["dist"] is None else r["pairs"][j]["dist"] for r in records])
    return s, np.array([int(np.sum(d <= x)) for x in s]), len(records)


def summarize(cfg, records):
    out = {"samples": len(records), "pairs": []}
    for j, (x, y) in enumerate(cfg["knobs"]["pairs"]):
        s, hits, n = _curve(cfg, records, j)
        fit = loglog_slope(s, hits, n)
        shared = records[0]["pairs"][j]["shared_sites"]
        inv = [r["pairs"][j].get("x_invariant") for r in records]
        out["pairs"].append({
            "x": x, "y": y, "slope": fit["slope"], "under_resolved": fit["under_resolved"],
            "shared_sites": shared,
            "disjoint": shared == 0,
            "independent_structurally": shared == 0 and all(inv),
            "estimates": [{"s": float(v), **estimate(h, n)} for v, h in zip(s, hits)],
        })
    out["slope"] = out["pairs"][0]["slope"]
    return out


def series(cfg, records):
    res = {}
    for j in range(len(cfg["knobs"]["pairs"])):
        s, hits, n = _curve(cfg, records, j)
        res[f"evc2_pair{j}_loglog"] = (["log_s", "log_P"],
                                       [(float(np.log(a)), float(np.log(h / n))) for a, h in zip(s, hits) if h > 0])
    return res
