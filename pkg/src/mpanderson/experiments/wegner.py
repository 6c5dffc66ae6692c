"""One-volume eigenvalue concentration: P(dist(spectrum in I*, E) <= s)."""

from __future__ import annotations

import numpy as np

from ..randomfield import ConfigError
from . import common
from .config import check_s_grid
from .stats import estimate, loglog_slope

DEFAULT_SAMPLES = 2000
MODEL = {"g": 8.0, "h": 0.5}
# E sits where the density of states is O(1) at g = 8; deeper in the tail
# (E = 0.5) almost no sample has an eigenvalue nearby.
KNOBS = {
    "L": 4,
    "center": [0, 0],
    "E": 4.5,
    "E_star": 6.0,
    "s_grid": [float(x) for x in np.logspace(-3, -1, 9)],
}


def validate(cfg):
    k = cfg["knobs"]
    check_s_grid(k["s_grid"])
    if not 0 <= k["E"] <= k["E_star"]:
        raise ConfigError(f"E={k['E']} is not in I* = [0, {k['E_star']}]")


def sample(cfg, i):
    k = cfg["knobs"]
    c = common.cube(cfg["model"], k["center"], k["L"])
    op = common.operator(cfg, c, common.disorder(cfg, common.region(cfg["model"], c), i))
    w = common.window_eigs(op, k["E_star"])
    return {"dist": common.nearest(w, k["E"]), "n_window": int(w.size),
            "ground": float(op.eigenvalues()[0])}


def _curve(cfg, records):
    s = np.asarray(cfg["knobs"]["s_grid"])
    d = np.array([np.inf if r["dist"] is None else r["dist"] for r in records])
    hits = np.array([int(np.sum(d <= x)) for x in s])
    return s, hits, len(records)


def summarize(cfg, records):
    k, m = cfg["knobs"], cfg["model"]
    s, hits, n = _curve(cfg, records)
    fit = loglog_slope(s, hits, n)
    vol = k["L"] ** (m["N"] * m["d"])
    ests = [estimate(h, n) for h in hits]
    lin = [e["p"] / (vol * x) for e, x in zip(ests, s) if e["hits"] > 0]
    d = np.array([np.inf if r["dist"] is None else r["dist"] for r in records])
    # P(s/2) / P(s) from the raw distances, not restricted to the grid
    ratios = [float(np.sum(d <= x / 2) / h) for x, h in zip(s, hits) if h > 0]
    ground = min(r["ground"] for r in records)
    return {
        "samples": n,
        "slope": fit["slope"],
        "intercept": fit["intercept"],
        "under_resolved": bool(hits.sum() == 0),
        "suggestion": "increase s or g" if hits.sum() == 0 else "",
        "implied_constant_max": max(lin) if lin else None,
        "halving_ratios": ratios,
        "min_ground_energy": ground,
        "estimates": [{"s": float(x), **e} for x, e in zip(s, ests)],
    }


def series(cfg, records):
    s, hits, n = _curve(cfg, records)
    fit = loglog_slope(s, hits, n)
    rows = [(float(np.log(x)), float(np.log(h / n))) for x, h in zip(s, hits) if h > 0]
    meta = {"fit": f"log_P = {fit['intercept']!r} + {fit['slope']!r} * log_s"}
    return {"wegner_loglog": (["log_s", "log_P"], rows, meta)}
