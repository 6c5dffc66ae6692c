"""Initial-scale singularity probability over an energy grid, swept in g."""

from __future__ import annotations

import numpy as np

from .. import msa
from ..operators import dnorm_many
from ..randomfield import ConfigError
from . import common
from .config import TOY_SCALE
from .stats import estimate

DEFAULT_SAMPLES = 500
MODEL = {"h": 0.5}
SCALE = {**TOY_SCALE, "L0": 6}
KNOBS = {
    "center": [0, 0],
    "g_sweep": [1.0, 4.0, 16.0],
    "E_min": 0.0,
    "E_max": 12.0,
    "E_step": 0.1,
    "C_geom": 1.0,
}


def validate(cfg):
    k = cfg["knobs"]
    if cfg["scale"] is None:
        raise ConfigError("ils needs scale parameters")
    if not k["g_sweep"] or any(g < 0 for g in k["g_sweep"]):
        raise ConfigError("g_sweep must be a non-empty list of non-negative couplings")
    if k["E_step"] <= 0 or k["E_max"] < k["E_min"]:
        raise ConfigError("bad energy grid")
    msa.ScaleParams.from_dict(cfg["scale"])


def energies(cfg) -> np.ndarray:
    k = cfg["knobs"]
    n = int(round((k["E_max"] - k["E_min"]) / k["E_step"])) + 1
    return np.round(k["E_min"] + k["E_step"] * np.arange(n), 10)


def _params(cfg):
    p = msa.ScaleParams.from_dict(cfg["scale"])
    n = int(cfg["model"]["N"])
    return p, msa.mass(p, n), float(msa.exponent(p, n, 0))


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    p, m_N, _ = _params(cfg)
    c = common.cube(m, k["center"], p.L0)
    dis = common.disorder(cfg, common.region(m, c), i)
    E = energies(cfg)
    out = {}
    for g in k["g_sweep"]:
        op = common.operator(cfg, c, dis, g=g)
        dn = dnorm_many(op, E)
        thr = msa.ns_threshold(m_N, p.L0, c.dim, k["C_geom"])
        out[repr(float(g))] = {"singular": np.flatnonzero(~(dn <= thr)).tolist(),
                               "ground": float(op.eigenvalues()[0])}
    return out


def e_star(probs: np.ndarray, E: np.ndarray, cap: float) -> float | None:
    """Largest grid energy up to which every estimate is <= cap."""
    bad = np.flatnonzero(probs > cap)
    if bad.size == 0:
        return float(E[-1])
    if bad[0] == 0:
        return None
    return float(E[bad[0] - 1])


def summarize(cfg, records):
    k = cfg["knobs"]
    _, m_N, P = _params(cfg)
    L0 = cfg["scale"]["L0"]
    cap = L0 ** (-P)
    E = energies(cfg)
    n = len(records)
    per_g = {}
    stars = []
    for g in k["g_sweep"]:
        key = repr(float(g))
        counts = np.zeros(E.size, dtype=int)
        for r in records:
            counts[r[key]["singular"]] += 1
        probs = counts / n
        es = e_star(probs, E, cap)
        stars.append(es)
        per_g[key] = {
            "E_star": es,
            "deterministic": bool(np.all((counts == 0) | (counts == n))),
            "min_ground_energy": min(r[key]["ground"] for r in records),
            "probabilities": [estimate(int(c), n) for c in counts],
        }
    vals = [-np.inf if s is None else s for s in stars]
    return {
        "samples": n,
        "mass": m_N,
        "P": P,
        "threshold": cap,
        "energies": E.tolist(),
        "E_star": {repr(float(g)): s for g, s in zip(k["g_sweep"], stars)},
        "E_star_monotone": bool(all(b >= a for a, b in zip(vals, vals[1:]))),
        "per_g": per_g,
    }


def series(cfg, records):
    summ = summarize(cfg, records)
    cols = ["E"] + [f"P_g{g}" for g in cfg["knobs"]["g_sweep"]]
    rows = []
    for j, e in enumerate(summ["energies"]):
        rows.append((e, *[summ["per_g"][repr(float(g))]["probabilities"][j]["p"] for g in cfg["knobs"]["g_sweep"]]))
    return {"ils_probability": (cols, rows)}
