"""Combes-Thomas decay rates below the spectrum, as a function of the gap."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import CubeSpec
from ..operators import GridSpec, assemble, combes_thomas_profile
from ..randomfield import ConfigError
from . import common

DEFAULT_SAMPLES = 100
MODEL = {"h": 1.0}
KNOBS = {
    "center": [0, 0],
    "L": 6,
    "gaps": [0.5, 1.0, 2.0],
    "free_L": 10,
    "free_E": -1.0,
}


def validate(cfg):
    gaps = cfg["knobs"]["gaps"]
    if len(gaps) < 2 or any(x <= 0 for x in gaps) or any(b <= a for a, b in zip(gaps, gaps[1:])):
        raise ConfigError("gaps must be positive, increasing and at least two")
    if cfg["knobs"]["free_E"] >= 0:
        raise ConfigError("free_E must lie below the free spectrum")


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    c = common.cube(m, k["center"], k["L"])
    op = common.operator(cfg, c, common.disorder(cfg, common.region(m, c), i))
    E0 = op.ground_energy()
    rates, r2 = [], []
    for gap in k["gaps"]:
        prof = combes_thomas_profile(op, E0 - gap)
        rates.append(prof.rate)
        r2.append(prof.r2)
    return {"ground": E0, "rates": rates, "r2": r2,
            "monotone": bool(all(b >= a for a, b in zip(rates, rates[1:])))}


def closed_form_rate(E: float, kappa: float, h: float) -> float:
    """Decay rate per unit length of the free 1D lattice resolvent below 0."""
    M = round(1.0 / h)
    return M * math.acosh(1.0 - E / (2.0 * kappa * M * M))


def free_rate(cfg) -> dict:
    k, m = cfg["knobs"], cfg["model"]
    op = assemble(GridSpec(CubeSpec.around([0], k["free_L"], N=1, d=1), m["h"]), None, None, 0.0, m["kappa"])
    prof = combes_thomas_profile(op, k["free_E"])
    oracle = closed_form_rate(k["free_E"], m["kappa"], m["h"])
    return {"rate": prof.rate, "oracle": oracle, "rel_error": abs(prof.rate / oracle - 1), "r2": prof.r2}


def summarize(cfg, records):
    k = cfg["knobs"]
    n = len(records)
    R = np.array([r["rates"] for r in records])
    return {
        "samples": n,
        "monotone_fraction": sum(r["monotone"] for r in records) / n,
        "median_rates": {repr(float(g)): float(np.median(R[:, j])) for j, g in enumerate(k["gaps"])},
        "min_r2": float(np.min([r["r2"] for r in records])),
        "min_ground_energy": min(r["ground"] for r in records),
        "free": free_rate(cfg),
    }


def series(cfg, records):
    cols = ["sample"] + [f"rate_gap{g}" for g in cfg["knobs"]["gaps"]]
    return {"ct_rates": (cols, [(i, *r["rates"]) for i, r in enumerate(records)])}
