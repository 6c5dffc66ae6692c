"""Singularity statistics of a weakly interactive cube.

Besides the direct estimate of P(WI cube is S), each sample replays the
conditional argument: the amplitudes driving the first factor are frozen,
the second factor is resampled, and its singularity is tested at the
shifted energies E - lambda' for lambda' in the first factor's spectrum.
"""

from __future__ import annotations

import numpy as np

from .. import msa
from ..geometry import CubeSpec, canonical_factorization, classify_interactivity
from ..randomfield import ConfigError
from . import common
from .config import TOY_SCALE
from .stats import estimate

DEFAULT_SAMPLES = 500
MODEL = {"h": 0.5}
SCALE = {**TOY_SCALE, "tau": 1.5}
INNER_SEED_OFFSET = 1_000_003
KNOBS = {
    "center": [0, 20],
    "L": 2,
    "E": 2.0,
    "E_star": 6.0,
    "resamples": 20,
    "C_geom": 1.0,
}


def validate(cfg):
    k = cfg["knobs"]
    if cfg["scale"] is None:
        raise ConfigError("wi_prob needs scale parameters")
    if not 0 <= k["E"] <= k["E_star"]:
        raise ConfigError(f"E={k['E']} is not in I* = [0, {k['E_star']}]")
    if k["resamples"] < 1:
        raise ConfigError("resamples must be >= 1")
    _factor(cfg)


def _factor(cfg):
    k, m = cfg["knobs"], cfg["model"]
    c = common.cube(m, k["center"], k["L"])
    tau = cfg["scale"]["tau"]
    if classify_interactivity(c, tau) != "WI":
        raise ConfigError(f"cube at {k['center']} with L={k['L']} is not weakly interactive at tau={tau}")
    return c, canonical_factorization(c, tau)


def _sites(cfg, c):
    return {tuple(s) for s in common.region(cfg["model"], c).tolist()}


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    p = msa.ScaleParams.from_dict(cfg["scale"])
    c, fac = _factor(cfg)
    c1, c2 = CubeSpec(fac.center_J, c.L), CubeSpec(fac.center_Jc, c.L)
    dis = common.disorder(cfg, common.region(m, c), i)
    E = k["E"]

    full = common.operator(cfg, c, dis)
    v = msa.is_ns(full, E, msa.mass(p, c.N), k["C_geom"])

    # interaction off: spectrum of the full cube is the sum of the factor spectra
    cfg0 = {**cfg, "model": {**m, "C_U": 0.0}}
    full0 = common.operator(cfg0, c, dis)
    op1, op2 = common.operator(cfg0, c1, dis), common.operator(cfg0, c2, dis)
    sums = np.sort(np.add.outer(op1.eigenvalues(), op2.eigenvalues()).ravel())
    tensor_dev = float(np.abs(np.sort(full0.eigenvalues()) - sums).max())

    s1, s2 = _sites(cfg, c1), _sites(cfg, c2)
    lam1 = op1.eigenvalues()
    lam1 = lam1[(lam1 >= 0) & (lam1 <= E)]
    shifted = E - lam1
    shift_ok = bool(np.all(shifted <= k["E_star"]))

    # freeze the first factor, redraw the second from an independent stream
    frozen = common.disorder(cfg, common.region(m, c1), i)
    m2 = msa.mass(p, c2.N)
    cond = 0
    for j in range(k["resamples"]):
        fresh = common.disorder(cfg, common.region(m, c2), i * k["resamples"] + j,
                                seed=(cfg["seed"] + INNER_SEED_OFFSET) % 2 ** 64)
        sub = common.operator(cfg0, c2, frozen.merged(fresh))
        if any(not msa.is_ns(sub, float(e), m2, k["C_geom"]).ok for e in shifted):
            cond += 1
    return {
        "singular": not v.ok,
        "dnorm": v.witness["dnorm"],
        "tensor_deviation": tensor_dev,
        "shared_sites": len(s1 & s2),
        "n_shifted": int(shifted.size),
        "shift_ok": shift_ok,
        "conditional_singular": cond,
        "resamples": k["resamples"],
    }


def summarize(cfg, records):
    k = cfg["knobs"]
    p = msa.ScaleParams.from_dict(cfg["scale"])
    n = len(records)
    N = int(cfg["model"]["N"])
    P_next = float(msa.exponent(p, N, 1))
    bound = k["L"] ** (-1.5 * P_next)
    direct = estimate(sum(r["singular"] for r in records), n)
    total = sum(r["resamples"] for r in records)
    cond = estimate(sum(r["conditional_singular"] for r in records), total)
    return {
        "samples": n,
        "bound": bound,
        "P_next": P_next,
        "singular": direct,
        "conditional_singular": cond,
        "direct_below_bound": direct["p"] <= bound,
        "conditional_below_bound": cond["p"] <= bound,
        "max_tensor_deviation": max(r["tensor_deviation"] for r in records),
        "max_shared_sites": max(r["shared_sites"] for r in records),
        "shift_ok": all(r["shift_ok"] for r in records),
    }


def series(cfg, records):
    return {"wi_prob_samples": (["index", "dnorm", "conditional_singular"],
                                [(i, r["dnorm"], r["conditional_singular"]) for i, r in enumerate(records)])}
