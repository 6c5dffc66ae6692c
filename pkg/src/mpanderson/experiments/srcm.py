"""Regularity of the sample mean, conditioned on the fluctuations.

For Q IID amplitudes, xi is their mean and eta = values - xi.  Given eta,
the law of xi has density 1/(c_V - spread(eta)) on an interval of that
length when the amplitudes are uniform.  Each record holds sufficient
statistics for a chunk of draws: per conditioning cell, the number of draws
and the number with xi in a window [mu, mu + s] centred in the support.
"""

from __future__ import annotations

import numpy as np

from ..randomfield import ConfigError
from . import common
from .config import check_s_grid
from .stats import estimate, loglog_slope

DEFAULT_SAMPLES = 2000
KNOBS = {
    "Q_sizes": [2, 3, 4],
    "draws_per_sample": 500,
    "delta_bin": 0.04,
    "bulk": 0.8,
    "s_density": 0.15,
    "s_grid": [float(x) for x in np.logspace(-3, -1, 9)],
    "spreads": [0.2, 0.5, 0.8],
    "radius": 0.05,
    "min_count": 200,
}


def validate(cfg):
    k = cfg["knobs"]
    check_s_grid(k["s_grid"])
    if any(q not in (2, 3, 4) for q in k["Q_sizes"]):
        raise ConfigError("|Q| must be in {2, 3, 4}")
    if 2 not in k["Q_sizes"]:
        raise ConfigError("|Q| = 2 is required for the density oracle")
    c = cfg["model"]["c_V"]
    if k["s_density"] > c * (1 - k["bulk"]) - k["delta_bin"]:
        raise ConfigError("s_density does not fit inside the conditional support on the bulk")


def _n_bins(k, c):
    return int(round(2 * c / k["delta_bin"]))


def _query(n, spread):
    # symmetric fluctuation vector with the given spread
    return spread * (np.arange(n) / (n - 1) - 0.5)


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    c = float(m["c_V"])
    dens = common.density(m)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg["seed"], spawn_key=(i,))))
    out = {}
    for n in k["Q_sizes"]:
        vals = dens.ppf(rng.random((k["draws_per_sample"], n)))
        xi = vals.mean(axis=1)
        eta = vals - xi[:, None]
        if n == 2:
            delta = vals[:, 0] - vals[:, 1]
            nb = _n_bins(k, c)
            b = np.clip(np.floor((delta + c) / k["delta_bin"]).astype(int), 0, nb - 1)
            s = k["s_density"]
            hit = np.abs(xi - c / 2) <= s / 2
            bulk = np.abs(delta) <= k["bulk"] * c
            out["2"] = {
                "counts": np.bincount(b, minlength=nb).tolist(),
                "hits": np.bincount(b, weights=hit, minlength=nb).astype(int).tolist(),
                "n_bulk": int(bulk.sum()),
                "hits_s": [int(np.sum(bulk & (np.abs(xi - c / 2) <= x / 2))) for x in k["s_grid"]],
            }
        else:
            counts, hits = [], []
            for sp in k["spreads"]:
                q = _query(n, sp)
                near = np.abs(np.sort(eta, axis=1) - q).max(axis=1) <= k["radius"]
                counts.append(int(near.sum()))
                hits.append(int(np.sum(near & (np.abs(xi - c / 2) <= k["s_density"] / 2))))
            out[str(n)] = {"counts": counts, "hits": hits}
    # decomposition identity on the first draw: a constant shift moves xi only
    v = dens.ppf(rng.random(3))
    shift = 0.25
    e0, e1 = v - v.mean(), (v + shift) - (v + shift).mean()
    out["shift_identity"] = float(max(abs((v + shift).mean() - v.mean() - shift), np.abs(e0 - e1).max()))
    return out


def _totals(cfg, records, n):
    key = str(n)
    c = np.sum([r[key]["counts"] for r in records], axis=0)
    h = np.sum([r[key]["hits"] for r in records], axis=0)
    return c, h


def summarize(cfg, records):
    k, m = cfg["knobs"], cfg["model"]
    c = float(m["c_V"])
    uniform = m["density"] == "uniform" or m["density_rate"] == 0
    counts, hits = _totals(cfg, records, 2)
    nb = len(counts)
    centers = -c + (np.arange(nb) + 0.5) * k["delta_bin"]
    bins, skipped, worst = [], 0, 0.0
    for j in range(nb):
        lo, hi = centers[j] - k["delta_bin"] / 2, centers[j] + k["delta_bin"] / 2
        if max(abs(lo), abs(hi)) > k["bulk"] * c + 1e-12:
            continue
        if counts[j] < k["min_count"]:
            skipped += 1
            continue
        dens = hits[j] / (counts[j] * k["s_density"])
        # delta has density (c - |delta|)/c^2, so the bin average of the oracle is exact at the centre
        oracle = 1.0 / (c - abs(centers[j])) if uniform else None
        if uniform:
            rel = abs(dens / oracle - 1)
            worst = max(worst, rel)
        bins.append({"delta": float(centers[j]), "count": int(counts[j]), "density": float(dens),
                     "oracle": oracle})
    n_bulk = sum(r["2"]["n_bulk"] for r in records)
    hs = np.sum([r["2"]["hits_s"] for r in records], axis=0)
    fit = loglog_slope(k["s_grid"], hs, n_bulk)
    sup = {2: max(b["density"] for b in bins) if bins else float("nan")}
    multi = {}
    for n in k["Q_sizes"]:
        if n == 2:
            continue
        cn, hn = _totals(cfg, records, n)
        rows = []
        for sp, a, b in zip(k["spreads"], cn, hn):
            if a < k["min_count"]:
                skipped += 1
                continue
            rows.append({"spread": sp, "count": int(a), "density": b / (a * k["s_density"]),
                         "oracle": 1.0 / (c - sp) if uniform else None})
        multi[str(n)] = rows
        if rows:
            sup[n] = max(r["density"] for r in rows)
    sizes = sorted(sup)
    exponent = float(np.polyfit(np.log(sizes), np.log([sup[q] for q in sizes]), 1)[0]) if len(sizes) > 1 else None
    return {
        "draws_Q2": int(counts.sum()),
        "density_max_rel_error": worst if uniform else None,
        "density_bins": bins,
        "skipped_bins": skipped,
        "small_s_slope": fit["slope"],
        "small_s": [{"s": float(s), **estimate(h, n_bulk)} for s, h in zip(k["s_grid"], hs)],
        "multi_Q": multi,
        "Q_exponent": exponent,
        "A": 2,
        "shift_identity_max": max(r["shift_identity"] for r in records),
    }


def series(cfg, records):
    summ = summarize(cfg, records)
    return {
        "srcm_density": (["delta", "density", "oracle"],
                         [(b["delta"], b["density"], b["oracle"]) for b in summ["density_bins"]]),
        "srcm_small_s": (["log_s", "log_P"],
                         [(float(np.log(e["s"])), float(np.log(e["p"]))) for e in summ["small_s"] if e["hits"] > 0]),
    }
