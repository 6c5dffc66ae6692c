"""Small estimators shared by the experiments."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import binomtest


def wilson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def estimate(k: int, n: int) -> dict:
    lo, hi = wilson(k, n)
    return {"hits": int(k), "n": int(n), "p": k / n if n else float("nan"),
            "lo": lo, "hi": hi, "half_width": 0.5 * (hi - lo)}


def loglog_slope(s, hits, n) -> dict:
    """Count-weighted least squares of log(hits/n) on log(s), zero-hit points dropped.

    Weights are the hit counts (inverse Poisson variance of log p).
    """
    s = np.asarray(s, dtype=float)
    hits = np.asarray(hits, dtype=float)
    keep = hits > 0
    if keep.sum() < 2:
        return {"slope": float("nan"), "intercept": float("nan"), "points": int(keep.sum()),
                "under_resolved": True}
    x, y = np.log(s[keep]), np.log(hits[keep] / n)
    slope, icpt = np.polyfit(x, y, 1, w=np.sqrt(hits[keep]))
    return {"slope": float(slope), "intercept": float(icpt), "points": int(keep.sum()),
            "under_resolved": False}


def finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)
