"""Experiment configuration: defaults, validation and the content digest.

A configuration is a JSON object::

    {"kind": "wegner", "seed": 0, "samples": 2000,
     "model": {...}, "scale": {...} | null, "knobs": {...}}

Every key is filled from the defaults below before a run, so the stored
configuration is complete and its digest identifies the run.
"""

from __future__ import annotations

import copy
import hashlib
import json

from ..randomfield import ConfigError

MODEL_DEFAULTS = {
    "d": 1,
    "N": 2,
    "g": 8.0,
    "zeta": 0.5,
    "C_U": 1.0,
    "truncation_radius": None,
    "c_V": 1.0,
    "density": "uniform",
    "density_rate": 0.0,
    "kappa": 0.5,
    "h": 0.5,
    "tiling_fold": 1,
}

# toy scale parameters: small enough to evaluate, deliberately outside the constraint table
TOY_SCALE = {
    "zeta": 0.5, "tau": 2.5, "alpha": 6, "beta": 0.1, "K": 0, "P_star": 1.5,
    "m_star": 0.5, "L0": 4, "N_star": 2, "d": 1,
}

TOP_KEYS = {"kind", "seed", "samples", "model", "scale", "knobs"}


def _merge(base: dict, over: dict | None, where: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise ConfigError(f"unknown key {where}.{k}")
        out[k] = v
    return out


def complete(cfg: dict, kinds: dict) -> dict:
    """Fill defaults and check types; returns a new canonical dict."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    extra = set(cfg) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
    kind = cfg.get("kind")
    if kind not in kinds:
        raise ConfigError(f"unknown kind {kind!r}; valid kinds: {', '.join(sorted(kinds))}")
    mod = kinds[kind]
    out = {"kind": kind}
    try:
        out["seed"] = int(cfg.get("seed", 0))
        out["samples"] = int(cfg.get("samples", mod.DEFAULT_SAMPLES))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed and samples must be integers ({exc})") from None
    if out["seed"] < 0 or out["seed"] >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if out["samples"] < 1:
        raise ConfigError("sample count must be >= 1")
    model = _merge(MODEL_DEFAULTS, getattr(mod, "MODEL", {}), "model")
    out["model"] = _merge(model, cfg.get("model"), "model")
    scale = cfg.get("scale", getattr(mod, "SCALE", None))
    if scale is not None:
        scale = _merge(getattr(mod, "SCALE", None) or TOY_SCALE, scale, "scale")
    out["scale"] = scale
    out["knobs"] = _merge(mod.KNOBS, cfg.get("knobs"), "knobs")
    check = getattr(mod, "validate", None)
    if check is not None:
        check(out)
    return out


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def digest(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def check_s_grid(s_grid) -> None:
    if not s_grid:
        raise ConfigError("s-grid is empty")
    if any(s <= 0 for s in s_grid):
        raise ConfigError("s-grid must be strictly positive")
    if any(b <= a for a, b in zip(s_grid, s_grid[1:])):
        raise ConfigError("s-grid must be strictly increasing")
    if s_grid[-1] > 1:
        raise ConfigError("s-grid must lie in (0, 1]")
