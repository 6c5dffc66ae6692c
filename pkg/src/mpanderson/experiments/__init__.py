"""Seeded Monte-Carlo experiments over disorder.

Each kind is a module exposing ``DEFAULT_SAMPLES``, ``KNOBS`` (and optionally
``MODEL``, ``SCALE``, ``validate``), plus

* ``sample(cfg, i) -> dict``: the measured quantities of sample ``i``,
  a pure function of the completed config and ``i``;
* ``summarize(cfg, records) -> dict``;
* ``series(cfg, records) -> {name: (columns, rows)}``: plot-ready tables.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

import numpy as np
from threadpoolctl import threadpool_limits

from . import ct, decay, evc2, fe_to_ei, ils, scaling_step, srcm, wegner, wi_prob
from .config import canonical_json, complete, digest

KINDS = {
    "wegner": wegner,
    "evc2": evc2,
    "srcm": srcm,
    "ils": ils,
    "wi_prob": wi_prob,
    "fe_to_ei": fe_to_ei,
    "scaling_step": scaling_step,
    "decay": decay,
    "ct": ct,
}


def make_config(cfg: dict) -> dict:
    return complete(cfg, KINDS)


def jsonable(o):
    """Plain-Python copy of ``o``: numpy scalars and arrays unwrapped, tuples as lists."""
    if isinstance(o, dict):
        return {str(k): jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return jsonable(o.tolist())
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return float(o)
    return o


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _one(mod, cfg, dg, i):
    t = time.perf_counter()
    rec = {"digest": dg, "sample_index": i, **jsonable(mod.sample(cfg, i))}
    return rec, time.perf_counter() - t


def run(cfg: dict, threads: int = 1, start: int = 0,
        progress: Callable[[int], None] | None = None) -> Iterator[tuple[dict, float]]:
    """Yield (record, seconds) for samples start..samples-1, in sample order.

    Samples are spread over ``threads`` workers; BLAS is pinned to one
    thread per worker so the arithmetic, and hence every record, does not
    depend on the worker count.
    """
    mod = KINDS[cfg["kind"]]
    dg = digest(cfg)
    with threadpool_limits(limits=1), ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        for rec, dt in pool.map(lambda i: _one(mod, cfg, dg, i), range(start, cfg["samples"])):
            if progress is not None:
                progress(rec["sample_index"])
            yield rec, dt


def run_all(cfg: dict, threads: int = 1) -> list[dict]:
    return [rec for rec, _ in run(cfg, threads)]


def summarize(cfg: dict, records: list[dict]) -> dict:
    return jsonable(KINDS[cfg["kind"]].summarize(cfg, records))


def series(cfg: dict, records: list[dict]) -> dict:
    return KINDS[cfg["kind"]].series(cfg, records)


def flatten(d: dict, prefix: str = "") -> list[tuple[str, object]]:
    """Scalar leaves of a nested summary as (dotted key, value) rows."""
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(flatten(v, key + "."))
        elif isinstance(v, list):
            if all(not isinstance(x, (dict, list)) for x in v) and len(v) <= 32:
                rows.append((key, ";".join("" if x is None else repr(x) for x in v)))
        else:
            rows.append((key, v))
    return rows


__all__ = ["KINDS", "canonical_json", "digest", "flatten", "jsonable", "make_config", "run",
           "run_all", "series", "summarize"]
