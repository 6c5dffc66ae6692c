"""Census of the one-step implication good + non-resonant => non-singular.

Toy scales only (L_k = 4, L_{k+1} = 16 by default): the real scale
sequence is far beyond desk reach.  Every record is flagged as such.
"""

from __future__ import annotations

from .. import msa
from ..randomfield import ConfigError
from . import common
from .config import TOY_SCALE
from .stats import estimate

DEFAULT_SAMPLES = 200
MODEL = {"g": 16.0, "h": 1.0}
SCALE = dict(TOY_SCALE)
KNOBS = {
    "center": [0, 0],
    "E": 2.0,
    "Lk": 4,
    "Lk1": 16,
    "K": None,  # None: the scale parameter K
    "C_geom": 1.0,
    "run_gri": False,
}


def validate(cfg):
    k = cfg["knobs"]
    if cfg["scale"] is None:
        raise ConfigError("scaling_step needs scale parameters")
    if not 1 <= k["Lk"] < k["Lk1"] or k["Lk1"] - k["Lk"] < k["Lk"]:
        raise ConfigError("need 1 <= Lk and 2 Lk <= Lk1")
    msa.ScaleParams.from_dict(cfg["scale"])


def sample(cfg, i):
    k, m = cfg["knobs"], cfg["model"]
    p = msa.ScaleParams.from_dict(cfg["scale"])
    c = common.cube(m, k["center"], k["Lk1"])
    op = common.operator(cfg, c, common.disorder(cfg, common.region(m, c), i))
    rep = msa.scaling_step_check(op, k["E"], p, 0, toy_mode=True, Lk=k["Lk"], Lk1=k["Lk1"],
                                 K=k["K"], C_geom=k["C_geom"], run_gri=k["run_gri"])
    d = rep.to_dict()
    d["premises"] = rep.premises
    d["counterexample"] = rep.counterexample
    d["wi_singular"] = bool(rep.details.get("wi_singular", False))
    return d


def summarize(cfg, records):
    n = len(records)
    prem = [r for r in records if r["premises"]]
    ce = sum(r["counterexample"] for r in records)
    resonant = sum(1 for r in records if not (r["nr"] and r["cnr"]))
    wi_s = sum(1 for r in records if r["wi_singular"])
    family = sum(1 for r in records if not r["good"] and not r["wi_singular"])
    singular = sum(1 for r in records if not r["ns"])
    split = {"resonant": estimate(resonant, n), "wi_singular": estimate(wi_s, n),
             "k_plus_1_family": estimate(family, n)}
    total = sum(v["p"] for v in split.values())
    return {
        "samples": n,
        "toy_scales": True,
        "premises_true": len(prem),
        "conclusion_true": sum(1 for r in prem if r["ns"]),
        "counterexamples": ce,
        "vacuous": n - len(prem),
        "singular": estimate(singular, n),
        "split": split,
        "split_sum": total,
        "union_bound_holds": total >= singular / n,
    }


def series(cfg, records):
    return {"scaling_step_census": (["index", "premises", "ns", "parent_dnorm", "ns_threshold"],
                                    [(i, int(r["premises"]), int(r["ns"]), r["parent_dnorm"], r["ns_threshold"])
                                     for i, r in enumerate(records)])}
