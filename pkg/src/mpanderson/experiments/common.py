"""Model construction shared by the experiment kinds."""

from __future__ import annotations

import math

import numpy as np

from ..geometry import CubeSpec
from ..operators import DiscretizedOperator, GridSpec, assemble
from ..randomfield import DensitySpec, InteractionSpec, region_for, sample_disorder


def density(model: dict) -> DensitySpec:
    return DensitySpec(model["density"], float(model["c_V"]), float(model["density_rate"]))


def interaction(model: dict) -> InteractionSpec:
    tr = model["truncation_radius"]
    return InteractionSpec(float(model["C_U"]), float(model["zeta"]),
                           math.inf if tr is None else float(tr))


def cube(model: dict, center, L: int) -> CubeSpec:
    return CubeSpec.around(center, int(L), N=int(model["N"]), d=int(model["d"]))


def region(model: dict, *cubes: CubeSpec) -> np.ndarray:
    fold = int(model["tiling_fold"])
    return np.unique(np.concatenate([region_for(c, fold) for c in cubes]), axis=0)


def disorder(cfg: dict, sites, index: int, seed: int | None = None):
    return sample_disorder(sites, cfg["seed"] if seed is None else seed, index, density(cfg["model"]))


def operator(cfg: dict, c: CubeSpec, dis, g: float | None = None, h: float | None = None,
             decouple=None) -> DiscretizedOperator:
    m = cfg["model"]
    return assemble(GridSpec(c, m["h"] if h is None else h), dis, interaction(m),
                    m["g"] if g is None else g, m["kappa"], m["tiling_fold"], decouple=decouple)


def window_eigs(op: DiscretizedOperator, E_star: float) -> np.ndarray:
    w = op.eigenvalues()
    return w[(w >= 0) & (w <= E_star)]


def nearest(values: np.ndarray, E: float) -> float | None:
    return float(np.min(np.abs(values - E))) if values.size else None
