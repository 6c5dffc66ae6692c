"""IID alloy disorder, the two-body interaction, and sample-mean statistics.

Amplitudes are drawn from a counter-based stream: the value at site ``a``
depends only on (master seed, sample index, a), never on which region was
requested or in what order.  That makes sub-cube operators see the same
field as the cube that contains them, and lets samples run in any order.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .geometry import CubeSpec, one_particle_sites


class ConfigError(ValueError):
    """Rejected model configuration."""


class UncoveredPointError(ValueError):
    pass


# -- densities --------------------------------------------------------------

def check_density_conditions(pdf: Callable, c_V: float, *, n_grid: int = 4001,
                             max_logderiv: float = 1e3) -> dict:
    """Numerically test a single-site density against the regularity conditions.

    On the open interval (0, c_V) the density must be bounded away from zero
    and infinity, and its logarithmic derivative must lie in [0, C*] for a
    finite C*.  Returns the measured p_*, p^*, and log-derivative range;
    raises ConfigError if any condition fails.
    """
    if not c_V > 0:
        raise ConfigError(f"c_V must be positive, got {c_V}")
    t = np.linspace(0.0, c_V, n_grid + 2)[1:-1]
    with np.errstate(all="ignore"):
        p = np.asarray(pdf(t), dtype=float)
    if not np.all(np.isfinite(p)):
        raise ConfigError("density is unbounded or undefined inside (0, c_V)")
    p_lo, p_hi = float(p.min()), float(p.max())
    # a density vanishing at an endpoint shows up as p_* -> 0 as the grid refines
    edge = float(min(p[0], p[-1]))
    if p_lo <= 0 or edge < 1e-3 * p_hi:
        raise ConfigError(f"density vanishes in the interior (min {p_lo:.3g})")
    if p_hi > 1e6:
        raise ConfigError(f"density is unbounded (max {p_hi:.3g})")
    logp = np.log(p)
    dlog = np.diff(logp) / np.diff(t)
    lo, hi = float(dlog.min()), float(dlog.max())
    if lo < -1e-8 * max(1.0, abs(hi)):
        raise ConfigError(f"log-derivative must be nonnegative, found {lo:.3g}")
    if hi > max_logderiv:
        raise ConfigError(f"log-derivative is unbounded (found {hi:.3g})")
    return {"p_lower": p_lo, "p_upper": p_hi, "logderiv_min": lo, "logderiv_max": hi}


@dataclass(frozen=True)
class DensitySpec:
    """Single-site amplitude law on [0, c_V].

    ``uniform``: flat density 1/c_V.
    ``exponential``: density proportional to exp(rate * t), rate >= 0.  A
    decreasing exponential would have negative log-derivative and is refused.
    """

    kind: str = "uniform"
    c_V: float = 1.0
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "exponential"):
            raise ConfigError(f"unknown density kind {self.kind!r}")
        if not self.c_V > 0 or not math.isfinite(self.c_V):
            raise ConfigError(f"c_V must be positive and finite, got {self.c_V}")
        if self.kind == "exponential":
            if self.rate < 0:
                raise ConfigError("exponential density needs rate >= 0 (log-derivative must be nonnegative)")
            if not math.isfinite(self.rate):
                raise ConfigError("exponential rate must be finite")

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.c_V)
        if self.kind == "uniform" or self.rate == 0:
            return np.where(inside, 1.0 / self.c_V, 0.0)
        norm = math.expm1(self.rate * self.c_V) / self.rate
        return np.where(inside, np.exp(self.rate * t) / norm, 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform" or self.rate == 0:
            return u * self.c_V
        return np.log1p(u * math.expm1(self.rate * self.c_V)) / self.rate

    def mean(self) -> float:
        if self.kind == "uniform" or self.rate == 0:
            return 0.5 * self.c_V
        r, c = self.rate, self.c_V
        return c / (1.0 - math.exp(-r * c)) - 1.0 / r

    def variance(self) -> float:
        if self.kind == "uniform" or self.rate == 0:
            return self.c_V ** 2 / 12.0
        r, c = self.rate, self.c_V
        e = math.exp(r * c)
        second = (e * (c * c / r - 2 * c / r ** 2 + 2 / r ** 3) - 2 / r ** 3) / ((e - 1) / r)
        return second - self.mean() ** 2

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c_V": self.c_V, "rate": self.rate}

    @classmethod
    def from_dict(cls, d: dict) -> "DensitySpec":
        return cls(d.get("kind", "uniform"), float(d.get("c_V", 1.0)), float(d.get("rate", 0.0)))


# -- keyed uniform stream ---------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_COORD_BITS = 21
_COORD_LIMIT = 1 << (_COORD_BITS - 1)


def _mix64(z):
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=4096)
def stream_key(seed: int, sample_index: int) -> int:
    """64-bit key of the (seed, sample_index) stream, via numpy's SeedSequence hashing."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(sample_index),))
    return int(ss.generate_state(1, np.uint64)[0])


def site_codes(sites) -> np.ndarray:
    """Injective uint64 code of lattice sites (zigzag-packed coordinates, d <= 3)."""
    sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    if sites.shape[1] > 3:
        raise ConfigError("keyed sampling supports d <= 3")
    if np.any(np.abs(sites) >= _COORD_LIMIT):
        raise ConfigError(f"site coordinates must stay below {_COORD_LIMIT} in magnitude")
    zz = ((sites << 1) ^ (sites >> 63)).astype(np.uint64)
    code = np.zeros(sites.shape[0], dtype=np.uint64)
    for c in range(sites.shape[1]):
        code |= zz[:, c] << np.uint64(_COORD_BITS * c)
    return code


def site_uniforms(seed: int, sample_index: int, sites) -> np.ndarray:
    """U[0,1) draws, one per site, fixed by (seed, sample_index, site)."""
    key = np.uint64(stream_key(seed, sample_index))
    with np.errstate(over="ignore"):
        z = _mix64(key + (site_codes(sites) + np.uint64(1)) * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


# -- disorder samples -------------------------------------------------------

@dataclass
class DisorderSample:
    """One realization of the amplitudes on a finite set of one-particle sites."""

    sites: np.ndarray
    amplitudes: np.ndarray
    seed: int
    sample_index: int
    density: DensitySpec = field(default_factory=DensitySpec)

    def __post_init__(self):
        self.sites = np.atleast_2d(np.asarray(self.sites, dtype=np.int64))
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.sites.shape[0] != self.amplitudes.shape[0]:
            raise ValueError("one amplitude per site required")
        self._box = None

    @property
    def d(self) -> int:
        return self.sites.shape[1]

    def site_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(c) for c in s) for s in self.sites}

    def box(self):
        """Dense bounding-box view: (lo, array) with NaN at sites outside the region."""
        if self._box is None:
            lo = self.sites.min(axis=0)
            shape = tuple(self.sites.max(axis=0) - lo + 1)
            arr = np.full(shape, np.nan)
            arr[tuple((self.sites - lo).T)] = self.amplitudes
            self._box = (lo, arr)
        return self._box

    def constant(self, value: float) -> "DisorderSample":
        """Same region with every amplitude replaced by ``value``."""
        return DisorderSample(self.sites, np.full(len(self.amplitudes), float(value)),
                              self.seed, self.sample_index, self.density)

    def shifted(self, delta: float) -> "DisorderSample":
        return DisorderSample(self.sites, self.amplitudes + delta, self.seed,
                              self.sample_index, self.density)

    def merged(self, other: "DisorderSample") -> "DisorderSample":
        """Union with a sample on a disjoint region (this one's provenance is kept)."""
        if self.site_set() & other.site_set():
            raise ValueError("regions overlap")
        return DisorderSample(np.concatenate([self.sites, other.sites]),
                              np.concatenate([self.amplitudes, other.amplitudes]),
                              self.seed, self.sample_index, self.density)

    def to_json(self) -> dict:
        return {
            "region": self.sites.tolist(),
            "amplitudes": [float(a) for a in self.amplitudes],
            "seed": int(self.seed),
            "sample_index": int(self.sample_index),
            "density": self.density.to_dict(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DisorderSample":
        return cls(np.asarray(d["region"], dtype=np.int64), np.asarray(d["amplitudes"], dtype=float),
                   int(d["seed"]), int(d["sample_index"]), DensitySpec.from_dict(d.get("density", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def region_for(cube: CubeSpec, fold: int = 1) -> np.ndarray:
    """Sites whose bumps can reach the open cube: particle balls padded by fold // 2."""
    return one_particle_sites(cube, pad=int(fold) // 2)


def sample_disorder(region, seed: int, sample_index: int,
                    density: DensitySpec | None = None) -> DisorderSample:
    """Draw IID amplitudes on ``region`` (an (M, d) site array or a CubeSpec)."""
    density = density or DensitySpec()
    if isinstance(region, CubeSpec):
        region = region_for(region)
    sites = np.unique(np.atleast_2d(np.asarray(region, dtype=np.int64)), axis=0)
    u = site_uniforms(seed, sample_index, sites)
    return DisorderSample(sites, density.ppf(u), int(seed), int(sample_index), density)


def alloy_potential(x, sample: DisorderSample, tiling_fold: int = 1):
    """V(x) = sum_a V_a phi(x - a) with phi the indicator of (-n/2, n/2]^d.

    ``x`` is one point of R^d or an (m, d) array of points.  With every
    amplitude equal to c the result is c * n^d at every point.
    """
    n = int(tiling_fold)
    if n < 1:
        raise ConfigError("tiling fold must be >= 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = np.atleast_2d(x.reshape(-1, sample.d) if x.ndim <= 1 else x)
    lo, arr = sample.box()
    first = np.ceil(pts - n / 2.0).astype(np.int64) - lo
    out = np.zeros(pts.shape[0])
    shape = np.asarray(arr.shape)
    for shift in itertools.product(range(n), repeat=sample.d):
        idx = first + np.asarray(shift)
        ok = np.all((idx >= 0) & (idx < shape), axis=1)
        vals = np.full(pts.shape[0], np.nan)
        vals[ok] = arr[tuple(idx[ok].T)]
        out += vals
    if np.any(np.isnan(out)):
        bad = pts[np.isnan(out)][0]
        raise UncoveredPointError(f"uncovered point {bad.tolist()}")
    return float(out[0]) if single else out


# -- interaction ------------------------------------------------------------

@dataclass(frozen=True)
class InteractionSpec:
    """Two-body potential U(r) = C_U exp(-r^zeta), optionally cut to zero beyond a radius."""

    C_U: float = 1.0
    zeta: float = 0.5
    truncation_radius: float = math.inf

    def __post_init__(self):
        if self.C_U < 0:
            raise ConfigError("C_U must be nonnegative")
        if not 0 < self.zeta <= 1:
            raise ConfigError(f"zeta must lie in (0, 1], got {self.zeta}")
        if not self.truncation_radius > 0:
            raise ConfigError("truncation radius must be positive")

    def U(self, r):
        r = np.asarray(r, dtype=float)
        out = self.C_U * np.exp(-r ** self.zeta)
        return np.where(r > self.truncation_radius, 0.0, out)

    def to_dict(self) -> dict:
        return {"C_U": self.C_U, "zeta": self.zeta,
                "truncation_radius": None if math.isinf(self.truncation_radius) else self.truncation_radius}

    @classmethod
    def from_dict(cls, d: dict) -> "InteractionSpec":
        tr = d.get("truncation_radius")
        return cls(float(d.get("C_U", 1.0)), float(d.get("zeta", 0.5)),
                   math.inf if tr is None else float(tr))


def interaction_energy(x, spec: InteractionSpec) -> float:
    """Sum over particle pairs of U(|x_i - x_j|) for one configuration ``x`` of shape (N, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    total = 0.0
    for i in range(x.shape[0]):
        for j in range(i + 1, x.shape[0]):
            total += float(spec.U(np.max(np.abs(x[i] - x[j]))))
    return total


# -- sample mean and fluctuations -------------------------------------------

@dataclass(frozen=True)
class SrcmSample:
    values: np.ndarray
    xi: float
    eta: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def spread(self) -> float:
        return float(self.eta.max() - self.eta.min())


def srcm_statistics(values) -> SrcmSample:
    """Sample mean xi over Q and the fluctuations eta = values - xi."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty site set Q")
    xi = float(values.mean())
    return SrcmSample(values, xi, values - xi)
