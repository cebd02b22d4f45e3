"""Data-driven inference on s*: a feasibility upper bound and a threshold estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import Band
from .errors import ParameterError
from .grid import SampleData, empirical_cdf
from .refine import DEFAULT_MAX_ITER, DEFAULT_TOL, refine
from .shape import SSTAR_FLOOR

DEFAULT_SSTAR_TOL = 1e-3
SEARCH_SPAN = 64.0
CONTAIN_TOL = 1e-12


@dataclass(frozen=True)
class RefineConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


def _feasible(band: Band, s: float, cfg: RefineConfig) -> bool:
    return refine(band, s, cfg.tol, cfg.max_iter).feasible


def sstar_upper(band: Band, tol: float = DEFAULT_SSTAR_TOL, config: RefineConfig = RefineConfig(),
                floor: float = SSTAR_FLOOR) -> float:
    """Smallest s* (to within ``tol``) at which refinement turns infeasible.

    Returns 1 when the band admits a bi-1-concave fit and ``-inf`` when nothing
    down to ``floor`` is feasible.  Reporting the infeasible end of the final
    bracket keeps (-inf, result] a conservative confidence set.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if not band.feasible:
        return -math.inf
    if _feasible(band, 1.0, config):
        return 1.0
    hi, lo = 1.0, 0.0
    while not _feasible(band, lo, config):
        hi = lo
        lo = -1.0 if lo == 0 else 2 * lo
        if lo < floor:
            return -math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _feasible(band, mid, config):
            lo = mid
        else:
            hi = mid
    return hi


def omega(band: Band, sample: SampleData, s_star: float, config: RefineConfig = RefineConfig()) -> float:
    """Fraction of observations at which the empirical d.f. lies in the refined band."""
    res = refine(band, s_star, config.tol, config.max_iter)
    if not res.feasible:
        return 0.0
    x = sample.unique
    fn = empirical_cdf(sample).values
    lo, up = res.band.evaluate(x)
    inside = (lo <= fn + CONTAIN_TOL) & (fn <= up + CONTAIN_TOL) & (lo <= up + CONTAIN_TOL)
    return float(np.sum(sample.counts[inside]) / sample.n)


@dataclass
class SstarEstimate:
    s_bar: float
    s_hat: float | None
    rho: float
    alpha: float
    omega_curve: list[tuple[float, float]] = field(default_factory=list)
    defined: bool = True
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "s_bar": _num(self.s_bar),
            "s_hat": None if self.s_hat is None else _num(self.s_hat),
            "rho": self.rho,
            "alpha": self.alpha,
            "defined": self.defined,
            "message": self.message,
            "omega_curve": [{"s_star": _num(s), "omega": w} for s, w in self.omega_curve],
        }


def _num(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def estimate_sstar(band: Band, sample: SampleData, rho: float, tol: float = DEFAULT_SSTAR_TOL,
                   curve_points: int = 20, curve_span: float = 4.0,
                   config: RefineConfig = RefineConfig()) -> SstarEstimate:
    """Upper bound s_bar plus the largest s* <= s_bar whose omega still exceeds ``rho``."""
    if not 0 < rho < 1:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    if curve_points < 2:
        raise ParameterError("curve_points must be >= 2")
    s_bar = sstar_upper(band, tol, config)
    if s_bar == -math.inf:
        return SstarEstimate(s_bar, None, rho, band.alpha, [], False, "band infeasible for every s*")

    cache: dict[float, float] = {}

    def w(s: float) -> float:
        if s not in cache:
            cache[s] = omega(band, sample, s, config)
        return cache[s]

    for s in np.linspace(s_bar - curve_span, s_bar, curve_points):
        w(float(s))

    lo, hi = s_bar - SEARCH_SPAN, s_bar
    s_hat: float | None
    message = ""
    if w(hi) > rho:
        s_hat = hi
    elif w(lo) <= rho:
        s_hat, message = None, f"omega <= rho on the whole search range [{lo}, {hi}]"
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if w(mid) > rho:
                lo = mid
            else:
                hi = mid
        s_hat = lo
    curve = sorted(cache.items())
    return SstarEstimate(s_bar, s_hat, rho, band.alpha, curve, s_hat is not None, message)
