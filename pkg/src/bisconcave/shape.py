"""Numerical shape checks for analytic distribution models.

All suprema are taken over a probability-equispaced grid x_k = F^{-1}(k/(N+1))
augmented with geometrically spaced tail points, followed by a local bounded
maximization around the grid argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import GridError, ParameterError, UnsupportedModelError
from .families import DistributionModel

INEQ_TOL = 1e-7
SSTAR_FLOOR = -(2.0 ** 16)


@dataclass(frozen=True)
class GridSpec:
    n_points: int = 4096
    tail_points: int = 64
    tail_min_p: float = 1e-12

    def __post_init__(self) -> None:
        if self.n_points < 3 or self.tail_points < 0:
            raise ParameterError("grid needs >= 3 points and a nonnegative tail count")
        if not 0 < self.tail_min_p < 1.0 / (self.n_points + 1):
            raise ParameterError("tail_min_p must lie below the first grid probability")

    def describe(self) -> dict:
        return {
            "placement": "probability-equispaced plus geometric tails",
            "n_points": self.n_points,
            "tail_points": self.tail_points,
            "tail_min_p": self.tail_min_p,
        }


class _Evaluated:
    """F, 1 - F, f, f' on the grid of a model."""

    def __init__(self, model: DistributionModel, spec: GridSpec):
        for attr in ("pdf", "dpdf"):
            if not callable(getattr(model, attr, None)):
                raise UnsupportedModelError(f"model lacks {attr}()")
        self.model = model
        self.spec = spec
        n = spec.n_points
        p_body = np.arange(1, n + 1) / (n + 1)
        p0 = 1.0 / (n + 1)
        if spec.tail_points:
            p_tail = np.geomspace(spec.tail_min_p, p0, spec.tail_points + 1)[:-1]
        else:
            p_tail = np.empty(0)
        half = p_body <= 0.5
        try:
            x = np.concatenate([
                model.ppf(p_tail),
                model.ppf(p_body[half]),
                model.isf(1.0 - p_body[~half]),
                model.isf(p_tail[::-1]),
            ])
        except NotImplementedError as exc:
            raise UnsupportedModelError(str(exc)) from exc
        x = np.unique(np.asarray(x, dtype=float))
        self.x = x
        try:
            self._fill(x)
        except NotImplementedError as exc:
            raise UnsupportedModelError(f"{model!r} lacks a density or its derivative") from exc
        lo, hi = model.support
        bad = (~np.isfinite(x)) | (x <= lo) | (x >= hi) | (self.F <= 0) | (self.S <= 0) | (self.f <= 0)
        if bad.any():
            raise GridError(f"grid point x={x[bad][0]!r} falls on or outside the support of {model!r}")
        if x.size < 3:
            raise GridError("grid collapsed to fewer than three distinct points")

    def _fill(self, x):
        m = self.model
        self.F = np.asarray(m.cdf(x), dtype=float)
        self.S = np.asarray(m.sf(x), dtype=float)
        self.f = np.asarray(m.pdf(x), dtype=float)
        self.df = np.asarray(m.dpdf(x), dtype=float)
        if not (np.isfinite(self.df).all() and np.isfinite(self.f).all()):
            raise UnsupportedModelError(f"{m!r}: non-finite density or derivative on the grid")

    def point(self, x: float):
        m = self.model
        return (float(m.cdf(x)), float(m.sf(x)), float(m.pdf(x)), float(m.dpdf(x)))


def _ratios(F, S, f, df):
    """CR function of F, of the survival function, and the weight min(F, 1-F)."""
    f2 = f * f
    return F * df / f2, S * (-df) / f2, np.minimum(F, S)


def _local_max(ev: _Evaluated, values: np.ndarray, func) -> tuple[float, float]:
    """Grid max of ``values`` refined by bounded search between neighbours."""
    k = int(np.argmax(values))
    best, where = float(values[k]), float(ev.x[k])
    lo, hi = ev.x[max(k - 1, 0)], ev.x[min(k + 1, ev.x.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -func(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(where))})
        val = -float(res.fun)
        if math.isfinite(val) and val > best:
            best, where = val, float(res.x)
    return best, where


@dataclass
class CRReport:
    gamma_tilde: float
    gamma: float
    gamma_bar: float
    cr_of_F: float
    cr_of_survival: float
    grid: dict = field(default_factory=dict)
    argmax: dict = field(default_factory=dict)

    def chain_holds(self, rel_tol: float = 1e-6) -> bool:
        slack = rel_tol * max(1.0, abs(self.gamma_bar))
        return (self.gamma / 2 <= self.gamma_tilde + slack
                and self.gamma_tilde <= self.gamma + slack
                and self.gamma <= self.gamma_bar + slack)

    def to_dict(self) -> dict:
        return {
            "gamma_tilde": self.gamma_tilde,
            "gamma": self.gamma,
            "gamma_bar": self.gamma_bar,
            "cr_of_F": self.cr_of_F,
            "cr_of_survival": self.cr_of_survival,
            "grid": self.grid,
            "argmax": self.argmax,
        }


def cr_constants(model: DistributionModel, grid: GridSpec | None = None) -> CRReport:
    ev = _Evaluated(model, grid or GridSpec())
    crf, crs, w = _ratios(ev.F, ev.S, ev.f, ev.df)
    absd = np.abs(ev.df) / ev.f ** 2
    pieces = {
        "gamma_tilde": (ev.F * ev.S * absd, lambda t: _pt(ev, t, "tilde")),
        "gamma": (w * absd, lambda t: _pt(ev, t, "gamma")),
        "cr_of_F": (crf, lambda t: _pt(ev, t, "crf")),
        "cr_of_survival": (crs, lambda t: _pt(ev, t, "crs")),
    }
    out, where = {}, {}
    for name, (vals, func) in pieces.items():
        out[name], where[name] = _local_max(ev, vals, func)
    gbar = max(out["cr_of_F"], out["cr_of_survival"])
    return CRReport(out["gamma_tilde"], out["gamma"], gbar, out["cr_of_F"], out["cr_of_survival"],
                    grid=ev.spec.describe(), argmax=where)


def _pt(ev: _Evaluated, t: float, which: str) -> float:
    F, S, f, df = ev.point(t)
    if not (F > 0 and S > 0 and f > 0):
        return -math.inf
    if which == "tilde":
        return F * S * abs(df) / f ** 2
    if which == "gamma":
        return min(F, S) * abs(df) / f ** 2
    if which == "crf":
        return F * df / f ** 2
    return S * (-df) / f ** 2


@dataclass
class ShapeReport:
    s_star: float
    holds: bool
    worst_margin: float
    witness_x: float
    hazard_holds: bool
    hazard_worst: float
    tolerance: float = INEQ_TOL
    grid: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        """Derivative-inequality verdict agrees with the hazard-monotonicity verdict."""
        return self.holds == self.hazard_holds

    def to_dict(self) -> dict:
        return {
            "s_star": self.s_star,
            "holds": self.holds,
            "worst_margin": self.worst_margin,
            "witness_x": self.witness_x,
            "hazard_holds": self.hazard_holds,
            "hazard_worst": self.hazard_worst,
            "tolerance": self.tolerance,
            "grid": self.grid,
        }


def _margins(F, S, f, df, s):
    """Slack of both derivative inequalities in units of f^2 / min(F, 1 - F)."""
    crf, crs, w = _ratios(F, S, f, df)
    return np.minimum(((1 - s) - crf) * w / F, ((1 - s) - crs) * w / S)


def _check(ev: _Evaluated, s: float, tol: float) -> ShapeReport:
    if math.isnan(s) or s > 1:
        raise ParameterError(f"s* must be <= 1, got {s}")
    m = _margins(ev.F, ev.S, ev.f, ev.df, s)

    def point_margin(t):
        F, S, f, df = ev.point(t)
        if not (F > 0 and S > 0 and f > 0):
            return math.inf
        return float(_margins(np.array(F), np.array(S), np.array(f), np.array(df), s))

    worst_neg, witness = _local_max(ev, -m, lambda t: -point_margin(t))
    worst = -worst_neg

    # hazard monotonicity: log h~ = log f - (1-s) log(1-F) nondecreasing,
    # log h = log f - (1-s) log F nonincreasing
    logf, logF, logS = np.log(ev.f), np.log(ev.F), np.log(ev.S)
    up = np.diff(logf - (1 - s) * logS)
    down = np.diff(logf - (1 - s) * logF)
    scale = np.abs(np.diff(logF)) + np.abs(np.diff(logS))
    floor = 1e-12 * (1.0 + np.abs(logf[1:]) + abs(1 - s) * (np.abs(logF[1:]) + np.abs(logS[1:])))
    allow = tol * scale + floor
    viol = np.maximum(-up - allow, down - allow)
    hz_worst = float(np.max(np.maximum(-up, down) / np.maximum(scale, 1e-300)))
    return ShapeReport(float(s), bool(worst >= -tol), worst, witness, bool(np.all(viol <= 0)),
                       -hz_worst, tol, ev.spec.describe())


def check_bi_sstar(model: DistributionModel, s_star: float, grid: GridSpec | None = None,
                   tol: float = INEQ_TOL) -> ShapeReport:
    """Test the derivative inequalities and the hazard monotonicity at ``s_star``."""
    return _check(_Evaluated(model, grid or GridSpec()), float(s_star), tol)


def max_sstar(model: DistributionModel, tol: float = 1e-6, grid: GridSpec | None = None,
              floor: float = SSTAR_FLOOR) -> float:
    """Largest s* <= 1 at which the model passes :func:`check_bi_sstar`."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    ev = _Evaluated(model, grid or GridSpec())
    holds = lambda s: _check(ev, s, INEQ_TOL).holds  # noqa: E731
    if holds(1.0):
        return 1.0
    hi = 1.0
    lo = 0.0
    while not holds(lo):
        hi = lo
        lo = -1.0 if lo == 0 else 2 * lo
        if lo < floor:
            return -math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _power_term(base, s):
    """(base)_+^{1/s}, with base <= 0 mapped to 0 for s > 0 and to +inf for s < 0."""
    base = np.asarray(base, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        pos = np.power(np.where(base > 0, base, 1.0), 1.0 / s)
    return np.where(base > 0, pos, 0.0 if s > 0 else math.inf)


def tail_bounds(model: DistributionModel, s_star: float, x: float, y):
    """Two-sided bound on F(y) anchored at x for a bi-s*-concave F.

    Returns ``(upper, lower)``.
    """
    s = float(s_star)
    if s > 1:
        raise ParameterError("s* must be <= 1")
    F, S, f = float(model.cdf(x)), float(model.sf(x)), float(model.pdf(x))
    if not (0 < F < 1):
        raise ParameterError(f"anchor x={x} lies outside J(F)")
    d = np.asarray(y, dtype=float) - x
    if s == 0:
        upper = F * np.exp(np.minimum(f / F * d, 700.0))
        lower = 1 - S * np.exp(np.minimum(-f / S * d, 700.0))
    else:
        upper = F * _power_term(1 + s * f / F * d, s)
        lower = 1 - S * _power_term(1 - s * f / S * d, s)
    upper = np.minimum(upper, 1.0)
    lower = np.maximum(lower, 0.0)
    if upper.ndim == 0:
        return float(upper), float(lower)
    return upper, lower


def envelope_values(F, s_star: float):
    """F_L and F_U as functions of the value F(x)."""
    s = float(s_star)
    if s > 1:
        raise ParameterError("s* must be <= 1")
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        if s == 0:
            lo, up = 1 + np.log(F), -np.log1p(-F)
        else:
            lo = (np.power(F, s) - (1 - s)) / s
            up = (1 - np.power(1 - F, s)) / s
    if lo.ndim == 0:
        return float(lo), float(up)
    return lo, up


def global_envelopes(model: DistributionModel, s_star: float, x):
    """(F_L(x), F_U(x)) for the model's own F."""
    return envelope_values(model.cdf(x), s_star)


def moment_exponent_bound(s_star: float, support=(-math.inf, math.inf)) -> float:
    """T such that moments of order t in (0, T) are finite."""
    a, b = support
    if math.isfinite(a) and math.isfinite(b):
        return math.inf
    if not s_star < 0:
        raise ParameterError("unbounded support requires s* < 0")
    return -1.0 / s_star
