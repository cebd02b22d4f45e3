"""Shape-constrained refinement of a confidence band for a given s*.

F is bi-s*-concave exactly when g(F) and g(1 - F) are concave for the
power/log transform g below, so the band is refined by alternating
concave interpolation on the distribution-function side and on the survival
side until the knot values stop moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import Band
from .concint import FEAS_TOL, ConcIntResult, conc_int
from .errors import DomainError, ParameterError
from .grid import KnotFunction

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True)
class ShapeParam:
    s_star: float

    def __post_init__(self) -> None:
        s = float(self.s_star)
        if math.isnan(s) or s > 1:
            raise ParameterError(f"s* must be a real number <= 1, got {self.s_star}")
        object.__setattr__(self, "s_star", s)

    @property
    def regime(self) -> str:
        if self.s_star < 0:
            return "negative"
        return "zero" if self.s_star == 0 else "positive"


def _param(s) -> ShapeParam:
    return s if isinstance(s, ShapeParam) else ShapeParam(s)


def transform_g(v, s):
    """-v**s for s < 0, log v for s = 0, v**s for s > 0."""
    s = _param(s).s_star
    arr = np.asarray(v, dtype=float)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise DomainError("transform_g expects values in [0, 1]")
    with np.errstate(divide="ignore", over="ignore"):
        if s < 0:
            out = -np.power(arr, s)
        elif s == 0:
            out = np.log(arr)
        else:
            out = np.power(arr, s)
    return float(out) if out.ndim == 0 else out


def inverse_h(w, s):
    """Inverse of :func:`transform_g` on its range."""
    s = _param(s).s_star
    arr = np.asarray(w, dtype=float)
    if s < 0:
        ok = arr <= -1
    elif s == 0:
        ok = arr <= 0
    else:
        ok = (arr >= 0) & (arr <= 1)
    if np.any(~ok) or np.isnan(arr).any():
        raise DomainError(f"value outside the range of g for s*={s}")
    return _h_clipped(arr, s)


def _g(v: np.ndarray, s: float) -> np.ndarray:
    v = np.clip(v, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        if s < 0:
            return -np.power(v, s)
        if s == 0:
            return np.log(v)
        out = np.power(v, s)
    # for s* > 0, F**s* only has to be concave where F > 0
    return np.where(v > 0, out, -np.inf)


def _g_upper(v: np.ndarray, s: float) -> np.ndarray:
    """Like _g, but keeps the finite value 0 at v = 0 when s* > 0."""
    if s > 0:
        return np.power(np.clip(v, 0.0, 1.0), s)
    return _g(v, s)


def _h_clipped(w, s: float):
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if s < 0:
            out = np.where(w >= -1, 1.0, np.power(-np.minimum(w, -1.0), 1.0 / s))
        elif s == 0:
            out = np.exp(np.minimum(w, 0.0))
        else:
            out = np.power(np.clip(w, 0.0, 1.0), 1.0 / s)
    out = np.where(w == -np.inf, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass
class _Side:
    """ConcInt result on the sub-grid where the upper transform is finite."""

    res: ConcIntResult | None
    first: float  # sub-grid covers knots in [first, last]
    last: float
    before: float  # last excluded knot on the left (or -inf)
    after: float   # first excluded knot on the right (or +inf)

    def lower(self, x):
        x = np.asarray(x, dtype=float)
        if self.res is None:
            return np.full(x.shape, -np.inf)
        out = self.res.lower(x)
        return np.where((x <= self.before) | (x >= self.after), -np.inf, out)

    def upper(self, x):
        x = np.asarray(x, dtype=float)
        if self.res is None:
            return np.full(x.shape, -np.inf)
        out = self.res.upper(x)
        return np.where((x <= self.before) | (x >= self.after), -np.inf, out)


def _side_pass(t: np.ndarray, lo: np.ndarray, up: np.ndarray, s: float):
    """One ConcInt pass in g-space; returns new (lo, up) in [0, 1] or None if infeasible."""
    l = _g(lo, s)
    u = _g_upper(up, s)
    finite = np.flatnonzero(np.isfinite(u))
    if finite.size == 0:
        return None
    a, b = int(finite[0]), int(finite[-1])
    if b - a + 1 != finite.size:
        raise DomainError("upper bound vanishes inside the grid")
    if np.any(np.isfinite(l[:a])) or np.any(np.isfinite(l[b + 1:])):
        return None
    ls, us = l[a:b + 1], u[a:b + 1]
    if np.any(ls > us + FEAS_TOL):
        return None
    res = conc_int(t[a:b + 1], ls, np.maximum(us, ls))
    if not res.feasible:
        return None
    new_lo = np.zeros_like(lo)
    new_up = np.zeros_like(up)
    new_lo[a:b + 1] = _h_clipped(res.l_o, s)
    new_up[a:b + 1] = _h_clipped(res.u_o, s)
    side = _Side(
        res,
        float(t[a]),
        float(t[b]),
        float(t[a - 1]) if a > 0 else -math.inf,
        float(t[b + 1]) if b + 1 < t.size else math.inf,
    )
    return new_lo, new_up, side


def _full_step(t, lo, up, s):
    """F-side pass followed by the survival-side pass."""
    out = _side_pass(t, lo, up, s)
    if out is None:
        return None
    lo1, up1, side_f = out
    lo1 = np.maximum(lo1, lo)
    up1 = np.minimum(up1, up)
    if np.any(lo1 > up1 + FEAS_TOL):
        return None
    out = _side_pass(t, 1.0 - up1, 1.0 - lo1, s)
    if out is None:
        return None
    slo, sup_, side_s = out
    lo2 = np.maximum(1.0 - sup_, lo1)
    up2 = np.minimum(1.0 - slo, up1)
    # a nondecreasing G obeys the running bounds as well
    lo2 = np.maximum.accumulate(lo2)
    up2 = np.minimum.accumulate(up2[::-1])[::-1]
    if np.any(lo2 > up2 + FEAS_TOL):
        return None
    return lo2, up2, side_f, side_s


@dataclass
class RefinedEnvelope:
    """Evaluates the refined band at arbitrary points."""

    s_star: float
    grid: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    side_f: _Side
    side_s: _Side

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        s = self.s_star
        lower = np.maximum(_h_clipped(self.side_f.lower(xs), s), 1.0 - _h_clipped(self.side_s.upper(xs), s))
        upper = np.minimum(_h_clipped(self.side_f.upper(xs), s), 1.0 - _h_clipped(self.side_s.lower(xs), s))
        t = self.grid
        k = np.searchsorted(t, xs, side="right") - 1
        lower = np.maximum(lower, np.where(k >= 0, self.lo[np.maximum(k, 0)], 0.0))
        j = np.searchsorted(t, xs, side="left")
        upper = np.minimum(upper, np.where(j < t.size, self.up[np.minimum(j, t.size - 1)], 1.0))
        lower = np.clip(lower, 0.0, 1.0)
        upper = np.clip(upper, 0.0, 1.0)
        if scalar:
            return float(lower[0]), float(upper[0])
        return lower, upper


@dataclass
class RefinementResult:
    band: Band
    iterations: int
    converged: bool
    last_change: float
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.band.feasible


def _refined_band(band: Band, t, lo, up, side_f, side_s, s: float) -> Band:
    lower = KnotFunction(t, lo, "step", left=min(band.lower.left, lo[0]),
                         right=max(lo[-1], band.lower.right))
    upper_right = band.upper.right
    upper = KnotFunction(t, np.append(up[1:], upper_right), "step", left=up[0], right=upper_right)
    env = RefinedEnvelope(s, t, lo, up, side_f, side_s)
    return Band(lower, upper, band.alpha, status="feasible", kind=band.kind, gamma_w=band.gamma_w,
                s_star=s, kappa=band.kappa, envelope=env)


def _start(band: Band, grid):
    if not band.feasible:
        return None
    t = band.knot_grid() if grid is None else np.asarray(grid, dtype=float)
    lo, up = band.knot_bounds(t)
    return t, lo, up


def refine_once(band: Band, s, grid=None) -> Band:
    """One F-side plus survival-side pass; infeasible-sentinel on failure."""
    sp = _param(s)
    start = _start(band, grid)
    if start is None:
        return Band.infeasible(band.knot_grid(), band.alpha, band.kind, sp.s_star)
    t, lo, up = start
    out = _full_step(t, lo, up, sp.s_star)
    if out is None:
        return Band.infeasible(t, band.alpha, band.kind, sp.s_star)
    return _refined_band(band, t, *out, sp.s_star)


def refine(band: Band, s, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
           grid=None) -> RefinementResult:
    """Iterate :func:`refine_once` until the knot values change by at most ``tol``."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    sp = _param(s)
    start = _start(band, grid)
    if start is None:
        return RefinementResult(Band.infeasible(band.knot_grid(), band.alpha, band.kind, sp.s_star),
                                0, True, 0.0)
    t, lo, up = start
    history: list[float] = []
    sides = None
    converged = False
    change = math.inf
    it = 0
    while it < max_iter:
        it += 1
        out = _full_step(t, lo, up, sp.s_star)
        if out is None:
            sentinel = Band.infeasible(t, band.alpha, band.kind, sp.s_star)
            return RefinementResult(sentinel, it, True, change, history)
        lo2, up2, side_f, side_s = out
        change = float(max(np.max(np.abs(lo2 - lo)), np.max(np.abs(up2 - up))))
        history.append(change)
        lo, up, sides = lo2, up2, (side_f, side_s)
        if change <= tol:
            converged = True
            break
    return RefinementResult(_refined_band(band, t, lo, up, *sides, sp.s_star), it, converged, change,
                            history)
