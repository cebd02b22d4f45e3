"""Concave interpolation between a lower and an upper function on a finite grid.

Given knots t_0 < ... < t_m and values l <= u there, ``conc_int`` returns the
pointwise infimum ``l_o`` and supremum ``u_o`` over all concave functions g
with l <= g <= u on the grid.  ``l_o`` is the least concave majorant of l;
``u_o`` is the minimum over lines through (s, u(s)) and (r, l_o(r)) with r an
active knot of ``l_o`` on the far side of s from x.

The line minimum is computed in O(m log m): for x beyond a knot s, any line
through (r, l_o(r)) and (s', u(s')) with s' before s is dominated by the line
through (r, l_o(r)) and (s, bound at s), so only adjacent knots need to be
chained.  The best r for a given (s, value) is a tangent point of the concave
chain of active knots and is found by bisection.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InsufficientSupportError

FEAS_TOL = 1e-9
NEG_INF = -math.inf


def least_concave_majorant(grid, l) -> tuple[np.ndarray, np.ndarray]:
    """Least concave majorant of ``l`` on ``grid``.

    Returns ``(l_o, active)`` where ``l_o`` holds the majorant at every knot
    (``-inf`` outside the finite support) and ``active`` the indices of the
    knots where it changes slope, endpoints included.
    """
    t = np.asarray(grid, dtype=float)
    lv = np.asarray(l, dtype=float)
    if t.shape != lv.shape or t.ndim != 1:
        raise InputError("grid and values must be 1-d arrays of equal length")
    if np.isnan(lv).any() or np.any(lv == math.inf):
        raise InputError("lower values must lie in [-inf, inf)")
    finite = np.flatnonzero(np.isfinite(lv))
    if finite.size < 2:
        raise InsufficientSupportError("need finite lower values at two or more knots")

    xs = t.tolist()
    ys = lv.tolist()
    hull: list[int] = []
    for i in finite.tolist():
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b unless the slope strictly decreases at b
            if (ys[b] - ys[a]) * (xs[i] - xs[b]) <= (ys[i] - ys[b]) * (xs[b] - xs[a]):
                hull.pop()
            else:
                break
        hull.append(i)

    active = np.asarray(hull, dtype=int)
    out = np.full(t.shape, NEG_INF)
    lo, hi = active[0], active[-1]
    out[lo:hi + 1] = np.interp(t[lo:hi + 1], t[active], lv[active])
    out[active] = lv[active]
    return out, active


def _min_slope_left(rs, lams, hi, s, v):
    """min over j < hi of (v - lams[j]) / (s - rs[j]); unimodal in j."""
    lo = 0
    hi -= 1
    while lo < hi:
        mid = (lo + hi) // 2
        a = (v - lams[mid]) / (s - rs[mid])
        b = (v - lams[mid + 1]) / (s - rs[mid + 1])
        if a <= b:
            hi = mid
        else:
            lo = mid + 1
    return (v - lams[lo]) / (s - rs[lo])


def _max_slope_right(rs, lams, lo, s, v):
    """max over j >= lo of (lams[j] - v) / (rs[j] - s); unimodal in j."""
    hi = len(rs) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        a = (lams[mid] - v) / (rs[mid] - s)
        b = (lams[mid + 1] - v) / (rs[mid + 1] - s)
        if a >= b:
            hi = mid
        else:
            lo = mid + 1
    return (lams[lo] - v) / (rs[lo] - s)


@dataclass
class ConcIntResult:
    grid: np.ndarray
    l: np.ndarray
    u: np.ndarray
    l_o: np.ndarray
    active: np.ndarray
    feasible: bool
    u_o: np.ndarray | None = None
    slope_left: np.ndarray | None = None   # NaN where no active knot lies left
    slope_right: np.ndarray | None = None  # NaN where no active knot lies right

    @property
    def active_knots(self) -> np.ndarray:
        return self.grid[self.active]

    def lower(self, x):
        """Evaluate l_o at arbitrary points (``-inf`` off the active hull)."""
        xs = np.asarray(x, dtype=float)
        r = self.grid[self.active]
        lam = self.l_o[self.active]
        inside = (xs >= r[0]) & (xs <= r[-1])
        vals = np.interp(xs, r, lam)
        return np.where(inside, vals, NEG_INF)

    def upper(self, x):
        """Evaluate u_o at arbitrary points."""
        if not self.feasible:
            raise InputError("u_o is undefined for an infeasible pair")
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        t, uo = self.grid, self.u_o
        m = t.size - 1
        j = np.searchsorted(t, xs, side="right") - 1  # largest knot <= x
        out = np.full(xs.shape, math.inf)
        has_left = j >= 0
        jl = np.clip(j, 0, m)
        left_val = uo[jl] + self.slope_left[jl] * (xs - t[jl])
        left_val = np.where(xs == t[jl], uo[jl], left_val)
        ok = has_left & ~np.isnan(left_val)
        out[ok] = left_val[ok]
        k = np.searchsorted(t, xs, side="left")  # smallest knot >= x
        has_right = k <= m
        kr = np.clip(k, 0, m)
        right_val = uo[kr] + self.slope_right[kr] * (xs - t[kr])
        right_val = np.where(xs == t[kr], uo[kr], right_val)
        ok = has_right & ~np.isnan(right_val)
        out[ok] = np.minimum(out[ok], right_val[ok])
        return float(out[0]) if scalar else out

    def dump_csv(self, samples: int = 200) -> str:
        """Grid values plus a dense sampling of u_o for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "l", "u", "l_o", "u_o", "is_knot"])
        xs = np.union1d(self.grid, np.linspace(self.grid[0], self.grid[-1], samples))
        l_o = self.lower(xs)
        u_o = self.upper(xs) if self.feasible else np.full(xs.shape, np.nan)
        pos = {float(v): i for i, v in enumerate(self.grid)}
        for x, a, b in zip(xs, l_o, u_o):
            i = pos.get(float(x))
            lv = repr(float(self.l[i])) if i is not None else ""
            uv = repr(float(self.u[i])) if i is not None else ""
            w.writerow([repr(float(x)), lv, uv, repr(float(a)), repr(float(b)), int(i is not None)])
        return buf.getvalue()


def conc_int(grid, l, u, tol: float = FEAS_TOL) -> ConcIntResult:
    """Envelopes of all concave g with ``l <= g <= u`` on ``grid``.

    Infeasibility (no concave function fits) is reported through
    ``result.feasible``; malformed inputs raise :class:`InputError`.
    """
    t = np.asarray(grid, dtype=float)
    lv = np.asarray(l, dtype=float)
    uv = np.asarray(u, dtype=float)
    if not (t.shape == lv.shape == uv.shape) or t.ndim != 1:
        raise InputError("grid, l and u must be 1-d arrays of equal length")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise InputError("grid must be strictly increasing")
    if np.isnan(uv).any() or np.any(uv == NEG_INF):
        raise InputError("upper values must be > -inf")
    if np.any(lv > uv + tol):
        raise InputError("lower values exceed upper values")

    l_o, active = least_concave_majorant(t, lv)
    if np.any(l_o > uv + tol):
        return ConcIntResult(t, lv, uv, l_o, active, feasible=False)

    xs = t.tolist()
    us = uv.tolist()
    rs = t[active].tolist()
    lams = l_o[active].tolist()
    m = len(xs) - 1

    # forward chain: lines through an active knot left of s and the bound at s
    fwd = list(us)
    jr = 0  # number of active knots strictly left of xs[k-1]
    for k in range(1, m + 1):
        s = xs[k - 1]
        while jr < len(rs) and rs[jr] < s:
            jr += 1
        if jr == 0:
            continue
        sig = _min_slope_left(rs, lams, jr, s, fwd[k - 1])
        cand = fwd[k - 1] + sig * (xs[k] - s)
        if cand < fwd[k]:
            fwd[k] = cand

    bwd = list(us)
    jl = len(rs)  # first active knot strictly right of xs[k+1]
    for k in range(m - 1, -1, -1):
        s = xs[k + 1]
        while jl > 0 and rs[jl - 1] > s:
            jl -= 1
        if jl == len(rs):
            continue
        sig = _max_slope_right(rs, lams, jl, s, bwd[k + 1])
        cand = bwd[k + 1] + sig * (xs[k] - s)
        if cand < bwd[k]:
            bwd[k] = cand

    u_o = [min(a, b) for a, b in zip(fwd, bwd)]

    slope_left = [math.nan] * (m + 1)
    slope_right = [math.nan] * (m + 1)
    jr = 0
    for k in range(m + 1):
        while jr < len(rs) and rs[jr] < xs[k]:
            jr += 1
        if jr > 0:
            slope_left[k] = _min_slope_left(rs, lams, jr, xs[k], u_o[k])
    jl = len(rs)
    for k in range(m, -1, -1):
        while jl > 0 and rs[jl - 1] > xs[k]:
            jl -= 1
        if jl < len(rs):
            slope_right[k] = _max_slope_right(rs, lams, jl, xs[k], u_o[k])

    return ConcIntResult(
        t, lv, uv, l_o, active, feasible=True,
        u_o=np.asarray(u_o), slope_left=np.asarray(slope_left), slope_right=np.asarray(slope_right),
    )
