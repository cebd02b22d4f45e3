"""Piecewise functions on knot grids with extended-real values.

Values are plain floats; ``inf``/``-inf`` stand for the extended reals and
NaN (an indeterminate form) is always rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError, InvalidSampleError, UndefinedInterpolationError

Mode = Literal["step", "linear"]
TiePolicy = Literal["collapse", "keep"]


def ext_add(a: float, b: float) -> float:
    """Extended-real addition; ``inf + -inf`` raises."""
    if math.isinf(a) and math.isinf(b) and (a > 0) != (b > 0):
        raise DomainError("indeterminate form inf - inf")
    return a + b


def ext_mul(a: float, b: float) -> float:
    """Extended-real multiplication; ``0 * inf`` raises."""
    if (a == 0 and math.isinf(b)) or (b == 0 and math.isinf(a)):
        raise DomainError("indeterminate form 0 * inf")
    return a * b


def _as_values(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("NaN is not an extended real")
    return arr


@dataclass(frozen=True)
class KnotFunction:
    """Step (right-continuous) or piecewise-linear function on a knot grid.

    Step mode: the value on ``[t_k, t_{k+1})`` is ``values[k]``, ``left`` applies
    for ``x < t_0`` and ``right`` for ``x > t_m``.  Linear mode interpolates
    between knots with the same tail convention.
    """

    knots: np.ndarray
    values: np.ndarray
    mode: Mode = "step"
    left: float = 0.0
    right: float | None = None
    monotone: bool = False

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        values = _as_values(self.values)
        if knots.ndim != 1 or knots.size < 1 or knots.shape != values.shape:
            raise DomainError("knots and values must be 1-d arrays of equal, nonzero length")
        if not np.all(np.isfinite(knots)):
            raise DomainError("knots must be finite")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if self.mode not in ("step", "linear"):
            raise DomainError(f"unknown mode {self.mode!r}")
        right = float(values[-1]) if self.right is None else float(self.right)
        if math.isnan(self.left) or math.isnan(right):
            raise DomainError("tail values must not be NaN")
        if self.monotone:
            seq = np.concatenate([[self.left], values, [right]])
            if np.any(np.diff(seq) < 0):
                raise DomainError("values flagged monotone are not nondecreasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "left", float(self.left))

    @property
    def m(self) -> int:
        return self.knots.size - 1

    def __call__(self, x):
        return evaluate(self, x)

    def left_limit(self, x):
        return left_limit(self, x)

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "knots": [float(t) for t in self.knots],
                "values": [_enc(v) for v in self.values],
                "left": _enc(self.left),
                "right": _enc(self.right),
                "monotone": self.monotone,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "KnotFunction":
        d = json.loads(text)
        return cls(
            knots=np.array(d["knots"], dtype=float),
            values=np.array([_dec(v) for v in d["values"]], dtype=float),
            mode=d.get("mode", "step"),
            left=_dec(d.get("left", 0.0)),
            right=_dec(d["right"]) if d.get("right") is not None else None,
            monotone=bool(d.get("monotone", False)),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "value"])
        for t, v in zip(self.knots, self.values):
            writer.writerow([repr(float(t)), _fmt(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(
        cls,
        source: str | Path | io.TextIOBase,
        mode: Mode = "step",
        left: float = 0.0,
        right: float | None = None,
        monotone: bool = False,
    ) -> "KnotFunction":
        if isinstance(source, Path):
            text = source.read_text()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
            raise DomainError("grid CSV must start with header 'x,value'")
        knots, values = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                knots.append(float(row[0]))
                values.append(_parse_token(row[1]))
            except (ValueError, IndexError) as exc:
                raise DomainError(f"line {lineno}: cannot parse {row!r}") from exc
        return cls(np.array(knots), np.array(values), mode=mode, left=left, right=right,
                   monotone=monotone)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _parse_token(tok: str) -> float:
    v = float(tok.strip())
    if math.isnan(v):
        raise ValueError("NaN token")
    return v


def _enc(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _dec(v) -> float:
    return float(v)


def evaluate(fn: KnotFunction, x):
    """Evaluate ``fn`` at scalar or array ``x``."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    t, v = fn.knots, fn.values
    out = np.empty(xs.shape, dtype=float)
    below = xs < t[0]
    above = xs > t[-1]
    out[below] = fn.left
    out[above] = fn.right
    inner = ~(below | above)
    xi = xs[inner]
    if fn.mode == "step":
        idx = np.searchsorted(t, xi, side="right") - 1
        out[inner] = v[idx]
    else:
        idx = np.clip(np.searchsorted(t, xi, side="right") - 1, 0, max(fn.m - 1, 0))
        if fn.m == 0:
            out[inner] = v[0]
        else:
            t0, t1 = t[idx], t[idx + 1]
            v0, v1 = v[idx], v[idx + 1]
            at0 = xi == t0
            at1 = xi == t1
            bad = ~(np.isfinite(v0) & np.isfinite(v1)) & ~at0 & ~at1
            if bad.any():
                raise UndefinedInterpolationError(
                    f"linear interpolation against an infinite knot value at x={xi[bad][0]!r}"
                )
            with np.errstate(invalid="ignore"):
                w = (xi - t0) / (t1 - t0)
                lin = v0 + w * (v1 - v0)
            lin = np.where(at0, v0, np.where(at1, v1, lin))
            out[inner] = lin
    return float(out[0]) if scalar else out


def left_limit(fn: KnotFunction, x):
    """Limit of ``fn`` from the left at ``x``."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    t, v = fn.knots, fn.values
    out = np.empty(xs.shape, dtype=float)
    if fn.mode == "step":
        idx = np.searchsorted(t, xs, side="left") - 1
        out = np.where(idx < 0, fn.left, v[np.maximum(idx, 0)])
        out = np.where(xs > t[-1], fn.right, out)
    else:
        at_first = xs <= t[0]
        past_last = xs > t[-1]
        mid = ~(at_first | past_last)
        out[at_first] = fn.left
        out[past_last] = fn.right
        if mid.any():
            out[mid] = evaluate(fn, xs[mid])
    return float(out[0]) if scalar else np.asarray(out, dtype=float)


@dataclass(frozen=True)
class SampleData:
    """Sorted observations, optionally collapsed to unique knots with counts."""

    observations: np.ndarray
    tie_policy: TiePolicy = "collapse"
    unique: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        obs = np.sort(np.asarray(self.observations, dtype=float).ravel())
        if obs.size < 2:
            raise InvalidSampleError(f"need at least 2 observations, got {obs.size}")
        if not np.all(np.isfinite(obs)):
            raise InvalidSampleError("observations must be finite")
        if self.tie_policy not in ("collapse", "keep"):
            raise InvalidSampleError(f"unknown tie policy {self.tie_policy!r}")
        uniq, counts = np.unique(obs, return_counts=True)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "unique", uniq)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.observations.size)

    @property
    def ties(self) -> int:
        return self.n - int(self.unique.size)

    @classmethod
    def from_values(cls, values: Sequence[float], tie_policy: TiePolicy = "collapse") -> "SampleData":
        return cls(np.asarray(values, dtype=float), tie_policy=tie_policy)


def empirical_cdf(sample: SampleData) -> KnotFunction:
    """Right-continuous empirical distribution function of ``sample``."""
    if not isinstance(sample, SampleData):
        sample = SampleData(np.asarray(sample, dtype=float))
    heights = np.cumsum(sample.counts) / sample.n
    return KnotFunction(sample.unique, heights, mode="step", left=0.0, right=1.0, monotone=True)
