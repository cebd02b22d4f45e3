"""Analytic distribution families with closed-form F, f and f'.

Every model also exposes the survival function and an inverse survival
function so that tail computations keep full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ParameterError
from .grid import SampleData

_TINY = 2.0 ** -54


@dataclass(frozen=True)
class Metadata:
    s0: float | None = None
    s0_star: float | None = None
    gamma_bar: float | None = None


class DistributionModel:
    """Base class; subclasses implement the vectorized primitives."""

    name: str = "model"
    support: tuple[float, float] = (-math.inf, math.inf)

    def __init__(self, params: dict, metadata: Metadata = Metadata()):
        self.params = dict(params)
        self.metadata = metadata

    def __repr__(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}:{args}"

    @property
    def spec(self) -> str:
        return repr(self)

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def pdf(self, x):
        raise NotImplementedError

    def dpdf(self, x):
        raise NotImplementedError

    def ppf(self, p):
        raise NotImplementedError

    def isf(self, p):
        return self.ppf(1.0 - np.asarray(p, dtype=float))

    def uniforms(self, n: int, seed: int) -> np.ndarray:
        u = np.random.default_rng(seed).random(n)
        return np.clip(u, _TINY, 1.0 - _TINY)

    def sample(self, n: int, seed: int) -> SampleData:
        return sample(self, n, seed)

    def draw(self, n: int, seed: int) -> np.ndarray:
        return np.asarray(self.ppf(self.uniforms(n, seed)), dtype=float)


def sample(model: DistributionModel, n: int, seed: int) -> SampleData:
    """I.i.d. draws by inverse transform of a seeded uniform stream."""
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    return SampleData(model.draw(n, seed))


def _solve_monotone(func, target, lo, hi, increasing=True, iters=200):
    """Vectorized bisection for func(x) = target on [lo, hi]."""
    target = np.asarray(target, dtype=float)
    a = np.full(target.shape, lo, dtype=float)
    b = np.full(target.shape, hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        val = func(mid)
        go_right = val < target if increasing else val > target
        a = np.where(go_right, mid, a)
        b = np.where(go_right, b, mid)
        if np.all((b - a) <= 1e-15 * np.maximum(1.0, np.abs(a))):
            break
    return 0.5 * (a + b)


class StudentT(DistributionModel):
    name = "student_t"

    def __init__(self, r: float):
        if not r > 0:
            raise ParameterError("student_t requires r > 0")
        super().__init__({"r": r}, Metadata(-1.0 / (1.0 + r), -1.0 / r, 1.0 + 1.0 / r))
        self.r = float(r)
        self._logc = special.gammaln((r + 1) / 2) - special.gammaln(r / 2) - 0.5 * math.log(math.pi * r)

    def cdf(self, x):
        return special.stdtr(self.r, np.asarray(x, dtype=float))

    def sf(self, x):
        return special.stdtr(self.r, -np.asarray(x, dtype=float))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self._logc - (self.r + 1) / 2 * np.log1p(x * x / self.r))

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.r + 1) * x / (self.r + x * x) * self.pdf(x)

    def ppf(self, p):
        return special.stdtrit(self.r, np.asarray(p, dtype=float))

    def isf(self, p):
        return -special.stdtrit(self.r, np.asarray(p, dtype=float))


class FDist(DistributionModel):
    name = "f_dist"
    support = (0.0, math.inf)

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise ParameterError("f_dist requires a, b > 0")
        meta = Metadata(-1.0 / (1.0 + b / 2), -2.0 / b, 1.0 + 2.0 / b) if a >= 2 and b >= 2 else Metadata()
        super().__init__({"a": a, "b": b}, meta)
        self.a, self.b = float(a), float(b)
        self._logc = (a / 2) * math.log(a) + (b / 2) * math.log(b) - special.betaln(a / 2, b / 2)

    def cdf(self, x):
        return special.fdtr(self.a, self.b, np.maximum(np.asarray(x, dtype=float), 0.0))

    def sf(self, x):
        return special.fdtrc(self.a, self.b, np.maximum(np.asarray(x, dtype=float), 0.0))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.a, self.b
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(self._logc + (a / 2 - 1) * np.log(x) - (a + b) / 2 * np.log(b + a * x))
        return np.where(x > 0, out, 0.0)

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.a, self.b
        return ((a / 2 - 1) / x - (a + b) / 2 * a / (b + a * x)) * self.pdf(x)

    def ppf(self, p):
        return special.fdtri(self.a, self.b, np.asarray(p, dtype=float))

    def isf(self, p):
        p = np.asarray(p, dtype=float)
        return _solve_monotone(self.sf, p, 0.0, 1e300 ** 0.5, increasing=False, iters=2000) \
            if np.any(p < 1e-10) else self.ppf(1.0 - p)


class Pareto(DistributionModel):
    name = "pareto"

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0):
            raise ParameterError("pareto requires a, b > 0")
        super().__init__({"a": a, "b": b}, Metadata(-1.0 / (1.0 + a), -1.0 / a, 1.0 + 1.0 / a))
        self.a, self.b = float(a), float(b)
        self.support = (self.b, math.inf)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > self.b, np.power(self.b / np.maximum(x, self.b), self.a), 1.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self.b, -np.expm1(self.a * np.log(self.b / np.maximum(x, self.b))), 0.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.b)
        return np.where(x >= self.b, self.a / self.b * np.power(self.b / xs, self.a + 1), 0.0)

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.a + 1) / np.maximum(x, self.b) * self.pdf(x)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        return self.b * np.exp(-np.log1p(-p) / self.a)

    def isf(self, p):
        return self.b * np.power(np.asarray(p, dtype=float), -1.0 / self.a)


class SymmetricBeta(DistributionModel):
    name = "symmetric_beta"

    def __init__(self, r: float):
        if not r > 0:
            raise ParameterError("symmetric_beta requires r > 0")
        super().__init__({"r": r}, Metadata(2.0 / r, 2.0 / (2.0 + r), r / (r + 2.0)))
        self.r = float(r)
        self._root = math.sqrt(r)
        self._alpha = r / 2 + 1
        self._logc = special.gammaln((3 + r) / 2) - 0.5 * math.log(math.pi * r) - special.gammaln(1 + r / 2)
        self.support = (-self._root, self._root)

    def _z(self, x):
        return np.clip(np.asarray(x, dtype=float) / self._root, -1.0, 1.0)

    def cdf(self, x):
        return special.betainc(self._alpha, self._alpha, (1 + self._z(x)) / 2)

    def sf(self, x):
        return special.betainc(self._alpha, self._alpha, (1 - self._z(x)) / 2)

    def pdf(self, x):
        z = self._z(x)
        with np.errstate(divide="ignore"):
            return np.exp(self._logc + self.r / 2 * (np.log1p(-z) + np.log1p(z)))

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = self._z(x)
        return -x / ((1 - z) * (1 + z)) * self.pdf(x)

    def ppf(self, p):
        b = special.betaincinv(self._alpha, self._alpha, np.asarray(p, dtype=float))
        return self._root * (2 * b - 1)

    def isf(self, p):
        return -self.ppf(p)


def _k_of_t(t: float) -> float:
    if t > 0:
        return math.log(math.expm1(t)) - math.log(t)
    if t < 0:
        return math.log(-math.expm1(t)) - math.log(-t)
    return 0.0


class TiltedUniform(DistributionModel):
    """Exponential tilt of U(0, 1): f(x) = exp(t x - K(t)) on [0, 1]."""

    name = "tilted_uniform"
    support = (0.0, 1.0)

    def __init__(self, t: float):
        t = float(t)
        if not math.isfinite(t):
            raise ParameterError("tilted_uniform requires a finite t")
        super().__init__({"t": t}, Metadata(0.0, math.exp(-abs(t)), -math.expm1(-abs(t))))
        self.t = t
        self.K = _k_of_t(t)

    def _unit(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def cdf(self, x):
        x = self._unit(x)
        if self.t == 0:
            return x
        return np.expm1(self.t * x) / math.expm1(self.t)

    def sf(self, x):
        x = self._unit(x)
        if self.t == 0:
            return 1.0 - x
        return np.exp(self.t * x) * np.expm1(self.t * (1 - x)) / math.expm1(self.t)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0) & (x <= 1)
        return np.where(inside, np.exp(self.t * self._unit(x) - self.K), 0.0)

    def dpdf(self, x):
        return self.t * self.pdf(x)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if self.t == 0:
            return p
        return np.log1p(p * math.expm1(self.t)) / self.t

    def isf(self, p):
        p = np.asarray(p, dtype=float)
        if self.t == 0:
            return 1.0 - p
        # reflection: 1 - X is tilted_uniform(-t)
        return 1.0 - np.log1p(p * math.expm1(-self.t)) / (-self.t)


class _SymmetricMixture(DistributionModel):
    """1/2 * base(x - delta) + 1/2 * base(x + delta)."""

    def __init__(self, name: str, delta: float, params: dict):
        if not delta > 0:
            raise ParameterError(f"{name} requires delta > 0")
        self.name = name
        super().__init__(params, Metadata())
        self.delta = float(delta)

    # base-component primitives, overridden by subclasses
    def _bcdf(self, y):
        raise NotImplementedError

    def _bsf(self, y):
        raise NotImplementedError

    def _bpdf(self, y):
        raise NotImplementedError

    def _bdpdf(self, y):
        raise NotImplementedError

    def _bppf(self, p):
        raise NotImplementedError

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self._bcdf(x - self.delta) + self._bcdf(x + self.delta))

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self._bsf(x - self.delta) + self._bsf(x + self.delta))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self._bpdf(x - self.delta) + self._bpdf(x + self.delta))

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self._bdpdf(x - self.delta) + self._bdpdf(x + self.delta))

    def _lower_ppf(self, p):
        # the mixture quantile lies within delta of the component quantile
        q = self._bppf(p)
        return _bisect_bracketed(self.cdf, p, q - self.delta, q + self.delta)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        upper = p > 0.5
        out = self._lower_ppf(np.where(upper, 1.0 - p, p))
        return np.where(upper, -out, out)

    def isf(self, p):
        p = np.asarray(p, dtype=float)
        # symmetric about zero
        return -self.ppf(p)

    def draw(self, n: int, seed: int) -> np.ndarray:
        labels_ss, uni_ss = np.random.SeedSequence(seed).spawn(2)
        shift = np.where(np.random.default_rng(labels_ss).random(n) < 0.5, -self.delta, self.delta)
        u = np.clip(np.random.default_rng(uni_ss).random(n), _TINY, 1 - _TINY)
        return shift + self._bppf(u)


def _bisect_bracketed(func, target, lo, hi, iters=200):
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        right = func(mid) < target
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
        if np.all(b - a <= 4e-16 * np.maximum(1.0, np.abs(a))):
            break
    return 0.5 * (a + b)


class GaussianMixture(_SymmetricMixture):
    def __init__(self, delta: float):
        super().__init__("gaussian_mixture", delta, {"delta": delta})

    def _bcdf(self, y):
        return special.ndtr(y)

    def _bsf(self, y):
        return special.ndtr(-y)

    def _bpdf(self, y):
        return np.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)

    def _bdpdf(self, y):
        return -y * self._bpdf(y)

    def _bppf(self, p):
        return special.ndtri(p)


class TMixture(_SymmetricMixture):
    def __init__(self, delta: float, r: float = 1.0):
        if not r > 0:
            raise ParameterError("t_mixture requires r > 0")
        super().__init__("t_mixture", delta, {"delta": delta, "r": r} if r != 1 else {"delta": delta})
        self._t = StudentT(r)

    def _bcdf(self, y):
        return self._t.cdf(y)

    def _bsf(self, y):
        return self._t.sf(y)

    def _bpdf(self, y):
        return self._t.pdf(y)

    def _bdpdf(self, y):
        return self._t.dpdf(y)

    def _bppf(self, p):
        return self._t.ppf(p)


class Levy(DistributionModel):
    """First passage time of Brownian motion to level a."""

    name = "levy"
    support = (0.0, math.inf)

    def __init__(self, a: float):
        if not a > 0:
            raise ParameterError("levy requires a > 0")
        super().__init__({"a": a}, Metadata(-2.0 / 3.0, -2.0, 3.0))
        self.a = float(a)

    def _z(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.a / np.sqrt(2 * np.maximum(x, 0.0))

    def cdf(self, x):
        return special.erfc(self._z(x))

    def sf(self, x):
        return special.erf(self._z(x))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.where(x > 0, x, 1.0)
        out = self.a / np.sqrt(2 * math.pi * xp ** 3) * np.exp(-self.a ** 2 / (2 * xp))
        return np.where(x > 0, out, 0.0)

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.where(x > 0, x, 1.0)
        return np.where(x > 0, (self.a ** 2 / (2 * xp ** 2) - 1.5 / xp) * self.pdf(x), 0.0)

    def ppf(self, p):
        z = special.erfcinv(np.asarray(p, dtype=float))
        return self.a ** 2 / (2 * z * z)

    def isf(self, p):
        z = special.erfinv(np.asarray(p, dtype=float))
        return self.a ** 2 / (2 * z * z)


_FAMILIES = {
    "student_t": (StudentT, ("r",)),
    "f_dist": (FDist, ("a", "b")),
    "pareto": (Pareto, ("a", "b")),
    "symmetric_beta": (SymmetricBeta, ("r",)),
    "tilted_uniform": (TiltedUniform, ("t",)),
    "gaussian_mixture": (GaussianMixture, ("delta",)),
    "t_mixture": (TMixture, ("delta", "r")),
    "levy": (Levy, ("a",)),
}

FAMILY_NAMES = tuple(_FAMILIES)


def make_family(name: str, **params) -> DistributionModel:
    try:
        cls, allowed = _FAMILIES[name]
    except KeyError:
        raise ParameterError(f"unknown family {name!r}; choose from {', '.join(_FAMILIES)}") from None
    unknown = set(params) - set(allowed)
    if unknown:
        raise ParameterError(f"{name} does not take parameters {sorted(unknown)}")
    return cls(**{k: float(v) for k, v in params.items()})


def parse_family(spec: str) -> DistributionModel:
    """Parse ``name:key=value,key=value`` (e.g. ``pareto:a=2,b=1``)."""
    name, _, rest = spec.strip().partition(":")
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ParameterError(f"malformed family parameter {item!r} in {spec!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ParameterError(f"non-numeric value for {key!r} in {spec!r}") from None
    return make_family(name, **params)
