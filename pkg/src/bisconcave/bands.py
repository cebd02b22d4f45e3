"""Unconstrained Kolmogorov-Smirnov and weighted-KS confidence bands.

Quantiles are calibrated by finite-sample Monte Carlo on uniform order
statistics, which makes them distribution free.  Replications are generated
in fixed-size blocks whose random streams depend only on ``(seed, block)``,
so results do not depend on how blocks are spread over workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .errors import CalibrationError, ConfigError, ParameterError
from .grid import KnotFunction, SampleData, empirical_cdf

BLOCK_SIZE = 1000
DEFAULT_REPS = 50_000
CACHE_SCHEMA_VERSION = 1

Status = Literal["feasible", "infeasible"]


@dataclass(frozen=True)
class QuantileEstimate:
    kappa: float
    n: int
    alpha: float
    replications: int
    seed: int
    kind: str = "ks"
    gamma_w: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise CalibrationError(f"kappa must be finite and nonnegative, got {self.kappa}")


@dataclass
class Band:
    """Lower/upper envelope pair with a feasibility status.

    ``envelope`` optionally holds an exact evaluator for refined bands; when
    present it is used by :meth:`evaluate` instead of the step functions.
    """

    lower: KnotFunction
    upper: KnotFunction
    alpha: float
    status: Status = "feasible"
    kind: str = "ks"
    gamma_w: float | None = None
    s_star: float | None = None
    kappa: float | None = None
    envelope: Any = field(default=None, repr=False, compare=False)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def evaluate(self, x):
        """Return ``(lower(x), upper(x))``."""
        if self.envelope is not None:
            return self.envelope(x)
        return self.lower(x), self.upper(x)

    def knot_grid(self) -> np.ndarray:
        return np.union1d(self.lower.knots, self.upper.knots)

    def knot_bounds(self, grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Tightest constraints a continuous nondecreasing G in the band obeys at ``grid``.

        G(t) >= L(t) and, by continuity, G(t) <= U(t-).
        """
        t = self.knot_grid() if grid is None else np.asarray(grid, dtype=float)
        return np.asarray(self.lower(t), dtype=float), np.asarray(self.upper.left_limit(t), dtype=float)

    @classmethod
    def infeasible(cls, grid: np.ndarray, alpha: float, kind: str, s_star: float | None = None) -> "Band":
        grid = np.asarray(grid, dtype=float)
        lower = KnotFunction(grid, np.ones_like(grid), mode="step", left=1.0, right=1.0)
        upper = KnotFunction(grid, np.zeros_like(grid), mode="step", left=0.0, right=0.0)
        return cls(lower, upper, alpha, status="infeasible", kind=kind, s_star=s_star)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "status": self.status,
            "gamma_w": self.gamma_w,
            "s_star": self.s_star,
            "kappa": self.kappa,
            "lower": json.loads(self.lower.to_json()),
            "upper": json.loads(self.upper.to_json()),
        }


def massart_bound(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 / alpha) / 2.0)


def _check_common(n: int, alpha: float, replications: int) -> None:
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if replications < 1000:
        raise CalibrationError(f"need at least 1000 replications, got {replications}")


def _block_uniforms(seed: int, block: int, reps: int, n: int) -> np.ndarray:
    rng = np.random.default_rng([seed, block])
    return np.sort(rng.random((reps, n)), axis=1)


def ks_statistics(u_sorted: np.ndarray) -> np.ndarray:
    """sqrt(n) * sup |F_n - F| from sorted uniforms, one row per replication."""
    n = u_sorted.shape[-1]
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u_sorted, axis=-1)
    d_minus = np.max(u_sorted - (i - 1) / n, axis=-1)
    return math.sqrt(n) * np.maximum(d_plus, d_minus)


def wks_weights(n: int, gamma_w: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(1, n + 1) / (n + 1)
    return t, (t * (1 - t)) ** gamma_w


def wks_statistics(u_sorted: np.ndarray, gamma_w: float) -> np.ndarray:
    n = u_sorted.shape[-1]
    t, w = wks_weights(n, gamma_w)
    return math.sqrt(n) * np.max(np.abs(u_sorted - t) / w, axis=-1)


def _block_stats(args: tuple) -> np.ndarray:
    kind, n, gamma_w, seed, block, reps = args
    u = _block_uniforms(seed, block, reps, n)
    if kind == "ks":
        return ks_statistics(u)
    return wks_statistics(u, gamma_w)


def simulate_statistics(kind: str, n: int, replications: int, seed: int,
                        gamma_w: float = 0.0, workers: int = 1) -> np.ndarray:
    """All ``replications`` Monte Carlo statistics in replication order."""
    jobs = []
    for block, start in enumerate(range(0, replications, BLOCK_SIZE)):
        jobs.append((kind, n, gamma_w, seed, block, min(BLOCK_SIZE, replications - start)))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_stats, jobs))
    else:
        parts = [_block_stats(job) for job in jobs]
    return np.concatenate(parts)


def mc_quantile(stats: np.ndarray, alpha: float) -> float:
    """Order statistic with index ceil((1 - alpha) * reps), 1-based."""
    k = math.ceil((1 - alpha) * stats.size - 1e-9)
    return float(np.partition(stats, k - 1)[k - 1])


def ks_quantile(n: int, alpha: float, replications: int = DEFAULT_REPS, seed: int = 0,
                workers: int = 1) -> QuantileEstimate:
    _check_common(n, alpha, replications)
    stats = simulate_statistics("ks", n, replications, seed, workers=workers)
    return QuantileEstimate(mc_quantile(stats, alpha), n, alpha, replications, seed, "ks", 0.0)


def wks_quantile(n: int, alpha: float, gamma_w: float, replications: int = DEFAULT_REPS,
                 seed: int = 0, workers: int = 1) -> QuantileEstimate:
    if not 0 <= gamma_w < 0.5:
        raise ParameterError(f"gamma_w must lie in [0, 1/2), got {gamma_w}")
    _check_common(n, alpha, replications)
    stats = simulate_statistics("wks", n, replications, seed, gamma_w=gamma_w, workers=workers)
    return QuantileEstimate(mc_quantile(stats, alpha), n, alpha, replications, seed, "wks", gamma_w)


def _check_match(sample: SampleData, quantile: QuantileEstimate, kind: str) -> None:
    if quantile.n != sample.n:
        raise ConfigError(f"quantile calibrated for n={quantile.n}, sample has n={sample.n}")
    if quantile.kind != kind:
        raise ConfigError(f"quantile is for {quantile.kind!r}, band kind is {kind!r}")


def ks_band(sample: SampleData, alpha: float, quantile: QuantileEstimate) -> Band:
    _check_match(sample, quantile, "ks")
    ecdf = empirical_cdf(sample)
    half = quantile.kappa / math.sqrt(sample.n)
    lo = np.clip(ecdf.values - half, 0.0, 1.0)
    hi = np.clip(ecdf.values + half, 0.0, 1.0)
    lower = KnotFunction(ecdf.knots, lo, "step", left=0.0, right=lo[-1], monotone=True)
    upper = KnotFunction(ecdf.knots, hi, "step", left=min(half, 1.0), right=1.0, monotone=True)
    return Band(lower, upper, alpha, kind="ks", gamma_w=0.0, kappa=quantile.kappa)


def wks_band(sample: SampleData, alpha: float, gamma_w: float, quantile: QuantileEstimate) -> Band:
    if not 0 <= gamma_w < 0.5:
        raise ParameterError(f"gamma_w must lie in [0, 1/2), got {gamma_w}")
    _check_match(sample, quantile, "wks")
    if not math.isclose(quantile.gamma_w, gamma_w):
        raise ConfigError("quantile gamma_w does not match band gamma_w")
    n = sample.n
    scale = quantile.kappa / math.sqrt(n)
    t = np.arange(n + 2) / (n + 1)
    w = (t * (1 - t)) ** gamma_w
    lo_i = np.clip(t - scale * w, 0.0, 1.0)  # lower on [X_(i), X_(i+1)), i = 0..n
    hi_i = np.clip(t + scale * w, 0.0, 1.0)  # upper uses index i + 1
    # ties: a knot carrying c observations advances i by c
    idx = np.cumsum(sample.counts)
    lower = KnotFunction(sample.unique, lo_i[idx], "step", left=0.0, right=lo_i[n], monotone=True)
    upper = KnotFunction(sample.unique, hi_i[idx + 1], "step", left=hi_i[1], right=1.0, monotone=True)
    return Band(lower, upper, alpha, kind="wks", gamma_w=gamma_w, kappa=quantile.kappa)


class QuantileCache:
    """JSON file cache keyed by (kind, n, alpha, gamma_w, reps, seed)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._data: dict[str, dict] = {}
        if self.path.exists():
            payload = json.loads(self.path.read_text())
            if payload.get("schema_version") != CACHE_SCHEMA_VERSION:
                raise ConfigError(f"quantile cache {self.path} has an incompatible schema version")
            self._data = payload.get("entries", {})

    @staticmethod
    def key(kind: str, n: int, alpha: float, gamma_w: float, reps: int, seed: int) -> str:
        return f"{kind}|{n}|{alpha!r}|{float(gamma_w)!r}|{reps}|{seed}"

    def get(self, kind: str, n: int, alpha: float, gamma_w: float, reps: int, seed: int) -> QuantileEstimate:
        k = self.key(kind, n, alpha, gamma_w, reps, seed)
        if k in self._data:
            return QuantileEstimate(**self._data[k])
        if kind == "ks":
            q = ks_quantile(n, alpha, reps, seed)
        elif kind == "wks":
            q = wks_quantile(n, alpha, gamma_w, reps, seed)
        else:
            raise ConfigError(f"unknown band kind {kind!r}")
        self._data[k] = asdict(q)
        self.save()
        return q

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"schema_version": CACHE_SCHEMA_VERSION, "entries": self._data}
        self.path.write_text(json.dumps(payload, indent=1, sort_keys=True))


def build_band(sample: SampleData, kind: str, alpha: float, gamma_w: float = 0.0,
               reps: int = DEFAULT_REPS, seed: int = 0,
               cache: QuantileCache | None = None) -> Band:
    """Calibrate the quantile (through ``cache`` when given) and build the band."""
    if kind == "ks":
        q = cache.get("ks", sample.n, alpha, 0.0, reps, seed) if cache else ks_quantile(sample.n, alpha, reps, seed)
        return ks_band(sample, alpha, q)
    if kind == "wks":
        q = (cache.get("wks", sample.n, alpha, gamma_w, reps, seed) if cache
             else wks_quantile(sample.n, alpha, gamma_w, reps, seed))
        return wks_band(sample, alpha, gamma_w, q)
    raise ConfigError(f"unknown band kind {kind!r}")
