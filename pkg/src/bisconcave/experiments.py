"""Seeded, worker-count-independent simulation studies.

Each replication draws its sample from ``SeedSequence([seed, rep])`` so the
output tables depend only on the configuration, never on scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .bands import DEFAULT_REPS, Band, QuantileEstimate, ks_band, ks_quantile, wks_band, wks_quantile
from .errors import ConfigError, DivergentFunctionalError, ParameterError
from .families import DistributionModel, make_family, parse_family
from .refine import refine
from .shape import GridSpec, check_bi_sstar

COVERAGE_GRID_POINTS = 256
INCLUSION_TOL = 1e-9
EXPERIMENT_KINDS = ("coverage", "functional_error")


@dataclass
class ExperimentConfig:
    kind: str = "coverage"
    family: str = "student_t:r=1"
    n: list[int] = field(default_factory=lambda: [100])
    alpha: float = 0.05
    band: str = "ks"
    gamma_w: float = 0.0
    s_star: list[float] = field(default_factory=lambda: [-1.0])
    replications: int = 200
    seed: int = 0
    quantile_reps: int = DEFAULT_REPS
    k: float = 1.0
    workers: int = 1
    output: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.band not in ("ks", "wks"):
            raise ConfigError(f"band must be 'ks' or 'wks', got {self.band!r}")
        if isinstance(self.n, int):
            self.n = [self.n]
        if isinstance(self.s_star, (int, float)):
            self.s_star = [self.s_star]
        self.n = [int(v) for v in self.n]
        self.s_star = [float(v) for v in self.s_star]
        if not self.n or min(self.n) < 2:
            raise ConfigError("every n must be >= 2")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 <= self.gamma_w < 0.5:
            raise ConfigError("gamma_w must lie in [0, 1/2)")
        if any(s > 1 for s in self.s_star):
            raise ConfigError("every s* must be <= 1")
        if self.replications < 1 or self.workers < 1:
            raise ConfigError("replications and workers must be positive")
        if self.quantile_reps < 1000:
            raise ConfigError("quantile_reps must be >= 1000")
        parse_family(self.family)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def replication_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])


def _quantile(cfg: ExperimentConfig, n: int) -> QuantileEstimate:
    if cfg.band == "ks":
        return ks_quantile(n, cfg.alpha, cfg.quantile_reps, cfg.seed, cfg.workers)
    return wks_quantile(n, cfg.alpha, cfg.gamma_w, cfg.quantile_reps, cfg.seed, cfg.workers)


def _band(cfg: ExperimentConfig, sample, q: QuantileEstimate) -> Band:
    if cfg.band == "ks":
        return ks_band(sample, cfg.alpha, q)
    return wks_band(sample, cfg.alpha, cfg.gamma_w, q)


def condition_constants(cfg: ExperimentConfig, q: QuantileEstimate) -> dict:
    """Band constants (kappa, gamma, lambda) of the width condition used in rate statements."""
    return {"kappa": q.kappa, "gamma": cfg.gamma_w if cfg.band == "wks" else 0.0, "lambda": 1.0}


def _run_reps(func, args_list, workers: int) -> list:
    if workers > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, args_list, chunksize=max(1, len(args_list) // (4 * workers))))
    return [func(a) for a in args_list]


# ---------------------------------------------------------------- coverage

def _contains(lo, up, F, tol=INCLUSION_TOL) -> bool:
    return bool(np.all(lo <= F + tol) and np.all(F <= up + tol))


def _original_covers(band: Band, model: DistributionModel, xq: np.ndarray) -> bool:
    t = band.knot_grid()
    lo_k, up_k = band.knot_bounds(t)
    Ft = model.cdf(t)
    lo_q, up_q = band.evaluate(xq)
    return _contains(lo_k, up_k, Ft) and _contains(lo_q, up_q, model.cdf(xq))


def _coverage_rep(args) -> list[tuple]:
    cfg, n, rep, q, xq, q99 = args
    model = parse_family(cfg.family)
    sample = model.sample(n, replication_seed(cfg.seed, rep))
    band = _band(cfg, sample, q)
    covered0 = _original_covers(band, model, xq)
    out = [("none", covered0, False, float(np.mean(np.subtract(*band.evaluate(xq)[::-1]))),
            _width_at(band, q99), True)]
    for s in cfg.s_star:
        res = refine(band, s)
        if not res.feasible:
            out.append((s, False, True, math.nan, math.nan, not covered0))
            continue
        rb = res.band
        pts = np.union1d(xq, band.knot_grid())
        lo, up = rb.evaluate(pts)
        covered = _contains(lo, up, model.cdf(pts))
        lo_q, up_q = rb.evaluate(xq)
        # inclusion: a truth covered by the original band must stay covered
        out.append((s, covered, False, float(np.mean(up_q - lo_q)), _width_at(rb, q99),
                    covered or not covered0))
    return out


def _width_at(band: Band, x: float) -> float:
    lo, up = band.evaluate(np.array([x]))
    return float(up[0] - lo[0])


def coverage_experiment(cfg: ExperimentConfig) -> Table:
    """Coverage, width and infeasibility of the original and the refined bands."""
    model = parse_family(cfg.family)
    p = (np.arange(COVERAGE_GRID_POINTS) + 0.5) / COVERAGE_GRID_POINTS
    xq = np.concatenate([model.ppf(p[p <= 0.5]), model.isf(1 - p[p > 0.5])])
    q99 = float(model.isf(0.01))
    columns = ["n", "s_star", "replications", "coverage", "noncoverage_se", "mean_width",
               "width_q99", "infeasible_rate", "inclusion_failures", "kappa"]
    rows = []
    for n in cfg.n:
        q = _quantile(cfg, n)
        per_rep = _run_reps(_coverage_rep, [(cfg, n, r, q, xq, q99) for r in range(cfg.replications)],
                            cfg.workers)
        labels = ["none"] + list(cfg.s_star)
        for j, label in enumerate(labels):
            recs = [rec[j] for rec in per_rep]
            cov = float(np.mean([r[1] for r in recs]))
            infeas = float(np.mean([r[2] for r in recs]))
            widths = [r[3] for r in recs if not r[2]]
            w99 = [r[4] for r in recs if not r[2]]
            se = math.sqrt(max(cov * (1 - cov), 1e-300) / len(recs))
            rows.append([n, label, len(recs), cov, se,
                         float(np.mean(widths)) if widths else math.nan,
                         float(np.mean(w99)) if w99 else math.nan,
                         infeas, int(sum(not r[5] for r in recs)), q.kappa])
    return Table(columns, rows, {"config": cfg.to_dict()})


# ---------------------------------------------------------------- functional error

def _phi_prime(k: float):
    if k == 1:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    return lambda x: k * np.abs(np.asarray(x, dtype=float)) ** (k - 1)


def functional_sup_error(band: Band, model: DistributionModel, k: float = 1.0) -> float:
    """sup over G between the refined envelopes of |int phi dG - int phi dF| for phi' = k|x|^(k-1).

    The extremal G are the envelopes themselves, so the value is the larger of
    int phi'(F - L) and int phi'(U - F).  The data range is integrated by the
    trapezoid rule on knots and midpoints; both tails by adaptive quadrature of
    the closed-form envelope extensions.
    """
    if k == 0:
        return 0.0
    dphi = _phi_prime(k)
    t = band.knot_grid()
    xs = np.union1d(t, 0.5 * (t[1:] + t[:-1]))
    lo, up = band.evaluate(xs)
    F = model.cdf(xs)
    w = dphi(xs)
    below = float(integrate.trapezoid(w * (F - lo), xs))
    above = float(integrate.trapezoid(w * (up - F), xs))

    def tail(a, b, which):
        def fn(x):
            lo_x, up_x = band.evaluate(x)
            Fx = float(model.cdf(x))
            d = Fx - lo_x if which == "below" else up_x - Fx
            return float(dphi(x)) * d
        val, _ = integrate.quad(fn, a, b, limit=500, epsabs=1e-9, epsrel=1e-6)
        return val

    below += tail(-math.inf, t[0], "below") + tail(t[-1], math.inf, "below")
    above += tail(-math.inf, t[0], "above") + tail(t[-1], math.inf, "above")
    return max(below, above)


def _functional_rep(args):
    cfg, n, rep, q, s, band_kind, gamma_w = args
    model = parse_family(cfg.family)
    sample = model.sample(n, replication_seed(cfg.seed, rep))
    band = (ks_band(sample, cfg.alpha, q) if band_kind == "ks"
            else wks_band(sample, cfg.alpha, gamma_w, q))
    res = refine(band, s)
    if not res.feasible:
        return math.nan
    return functional_sup_error(res.band, model, cfg.k)


def fitted_slope(ns, values) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def functional_error_experiment(cfg: ExperimentConfig) -> Table:
    """Median functional sup-error of the refined band per n and the fitted log-log slope."""
    if len(cfg.s_star) != 1:
        raise ConfigError("functional_error takes exactly one s*")
    s = cfg.s_star[0]
    if not s < 0:
        raise DivergentFunctionalError("functional error study needs s* < 0")
    if cfg.k >= -1.0 / s:
        raise DivergentFunctionalError(f"k={cfg.k} >= -1/s* = {-1.0 / s}: integral may diverge")
    if cfg.k < 0:
        raise ConfigError("k must be >= 0")
    columns = ["n", "replications", "median_error", "mean_error", "infeasible_rate", "kappa",
               "fitted_slope", "theoretical_exponent"]
    gamma = cfg.gamma_w if cfg.band == "wks" else 0.0
    theory = -0.5 * min(1.0, (cfg.k * s + 1) / (1 - gamma))
    rows, medians = [], []
    for n in cfg.n:
        q = _quantile(cfg, n)
        errs = np.array(_run_reps(_functional_rep,
                                  [(cfg, n, r, q, s, cfg.band, cfg.gamma_w) for r in range(cfg.replications)],
                                  cfg.workers))
        ok = errs[~np.isnan(errs)]
        med = float(np.median(ok)) if ok.size else math.nan
        medians.append(med)
        rows.append([n, cfg.replications, med, float(np.mean(ok)) if ok.size else math.nan,
                     float(np.mean(np.isnan(errs))), q.kappa, None, theory])
    slope = fitted_slope(cfg.n, medians) if len(cfg.n) > 1 and all(m > 0 for m in medians) else math.nan
    for row in rows:
        row[6] = slope
    return Table(columns, rows, {"config": cfg.to_dict(), "fitted_slope": slope})


def run_experiment(cfg: ExperimentConfig) -> Table:
    if cfg.kind == "coverage":
        return coverage_experiment(cfg)
    return functional_error_experiment(cfg)


# ---------------------------------------------------------------- thresholds

@dataclass
class ThresholdResult:
    threshold: float
    lo: float
    hi: float
    evaluations: int

    def to_dict(self) -> dict:
        return asdict(self)


def count_modes(model: DistributionModel, points: int = 20001) -> int:
    """Number of strict local maxima of the density on a fine grid."""
    p = np.linspace(1e-6, 1 - 1e-6, points)
    x = np.union1d(np.concatenate([model.ppf(p[p <= 0.5]), model.isf(1 - p[p > 0.5])]), [0.0])
    d = np.sign(model.dpdf(x))
    d = d[d != 0]
    return int(np.sum((d[:-1] > 0) & (d[1:] < 0)))


def threshold_search(family: str, s_star: float | None = 0.0, bracket=(1.0, 2.0), tol: float = 1e-3,
                     criterion: str = "feasibility", param: str = "delta",
                     grid: GridSpec | None = None) -> ThresholdResult:
    """Bisection on ``param`` for the point where the criterion flips.

    ``feasibility`` flips when the family stops being bi-s*-concave;
    ``modes`` flips when the density stops being unimodal.  The criterion
    must hold at ``bracket[0]`` and fail at ``bracket[1]``.
    """
    lo, hi = map(float, bracket)
    if hi < lo:
        raise ParameterError("bracket must satisfy lo <= hi")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if lo == hi:
        return ThresholdResult(lo, lo, hi, 0)
    if criterion == "feasibility":
        if s_star is None:
            raise ParameterError("feasibility search needs s*")
        pred = lambda v: check_bi_sstar(make_family(family, **{param: v}), s_star, grid).holds  # noqa: E731
    elif criterion == "modes":
        pred = lambda v: count_modes(make_family(family, **{param: v})) <= 1  # noqa: E731
    else:
        raise ParameterError(f"unknown criterion {criterion!r}")
    evals = 2
    if not pred(lo) or pred(hi):
        raise ParameterError(f"criterion must hold at {lo} and fail at {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        evals += 1
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(0.5 * (lo + hi), lo, hi, evals)
