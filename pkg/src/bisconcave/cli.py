"""Command-line front end.

Exit status: 0 on success, 1 when the data rule out every bi-s*-concave
distribution function at the requested level, 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bands import CACHE_SCHEMA_VERSION, DEFAULT_REPS, Band, QuantileCache, build_band
from .errors import BiconcaveError, InputError
from .experiments import ExperimentConfig, run_experiment, threshold_search
from .families import parse_family
from .grid import SampleData, empirical_cdf
from .inference import RefineConfig, estimate_sstar
from .refine import DEFAULT_MAX_ITER, DEFAULT_TOL, refine
from .schema import validate_report
from .shape import check_bi_sstar, cr_constants, max_sstar

OUTPUT_ENV = "BISCONCAVE_OUTPUT_DIR"
DENSE_POINTS = 512
INFEASIBLE_CONCLUSION = "not bi-s*-concave at level alpha"

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2


def version_string() -> str:
    return f"bisconcave {__version__} (quantile cache schema {CACHE_SCHEMA_VERSION})"


# ------------------------------------------------------------------ input

def ingest_csv(source) -> SampleData:
    """Read a one-column numeric CSV; a non-numeric first row is treated as a header."""
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc.strerror}") from exc
    else:
        text = source.read()
    values = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or cells == [""]:
            continue
        if len(cells) != 1:
            raise InputError(f"line {lineno}: expected one column, found {len(cells)}")
        try:
            v = float(cells[0])
        except ValueError:
            if lineno == 1:
                continue  # header
            raise InputError(f"line {lineno}: non-numeric value {cells[0]!r}") from None
        if not math.isfinite(v):
            raise InputError(f"line {lineno}: non-finite value {cells[0]!r}")
        values.append(v)
    if len(values) < 2:
        raise InputError(f"need at least 2 data rows, found {len(values)}")
    return SampleData(np.asarray(values))


def _load_sample(args) -> tuple[SampleData, dict]:
    if args.input is not None:
        smp = ingest_csv(args.input)
        info = {"source": "csv", "path": str(args.input)}
    else:
        if args.n is None:
            raise InputError("--family requires --n")
        model = parse_family(args.family)
        smp = model.sample(args.n, args.seed)
        info = {"source": "family", "family": model.spec, "seed": args.seed}
    info.update({"n": smp.n, "ties": smp.ties})
    return smp, info


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _fmt(v: float) -> str:
    return repr(float(v))


def dense_grid(sample: SampleData, points: int = DENSE_POINTS) -> np.ndarray:
    x = sample.observations
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    if iqr <= 0:
        iqr = max(x[-1] - x[0], 1.0)
    return np.linspace(x[0] - 3 * iqr, x[-1] + 3 * iqr, points)


def _write_grid_csv(path: Path, sample: SampleData, columns: dict[str, Band]) -> None:
    xs = dense_grid(sample)
    ecdf = empirical_cdf(sample)(xs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["x", "ecdf"]
    data = [xs, ecdf]
    for name, band in columns.items():
        lo, up = band.evaluate(xs)
        header += [f"{name}_lower", f"{name}_upper"]
        data += [np.asarray(lo, dtype=float), np.asarray(up, dtype=float)]
    w.writerow(header)
    for row in zip(*data):
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _emit(out: Path, name: str, report: dict) -> None:
    report.setdefault("version", version_string())
    validate_report(report)
    (out / f"{name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def _band_from_args(args, sample) -> Band:
    cache = QuantileCache(args.cache) if args.cache else None
    return build_band(sample, args.band, args.alpha, args.gamma_w, args.mc_reps, args.mc_seed, cache)


def _band_dict(band: Band) -> dict:
    d = band.to_dict()
    for key in ("gamma_w", "s_star", "kappa"):
        d[key] = _num(d[key])
    return d


# ------------------------------------------------------------------ commands

def cmd_band(args) -> int:
    sample, info = _load_sample(args)
    band = _band_from_args(args, sample)
    out = _out_dir(args)
    _write_grid_csv(out / "band_grid.csv", sample, {"band": band})
    _emit(out, "band", {
        "command": "band", "status": "ok", "alpha": args.alpha, "kappa": band.kappa,
        "input": info, "band": _band_dict(band), "files": ["band.json", "band_grid.csv"],
    })
    return EXIT_OK


def cmd_refine(args) -> int:
    sample, info = _load_sample(args)
    band = _band_from_args(args, sample)
    res = refine(band, args.s_star, args.tol, args.max_iter)
    out = _out_dir(args)
    report = {
        "command": "refine", "alpha": args.alpha, "s_star": args.s_star, "kappa": band.kappa,
        "feasible": res.feasible, "iterations": res.iterations, "converged": res.converged,
        "last_change": _num(res.last_change), "input": info, "band": _band_dict(res.band),
        "original_band": _band_dict(band), "files": ["refine.json"],
    }
    if res.feasible:
        _write_grid_csv(out / "refine_grid.csv", sample, {"refined": res.band, "band": band})
        report["files"].append("refine_grid.csv")
        report["status"] = "ok"
    else:
        report["status"] = "infeasible"
        report["conclusion"] = INFEASIBLE_CONCLUSION
    _emit(out, "refine", report)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_estimate(args) -> int:
    sample, info = _load_sample(args)
    band = _band_from_args(args, sample)
    est = estimate_sstar(band, sample, args.rho, args.tol, config=RefineConfig(max_iter=args.max_iter))
    out = _out_dir(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s_star", "omega"])
    for s, om in est.omega_curve:
        w.writerow([_fmt(s), _fmt(om)])
    (out / "omega_curve.csv").write_text(buf.getvalue())
    d = est.to_dict()
    report = {"command": "estimate-sstar", "alpha": args.alpha, "kappa": band.kappa, "rho": args.rho,
              "input": info, "files": ["estimate-sstar.json", "omega_curve.csv"], **d}
    if est.s_bar == -math.inf:
        report["status"] = "infeasible"
        report["conclusion"] = INFEASIBLE_CONCLUSION
        _emit(out, "estimate-sstar", report)
        return EXIT_INFEASIBLE
    report["status"] = "ok"
    _emit(out, "estimate-sstar", report)
    return EXIT_OK


def cmd_check(args) -> int:
    model = parse_family(args.family)
    rep = check_bi_sstar(model, args.s_star)
    out = _out_dir(args)
    _emit(out, "check", {"command": "check", "status": "ok", "family": model.spec,
                         "s_star": args.s_star, **{k: _num(v) if isinstance(v, float) else v
                                                   for k, v in rep.to_dict().items() if k != "s_star"}})
    return EXIT_OK


def cmd_cr(args) -> int:
    model = parse_family(args.family)
    rep = cr_constants(model)
    meta = model.metadata
    _emit(_out_dir(args), "cr", {"command": "cr", "status": "ok", "family": model.spec, **rep.to_dict(),
                                 "metadata": {"s0": meta.s0, "s0_star": meta.s0_star,
                                              "gamma_bar": meta.gamma_bar}})
    return EXIT_OK


def cmd_max_sstar(args) -> int:
    model = parse_family(args.family)
    val = max_sstar(model, args.tol)
    _emit(_out_dir(args), "max-sstar", {"command": "max-sstar", "status": "ok", "family": model.spec,
                                        "s_star": _num(val), "tol": args.tol})
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = ExperimentConfig.from_json(args.config)
    except OSError as exc:
        raise InputError(f"cannot read config {args.config}: {exc.strerror}") from exc
    if args.workers is not None:
        cfg.workers = args.workers
    table = run_experiment(cfg)
    out = _out_dir(args)
    name = cfg.output or f"{cfg.kind}.csv"
    table.write(out / name)
    meta = dict(table.meta)
    meta.pop("config", None)
    _emit(out, "simulate", {"command": "simulate", "status": "ok", "alpha": cfg.alpha,
                            "config": cfg.to_dict(), "meta": {k: _num(v) for k, v in meta.items()},
                            "files": ["simulate.json", name]})
    return EXIT_OK


def cmd_threshold(args) -> int:
    res = threshold_search(args.family, args.s_star, (args.lo, args.hi), args.tol,
                           criterion=args.criterion, param=args.param)
    _emit(_out_dir(args), "threshold", {"command": "threshold", "status": "ok", "family": args.family,
                                        "criterion": args.criterion, "s_star": args.s_star,
                                        **res.to_dict()})
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_output(p):
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or the current directory)")


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV file with one numeric column")
    src.add_argument("--family", help="sample from a family, e.g. student_t:r=1")
    p.add_argument("--n", type=int, help="sample size with --family")
    p.add_argument("--seed", type=int, default=0, help="sampling seed with --family")


def _add_band(p):
    p.add_argument("--band", choices=("ks", "wks"), default="ks")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gamma-w", type=float, default=0.0, help="weight exponent of the WKS band")
    p.add_argument("--mc-reps", type=int, default=DEFAULT_REPS, help="Monte Carlo replications for kappa")
    p.add_argument("--mc-seed", type=int, default=0)
    p.add_argument("--cache", help="JSON file caching calibrated quantiles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bisconcave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("band", help="unconstrained KS/WKS confidence band")
    _add_input(p), _add_band(p), _add_output(p)
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("refine", help="refine a band under bi-s*-concavity")
    _add_input(p), _add_band(p), _add_output(p)
    p.add_argument("--s-star", type=float, required=True)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("estimate-sstar", help="upper confidence bound and threshold estimate of s*")
    _add_input(p), _add_band(p), _add_output(p)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check", help="check bi-s*-concavity of an analytic family")
    p.add_argument("--family", required=True)
    p.add_argument("--s-star", type=float, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("cr", help="Csorgo-Revesz type constants of an analytic family")
    p.add_argument("--family", required=True)
    _add_output(p)
    p.set_defaults(func=cmd_cr)

    p = sub.add_parser("max-sstar", help="largest s* for which a family is bi-s*-concave")
    p.add_argument("--family", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    _add_output(p)
    p.set_defaults(func=cmd_max_sstar)

    p = sub.add_parser("simulate", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="bisection for a shape threshold in a family parameter")
    p.add_argument("--family", required=True, help="family name, e.g. gaussian_mixture")
    p.add_argument("--criterion", choices=("feasibility", "modes"), default="feasibility")
    p.add_argument("--s-star", type=float, default=0.0)
    p.add_argument("--param", default="delta")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    _add_output(p)
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BiconcaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
