import json
import math

import numpy as np
import pytest

from bisconcave.bands import ks_band
from bisconcave.errors import ConfigError, DivergentFunctionalError, ParameterError
from bisconcave.experiments import (ExperimentConfig, Table, count_modes, fitted_slope,
                                    functional_sup_error, replication_seed, run_experiment,
                                    threshold_search)
from bisconcave.families import make_family
from bisconcave.refine import refine


def _small(**kw):
    base = dict(kind="coverage", family="student_t:r=1", n=[60], s_star=[-1.0, 0.0], replications=12,
                seed=4, quantile_reps=2000)
    base.update(kw)
    return ExperimentConfig(**base)


def test_gaussian_mixture_threshold():
    res = threshold_search("gaussian_mixture", 0.0, (1.0, 2.0), 1e-3)
    assert 1.34 < res.threshold < 1.35
    assert res.hi - res.lo <= 1e-3


def test_t_mixture_mode_threshold():
    res = threshold_search("t_mixture", None, (0.3, 1.0), 1e-2, criterion="modes")
    assert 0.55 < res.threshold < 0.65


def test_threshold_edge_cases():
    assert threshold_search("gaussian_mixture", 0.0, (1.2, 1.2)).threshold == 1.2
    with pytest.raises(ParameterError):
        threshold_search("gaussian_mixture", 0.0, (1.5, 2.0))
    with pytest.raises(ParameterError):
        threshold_search("gaussian_mixture", 0.0, (2.0, 1.0))
    with pytest.raises(ParameterError):
        threshold_search("gaussian_mixture", 0.0, criterion="other")


def test_count_modes():
    assert count_modes(make_family("gaussian_mixture", delta=0.5)) == 1
    assert count_modes(make_family("gaussian_mixture", delta=2.0)) == 2


def test_replication_seed_stable():
    assert replication_seed(0, 1) == replication_seed(0, 1)
    assert replication_seed(0, 1) != replication_seed(0, 2)


def test_constant_functional_has_zero_error(ks_q):
    model = make_family("student_t", r=2)
    band = refine(ks_band(model.sample(100, 1), 0.05, ks_q(100)), -0.5).band
    assert functional_sup_error(band, model, 0.0) == 0.0
    err = functional_sup_error(band, model, 1.0)
    assert 0 < err < math.inf


def test_divergent_functional_rejected():
    cfg = _small(kind="functional_error", s_star=[-0.5], k=2.0)
    with pytest.raises(DivergentFunctionalError):
        run_experiment(cfg)
    with pytest.raises(DivergentFunctionalError):
        run_experiment(_small(kind="functional_error", s_star=[0.0]))


def test_coverage_deterministic_and_worker_independent():
    a = run_experiment(_small()).to_csv()
    b = run_experiment(_small()).to_csv()
    c = run_experiment(_small(workers=2)).to_csv()
    assert a == b == c
    assert a.splitlines()[0].startswith("n,s_star,replications,coverage")


def test_coverage_table_contents():
    t = run_experiment(_small(replications=30))
    assert t.column("s_star") == ["none", -1.0, 0.0]
    assert all(v == 0 for v in t.column("inclusion_failures")[:2])
    widths = t.column("mean_width")
    assert widths[1] < widths[0]


def test_refined_width_decreases_in_s_star():
    t = run_experiment(_small(family="symmetric_beta:r=2", s_star=[-2.0, -1.0, 0.0, 0.5], replications=20))
    w = t.column("mean_width")[1:]
    assert all(a >= b - 1e-12 for a, b in zip(w, w[1:]))


def test_misspecified_infeasibility_grows_with_n():
    cfg = _small(family="gaussian_mixture:delta=3", n=[50, 800], s_star=[1.0], replications=20)
    t = run_experiment(cfg)
    rates = [r for r, s in zip(t.column("infeasible_rate"), t.column("s_star")) if s == 1.0]
    assert rates[1] >= rates[0] and rates[1] > 0.5


def test_functional_error_table():
    cfg = _small(kind="functional_error", family="student_t:r=2", n=[100, 400], s_star=[-0.5],
                 replications=6)
    t = run_experiment(cfg)
    med = t.column("median_error")
    assert med[1] < med[0]
    assert t.column("theoretical_exponent")[0] == pytest.approx(-0.25)
    assert t.column("fitted_slope")[0] == pytest.approx(fitted_slope([100, 400], med))


def test_fitted_slope():
    assert fitted_slope([10, 100, 1000], [1, 0.1, 0.01]) == pytest.approx(-1.0)


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="bogus")
    with pytest.raises(ConfigError):
        ExperimentConfig(n=[1])
    with pytest.raises(ConfigError):
        ExperimentConfig(s_star=[1.5])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"nope": 1})
    p = tmp_path / "bad.json"
    p.write_text('{\n "n": [10],\n "alpha": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        ExperimentConfig.from_json(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(p)


def test_config_round_trip(tmp_path):
    cfg = _small()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(p) == cfg


def test_table_csv_tokens():
    t = Table(["a", "b", "c"], [[1, math.nan, -math.inf], [0.1, None, "x"]])
    assert t.to_csv() == "a,b,c\n1,nan,-inf\n0.1,,x\n"
