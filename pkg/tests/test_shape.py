import math

import numpy as np
import pytest

from bisconcave.errors import GridError, ParameterError, UnsupportedModelError
from bisconcave.families import DistributionModel, make_family, parse_family
from bisconcave.shape import (GridSpec, check_bi_sstar, cr_constants, envelope_values, global_envelopes,
                              max_sstar, moment_exponent_bound, tail_bounds)

WITH_META = ["student_t:r=1", "student_t:r=2", "student_t:r=5", "f_dist:a=2,b=2", "f_dist:a=4,b=6",
             "pareto:a=1,b=1", "pareto:a=2,b=1", "symmetric_beta:r=2", "symmetric_beta:r=4",
             "tilted_uniform:t=1", "tilted_uniform:t=-1", "tilted_uniform:t=3", "tilted_uniform:t=-3",
             "levy:a=1", "levy:a=3"]


def test_check_examples():
    t1 = make_family("student_t", r=1)
    assert check_bi_sstar(t1, -1).holds and not check_bi_sstar(t1, -0.9).holds
    tu = make_family("tilted_uniform", t=1)
    assert check_bi_sstar(tu, math.exp(-1)).holds and not check_bi_sstar(tu, 0.42).holds
    assert check_bi_sstar(make_family("gaussian_mixture", delta=1.3), 0).holds
    assert not check_bi_sstar(make_family("gaussian_mixture", delta=1.4), 0).holds


@pytest.mark.parametrize("spec", WITH_META)
def test_characterization_at_and_above_s0(spec):
    m = parse_family(spec)
    s0 = m.metadata.s0_star
    at = check_bi_sstar(m, s0)
    assert at.holds and at.hazard_holds
    if s0 < 1:
        above = check_bi_sstar(m, s0 + 0.05)
        assert not above.holds and not above.hazard_holds


@pytest.mark.parametrize("spec", WITH_META + ["gaussian_mixture:delta=1.0", "gaussian_mixture:delta=2",
                                              "t_mixture:delta=0.4", "t_mixture:delta=1.5"])
def test_chain_and_bound(spec):
    m = parse_family(spec)
    cr = cr_constants(m)
    assert cr.chain_holds(1e-6)
    if m.metadata.s0_star is not None:
        assert cr.gamma_bar <= 1 - m.metadata.s0_star + 1e-6


@pytest.mark.parametrize("spec", WITH_META + ["gaussian_mixture:delta=1.0", "gaussian_mixture:delta=1.8",
                                              "t_mixture:delta=0.3"])
@pytest.mark.parametrize("s", [-3.0, -1.0, -0.5, 0.0, 0.3, 0.8])
def test_hazard_and_derivative_verdicts_agree(spec, s):
    assert check_bi_sstar(parse_family(spec), s).consistent


@pytest.mark.parametrize("spec,value", [("student_t:r=1", 2.0), ("student_t:r=2", 1.5), ("student_t:r=5", 1.2),
                                        ("pareto:a=2,b=1", 1.5), ("levy:a=1", 3.0),
                                        ("symmetric_beta:r=2", 0.5), ("symmetric_beta:r=4", 2 / 3)])
def test_cr_table_values(spec, value):
    assert cr_constants(parse_family(spec)).gamma_bar == pytest.approx(value, abs=1e-2)


def test_pareto_gamma_bar_is_exact():
    assert cr_constants(make_family("pareto", a=2, b=1)).cr_of_survival == pytest.approx(1.5, rel=1e-10)


def test_tilted_uniform_gamma_strictly_below_gamma_bar():
    cr = cr_constants(make_family("tilted_uniform", t=1))
    assert cr.gamma < cr.gamma_bar - 0.1


def test_feasible_hazards_are_monotone():
    m = make_family("student_t", r=2)
    x = m.ppf(np.linspace(0.001, 0.999, 500))
    s = -0.5
    h_rev = m.pdf(x) / m.cdf(x) ** (1 - s)
    h = m.pdf(x) / m.sf(x) ** (1 - s)
    assert np.all(np.diff(h_rev) <= 1e-12 * h_rev[1:])
    assert np.all(np.diff(h) >= -1e-12 * h[1:])


def test_tail_bounds():
    m = make_family("student_t", r=1)
    up, lo = tail_bounds(m, -1, 0.0, 0.0)
    assert up == pytest.approx(0.5) and lo == pytest.approx(0.5)
    up, lo = tail_bounds(m, -1, 0.0, 10.0)
    assert up >= m.cdf(10.0) >= lo
    g = make_family("gaussian_mixture", delta=1)
    y = np.linspace(-6, 6, 121)
    for x in (-1.0, 0.0, 0.7):
        up, lo = tail_bounds(g, 0, x, y)
        assert np.all(lo <= g.cdf(y) + 1e-12) and np.all(g.cdf(y) <= up + 1e-12)
    p = make_family("pareto", a=2, b=1)
    y = np.linspace(1.01, 50, 100)
    up, lo = tail_bounds(p, -0.5, 2.0, y)
    assert np.all(lo <= p.cdf(y) + 1e-12) and np.all(p.cdf(y) <= up + 1e-12)


def test_global_envelopes():
    assert envelope_values(0.5, -1) == pytest.approx((0.0, 1.0))
    assert envelope_values(0.5, 0) == pytest.approx((1 - math.log(2), math.log(2)))
    F = np.linspace(0.01, 0.99, 9)
    lo, up = envelope_values(F, 1.0)
    assert np.allclose(lo, F) and np.allclose(up, F)
    m = make_family("student_t", r=1)
    x = np.linspace(-20, 20, 81)
    lo, up = global_envelopes(m, -1, x)
    assert np.all(lo <= m.cdf(x) + 1e-12) and np.all(m.cdf(x) <= up + 1e-12)


def test_max_sstar():
    assert max_sstar(make_family("student_t", r=2), 1e-4) == pytest.approx(-0.5, abs=1e-4)
    assert max_sstar(make_family("symmetric_beta", r=2), 1e-4) == pytest.approx(0.5, abs=1e-4)
    assert max_sstar(make_family("gaussian_mixture", delta=1.8), 1e-3) < 0
    assert max_sstar(make_family("tilted_uniform", t=0)) == 1.0


def test_max_sstar_floor_marker():
    assert max_sstar(make_family("gaussian_mixture", delta=1.8), 1e-3, floor=-2.0) == -math.inf


def test_moment_exponent_bound():
    assert moment_exponent_bound(-1.0) == 1.0
    assert moment_exponent_bound(-2.0) == 0.5
    assert moment_exponent_bound(0.5, (0.0, 1.0)) == math.inf
    with pytest.raises(ParameterError):
        moment_exponent_bound(0.5)


def test_grid_errors():
    # a grid whose tail probability is below the resolvable scale hits the support edge
    with pytest.raises(GridError):
        check_bi_sstar(make_family("tilted_uniform", t=1), 0.3, GridSpec(tail_min_p=1e-300))
    with pytest.raises(ParameterError):
        GridSpec(n_points=10, tail_min_p=0.5)


def test_unsupported_model():
    class NoDerivative(DistributionModel):
        def cdf(self, x):
            return np.asarray(x)

        def sf(self, x):
            return 1 - np.asarray(x)

        def ppf(self, p):
            return np.asarray(p)

        def isf(self, p):
            return 1 - np.asarray(p)

    with pytest.raises(UnsupportedModelError):
        cr_constants(NoDerivative({}))
