import math

import numpy as np
import pytest
from scipy import stats

from bisconcave.bands import (
    Band, QuantileCache, QuantileEstimate, build_band, ks_band, ks_quantile, ks_statistics, massart_bound,
    mc_quantile, simulate_statistics, wks_band, wks_quantile, wks_statistics,
)
from bisconcave.errors import CalibrationError, ConfigError, ParameterError
from bisconcave.families import make_family
from bisconcave.grid import SampleData, empirical_cdf


def test_massart_values():
    assert massart_bound(0.05) == pytest.approx(1.3581, abs=1e-4)
    assert massart_bound(0.5) == pytest.approx(0.8326, abs=1e-4)
    with pytest.raises(ParameterError):
        massart_bound(2)


def test_ks_statistic_matches_scipy():
    rng = np.random.default_rng(5)
    for n in (2, 7, 50):
        u = np.sort(rng.random(n))
        ref = stats.kstest(u, "uniform").statistic * math.sqrt(n)
        assert ks_statistics(u[None, :])[0] == pytest.approx(ref, rel=1e-12)


def test_wks_statistic_reduces_to_discrete_ks_at_zero_weight():
    u = np.sort(np.random.default_rng(0).random((3, 20)), axis=1)
    t = np.arange(1, 21) / 21
    expected = math.sqrt(20) * np.max(np.abs(u - t), axis=1)
    assert np.allclose(wks_statistics(u, 0.0), expected)


def test_quantile_preconditions():
    with pytest.raises(ParameterError):
        ks_quantile(1, 0.05, 1000)
    with pytest.raises(CalibrationError):
        ks_quantile(10, 0.05, 999)
    with pytest.raises(ParameterError):
        wks_quantile(10, 0.05, 0.6, 1000)
    with pytest.raises(ParameterError):
        ks_quantile(10, 1.0, 1000)


def test_ks_quantile_two_seed_agreement():
    a = ks_quantile(100, 0.05, 50000, seed=1)
    b = ks_quantile(100, 0.05, 50000, seed=2)
    assert abs(a.kappa - b.kappa) <= 0.01
    assert a.kappa <= massart_bound(0.05)


def test_wks_quantile_two_seed_agreement():
    a = wks_quantile(100, 0.05, 0.4, 50000, seed=1)
    b = wks_quantile(100, 0.05, 0.4, 50000, seed=2)
    assert abs(a.kappa - b.kappa) <= 0.02
    assert 0.5 < a.kappa < 5


def test_quantile_is_deterministic_and_worker_independent():
    a = simulate_statistics("ks", 30, 5000, 9, workers=1)
    b = simulate_statistics("ks", 30, 5000, 9, workers=4)
    assert np.array_equal(a, b)
    assert ks_quantile(30, 0.05, 5000, 9).kappa == ks_quantile(30, 0.05, 5000, 9, workers=3).kappa


def test_mc_quantile_uses_ceiling_order_statistic():
    stats_ = np.arange(1, 1001, dtype=float)
    assert mc_quantile(stats_, 0.05) == 950.0
    assert mc_quantile(stats_, 0.0505) == 950.0


def test_exact_calibration_against_fresh_replications():
    M = 50000
    q = ks_quantile(50, 0.05, M, seed=11)
    fresh = simulate_statistics("ks", 50, M, seed=12)
    cover = np.mean(fresh <= q.kappa)
    assert abs(cover - 0.95) <= 3 * math.sqrt(0.05 * 0.95 / M)


def test_distribution_free_through_model_cdf():
    # transformed model samples give the same statistic as the uniforms they came from
    model = make_family("student_t", r=3)
    u = np.sort(model.uniforms(40, 17))
    x = model.draw(40, 17)
    back = np.sort(model.cdf(x))
    assert np.allclose(back, u, atol=1e-9)
    assert ks_statistics(back[None, :])[0] == pytest.approx(ks_statistics(u[None, :])[0], abs=1e-8)


def _sample(n=100, seed=0):
    return make_family("student_t", r=1).sample(n, seed)


def test_ks_band_shape(ks_q):
    s = _sample()
    q = QuantileEstimate(1.3581, 100, 0.05, 1000, 0)
    band = ks_band(s, 0.05, q)
    ecdf = empirical_cdf(s)
    mid = (ecdf.values > 0.2) & (ecdf.values < 0.8)
    assert np.allclose((band.upper.values - ecdf.values)[mid], 0.13581)
    assert band.lower(-1e9) == 0.0 and band.upper(-1e9) == pytest.approx(0.13581)
    lo, up = band.knot_bounds()
    assert np.all(lo <= ecdf.values) and np.all(ecdf.values <= band.upper.values)
    assert np.all((0 <= lo) & (up <= 1)) and np.all(np.diff(band.lower.values) >= 0)


def test_zero_kappa_band_pinches_to_ecdf():
    s = _sample(20)
    band = ks_band(s, 0.05, QuantileEstimate(0.0, 20, 0.05, 1000, 0))
    assert np.array_equal(band.lower.values, band.upper.values)


def test_band_checks_matching_n(ks_q):
    with pytest.raises(ConfigError):
        ks_band(_sample(50), 0.05, ks_q(100))


def test_wks_band_zero_kappa_gives_plotting_positions():
    s = _sample(9)
    band = wks_band(s, 0.05, 0.3, QuantileEstimate(0.0, 9, 0.05, 1000, 0, "wks", 0.3))
    t = np.arange(1, 10) / 10
    assert np.allclose(band.lower.values, t)
    assert np.allclose(band.upper.values, np.append(t[1:], 1.0))
    assert band.lower(-1e9) == 0.0


def test_wks_narrower_than_ks_in_the_tails(ks_q, wks_q):
    s = _sample(100)
    ks = ks_band(s, 0.05, ks_q(100))
    wks = wks_band(s, 0.05, 0.4, wks_q(100, 0.4))
    x = s.unique
    w_ks = ks.upper(x) - ks.lower(x)
    w_wks = wks.upper(x) - wks.lower(x)
    assert np.all((w_wks < w_ks)[:5]) and np.all((w_wks < w_ks)[-5:])


def test_infeasible_sentinel():
    b = Band.infeasible(np.array([0.0, 1.0]), 0.05, "ks", -1.0)
    assert not b.feasible
    assert np.all(b.lower(np.array([-5, 0.5, 5])) == 1) and np.all(b.upper(np.array([-5, 0.5, 5])) == 0)


def test_quantile_cache_round_trip(tmp_path):
    path = tmp_path / "q.json"
    cache = QuantileCache(path)
    q = cache.get("ks", 20, 0.05, 0.0, 2000, 3)
    again = QuantileCache(path).get("ks", 20, 0.05, 0.0, 2000, 3)
    assert q == again
    band = build_band(SampleData(np.arange(20.0)), "ks", 0.05, reps=2000, seed=3, cache=QuantileCache(path))
    assert band.kappa == q.kappa
    path.write_text('{"schema_version": 99, "entries": {}}')
    with pytest.raises(ConfigError):
        QuantileCache(path)
