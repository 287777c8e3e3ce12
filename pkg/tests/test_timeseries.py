import math

import numpy as np
import pytest

from tailmix.distributions import Gamma, Normal, sample
from tailmix.errors import DegenerateSampleError, InvalidParameterError, SupportViolationError
from tailmix.estimation import ThresholdSearchConfig
from tailmix.simulation import PopulationSpec, sample_population
from tailmix.timeseries import (
    GarchParams,
    PriceSeries,
    ReturnSeries,
    acf,
    describe,
    fit_garch11,
    garch_filter,
    garch_forecast1,
    garch_loglik,
    loss_series,
    to_returns,
    two_step_fit,
)


def simulate_garch(n, seed, mu=0.0, a0=0.05, a1=0.10, b1=0.85, burn=500):
    z = np.random.default_rng(seed).standard_normal(n + burn)
    r = np.empty(n + burn)
    s2 = a0 / (1 - a1 - b1)
    for t in range(n + burn):
        r[t] = mu + math.sqrt(s2) * z[t]
        s2 = a0 + a1 * (r[t] - mu) ** 2 + b1 * s2
    return r[burn:]


def test_returns_examples():
    assert to_returns([100, 110], "log").values[0] == pytest.approx(math.log(1.1), rel=1e-15)
    assert to_returns([100, 110], "arithmetic").values[0] == pytest.approx(0.1, rel=1e-15)
    assert np.array_equal(to_returns([100, 100, 100]).values, [0.0, 0.0])


def test_log_returns_accumulate():
    p = np.array([100.0, 103.0, 99.5, 120.25, 118.0])
    r = to_returns(p).values
    np.testing.assert_allclose(np.cumsum(r), np.log(p[1:] / p[0]), rtol=1e-14)


def test_returns_errors():
    with pytest.raises(InvalidParameterError):
        to_returns([100.0])
    with pytest.raises(InvalidParameterError):
        to_returns([100.0, 0.0, 3.0])
    with pytest.raises(InvalidParameterError):
        PriceSeries(np.array([1.0, -1.0]))


def test_loss_series():
    r = ReturnSeries(np.array([0.1, -0.2]), "log")
    loss = loss_series(r)
    assert loss.kind == "loss"
    np.testing.assert_array_equal(loss.values, [-0.1, 0.2])
    np.testing.assert_array_equal(loss_series(ReturnSeries(np.array([0.0]))).values, [0.0])
    np.testing.assert_array_equal(loss_series(loss_series(r)).values, r.values)


def test_describe_examples():
    d = describe([-1.0, 0.0, 1.0])
    assert d["mean"] == 0 and d["median"] == 0 and d["skewness"] == 0
    assert d["sd"] == pytest.approx(1.0)
    assert describe([1.0, 1.0, 1.0, 9.0])["skewness"] > 0
    with pytest.raises(InvalidParameterError):
        describe([1.0])


def test_describe_normal_kurtosis():
    d = describe(np.random.default_rng(0).standard_normal(1_000_000))
    assert 2.95 <= d["kurtosis"] <= 3.05


def test_acf_basics():
    x = np.random.default_rng(1).standard_normal(100_000)
    r = acf(x, 5)
    assert r[0] == 1.0
    assert abs(r[1]) < 0.02
    with pytest.raises(DegenerateSampleError):
        acf(np.ones(50), 3)
    with pytest.raises(InvalidParameterError):
        acf(x[:10], 5)


def test_garch_params_validation():
    with pytest.raises(InvalidParameterError):
        GarchParams(0, 0.0, 0.1, 0.8)
    with pytest.raises(InvalidParameterError):
        GarchParams(0, 0.1, -0.1, 0.8)
    with pytest.raises(InvalidParameterError):
        GarchParams(0, 0.1, 0.3, 0.7)


def test_filter_constant_variance_case():
    r = np.random.default_rng(2).normal(0.3, 2.0, 50)
    p = GarchParams(0.3, 4.0, 0.0, 0.0)
    sd, z = garch_filter(p, r, init_var=4.0)
    np.testing.assert_allclose(sd, 2.0, rtol=1e-15)
    np.testing.assert_allclose(z, (r - 0.3) / 2.0, rtol=1e-15)


def test_filter_matches_explicit_loop():
    r = simulate_garch(300, 3)
    p = GarchParams(0.01, 0.05, 0.1, 0.85)
    sd, z = garch_filter(p, r, init_var=0.7)
    s2 = np.empty(r.size)
    s2[0] = 0.7
    for t in range(1, r.size):
        s2[t] = p.alpha0 + p.alpha1 * (r[t - 1] - p.mu) ** 2 + p.beta1 * s2[t - 1]
    np.testing.assert_allclose(sd, np.sqrt(s2), rtol=1e-13)
    assert np.array_equal(garch_filter(p, r, 0.7)[1], z)
    assert sd.size == r.size and np.all(sd > 0)


def test_garch_fit_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        fit_garch11(np.random.default_rng(0).standard_normal(50))
    with pytest.raises(DegenerateSampleError):
        fit_garch11(np.zeros(200))


def test_garch_fit_recovers_parameters():
    est = []
    for s in range(8):
        p = fit_garch11(simulate_garch(5000, s)).params
        est.append([p.alpha0, p.alpha1, p.beta1])
    med = np.median(est, axis=0)
    np.testing.assert_allclose(med, [0.05, 0.10, 0.85], atol=0.10)


def test_garch_fit_is_local_maximum_and_stationary():
    r = simulate_garch(2000, 11)
    fit = fit_garch11(r)
    p = fit.params
    assert p.alpha1 + p.beta1 < 1
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 32:
        f = 1 + rng.uniform(-0.1, 0.1, 4)
        try:
            q = GarchParams(p.mu * f[0], p.alpha0 * f[1], p.alpha1 * f[2], p.beta1 * f[3])
        except InvalidParameterError:
            continue
        assert garch_loglik(q, r, fit.init_var) <= fit.log_likelihood + 1e-7
        checked += 1


def test_garch_on_white_noise_leaves_white_residuals():
    fit = fit_garch11(np.random.default_rng(9).standard_normal(3000))
    assert abs(acf(fit.residuals**2, 1)[1]) < 0.05


def test_residuals_are_standardized():
    fit = fit_garch11(simulate_garch(2000, 4))
    assert 0.9 <= np.std(fit.residuals, ddof=1) <= 1.1
    assert fit.residuals.size == fit.cond_sd.size == 2000


def test_forecast_properties():
    r = simulate_garch(1000, 6)
    fit = fit_garch11(r)
    mu, s = garch_forecast1(fit)
    sd_ext, _ = garch_filter(fit.params, np.append(r, 0.0), fit.init_var)
    assert s == pytest.approx(sd_ext[-1], rel=1e-13)
    assert mu == fit.params.mu
    lo = garch_forecast1(fit, fit.params.mu + 0.1)[1]
    hi = garch_forecast1(fit, fit.params.mu + 1.0)[1]
    assert hi > lo


def test_forecast_without_dynamics():
    from tailmix.timeseries import GarchFit

    p = GarchParams(0.0, 2.0, 0.0, 0.0)
    fit = GarchFit(p, np.full(10, math.sqrt(2)), np.zeros(10), -1.0, 2.0, 0.0)
    for last in (-5.0, 0.0, 3.0):
        assert garch_forecast1(fit, last)[1] == pytest.approx(math.sqrt(2.0), rel=1e-15)


def test_two_step_removes_volatility_clustering():
    pop = PopulationSpec.parse("gamma(5,1):ar1=0.7")
    raw, res = [], []
    for s in range(5):
        x = sample_population(pop, 1000, s)
        fit, rep = two_step_fit(x, "normGPD")
        raw.append(abs(acf(x**2, 1)[1]))
        res.append(abs(acf(fit.residuals**2, 1)[1]))
        assert np.isfinite(rep.best.log_likelihood)
    assert np.median(raw) > 0.1 and np.median(res) < 0.1


def test_two_step_pass_through_on_iid_input():
    x = sample(Normal(2.0, 3.0), 2000, 8)
    fit, rep = two_step_fit(x, "normGPD")
    z = (x - x.mean()) / x.std()
    for p in (0.1, 0.5, 0.9, 0.99):
        assert abs(rep.best.ppf(p) - np.quantile(z, p)) < 0.15


def test_two_step_propagates_support_violation():
    x = sample(Gamma(5, 1), 500, 1)
    with pytest.raises(SupportViolationError):
        two_step_fit(x, "gammaGPD")


def test_two_step_rescaled_fit_uses_data_scale():
    x = sample_population(PopulationSpec.parse("gamma(5,1):ar1=0.3"), 1000, 3)
    fit, rep = two_step_fit(x, "gammaGPD", rescale="forecast",
                            cfg=ThresholdSearchConfig((0.8, 0.85, 0.9)))
    assert rep.best.spec.kind == "gammaGPD"
    assert 3.0 < rep.best.ppf(0.5) < 7.0
