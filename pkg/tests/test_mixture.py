import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailmix.distributions import Gamma, GpdParams, Normal, sample
from tailmix.errors import InvalidParameterError
from tailmix.mixture import (
    FittedMixture,
    MixtureSpec,
    Parameterized,
    hybrid_junction,
    hybrid_pareto_spec,
    mixture_cdf,
    mixture_pdf,
    mixture_quantile,
    mixture_quantile_bisect,
    solve_continuity,
)

import model_matrix

U90 = 1.2815515655446004
N01 = Normal(0.0, 1.0)


def test_bulk_based_threshold_value():
    spec = MixtureSpec("normGPD", N01, GpdParams(U90, 1.0, 0.1))
    assert mixture_cdf(spec, U90) == pytest.approx(N01.cdf(U90), abs=1e-15)
    assert mixture_quantile(spec, float(N01.cdf(U90))) == pytest.approx(U90, abs=1e-12)


def test_parameterized_threshold_value():
    spec = MixtureSpec("normGPD", N01, GpdParams(U90, 1.0, 0.1), upper_mode=Parameterized(0.1))
    assert mixture_cdf(spec, U90) == pytest.approx(0.9, abs=1e-15)
    assert 1 - mixture_cdf(spec, U90) == pytest.approx(0.1, abs=1e-15)
    assert mixture_quantile(spec, 0.9) == pytest.approx(U90, abs=1e-12)


def test_mixture_cdf_matches_composed_sampler():
    spec = MixtureSpec("normGPD", N01, GpdParams(U90, 1.0, 0.1))
    # the composed sampler draws the bulk below u with prob H(u) and the GPD otherwise
    rng = np.random.default_rng(11)
    n = 2_000_000
    tail = rng.random(n) >= N01.cdf(U90)
    x = np.empty(n)
    m = int(tail.sum())
    x[tail] = spec.upper.ppf(rng.random(m) * (1 - 1e-16) + 1e-17)
    z = rng.standard_normal(4 * (n - m))
    x[~tail] = z[z <= U90][: n - m]
    assert abs(np.mean(x <= 3.0) - mixture_cdf(spec, 3.0)) < 0.002
    # frozen value, independently computed with scipy.stats norm and genpareto
    assert mixture_cdf(spec, 3.0) == pytest.approx(0.9795214658385001, abs=1e-12)


def test_quantile_matches_bisection():
    spec = MixtureSpec("normGPD", N01, GpdParams(U90, 1.0, 0.1))
    for p in (0.3, 0.899, 0.95, 0.999):
        assert mixture_quantile(spec, p) == pytest.approx(mixture_quantile_bisect(spec, p), abs=1e-8)


def test_pdf_just_above_threshold():
    spec = MixtureSpec("normGPD", N01, GpdParams(U90, 0.8, 0.1))
    assert mixture_pdf(spec, np.nextafter(U90, 10)) == pytest.approx((1 - N01.cdf(U90)) / 0.8, rel=1e-12)


def test_solve_continuity_value():
    spec = solve_continuity(MixtureSpec("normGPD", N01, GpdParams(0.0, 1.0, 0.1)))
    assert spec.upper.sigma_u == pytest.approx(0.5 / N01.pdf(0.0), rel=1e-14)
    assert spec.upper.sigma_u == pytest.approx(1.2533141373155001, rel=1e-12)


@pytest.mark.parametrize("name", ["normGPD_con", "normGPD_param_con", "GNG_con", "gammaGPD_con"])
def test_continuity_removes_density_jump(name):
    spec = model_matrix.mixtures()[name]
    for t in spec.thresholds:
        left, right = np.nextafter(t, -np.inf), np.nextafter(t, np.inf)
        assert abs(mixture_pdf(spec, left) - mixture_pdf(spec, right)) < 1e-12


def test_parameterized_continuity_coincides_with_bulk_based():
    u = 0.7
    phi = float(N01.sf(u))
    a = solve_continuity(MixtureSpec("normGPD", N01, GpdParams(u, 1.0, 0.1)))
    b = solve_continuity(MixtureSpec("normGPD", N01, GpdParams(u, 1.0, 0.1), upper_mode=Parameterized(phi)))
    assert a.upper.sigma_u == pytest.approx(b.upper.sigma_u, rel=1e-12)


def test_continuity_rejects_zero_density():
    with pytest.raises(InvalidParameterError):
        solve_continuity(MixtureSpec("normGPD", N01, GpdParams(40.0, 1.0, 0.1)))


def test_gng_degenerates_to_bulk():
    spec = MixtureSpec("GNG", Normal(1, 2), GpdParams(8.0, 1.0, 0.1), lower=GpdParams(-6.0, 1.0, 0.1))
    x = np.linspace(Normal(1, 2).ppf(0.005), Normal(1, 2).ppf(0.995), 400)
    assert np.max(np.abs(spec.cdf(x) - Normal(1, 2).cdf(x))) < 1e-6


def test_gng_lower_tail_is_reflected_gpd():
    spec = model_matrix.mixtures()["GNG_param"]
    lo = spec.lower
    x = lo.u - 0.4
    assert spec.cdf(x) == pytest.approx(0.15 * lo.sf(2 * lo.u - x), rel=1e-13)


def test_hybrid_junction_properties():
    u, s_u, gamma = hybrid_junction(0.0, 1.0, 0.2)
    spec = hybrid_pareto_spec(0.0, 1.0, 0.2)
    f_left = float(spec.pdf(u))
    f_right = (1 / gamma) * spec.upper.pdf(u)
    assert abs(f_left - f_right) < 1e-9
    h = 1e-4
    d_left = (3 * f_left - 4 * spec.pdf(u - h) + spec.pdf(u - 2 * h)) / (2 * h)
    d_right = (-3 * f_right + 4 * spec.pdf(u + h) - spec.pdf(u + 2 * h)) / (2 * h)
    assert abs(d_left - d_right) < 1e-6
    assert model_matrix.integrate_pdf(spec) == pytest.approx(1.0, abs=1e-6)
    assert gamma == pytest.approx(1 + N01.cdf(u), rel=1e-15)


def test_hybrid_junction_location_equivariance():
    a = hybrid_junction(0.0, 1.5, 0.3)
    b = hybrid_junction(4.25, 1.5, 0.3)
    assert b[0] - a[0] == pytest.approx(4.25, abs=1e-12)
    assert b[1] == a[1] and b[2] == a[2]


def test_hybrid_junction_rejects_bad_shape():
    with pytest.raises(InvalidParameterError):
        hybrid_junction(0.0, 1.0, -1.0)


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        MixtureSpec("gammaGPD", Gamma(2, 1), GpdParams(-1.0, 1.0, 0.1))
    with pytest.raises(InvalidParameterError):
        MixtureSpec("GNG", N01, GpdParams(1.0, 1.0, 0.1))
    with pytest.raises(InvalidParameterError):
        MixtureSpec("normGPD", N01, GpdParams(1.0, 1.0, 0.1), lower=GpdParams(-1.0, 1.0, 0.1))
    with pytest.raises(InvalidParameterError):
        MixtureSpec("GNG", N01, GpdParams(1.0, 1.0, 0.1), lower=GpdParams(2.0, 1.0, 0.1))
    with pytest.raises(InvalidParameterError):
        Parameterized(1.0)
    with pytest.raises(InvalidParameterError):
        MixtureSpec("GNG", N01, GpdParams(1.0, 1.0, 0.1), lower=GpdParams(-1.0, 1.0, 0.1),
                    upper_mode=Parameterized(0.6), lower_mode=Parameterized(0.5))


def test_fitted_mixture_requires_finite_loglik():
    spec = model_matrix.mixtures()["normGPD_bulk"]
    with pytest.raises(InvalidParameterError):
        FittedMixture(spec, float("nan"), (10,), True)
    fm = FittedMixture(spec, -12.5, (10,), True)
    assert fm.ppf(0.5) == spec.ppf(0.5)


@pytest.mark.parametrize("name", sorted(model_matrix.mixtures()))
def test_round_trip(name):
    spec = model_matrix.mixtures()[name]
    p = np.array(model_matrix.P_GRID)
    assert np.max(np.abs(spec.cdf(spec.ppf(p)) - p)) <= 1e-8


@pytest.mark.parametrize("name", sorted(model_matrix.mixtures()))
def test_normalization_and_monotone(name):
    spec = model_matrix.mixtures()[name]
    assert model_matrix.integrate_pdf(spec) == pytest.approx(1.0, abs=1e-6)
    x = spec.ppf(np.linspace(1e-4, 1 - 1e-4, 500))
    x = np.sort(np.concatenate([x, np.asarray(spec.thresholds)]))
    assert np.all(np.diff(spec.cdf(x)) >= 0)
    assert np.all(spec.pdf(x) >= 0)


@settings(max_examples=50, deadline=None)
@given(
    u=st.floats(-1.5, 2.5),
    sigma=st.floats(0.05, 5),
    xi=st.floats(-0.5, 1.5),
    phi=st.floats(0.01, 0.6),
    p=st.floats(1e-6, 1 - 1e-6),
)
def test_parameterized_round_trip_property(u, sigma, xi, phi, p):
    spec = MixtureSpec("normGPD", N01, GpdParams(u, sigma, xi), upper_mode=Parameterized(phi))
    assert abs(spec.cdf(spec.ppf(p)) - p) < 1e-8
    assert 1 - spec.cdf(u) == pytest.approx(phi, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(-0.9, 2.0), mu=st.floats(-10, 10), sigma=st.floats(0.1, 10))
def test_hybrid_density_continuous_property(xi, mu, sigma):
    spec = hybrid_pareto_spec(mu, sigma, xi)
    u = spec.upper.u
    right = spec.upper_mode.phi * spec.upper.pdf(u)
    assert abs(spec.pdf(u) - right) <= 1e-9 * max(1.0, right)


def test_sampling_from_mixture_follows_cdf():
    spec = model_matrix.mixtures()["GNG_mixed"]
    x = sample(spec, 200_000, 3)
    for q in (0.05, 0.5, 0.9, 0.99):
        v = spec.ppf(q)
        assert abs(np.mean(x <= v) - q) < 0.004
