"""Return series, descriptive statistics and GARCH(1,1) filtering.

The GARCH model has a constant conditional mean and Gaussian quasi
likelihood.  The variance recursion is started at the sample variance of
the series, which the fit stores so the filter can be replayed exactly on
extended data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DegenerateSampleError, InvalidParameterError, NonConvergenceError
from .estimation import (
    FitReport,
    OptimizerConfig,
    ThresholdSearchConfig,
    _nelder_mead,
    _safe,
    fit_mixture,
)

RETURN_KINDS = ("log", "arithmetic", "loss")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    values: np.ndarray
    timestamps: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InvalidParameterError("prices must be a finite 1-d sequence")
        if np.any(v <= 0):
            raise InvalidParameterError("prices must be strictly positive")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    values: np.ndarray
    kind: str = "log"

    def __post_init__(self):
        if self.kind not in RETURN_KINDS:
            raise InvalidParameterError(f"unknown return kind {self.kind!r}")
        object.__setattr__(self, "values", np.asarray(self.values, float))

    def __len__(self):
        return self.values.size


def _values(series) -> np.ndarray:
    if isinstance(series, (ReturnSeries, PriceSeries)):
        return series.values
    return np.asarray(series, float)


def to_returns(prices, kind: str = "log") -> ReturnSeries:
    p = prices if isinstance(prices, PriceSeries) else PriceSeries(np.asarray(prices, float))
    v = p.values
    if v.size < 2:
        raise InvalidParameterError("need at least two prices to form a return")
    if kind == "log":
        r = np.log(v[1:] / v[:-1])
    elif kind == "arithmetic":
        r = (v[1:] - v[:-1]) / v[:-1]
    else:
        raise InvalidParameterError(f"return kind must be 'log' or 'arithmetic', got {kind!r}")
    return ReturnSeries(r, kind)


def loss_series(returns) -> ReturnSeries:
    """Losses X_t = -R_t.  Applying it to a loss series gives returns back."""
    if isinstance(returns, ReturnSeries):
        back = "log" if returns.kind == "loss" else "loss"
        return ReturnSeries(-returns.values, back)
    return ReturnSeries(-np.asarray(returns, float), "loss")


def describe(series) -> dict[str, float]:
    """Mean, median, extremes, sd (n-1), skewness and non-excess kurtosis."""
    x = _values(series)
    if x.size < 2:
        raise InvalidParameterError("describe needs at least two observations")
    d = x - x.mean()
    m2 = float(np.mean(d**2))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    skew = m3 / m2**1.5 if m2 > 0 else math.nan
    kurt = m4 / m2**2 if m2 > 0 else math.nan
    return {
        "n": float(x.size),
        "mean": float(x.mean()),
        "median": float(np.median(x)),
        "min": float(x.min()),
        "max": float(x.max()),
        "sd": float(np.std(x, ddof=1)),
        "skewness": skew,
        "kurtosis": kurt,
    }


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (lag 0 is exactly 1)."""
    x = np.asarray(series, float)
    if max_lag < 0 or max_lag >= x.size / 2:
        raise InvalidParameterError("max_lag must be below half the series length")
    d = x - x.mean()
    c0 = float(np.dot(d, d))
    if not c0 > 0:
        raise DegenerateSampleError("autocorrelation of a constant series is undefined")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(d[:-k], d[k:])) / c0
    return out


# ---------------------------------------------------------------------------
# GARCH(1,1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GarchParams:
    mu: float
    alpha0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise InvalidParameterError("mu must be finite")
        if not self.alpha0 > 0:
            raise InvalidParameterError("alpha0 must be positive")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise InvalidParameterError("alpha1 and beta1 must be non-negative")
        if not self.alpha1 + self.beta1 < 1:
            raise InvalidParameterError("alpha1 + beta1 must be below 1 (covariance stationarity)")

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha1 - self.beta1)


@dataclass(frozen=True, eq=False)
class GarchFit:
    params: GarchParams
    cond_sd: np.ndarray
    residuals: np.ndarray
    log_likelihood: float
    init_var: float
    last_return: float
    converged: bool = True


def _cond_var(params: GarchParams, r: np.ndarray, init_var: float) -> np.ndarray:
    e2 = (r - params.mu) ** 2
    drive = params.alpha0 + params.alpha1 * e2[:-1]
    out = np.empty(r.size)
    out[0] = init_var
    if r.size > 1:
        out[1:], _ = signal.lfilter([1.0], [1.0, -params.beta1], drive, zi=[params.beta1 * init_var])
    return out


def garch_filter(params: GarchParams, returns, init_var: float | None = None):
    """Run the variance recursion; returns (cond_sd, standardized residuals)."""
    r = _values(returns)
    if r.size < 1:
        raise InvalidParameterError("empty series")
    v0 = float(np.var(r)) if init_var is None else float(init_var)
    if not v0 > 0:
        v0 = params.unconditional_variance
    sd = np.sqrt(_cond_var(params, r, v0))
    return sd, (r - params.mu) / sd


def garch_loglik(params: GarchParams, r: np.ndarray, init_var: float) -> float:
    s2 = _cond_var(params, r, init_var)
    return float(-0.5 * np.sum(np.log(2.0 * math.pi * s2) + (r - params.mu) ** 2 / s2))


def _unpack(theta, loc: float, scale: float) -> GarchParams:
    # persistence = alpha1 + beta1 in (0, 1); alpha1 its share
    pers = 1.0 / (1.0 + math.exp(-theta[2]))
    share = 1.0 / (1.0 + math.exp(-theta[3]))
    return GarchParams(loc + scale * theta[0], scale**2 * math.exp(theta[1]), pers * share, pers * (1.0 - share))


def _pack(p: GarchParams, loc: float, scale: float) -> np.ndarray:
    pers = p.alpha1 + p.beta1
    share = p.alpha1 / pers
    return np.array([(p.mu - loc) / scale, math.log(p.alpha0 / scale**2),
                     math.log(pers / (1 - pers)), math.log(share / (1 - share))])


def fit_garch11(returns, opt: OptimizerConfig | None = None) -> GarchFit:
    """Gaussian quasi-MLE of a constant-mean GARCH(1,1)."""
    opt = opt or OptimizerConfig()
    r = _values(returns)
    if r.size < 100:
        raise InvalidParameterError(f"GARCH fit needs at least 100 observations, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise InvalidParameterError("returns contain non-finite values")
    v = float(np.var(r))
    if not v > 0:
        raise DegenerateSampleError("zero-variance series")
    loc, scale = float(np.mean(r)), math.sqrt(v)

    @_safe
    def negll(theta):
        return -garch_loglik(_unpack(theta, loc, scale), r, v)

    best = None
    for a1, b1 in ((0.1, 0.8), (0.05, 0.5)):
        start = _pack(GarchParams(loc, v * (1 - a1 - b1), a1, b1), loc, scale)
        res = _nelder_mead(negll, start, [0.1, 0.3, 0.5, 0.5], opt, seed=11)
        if res is not None and (best is None or res.fun < best.fun):
            best = res
    if best is None or not np.isfinite(best.fun):
        raise NonConvergenceError("GARCH likelihood infeasible at every start")
    params = _unpack(best.x, loc, scale)
    sd, z = garch_filter(params, r, v)
    return GarchFit(params, sd, z, -float(best.fun), v, float(r[-1]), bool(best.success))


def garch_forecast1(fit: GarchFit, last_return: float | None = None) -> tuple[float, float]:
    """One-step-ahead conditional mean and standard deviation."""
    p = fit.params
    last = fit.last_return if last_return is None else float(last_return)
    s2 = p.alpha0 + p.alpha1 * (last - p.mu) ** 2 + p.beta1 * float(fit.cond_sd[-1]) ** 2
    return p.mu, math.sqrt(s2)


def two_step_fit(
    returns,
    kind: str,
    mode: str | None = None,
    continuity: bool = False,
    cfg: ThresholdSearchConfig | None = None,
    opt: OptimizerConfig | None = None,
    rescale: str | None = None,
    bandwidth: float | None = None,
) -> tuple[GarchFit, FitReport]:
    """Fit GARCH(1,1), then an extreme value mixture to its residuals.

    ``rescale`` selects the scale the mixture is fitted on: ``None`` fits
    the standardized residuals z_t directly; ``"forecast"`` fits
    mu + sigma_{T+1} z_t and ``"unconditional"`` fits mu + sigma_inf z_t,
    which places the mixture on the data scale.
    """
    fit = fit_garch11(returns, opt)
    z = fit.residuals
    if rescale is not None:
        mu, s = residual_scale(fit, rescale)
        z = mu + s * z
    report = fit_mixture(z, kind, mode=mode, continuity=continuity, cfg=cfg, opt=opt, bandwidth=bandwidth)
    return fit, report


def residual_scale(fit: GarchFit, how: str) -> tuple[float, float]:
    if how == "forecast":
        return garch_forecast1(fit)
    if how == "unconditional":
        return fit.params.mu, math.sqrt(fit.params.unconditional_variance)
    raise InvalidParameterError(f"unknown residual rescaling {how!r}")
