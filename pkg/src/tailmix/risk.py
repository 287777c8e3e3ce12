"""Value at Risk and Expected Shortfall estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .distributions import GpdParams, StudentT, sample
from .errors import InvalidParameterError, NonIntegrableTailError
from .mixture import FittedMixture, MixtureSpec
from .timeseries import GarchFit, garch_forecast1


@dataclass(frozen=True)
class RiskLevel:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not 0.0 < a < 1.0:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True)
class RiskReport:
    var: float
    es: float
    method: str
    alpha: float

    def __post_init__(self):
        for name in ("var", "es", "alpha"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def to_dict(self) -> dict:
        return {"method": self.method, "alpha": self.alpha, "var": self.var, "es": self.es}


def _alpha(alpha) -> float:
    return alpha.alpha if isinstance(alpha, RiskLevel) else RiskLevel(alpha).alpha


def _losses(losses) -> np.ndarray:
    x = np.asarray(losses, float).ravel()
    if x.size == 0:
        raise InvalidParameterError("empty loss sample")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("losses contain non-finite values")
    return x


def var_empirical(losses, alpha) -> float:
    """The ceil(n*alpha)-th smallest loss."""
    a = _alpha(alpha)
    x = np.sort(_losses(losses))
    # guard ceil against products like 100*0.95 = 95.00000000000001
    k = max(1, math.ceil(x.size * a - 1e-9))
    return float(x[k - 1])


def es_empirical(losses, alpha) -> float:
    x = _losses(losses)
    v = var_empirical(x, alpha)
    return float(np.mean(x[x >= v]))


def var_model(model, alpha) -> float:
    return float(model.ppf(_alpha(alpha)))


def _upper_shape(model) -> float | None:
    """Tail index of the right tail when it is polynomially heavy."""
    if isinstance(model, FittedMixture):
        model = model.spec
    if isinstance(model, MixtureSpec):
        return model.upper.xi
    if isinstance(model, GpdParams):
        return model.xi
    if isinstance(model, StudentT):
        return 1.0 / model.df
    return None


def es_numeric(model, alpha) -> float:
    """Average of the quantile function over (alpha, 1).

    With gamma = 1 - (1 - alpha) e^{-t}, the integral becomes
    int_0^inf Q(gamma(t)) e^{-t} dt which quad handles on a semi-infinite range.
    """
    a = _alpha(alpha)
    xi = _upper_shape(model)
    if xi is not None and xi >= 1.0:
        raise NonIntegrableTailError(f"expected shortfall is infinite for tail index {xi:g} >= 1")
    tail = 1.0 - a

    def f(t):
        w = math.exp(-t)
        q = tail * w
        # integrand decays like w^(1 - xi), so an underflowed q contributes nothing
        return float(model.isf(q)) * w if q > 0.0 else 0.0

    val, _ = integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    if not np.isfinite(val):
        raise NonIntegrableTailError("expected shortfall integral diverged")
    return float(val)


def var_monte_carlo(model, alpha, n: int = 100_000, seed: int = 0) -> float:
    if n < 100:
        raise InvalidParameterError("Monte Carlo VaR needs at least 100 draws")
    return var_empirical(sample(model, n, seed), alpha)


def es_monte_carlo(model, alpha, n: int = 100_000, seed: int = 0) -> float:
    if n < 100:
        raise InvalidParameterError("Monte Carlo ES needs at least 100 draws")
    return es_empirical(sample(model, n, seed), alpha)


def two_step_var_es(garch: GarchFit, residual_model, last_return: float | None, alpha) -> RiskReport:
    """Conditional VaR/ES: mu_{T+1} + sigma_{T+1} times the residual risk measure."""
    a = _alpha(alpha)
    mu, s = garch_forecast1(garch, last_return)
    z_var = var_model(residual_model, a)
    z_es = es_numeric(residual_model, a)
    return RiskReport(mu + s * z_var, mu + s * z_es, "two-step", a)


def risk_report(losses_or_model, alpha, method: str, n: int = 100_000, seed: int = 0) -> RiskReport:
    a = _alpha(alpha)
    if method == "empirical":
        return RiskReport(var_empirical(losses_or_model, a), es_empirical(losses_or_model, a), method, a)
    if method == "model":
        return RiskReport(var_model(losses_or_model, a), es_numeric(losses_or_model, a), method, a)
    if method == "mc":
        return RiskReport(var_monte_carlo(losses_or_model, a, n, seed),
                          es_monte_carlo(losses_or_model, a, n, seed), method, a)
    raise InvalidParameterError(f"unknown risk method {method!r}")
