"""Univariate distributions: GPD and GEV tails plus the bulk families.

Every object exposes the same vectorised surface (``pdf``, ``logpdf``,
``cdf``, ``sf``, ``ppf``, ``isf``) so mixtures, risk measures and the
simulation harness can treat them interchangeably.  Evaluation outside the
support is total: the CDF saturates at 0 or 1 and the density is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidParameterError, NonConvergenceError

# |xi| below this uses the exponential / Gumbel limit branch.
XI_EPS = 1e-8

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_float(x, res):
    if np.ndim(x) == 0:
        return float(np.asarray(res).reshape(()))
    return res


def _check_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0.0) | ~(p < 1.0)):
        raise InvalidParameterError("probability must lie strictly inside (0, 1)")
    return p


def _positive(name: str, value: float) -> None:
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")


def _finite(name: str, value: float) -> None:
    if not np.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


# ---------------------------------------------------------------------------
# Generalized Pareto
# ---------------------------------------------------------------------------


def _gpd_logpdf_excess(y, sigma, xi):
    """Log density of the GPD excess ``y = x - u`` (vectorised)."""
    y = np.asarray(y, dtype=float)
    z = y / sigma
    out = np.full(z.shape, -np.inf)
    if abs(xi) < XI_EPS:
        ok = z >= 0
        out[ok] = -math.log(sigma) - z[ok]
        return out
    t = xi * z
    ok = (z >= 0) & (t > -1.0)
    out[ok] = -math.log(sigma) - (1.0 / xi + 1.0) * np.log1p(t[ok])
    return out


def _gpd_cdf_excess(y, sigma, xi):
    y = np.asarray(y, dtype=float)
    z = np.maximum(y / sigma, 0.0)
    if abs(xi) < XI_EPS:
        return -np.expm1(-z)
    t = xi * z
    out = np.ones(z.shape)
    ok = t > -1.0
    out[ok] = -np.expm1(-np.log1p(t[ok]) / xi)
    return out


def _gpd_sf_excess(y, sigma, xi):
    y = np.asarray(y, dtype=float)
    z = np.maximum(y / sigma, 0.0)
    if abs(xi) < XI_EPS:
        return np.exp(-z)
    t = xi * z
    out = np.zeros(z.shape)
    ok = t > -1.0
    out[ok] = np.exp(-np.log1p(t[ok]) / xi)
    return out


def _gpd_isf_excess(q, sigma, xi):
    """Excess level whose survival probability is ``q``."""
    logq = np.log(q)
    if abs(xi) < XI_EPS:
        return -sigma * logq
    return sigma * np.expm1(-xi * logq) / xi


@dataclass(frozen=True)
class GpdParams:
    """Generalized Pareto tail above threshold ``u``."""

    u: float
    sigma_u: float
    xi: float

    def __post_init__(self):
        _finite("u", self.u)
        _positive("sigma_u", self.sigma_u)
        _finite("xi", self.xi)

    @property
    def upper_endpoint(self) -> float:
        if self.xi < 0 and abs(self.xi) >= XI_EPS:
            return self.u - self.sigma_u / self.xi
        return math.inf

    @property
    def support(self) -> tuple[float, float]:
        return (self.u, self.upper_endpoint)

    def logpdf(self, x):
        return _as_float(x, _gpd_logpdf_excess(np.asarray(x, float) - self.u, self.sigma_u, self.xi))

    def pdf(self, x):
        return _as_float(x, np.exp(_gpd_logpdf_excess(np.asarray(x, float) - self.u, self.sigma_u, self.xi)))

    def cdf(self, x):
        return _as_float(x, _gpd_cdf_excess(np.asarray(x, float) - self.u, self.sigma_u, self.xi))

    def sf(self, x):
        return _as_float(x, _gpd_sf_excess(np.asarray(x, float) - self.u, self.sigma_u, self.xi))

    def ppf(self, p):
        p = _check_prob(p)
        # log1p keeps precision for small p
        l1p = np.log1p(-p)
        if abs(self.xi) < XI_EPS:
            return _as_float(p, self.u - self.sigma_u * l1p)
        return _as_float(p, self.u + self.sigma_u * np.expm1(-self.xi * l1p) / self.xi)

    def isf(self, q):
        q = _check_prob(q)
        return _as_float(q, self.u + _gpd_isf_excess(q, self.sigma_u, self.xi))

    def mean_excess(self, v: float) -> float:
        """E[X - v | X > v] for v >= u; requires xi < 1."""
        if self.xi >= 1:
            return math.inf
        return (self.sigma_u + self.xi * (v - self.u)) / (1.0 - self.xi)


def gpd_cdf(params: GpdParams, x):
    return params.cdf(x)


def gpd_pdf(params: GpdParams, x):
    return params.pdf(x)


def gpd_quantile(params: GpdParams, p):
    return params.ppf(p)


# ---------------------------------------------------------------------------
# Generalized extreme value
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GevParams:
    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        _finite("mu", self.mu)
        _positive("sigma", self.sigma)
        _finite("xi", self.xi)

    @property
    def support(self) -> tuple[float, float]:
        if abs(self.xi) < XI_EPS:
            return (-math.inf, math.inf)
        edge = self.mu - self.sigma / self.xi
        return (edge, math.inf) if self.xi > 0 else (-math.inf, edge)

    def _reduced(self, x):
        """Return (s, t, ok) with t = -log G(x) on the support."""
        s = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        # t overflowing to inf is the correct limit (G = 0)
        with np.errstate(over="ignore"):
            if abs(self.xi) < XI_EPS:
                return s, np.exp(-s), np.ones(s.shape, bool)
            a = self.xi * s
            ok = a > -1.0
            t = np.full(s.shape, np.nan)
            t[ok] = np.exp(-np.log1p(a[ok]) / self.xi)
        return s, t, ok

    def cdf(self, x):
        s, t, ok = self._reduced(x)
        outside = 0.0 if self.xi > 0 else 1.0
        out = np.where(ok, np.exp(-np.where(ok, t, 0.0)), outside)
        return _as_float(x, out)

    def logpdf(self, x):
        s, t, ok = self._reduced(x)
        out = np.full(s.shape, -np.inf)
        if abs(self.xi) < XI_EPS:
            out = -math.log(self.sigma) - s - t
        else:
            a = self.xi * s[ok]
            out[ok] = -math.log(self.sigma) - (1.0 + 1.0 / self.xi) * np.log1p(a) - t[ok]
        return _as_float(x, out)

    def pdf(self, x):
        return _as_float(x, np.exp(self.logpdf(np.asarray(x, float))))

    def sf(self, x):
        s, t, ok = self._reduced(x)
        outside = 1.0 if self.xi > 0 else 0.0
        out = np.where(ok, -np.expm1(-np.where(ok, t, 0.0)), outside)
        return _as_float(x, out)

    def ppf(self, p):
        p = _check_prob(p)
        y = -np.log(-np.log(p))
        return _as_float(p, self._from_gumbel(y))

    def isf(self, q):
        q = _check_prob(q)
        y = -np.log(-np.log1p(-q))
        return _as_float(q, self._from_gumbel(y))

    def _from_gumbel(self, y):
        if abs(self.xi) < XI_EPS:
            return self.mu + self.sigma * y
        return self.mu + self.sigma * np.expm1(self.xi * y) / self.xi


def gev_cdf(params: GevParams, x):
    return params.cdf(x)


def gev_pdf(params: GevParams, x):
    return params.pdf(x)


# ---------------------------------------------------------------------------
# Bulk families
# ---------------------------------------------------------------------------


class BulkFamily:
    """Common surface of every bulk distribution."""

    name = "bulk"
    support: tuple[float, float] = (-math.inf, math.inf)

    def logpdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return _as_float(x, 1.0 - np.asarray(self.cdf(np.asarray(x, float))))

    def _ppf(self, p):
        raise NotImplementedError

    def _isf(self, q):
        return self._ppf(1.0 - q)

    def pdf(self, x):
        return _as_float(x, np.exp(self.logpdf(np.asarray(x, float))))

    def ppf(self, p):
        p = _check_prob(p)
        return _as_float(p, self._ppf(p))

    def isf(self, q):
        q = _check_prob(q)
        return _as_float(q, self._isf(q))

    def params(self) -> dict[str, float]:
        return {}


@dataclass(frozen=True)
class Normal(BulkFamily):
    mean: float = 0.0
    sd: float = 1.0
    name = "normal"

    def __post_init__(self):
        _finite("mean", self.mean)
        _positive("sd", self.sd)

    def logpdf(self, x):
        z = (np.asarray(x, float) - self.mean) / self.sd
        return _as_float(x, -0.5 * z * z - math.log(self.sd) - _LOG_SQRT_2PI)

    def cdf(self, x):
        return _as_float(x, special.ndtr((np.asarray(x, float) - self.mean) / self.sd))

    def sf(self, x):
        return _as_float(x, special.ndtr((self.mean - np.asarray(x, float)) / self.sd))

    def _ppf(self, p):
        return self.mean + self.sd * special.ndtri(p)

    def _isf(self, q):
        return self.mean - self.sd * special.ndtri(q)

    def params(self):
        return {"mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class LogNormal(BulkFamily):
    meanlog: float = 0.0
    sdlog: float = 1.0
    name = "lognormal"
    support = (0.0, math.inf)

    def __post_init__(self):
        _finite("meanlog", self.meanlog)
        _positive("sdlog", self.sdlog)

    def _z(self, x):
        x = np.asarray(x, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, (np.log(np.where(x > 0, x, 1.0)) - self.meanlog) / self.sdlog, -np.inf)

    def logpdf(self, x):
        xa = np.asarray(x, float)
        z = self._z(xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                xa > 0,
                -0.5 * np.where(xa > 0, z, 0.0) ** 2 - np.log(np.where(xa > 0, xa, 1.0)) - math.log(self.sdlog) - _LOG_SQRT_2PI,
                -np.inf,
            )
        return _as_float(x, out)

    def cdf(self, x):
        return _as_float(x, special.ndtr(self._z(x)))

    def sf(self, x):
        return _as_float(x, special.ndtr(-self._z(x)))

    def _ppf(self, p):
        return np.exp(self.meanlog + self.sdlog * special.ndtri(p))

    def _isf(self, q):
        return np.exp(self.meanlog - self.sdlog * special.ndtri(q))

    def params(self):
        return {"meanlog": self.meanlog, "sdlog": self.sdlog}


@dataclass(frozen=True)
class Gamma(BulkFamily):
    shape: float = 1.0
    scale: float = 1.0
    name = "gamma"
    support = (0.0, math.inf)

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    def logpdf(self, x):
        xa = np.asarray(x, float)
        y = np.where(xa > 0, xa / self.scale, 1.0)
        out = special.xlogy(self.shape - 1.0, y) - y - special.gammaln(self.shape) - math.log(self.scale)
        return _as_float(x, np.where(xa > 0, out, -np.inf))

    def cdf(self, x):
        xa = np.maximum(np.asarray(x, float), 0.0)
        return _as_float(x, special.gammainc(self.shape, xa / self.scale))

    def sf(self, x):
        xa = np.maximum(np.asarray(x, float), 0.0)
        return _as_float(x, special.gammaincc(self.shape, xa / self.scale))

    def _ppf(self, p):
        return self.scale * special.gammaincinv(self.shape, p)

    def _isf(self, q):
        return self.scale * special.gammainccinv(self.shape, q)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Weibull(BulkFamily):
    shape: float = 1.0
    scale: float = 1.0
    name = "weibull"
    support = (0.0, math.inf)

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    def logpdf(self, x):
        xa = np.asarray(x, float)
        y = np.where(xa > 0, xa / self.scale, 1.0)
        out = math.log(self.shape / self.scale) + (self.shape - 1.0) * np.log(y) - y**self.shape
        return _as_float(x, np.where(xa > 0, out, -np.inf))

    def cdf(self, x):
        y = np.maximum(np.asarray(x, float), 0.0) / self.scale
        return _as_float(x, -np.expm1(-(y**self.shape)))

    def sf(self, x):
        y = np.maximum(np.asarray(x, float), 0.0) / self.scale
        return _as_float(x, np.exp(-(y**self.shape)))

    def _ppf(self, p):
        return self.scale * (-np.log1p(-p)) ** (1.0 / self.shape)

    def _isf(self, q):
        return self.scale * (-np.log(q)) ** (1.0 / self.shape)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class ReverseWeibull(BulkFamily):
    """Negated Weibull variate; support (-inf, 0]."""

    shape: float = 1.0
    scale: float = 1.0
    name = "reverse_weibull"
    support = (-math.inf, 0.0)

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    @property
    def _w(self) -> Weibull:
        return Weibull(self.shape, self.scale)

    def logpdf(self, x):
        return _as_float(x, self._w.logpdf(-np.asarray(x, float)))

    def cdf(self, x):
        return _as_float(x, self._w.sf(-np.asarray(x, float)))

    def sf(self, x):
        return _as_float(x, self._w.cdf(-np.asarray(x, float)))

    def _ppf(self, p):
        return -self._w._isf(p)

    def _isf(self, q):
        return -self._w._ppf(q)

    def params(self):
        return {"shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Gumbel(BulkFamily):
    """Gumbel for maxima."""

    loc: float = 0.0
    scale: float = 1.0
    name = "gumbel"

    def __post_init__(self):
        _finite("loc", self.loc)
        _positive("scale", self.scale)

    def logpdf(self, x):
        z = (np.asarray(x, float) - self.loc) / self.scale
        with np.errstate(over="ignore"):
            return _as_float(x, -math.log(self.scale) - z - np.exp(-z))

    def cdf(self, x):
        z = (np.asarray(x, float) - self.loc) / self.scale
        with np.errstate(over="ignore"):
            return _as_float(x, np.exp(-np.exp(-z)))

    def sf(self, x):
        z = (np.asarray(x, float) - self.loc) / self.scale
        with np.errstate(over="ignore"):
            return _as_float(x, -np.expm1(-np.exp(-z)))

    def _ppf(self, p):
        return self.loc - self.scale * np.log(-np.log(p))

    def _isf(self, q):
        return self.loc - self.scale * np.log(-np.log1p(-q))

    def params(self):
        return {"loc": self.loc, "scale": self.scale}


@dataclass(frozen=True)
class StudentT(BulkFamily):
    """Standard Student-t shifted by ``loc``."""

    df: float = 5.0
    loc: float = 0.0
    name = "student_t"

    def __post_init__(self):
        _positive("df", self.df)
        _finite("loc", self.loc)

    def logpdf(self, x):
        t = np.asarray(x, float) - self.loc
        v = self.df
        c = special.gammaln(0.5 * (v + 1)) - special.gammaln(0.5 * v) - 0.5 * math.log(v * math.pi)
        return _as_float(x, c - 0.5 * (v + 1) * np.log1p(t * t / v))

    def cdf(self, x):
        return _as_float(x, special.stdtr(self.df, np.asarray(x, float) - self.loc))

    def sf(self, x):
        return _as_float(x, special.stdtr(self.df, self.loc - np.asarray(x, float)))

    def _ppf(self, p):
        return self.loc + special.stdtrit(self.df, p)

    def _isf(self, q):
        return self.loc - special.stdtrit(self.df, q)

    def params(self):
        return {"df": self.df, "loc": self.loc}


@dataclass(frozen=True, eq=False)
class Kernel(BulkFamily):
    """Equal-weight Gaussian kernel density on ``points`` with bandwidth ``bandwidth``."""

    points: np.ndarray = field(repr=False)
    bandwidth: float = 1.0
    name = "kernel"

    _CHUNK = 2_000_000

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=float).ravel())
        if pts.size == 0 or not np.all(np.isfinite(pts)):
            raise InvalidParameterError("kernel points must be non-empty and finite")
        _positive("bandwidth", self.bandwidth)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def _reduce(self, x, fn):
        xa = np.atleast_1d(np.asarray(x, float)).ravel()
        out = np.empty(xa.size)
        step = max(1, self._CHUNK // self.points.size)
        for i in range(0, xa.size, step):
            z = (xa[i : i + step, None] - self.points[None, :]) / self.bandwidth
            out[i : i + step] = fn(z)
        return out.reshape(np.shape(x))

    def logpdf(self, x):
        n = self.points.size
        c = math.log(n * self.bandwidth) + _LOG_SQRT_2PI
        out = self._reduce(x, lambda z: special.logsumexp(-0.5 * z * z, axis=1) - c)
        return _as_float(x, out)

    def cdf(self, x):
        return _as_float(x, self._reduce(x, lambda z: special.ndtr(z).mean(axis=1)))

    def sf(self, x):
        return _as_float(x, self._reduce(x, lambda z: special.ndtr(-z).mean(axis=1)))

    def _invert(self, target, upper: bool):
        target = np.atleast_1d(np.asarray(target, float))
        lo = np.full(target.shape, self.points[0] - 40.0 * self.bandwidth)
        hi = np.full(target.shape, self.points[-1] + 40.0 * self.bandwidth)
        fn = self.sf if upper else self.cdf
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.all((mid == lo) | (mid == hi)):
                break
            below = fn(mid) > target if upper else fn(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        err = np.abs(fn(x) - target)
        if np.any(err > 1e-10):
            raise NonConvergenceError(f"kernel quantile inversion missed tolerance (max error {err.max():.3g})")
        return x

    def _ppf(self, p):
        return self._invert(p, upper=False).reshape(np.shape(p))

    def _isf(self, q):
        return self._invert(q, upper=True).reshape(np.shape(q))

    def params(self):
        return {"bandwidth": self.bandwidth, "n_points": float(self.points.size)}


def dist_eval(family, which: str, x_or_p):
    """Evaluate ``pdf``, ``cdf`` or ``quantile`` of any distribution object."""
    if which == "pdf":
        return family.pdf(x_or_p)
    if which == "cdf":
        return family.cdf(x_or_p)
    if which == "quantile":
        return family.ppf(x_or_p)
    raise InvalidParameterError(f"unknown evaluation {which!r}")


def uniforms(n: int, seed: int) -> np.ndarray:
    """Open-interval uniforms from a seeded stream (never exactly 0 or 1)."""
    if n < 1:
        raise InvalidParameterError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    return (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / 2.0**53


def sample(model, n: int, seed: int) -> np.ndarray:
    """Inverse-CDF sample of length ``n`` from any object with a ``ppf``."""
    return np.asarray(model.ppf(uniforms(n, seed)), dtype=float)
