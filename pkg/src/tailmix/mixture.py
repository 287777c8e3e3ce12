"""Extreme value mixture models: a bulk distribution spliced with GPD tails.

Two tail-fraction conventions are supported.  With ``BulkBased`` the bulk
CDF is used as is below the threshold and the tail carries the bulk's
remaining mass ``1 - H(u)``.  With ``Parameterized(phi)`` the bulk is
renormalised below ``u`` and the tail carries exactly ``phi``.

The two-tailed GNG model reflects a GPD below its lower threshold.  Under
``BulkBased`` tails the normal bulk is *not* renormalised between the
thresholds; under ``Parameterized`` tails it is rescaled to the mass left
between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from .distributions import (
    BulkFamily,
    GpdParams,
    Normal,
    _as_float,
    _check_prob,
)
from .errors import InvalidParameterError, NoJunctionError, NonConvergenceError

KINDS = (
    "normGPD",
    "gammaGPD",
    "weibullGPD",
    "lognormalGPD",
    "kernelGPD",
    "hybridPareto",
    "hybridParetoCon",
    "GNG",
)


@dataclass(frozen=True)
class BulkBased:
    """Tail fraction implied by the bulk model."""


@dataclass(frozen=True)
class Parameterized:
    phi: float

    def __post_init__(self):
        if not (0.0 < self.phi < 1.0):
            raise InvalidParameterError(f"tail fraction must lie in (0, 1), got {self.phi!r}")


BULK_BASED = BulkBased()
TailFraction = BulkBased | Parameterized


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    kind: str
    bulk: BulkFamily
    upper: GpdParams
    lower: GpdParams | None = None
    upper_mode: TailFraction = BULK_BASED
    lower_mode: TailFraction = BULK_BASED
    continuity: bool = False
    _w: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown mixture kind {self.kind!r}")
        lo, hi = self.bulk.support
        if not (lo < self.upper.u < hi):
            raise InvalidParameterError("upper threshold must lie strictly inside the bulk support")
        if (self.lower is not None) != (self.kind == "GNG"):
            raise InvalidParameterError("a lower tail is present exactly for GNG")
        if self.lower is not None and not (lo < self.lower.u < self.upper.u):
            raise InvalidParameterError("lower threshold must lie inside the support and below the upper one")
        object.__setattr__(self, "_w", _weights(self))

    # duck-typed distribution surface
    def cdf(self, x):
        return mixture_cdf(self, x)

    def sf(self, x):
        return mixture_sf(self, x)

    def pdf(self, x):
        return mixture_pdf(self, x)

    def logpdf(self, x):
        return mixture_logpdf(self, x)

    def ppf(self, p):
        return mixture_quantile(self, p)

    def isf(self, q):
        q = _check_prob(q)
        return _as_float(q, _invert(self, 1.0 - q, q))

    @property
    def thresholds(self) -> tuple[float, ...]:
        if self.lower is None:
            return (self.upper.u,)
        return (self.lower.u, self.upper.u)

    @property
    def tail_fractions(self) -> tuple[float, ...]:
        phi_l, phi_u = self._w[0], self._w[1]
        return (phi_u,) if self.lower is None else (phi_l, phi_u)

    def params(self) -> dict:
        out = {"kind": self.kind, "bulk": {"family": self.bulk.name, **self.bulk.params()}}
        out["upper_tail"] = {"u": self.upper.u, "sigma_u": self.upper.sigma_u, "xi": self.upper.xi,
                             "phi": self._w[1]}
        if self.lower is not None:
            out["lower_tail"] = {"u": self.lower.u, "sigma_u": self.lower.sigma_u, "xi": self.lower.xi,
                                 "phi": self._w[0]}
        out["tail_fraction_mode"] = _mode_name(self.upper_mode)
        out["continuity"] = self.continuity
        return out


def _mode_name(mode) -> str:
    return "parameterized" if isinstance(mode, Parameterized) else "bulk"


def _weights(spec: MixtureSpec):
    """(phi_l, phi_u, c, H_l, H_u, sf_u, exact) where the bulk region maps
    F(x) = phi_l + c (H(x) - H_l)."""
    b = spec.bulk
    H_u = float(b.cdf(spec.upper.u))
    sf_u = float(b.sf(spec.upper.u))
    if spec.lower is None:
        H_l, phi_l, lower_bulk = 0.0, 0.0, True
    else:
        H_l = float(b.cdf(spec.lower.u))
        lower_bulk = isinstance(spec.lower_mode, BulkBased)
        phi_l = H_l if lower_bulk else spec.lower_mode.phi
    upper_bulk = isinstance(spec.upper_mode, BulkBased)
    phi_u = sf_u if upper_bulk else spec.upper_mode.phi
    exact = upper_bulk and lower_bulk
    mass = H_u - H_l
    if exact:
        c = 1.0
    else:
        if not mass > 0:
            raise InvalidParameterError("bulk carries no mass between the thresholds")
        c = (1.0 - phi_l - phi_u) / mass
        if not c > 0:
            raise InvalidParameterError("tail fractions leave no mass for the bulk")
    return phi_l, phi_u, c, H_l, H_u, sf_u, exact


def _regions(spec, x):
    x = np.asarray(x, float)
    upper = x > spec.upper.u
    lower = x < spec.lower.u if spec.lower is not None else np.zeros(x.shape, bool)
    return x, lower, upper, ~(lower | upper)


def mixture_cdf(spec: MixtureSpec, x):
    phi_l, phi_u, c, H_l, H_u, sf_u, exact = spec._w
    xa, lo, up, mid = _regions(spec, x)
    out = np.empty(xa.shape)
    if mid.any():
        h = spec.bulk.cdf(xa[mid])
        out[mid] = h if exact else phi_l + c * (h - H_l)
    if up.any():
        out[up] = 1.0 - phi_u * spec.upper.sf(xa[up])
    if lo.any():
        out[lo] = phi_l * spec.lower.sf(2.0 * spec.lower.u - xa[lo])
    return _as_float(x, np.clip(out, 0.0, 1.0))


def mixture_sf(spec: MixtureSpec, x):
    phi_l, phi_u, c, H_l, H_u, sf_u, exact = spec._w
    xa, lo, up, mid = _regions(spec, x)
    out = np.empty(xa.shape)
    if mid.any():
        s = spec.bulk.sf(xa[mid])
        out[mid] = s if exact else phi_u + c * (s - sf_u)
    if up.any():
        out[up] = phi_u * spec.upper.sf(xa[up])
    if lo.any():
        out[lo] = 1.0 - phi_l * spec.lower.sf(2.0 * spec.lower.u - xa[lo])
    return _as_float(x, np.clip(out, 0.0, 1.0))


def mixture_logpdf(spec: MixtureSpec, x, bulk_logpdf=None):
    """Log density; ``bulk_logpdf`` optionally supplies precomputed bulk
    log densities at ``x`` (e.g. leave-one-out kernel values)."""
    phi_l, phi_u, c, *_ = spec._w
    xa, lo, up, mid = _regions(spec, x)
    out = np.empty(xa.shape)
    if mid.any():
        lb = spec.bulk.logpdf(xa[mid]) if bulk_logpdf is None else np.asarray(bulk_logpdf)[mid]
        out[mid] = lb + math.log(c)
    if up.any():
        out[up] = math.log(phi_u) + spec.upper.logpdf(xa[up])
    if lo.any():
        out[lo] = math.log(phi_l) + spec.lower.logpdf(2.0 * spec.lower.u - xa[lo])
    return _as_float(x, out)


def mixture_pdf(spec: MixtureSpec, x):
    return _as_float(x, np.exp(mixture_logpdf(spec, np.asarray(x, float))))


def _invert(spec: MixtureSpec, p, q):
    phi_l, phi_u, c, H_l, H_u, sf_u, exact = spec._w
    shape = np.shape(p)
    p = np.atleast_1d(np.asarray(p, float))
    q = np.atleast_1d(np.asarray(q, float))
    out = np.empty(p.shape)
    up = q < phi_u
    lo = (p < phi_l) & ~up
    mid = ~(up | lo)
    if up.any():
        out[up] = spec.upper.isf(q[up] / phi_u)
    if lo.any():
        out[lo] = 2.0 * spec.lower.u - spec.lower.isf(p[lo] / phi_l)
    if mid.any():
        pm, qm = p[mid], q[mid]
        left = pm <= 0.5
        res = np.empty(pm.shape)
        if exact:
            tp, tq = pm, qm
        else:
            tp = H_l + (pm - phi_l) / c
            tq = sf_u + (qm - phi_u) / c
        tp = np.clip(tp, np.nextafter(0, 1), np.nextafter(1, 0))
        tq = np.clip(tq, np.nextafter(0, 1), np.nextafter(1, 0))
        if left.any():
            res[left] = spec.bulk.ppf(tp[left])
        if (~left).any():
            res[~left] = spec.bulk.isf(tq[~left])
        # numerical inversion can overshoot the region edges by an ulp
        if spec.lower is not None:
            res = np.maximum(res, spec.lower.u)
        out[mid] = np.minimum(res, spec.upper.u)
    if not np.all(np.isfinite(out)):
        raise NonConvergenceError("mixture quantile inversion produced a non-finite value")
    return out.reshape(shape)


def mixture_quantile(spec: MixtureSpec, p):
    p = _check_prob(p)
    return _as_float(p, _invert(spec, p, 1.0 - p))


def mixture_quantile_bisect(spec: MixtureSpec, p: float, tol: float = 1e-12) -> float:
    """Reference inversion by plain bisection on ``mixture_cdf``."""
    p = float(_check_prob(p))
    lo, hi = -1.0, 1.0
    for _ in range(2000):
        if mixture_cdf(spec, lo) < p:
            break
        lo *= 2.0
    for _ in range(2000):
        if mixture_cdf(spec, hi) > p:
            break
        hi *= 2.0
    if not (mixture_cdf(spec, lo) <= p <= mixture_cdf(spec, hi)):
        raise NonConvergenceError("could not bracket the quantile")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mixture_cdf(spec, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Continuity and hybrid Pareto junction
# ---------------------------------------------------------------------------


def continuity_scales(spec: MixtureSpec) -> tuple[float, float | None]:
    """GPD scales that make the density continuous at each threshold."""
    phi_l, phi_u, c, *_ = spec._w
    h_u = float(spec.bulk.pdf(spec.upper.u))
    if not (h_u > 0 and np.isfinite(h_u)):
        raise InvalidParameterError("bulk density vanishes at the upper threshold; continuity unsolvable")
    sig_u = phi_u / (c * h_u)
    sig_l = None
    if spec.lower is not None:
        h_l = float(spec.bulk.pdf(spec.lower.u))
        if not (h_l > 0 and np.isfinite(h_l)):
            raise InvalidParameterError("bulk density vanishes at the lower threshold; continuity unsolvable")
        sig_l = phi_l / (c * h_l)
    for s in (sig_u, sig_l):
        if s is not None and not (s > 0 and np.isfinite(s)):
            raise InvalidParameterError("continuity constraint yields a degenerate GPD scale")
    return sig_u, sig_l


def solve_continuity(spec: MixtureSpec) -> MixtureSpec:
    sig_u, sig_l = continuity_scales(spec)
    upper = replace(spec.upper, sigma_u=sig_u)
    lower = None if spec.lower is None else replace(spec.lower, sigma_u=sig_l)
    return replace(spec, upper=upper, lower=lower, continuity=True)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def hybrid_junction(mu: float, sigma: float, xi: float) -> tuple[float, float, float]:
    """Junction (u, sigma_u, gamma) of the hybrid Pareto density.

    The normal density and the GPD density agree in value and slope at u;
    gamma is the normaliser of the spliced (unweighted) pieces.  The
    standardised junction z = (u - mu)/sigma solves
    log z + z^2/2 = log((1 + xi)/sqrt(2 pi)).
    """
    if not (sigma > 0 and np.isfinite(sigma)):
        raise InvalidParameterError("sigma must be positive")
    if not (xi > -1.0):
        raise InvalidParameterError("hybrid Pareto requires xi > -1")
    target = math.log1p(xi) - _LOG_SQRT_2PI

    def f(z):
        return math.log(z) + 0.5 * z * z - target

    lo, hi = 1e-12, 10.0
    if not (f(lo) < 0 < f(hi)):
        raise NoJunctionError(f"no hybrid Pareto junction in (0, 10] for xi={xi!r}")
    z = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    u = mu + sigma * z
    sigma_u = sigma * (1.0 + xi) / z
    gamma = 1.0 + float(special.ndtr(z))
    return u, sigma_u, gamma


def hybrid_pareto_spec(mu: float, sigma: float, xi: float) -> MixtureSpec:
    u, sigma_u, gamma = hybrid_junction(mu, sigma, xi)
    return MixtureSpec(
        kind="hybridPareto",
        bulk=Normal(mu, sigma),
        upper=GpdParams(u, sigma_u, xi),
        upper_mode=Parameterized(1.0 / gamma),
        continuity=True,
    )


def hybrid_pareto_con_spec(mu: float, sigma: float, xi: float, u: float) -> MixtureSpec:
    """Hybrid Pareto with a free threshold and density continuity only."""
    z = (u - mu) / sigma
    sigma_u = sigma * math.exp(0.5 * z * z + _LOG_SQRT_2PI)
    gamma = 1.0 + float(special.ndtr(z))
    return MixtureSpec(
        kind="hybridParetoCon",
        bulk=Normal(mu, sigma),
        upper=GpdParams(u, sigma_u, xi),
        upper_mode=Parameterized(1.0 / gamma),
        continuity=True,
    )


@dataclass(frozen=True, eq=False)
class FittedMixture:
    spec: MixtureSpec
    log_likelihood: float
    n_exceedances_per_tail: tuple[int, ...]
    converged: bool

    def __post_init__(self):
        if self.converged and not np.isfinite(self.log_likelihood):
            raise InvalidParameterError("a converged fit must have a finite log-likelihood")

    def cdf(self, x):
        return self.spec.cdf(x)

    def sf(self, x):
        return self.spec.sf(x)

    def pdf(self, x):
        return self.spec.pdf(x)

    def logpdf(self, x):
        return self.spec.logpdf(x)

    def ppf(self, p):
        return self.spec.ppf(p)

    def isf(self, q):
        return self.spec.isf(q)
