"""Maximum-likelihood fitting of GPD tails, GEV block maxima and mixtures.

Mixture fits treat the threshold as a parameter by profiling the
full-sample likelihood over a grid of empirical quantiles.  At each
candidate the remaining parameters are found with a Nelder-Mead simplex in
an unconstrained parametrisation (log scales, logit tail fractions).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .distributions import (
    Gamma,
    GevParams,
    GpdParams,
    Kernel,
    LogNormal,
    Normal,
    Weibull,
    _gpd_logpdf_excess,
)
from .errors import (
    DegenerateSampleError,
    InfeasibleError,
    InvalidParameterError,
    NonConvergenceError,
    SupportViolationError,
    TooFewBlocksError,
    TooFewExceedancesError,
)
from .mixture import (
    BULK_BASED,
    FittedMixture,
    MixtureSpec,
    Parameterized,
    continuity_scales,
    hybrid_pareto_con_spec,
    hybrid_pareto_spec,
    mixture_logpdf,
)

log = logging.getLogger(__name__)

XI_MIN, XI_MAX = -1.0, 5.0


@dataclass(frozen=True)
class OptimizerConfig:
    rel_tolerance: float = 1e-8
    max_iterations: int = 2000
    restarts: int = 3

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise InvalidParameterError("rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be at least 1")
        if self.restarts < 0:
            raise InvalidParameterError("restarts must be non-negative")


def _default_grid() -> tuple[float, ...]:
    return tuple(round(0.5 + 0.025 * i, 10) for i in range(19))


@dataclass(frozen=True)
class ThresholdSearchConfig:
    """Empirical-quantile grid for the threshold profile.

    ``lower_quantile_grid`` pairs element-wise with ``quantile_grid`` for
    two-tailed models; by default it mirrors it (``1 - q``).
    """

    quantile_grid: tuple[float, ...] = field(default_factory=_default_grid)
    lower_quantile_grid: tuple[float, ...] | None = None
    min_exceedances: int = 10

    def __post_init__(self):
        for grid in (self.quantile_grid, self.lower_quantile_grid):
            if grid is None:
                continue
            g = np.asarray(grid, float)
            if g.size == 0 or np.any((g <= 0) | (g >= 1)):
                raise InvalidParameterError("threshold grid must be non-empty and inside (0, 1)")
        if np.any(np.diff(self.quantile_grid) <= 0):
            raise InvalidParameterError("threshold grid must be strictly increasing")
        if self.lower_quantile_grid is not None and len(self.lower_quantile_grid) != len(self.quantile_grid):
            raise InvalidParameterError("lower grid must pair element-wise with the upper grid")
        if self.min_exceedances < 1:
            raise InvalidParameterError("min_exceedances must be at least 1")

    @property
    def lower_grid(self) -> tuple[float, ...]:
        if self.lower_quantile_grid is not None:
            return tuple(self.lower_quantile_grid)
        return tuple(round(1.0 - q, 10) for q in self.quantile_grid)


@dataclass(frozen=True, eq=False)
class FitReport:
    best: FittedMixture
    profile: list[tuple[tuple[float, ...], float]]
    wall_time: float = field(compare=False)
    bandwidth: float | None = None
    mode: str = "bulk"

    def to_dict(self) -> dict:
        spec = self.best.spec
        return {
            "model": spec.kind,
            "tail_fraction_mode": self.mode,
            "continuity": spec.continuity,
            "parameters": spec.params(),
            "thresholds": list(spec.thresholds),
            "tail_fractions": list(spec.tail_fractions),
            "log_likelihood": self.best.log_likelihood,
            "converged": self.best.converged,
            "n_exceedances": list(self.best.n_exceedances_per_tail),
            "kernel_bandwidth": self.bandwidth,
            "profile": [{"thresholds": list(t), "log_likelihood": ll} for t, ll in self.profile],
        }


# ---------------------------------------------------------------------------
# Simplex driver
# ---------------------------------------------------------------------------


def _nelder_mead(fun, x0, steps, opt: OptimizerConfig, seed) -> optimize.OptimizeResult | None:
    """Minimise ``fun`` with deterministic jittered restarts.

    Returns None when the starting point itself is infeasible.
    """
    x0 = np.asarray(x0, float)
    f0 = fun(x0)
    if not np.isfinite(f0):
        return None
    steps = np.asarray(steps, float)
    fatol = opt.rel_tolerance * max(1.0, abs(f0))
    options = {
        "maxiter": opt.max_iterations,
        "maxfev": 2 * opt.max_iterations,
        "xatol": 1e-7,
        "fatol": fatol,
    }

    def run(start, scale):
        simplex = np.vstack([start, start + np.diag(scale)])
        with np.errstate(invalid="ignore"):
            return optimize.minimize(fun, start, method="Nelder-Mead",
                                     options={**options, "initial_simplex": simplex})

    best = run(x0, steps)
    rng = np.random.default_rng(seed)
    for _ in range(opt.restarts):
        start = best.x + rng.uniform(-0.5, 0.5, size=x0.size) * steps
        res = run(start, 0.5 * steps)
        improved = res.fun < best.fun - fatol
        if res.fun < best.fun:
            best = res
        if not improved:
            break
    return best


def _safe(fn):
    def wrapped(theta):
        try:
            with np.errstate(all="ignore"):
                v = fn(theta)
        except (InvalidParameterError, FloatingPointError, ZeroDivisionError, OverflowError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    return wrapped


# ---------------------------------------------------------------------------
# GPD
# ---------------------------------------------------------------------------


def _gpd_moments(exc: np.ndarray) -> tuple[float, float]:
    m = float(np.mean(exc))
    v = float(np.var(exc))
    if not (m > 0):
        return 1.0, 0.1
    if v <= 0:
        return m, 0.0
    xi = float(np.clip(0.5 * (1.0 - m * m / v), -0.4, 0.5))
    sigma = max(m * (1.0 - xi), 1e-8 * m)
    top = float(np.max(exc))
    if xi < 0 and sigma / -xi <= 1.1 * top:
        # keep the largest exceedance inside the start's finite endpoint
        xi = -sigma / (1.1 * top)
    return sigma, xi


def gpd_loglik(exceedances, sigma: float, xi: float) -> float:
    return float(np.sum(_gpd_logpdf_excess(exceedances, sigma, xi)))


def fit_gpd(data, u: float, min_exceedances: int = 10,
            opt: OptimizerConfig | None = None) -> tuple[GpdParams, float]:
    """MLE of (sigma_u, xi) for the exceedances of ``data`` over ``u``."""
    opt = opt or OptimizerConfig()
    x = np.asarray(data, float)
    exc = x[x > u] - u
    if exc.size < min_exceedances:
        raise TooFewExceedancesError(f"{exc.size} exceedances over {u!r}; need {min_exceedances}")
    s0, xi0 = _gpd_moments(exc)
    scale = float(np.mean(exc))

    @_safe
    def negll(theta):
        xi = theta[1]
        if not (XI_MIN < xi <= XI_MAX):
            return np.inf
        return -gpd_loglik(exc, scale * math.exp(theta[0]), xi)

    res = _nelder_mead(negll, [math.log(s0 / scale), xi0], [0.2, 0.1], opt, seed=0)
    if res is None or not np.isfinite(res.fun):
        raise NonConvergenceError("GPD likelihood is infeasible at every start")
    if not res.success:
        raise NonConvergenceError(f"GPD fit did not converge: {res.message}")
    params = GpdParams(u, scale * math.exp(res.x[0]), float(res.x[1]))
    return params, -float(res.fun)


def _numeric_hessian(f, x, rel_step=1e-4) -> np.ndarray:
    x = np.asarray(x, float)
    k = x.size
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H


def gpd_covariance(data, params: GpdParams) -> np.ndarray:
    """Inverse observed information of (sigma_u, xi), numerically."""
    x = np.asarray(data, float)
    exc = x[x > params.u] - params.u

    def negll(theta):
        return -gpd_loglik(exc, theta[0], theta[1])

    H = _numeric_hessian(negll, [params.sigma_u, params.xi])
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return np.full((2, 2), np.nan)
    return cov


# ---------------------------------------------------------------------------
# GEV by block maxima
# ---------------------------------------------------------------------------


def block_maxima(data, block_size: int) -> np.ndarray:
    x = np.asarray(data, float)
    nb = x.size // block_size
    return x[: nb * block_size].reshape(nb, block_size).max(axis=1)


def fit_gev_blocks(data, block_size: int,
                   opt: OptimizerConfig | None = None) -> tuple[GevParams, float]:
    """MLE of the GEV on per-block maxima (trailing partial block dropped)."""
    opt = opt or OptimizerConfig()
    if block_size < 1:
        raise InvalidParameterError("block_size must be at least 1")
    x = np.asarray(data, float)
    if x.size // block_size < 20:
        raise TooFewBlocksError(f"{x.size // block_size} complete blocks; need at least 20")
    m = block_maxima(x, block_size)
    sd = float(np.std(m, ddof=1))
    if not sd > 0:
        raise DegenerateSampleError("block maxima have zero variance")
    s0 = sd * math.sqrt(6.0) / math.pi
    loc = float(np.mean(m))

    @_safe
    def negll(theta):
        xi = theta[2]
        if not (XI_MIN < xi <= XI_MAX):
            return np.inf
        g = GevParams(loc + sd * theta[0], sd * math.exp(theta[1]), xi)
        return -float(np.sum(g.logpdf(m)))

    x0 = [-0.5772 * s0 / sd, math.log(s0 / sd), 0.1]
    res = _nelder_mead(negll, x0, [0.1, 0.1, 0.1], opt, seed=0)
    if res is None or not np.isfinite(res.fun):
        raise NonConvergenceError("GEV likelihood infeasible at the starting point")
    if not res.success:
        raise NonConvergenceError(f"GEV fit did not converge: {res.message}")
    th = res.x
    return GevParams(loc + sd * th[0], sd * math.exp(th[1]), float(th[2])), -float(res.fun)


# ---------------------------------------------------------------------------
# Kernel bandwidth
# ---------------------------------------------------------------------------


def _loo_logkernel_sums(x: np.ndarray, lam: float) -> np.ndarray:
    """log sum_{j != i} exp(-0.5 ((x_i - x_j)/lam)^2) for every i."""
    n = x.size
    out = np.empty(n)
    step = max(1, 2_000_000 // n)
    for i in range(0, n, step):
        z = (x[i : i + step, None] - x[None, :]) / lam
        a = -0.5 * z * z
        rows = np.arange(i, min(i + step, n))
        a[rows - i, rows] = -np.inf
        out[i : i + step] = special.logsumexp(a, axis=1)
    return out


def loo_kernel_logpdf(data, bandwidth: float) -> np.ndarray:
    """Leave-one-out Gaussian KDE log density at each data point."""
    x = np.asarray(data, float)
    n = x.size
    return _loo_logkernel_sums(x, bandwidth) - math.log((n - 1) * bandwidth) - 0.5 * math.log(2 * math.pi)


def _golden_max(f, a: float, b: float, tol: float = 1e-7) -> float:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def kde_cv_bandwidth(data) -> float:
    """Bandwidth maximising the leave-one-out likelihood of a Gaussian KDE."""
    x = np.asarray(data, float)
    if x.size < 10:
        raise InvalidParameterError("cross-validation bandwidth needs at least 10 points")
    s = float(np.std(x, ddof=1))
    if not s > 0:
        raise DegenerateSampleError("cannot choose a bandwidth for a zero-variance sample")

    # lambda = s * exp(t); constants independent of t are dropped, which
    # makes the search path identical under rescaling of the data.
    def objective(t):
        lam = s * math.exp(t)
        return float(np.sum(_loo_logkernel_sums(x, lam))) - x.size * t

    t_hat = _golden_max(objective, math.log(1e-3), math.log(10.0))
    return s * math.exp(t_hat)


def rule_of_thumb_bandwidth(data) -> float:
    x = np.asarray(data, float)
    s = float(np.std(x, ddof=1))
    if not s > 0:
        raise DegenerateSampleError("zero-variance sample")
    return 1.06 * s * x.size ** (-0.2)


# ---------------------------------------------------------------------------
# Mixture models
# ---------------------------------------------------------------------------


_POSITIVE_BULKS = {"gammaGPD", "weibullGPD", "lognormalGPD"}


class _Bulk:
    """Unconstrained parametrisation of a bulk family."""

    def __init__(self, kind: str, x: np.ndarray, bandwidth: float | None = None):
        self.kind = kind
        self.center = float(np.median(x))
        self.sd = float(np.std(x, ddof=1))
        if kind in ("normGPD", "GNG", "hybridPareto", "hybridParetoCon"):
            self.x0 = [(float(np.mean(x)) - self.center) / self.sd, 0.0]
            self.steps = [0.1, 0.1]
        elif kind == "gammaGPD":
            m, v = float(np.mean(x)), float(np.var(x))
            self.x0 = [math.log(m * m / v), math.log(v / m)]
            self.steps = [0.1, 0.1]
        elif kind == "weibullGPD":
            cv = self.sd / float(np.mean(x))
            k = cv ** -1.086
            lam = float(np.mean(x)) / math.exp(special.gammaln(1.0 + 1.0 / k))
            self.x0 = [math.log(k), math.log(lam)]
            self.steps = [0.1, 0.1]
        elif kind == "lognormalGPD":
            lx = np.log(x)
            self.x0 = [float(np.mean(lx)), math.log(float(np.std(lx, ddof=1)))]
            self.steps = [0.1, 0.1]
        elif kind == "kernelGPD":
            self.kernel = Kernel(x, bandwidth)
            self.x0, self.steps = [], []
        else:
            raise InvalidParameterError(f"unknown mixture kind {kind!r}")
        self.size = len(self.x0)

    def build(self, th):
        k = self.kind
        if k in ("normGPD", "GNG", "hybridPareto", "hybridParetoCon"):
            return Normal(self.center + self.sd * th[0], self.sd * math.exp(th[1]))
        if k == "gammaGPD":
            return Gamma(math.exp(th[0]), math.exp(th[1]))
        if k == "weibullGPD":
            return Weibull(math.exp(th[0]), math.exp(th[1]))
        if k == "lognormalGPD":
            return LogNormal(th[0], math.exp(th[1]))
        return self.kernel


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _expit(t: float) -> float:
    return 1.0 / (1.0 + math.exp(-t))


class _Candidate:
    """Objective and parameter layout at one threshold candidate."""

    def __init__(self, kind, x, bulk: _Bulk, thresholds, mode_param: bool, continuity: bool, bulk_lp):
        self.kind, self.x, self.bulk, self.thresholds = kind, x, bulk, thresholds
        self.mode_param, self.continuity, self.bulk_lp = mode_param, continuity, bulk_lp
        self.n = x.size
        x0, steps = list(bulk.x0), list(bulk.steps)
        scale = bulk.sd
        self.scale = scale
        if kind == "hybridPareto":
            x0 += [0.1]
            steps += [0.1]
        elif kind == "hybridParetoCon":
            x0 += [_gpd_moments(x[x > thresholds[0]] - thresholds[0])[1]]
            steps += [0.1]
        else:
            tails = [("upper", thresholds[-1])]
            if kind == "GNG":
                tails.insert(0, ("lower", thresholds[0]))
            for side, u in tails:
                exc = x[x > u] - u if side == "upper" else u - x[x < u]
                s0, xi0 = _gpd_moments(exc)
                if not continuity:
                    x0.append(math.log(s0 / scale))
                    steps.append(0.2)
                x0.append(xi0)
                steps.append(0.1)
                if mode_param:
                    x0.append(_logit(exc.size / self.n))
                    steps.append(0.2)
        self.x0, self.steps = np.array(x0), np.array(steps)

    def spec(self, th) -> MixtureSpec:
        kind = self.kind
        b = self.bulk
        bulk = b.build(th[: b.size])
        rest = list(th[b.size :])
        if kind == "hybridPareto":
            return hybrid_pareto_spec(bulk.mean, bulk.sd, rest[0])
        if kind == "hybridParetoCon":
            return hybrid_pareto_con_spec(bulk.mean, bulk.sd, rest[0], self.thresholds[0])

        def take_tail(u):
            if self.continuity:
                sig, xi = 1.0, rest.pop(0)
            else:
                sig, xi = self.scale * math.exp(rest.pop(0)), rest.pop(0)
            mode = Parameterized(_expit(rest.pop(0))) if self.mode_param else BULK_BASED
            return sig, xi, mode

        lower = None
        lower_mode = BULK_BASED
        if kind == "GNG":
            sl, xl, lower_mode = take_tail(self.thresholds[0])
            lower = GpdParams(self.thresholds[0], sl, xl)
        su, xu, upper_mode = take_tail(self.thresholds[-1])
        spec = MixtureSpec(kind, bulk, GpdParams(self.thresholds[-1], su, xu), lower,
                           upper_mode, lower_mode, continuity=False)
        if self.continuity:
            sig_u, sig_l = continuity_scales(spec)
            spec = MixtureSpec(kind, bulk, GpdParams(spec.upper.u, sig_u, xu),
                               None if lower is None else GpdParams(lower.u, sig_l, lower.xi),
                               upper_mode, lower_mode, continuity=True)
        return spec

    def xis(self, spec) -> list[float]:
        return [spec.upper.xi] + ([spec.lower.xi] if spec.lower is not None else [])

    def negll(self, th):
        spec = self.spec(th)
        if any(not (XI_MIN < xi <= XI_MAX) for xi in self.xis(spec)):
            return np.inf
        return -float(np.sum(mixture_logpdf(spec, self.x, self.bulk_lp)))


def _default_mode(kind: str) -> str:
    return "parameterized" if kind == "kernelGPD" else "bulk"


def fit_mixture(
    data,
    kind: str,
    mode: str | None = None,
    continuity: bool = False,
    cfg: ThresholdSearchConfig | None = None,
    opt: OptimizerConfig | None = None,
    bandwidth: float | None = None,
) -> FitReport:
    """Fit an extreme value mixture, profiling the threshold over ``cfg``.

    Args:
        data: Sample; every observation enters the likelihood.
        kind: One of ``normGPD``, ``gammaGPD``, ``weibullGPD``,
            ``lognormalGPD``, ``kernelGPD``, ``hybridPareto``,
            ``hybridParetoCon`` or ``GNG``.
        mode: ``"bulk"`` or ``"parameterized"`` tail fraction; defaults to
            parameterized for the kernel bulk and bulk-based otherwise.
            Ignored by the hybrid Pareto kinds, whose tail fraction is fixed
            by the normaliser.
        continuity: Derive each GPD scale from density continuity.
        bandwidth: Kernel bandwidth; cross-validated when omitted.

    Raises:
        SupportViolationError: Data outside the bulk family's support.
        InfeasibleError: No grid candidate admits a finite likelihood.
    """
    t0 = time.perf_counter()
    cfg = cfg or ThresholdSearchConfig()
    opt = opt or OptimizerConfig()
    x = np.asarray(data, float)
    if kind not in {"normGPD", "gammaGPD", "weibullGPD", "lognormalGPD", "kernelGPD",
                    "hybridPareto", "hybridParetoCon", "GNG"}:
        raise InvalidParameterError(f"unknown mixture kind {kind!r}")
    if x.size < 50:
        raise InvalidParameterError(f"fit_mixture needs at least 50 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("data contain non-finite values")
    if kind in _POSITIVE_BULKS and np.any(x <= 0):
        raise SupportViolationError(f"{kind} requires strictly positive data ({int(np.sum(x <= 0))} non-positive values)")
    mode = mode or _default_mode(kind)
    if mode not in ("bulk", "parameterized"):
        raise InvalidParameterError(f"unknown tail-fraction mode {mode!r}")
    if kind in ("hybridPareto", "hybridParetoCon"):
        mode, continuity = "parameterized", True
    if not np.std(x) > 0:
        raise InfeasibleError("zero-variance sample: no threshold candidate is feasible")

    bulk_lp = None
    if kind == "kernelGPD":
        bandwidth = bandwidth or kde_cv_bandwidth(x)
        bulk_lp = loo_kernel_logpdf(x, bandwidth)
    bulk = _Bulk(kind, x, bandwidth)

    if kind == "hybridPareto":
        candidates = [()]
    elif kind == "GNG":
        uq = np.quantile(x, cfg.quantile_grid)
        lq = np.quantile(x, cfg.lower_grid)
        candidates = [(float(l), float(u)) for l, u in zip(lq, uq)]
    else:
        candidates = [(float(u),) for u in np.quantile(x, cfg.quantile_grid)]

    lo_sup = 0.0 if kind in _POSITIVE_BULKS else -math.inf
    profile = []
    best = None
    for idx, th in enumerate(candidates):
        if th:
            if np.sum(x > th[-1]) < cfg.min_exceedances or not th[-1] > lo_sup:
                continue
            if len(th) == 2 and (np.sum(x < th[0]) < cfg.min_exceedances or not th[0] < th[1]):
                continue
        cand = _Candidate(kind, x, bulk, th, mode == "parameterized" and kind != "hybridParetoCon",
                          continuity and kind != "hybridParetoCon", bulk_lp)
        res = _nelder_mead(_safe(cand.negll), cand.x0, cand.steps, opt, seed=(idx, 7919))
        if res is None or not np.isfinite(res.fun):
            log.debug("threshold candidate %s infeasible", th)
            continue
        spec = cand.spec(res.x)
        ll = -float(res.fun)
        profile.append((tuple(float(t) for t in spec.thresholds) if kind == "hybridPareto" else th, ll))
        if best is None or ll > best[0]:
            best = (ll, spec, bool(res.success))

    if best is None:
        raise InfeasibleError(f"no feasible threshold candidate for {kind}")
    ll, spec, ok = best
    n_exc = (int(np.sum(x > spec.upper.u)),)
    if spec.lower is not None:
        n_exc = (int(np.sum(x < spec.lower.u)),) + n_exc
    fitted = FittedMixture(spec, ll, n_exc, ok)
    return FitReport(fitted, profile, time.perf_counter() - t0, bandwidth, mode)
