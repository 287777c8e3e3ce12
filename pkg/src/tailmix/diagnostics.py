"""Mean residual life and threshold stability tables for threshold choice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, TailmixError
from .estimation import OptimizerConfig, fit_gpd, gpd_covariance

Z95 = 1.959963984540054


@dataclass(frozen=True)
class MrlPoint:
    u: float
    mean_excess: float
    ci_low: float
    ci_high: float
    n_exceed: int


@dataclass(frozen=True)
class StabilityPoint:
    u: float
    xi_hat: float
    xi_ci_low: float
    xi_ci_high: float
    sigma_hat: float
    modified_scale: float
    scale_ci_low: float
    scale_ci_high: float
    n_exceed: int


@dataclass(frozen=True)
class Skipped:
    u: float
    reason: str


def default_grid(data, n_points: int = 40, top: float = 0.975) -> np.ndarray:
    """Empirical quantiles at n_points evenly spaced levels in [0, top]."""
    x = _sample(data)
    return np.quantile(x, np.linspace(0.0, top, n_points))


def _sample(data) -> np.ndarray:
    x = np.asarray(data, float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise InvalidParameterError("diagnostics need a non-empty finite sample")
    return x


def _grid(x, grid) -> np.ndarray:
    g = default_grid(x) if grid is None else np.asarray(grid, float).ravel()
    return np.sort(g)


def mean_residual_life(data, grid=None) -> tuple[list[MrlPoint], list[Skipped]]:
    x = _sample(data)
    points, skipped = [], []
    for u in _grid(x, grid):
        u = float(u)
        exc = x[x > u] - u
        if exc.size < 2:
            skipped.append(Skipped(u, f"{exc.size} exceedances; need 2"))
            continue
        m = float(exc.mean())
        half = Z95 * float(exc.std(ddof=1)) / math.sqrt(exc.size)
        points.append(MrlPoint(u, m, m - half, m + half, int(exc.size)))
    return points, skipped


def threshold_stability(data, grid=None, min_exceedances: int = 10,
                        opt: OptimizerConfig | None = None) -> tuple[list[StabilityPoint], list[Skipped]]:
    """GPD shape and modified scale sigma_u - u*xi per threshold, with Wald intervals."""
    x = _sample(data)
    points, skipped = [], []
    for u in _grid(x, grid):
        u = float(u)
        try:
            p, _ = fit_gpd(x, u, min_exceedances=min_exceedances, opt=opt)
        except TailmixError as exc:
            skipped.append(Skipped(u, str(exc)))
            continue
        cov = gpd_covariance(x, p)
        se_xi = math.sqrt(cov[1, 1]) if cov[1, 1] >= 0 else math.nan
        # gradient of sigma - u*xi w.r.t. (sigma, xi) is (1, -u)
        v_mod = cov[0, 0] - 2.0 * u * cov[0, 1] + u * u * cov[1, 1]
        se_mod = math.sqrt(v_mod) if v_mod >= 0 else math.nan
        mod = p.sigma_u - u * p.xi
        points.append(StabilityPoint(
            u, p.xi, p.xi - Z95 * se_xi, p.xi + Z95 * se_xi,
            p.sigma_u, mod, mod - Z95 * se_mod, mod + Z95 * se_mod,
            int(np.count_nonzero(x > u)),
        ))
    return points, skipped


def mrl_slope(points: list[MrlPoint], lo: float = -math.inf, hi: float = math.inf) -> float:
    """Least-squares slope of mean excess against threshold over [lo, hi]."""
    sel = [(p.u, p.mean_excess) for p in points if lo <= p.u <= hi]
    if len(sel) < 2:
        raise InvalidParameterError("need two MRL points to fit a slope")
    u, m = np.array(sel).T
    return float(np.polyfit(u, m, 1)[0])
