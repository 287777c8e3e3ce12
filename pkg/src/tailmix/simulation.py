"""Replicated quantile-estimation study.

A study draws ``replicates`` samples from each population, fits every
requested model to each sample and compares the fitted quantiles with the
population's true quantiles by RMSE.  Each replicate's random stream is
derived from ``(master_seed, population, replicate index)`` alone, so
results are independent of model order, population order and the number of
worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import Gamma, Gumbel, Normal, ReverseWeibull, StudentT, Weibull
from .errors import InvalidParameterError, TailmixError
from .estimation import OptimizerConfig, ThresholdSearchConfig, fit_mixture, rule_of_thumb_bandwidth
from .timeseries import fit_garch11, residual_scale

DEFAULT_LEVELS = (0.001, 0.01, 0.05, 0.10, 0.90, 0.95, 0.99, 0.999)
RHO_MAX = 0.85

# study identifier -> (mixture kind, continuity)
MODELS = {
    "normGPD": ("normGPD", False),
    "normGPDcon": ("normGPD", True),
    "hybridGPD": ("hybridPareto", True),
    "hybridGPDcon": ("hybridParetoCon", True),
    "weibullGPD": ("weibullGPD", False),
    "gammaGPD": ("gammaGPD", False),
    "lognormalGPD": ("lognormalGPD", False),
    "kernelGPD": ("kernelGPD", False),
    "GNG": ("GNG", False),
    "GNGcon": ("GNG", True),
}
GARCH_SUFFIX = " GARCH"

_FAMILIES = {
    # name: (constructor from the written arguments, arity)
    "norm": (lambda m, s: Normal(m, s), 2),
    "student": (lambda df, loc: StudentT(df, loc), 2),
    "gumbel": (lambda s: Gumbel(0.0, s), 1),
    "weibull": (lambda scale, shape: Weibull(shape, scale), 2),
    "rweibull": (lambda scale, shape: ReverseWeibull(shape, scale), 2),
    "gamma": (lambda shape, scale: Gamma(shape, scale), 2),
}


@dataclass(frozen=True)
class CopulaConfig:
    """Gaussian copula correlation structure.

    ``ar1`` uses corr(i, j) = rho^|i-j|; when ``rho`` is None a fresh rho is
    drawn uniformly from [-0.85, 0.85] for every replicate.  ``random_psd``
    builds a random correlation matrix from a factor model.
    """

    structure: str = "ar1"
    rho: float | None = None
    factors: int = 4

    def __post_init__(self):
        if self.structure not in ("ar1", "random_psd"):
            raise InvalidParameterError(f"unknown copula structure {self.structure!r}")
        if self.rho is not None and not abs(self.rho) <= RHO_MAX:
            raise InvalidParameterError(f"|rho| must not exceed {RHO_MAX}")
        if self.factors < 1:
            raise InvalidParameterError("factors must be at least 1")


@dataclass(frozen=True)
class PopulationSpec:
    family: object
    label: str
    dependence: CopulaConfig | None = None

    @classmethod
    def parse(cls, text: str) -> "PopulationSpec":
        """Parse ``name(args)`` with an optional ``:ar1``, ``:ar1=rho`` or ``:psd`` suffix.

        Names: norm(mean, sd), student(df, loc), gumbel(scale),
        weibull(scale, shape), rweibull(scale, shape), gamma(shape, scale).
        """
        raw = text.strip()
        m = re.fullmatch(r"\s*([a-zA-Z]+)\s*\(([^)]*)\)\s*(?::\s*(ar1|psd)(?:\s*=\s*([-+0-9.eE]+))?)?\s*", raw)
        if not m:
            raise InvalidParameterError(f"cannot parse population {text!r}")
        name, args, dep, rho = m.group(1).lower(), m.group(2), m.group(3), m.group(4)
        if name not in _FAMILIES:
            raise InvalidParameterError(f"unknown population family {name!r}")
        make, arity = _FAMILIES[name]
        try:
            vals = [float(a) for a in args.split(",")] if args.strip() else []
        except ValueError:
            raise InvalidParameterError(f"non-numeric population arguments in {text!r}") from None
        if len(vals) != arity:
            raise InvalidParameterError(f"{name} takes {arity} arguments, got {len(vals)}")
        copula = None
        if dep == "ar1":
            copula = CopulaConfig("ar1", None if rho is None else float(rho))
        elif dep == "psd":
            copula = CopulaConfig("random_psd")
        return cls(make(*vals), raw, copula)

    @property
    def key(self) -> int:
        return zlib.crc32(self.label.encode())


def true_quantile(pop: PopulationSpec, p):
    return pop.family.ppf(p)


def _correlated_normals(cop: CopulaConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if cop.structure == "ar1":
        rho = cop.rho if cop.rho is not None else float(rng.uniform(-RHO_MAX, RHO_MAX))
        e = rng.standard_normal(n)
        # rows of the Cholesky factor of rho^|i-j| give this recursion exactly
        z = np.empty(n)
        z[0] = e[0]
        c = math.sqrt(1.0 - rho * rho)
        for t in range(1, n):
            z[t] = rho * z[t - 1] + c * e[t]
        return z
    A = rng.uniform(-RHO_MAX, RHO_MAX, size=(n, cop.factors))
    C = A @ A.T + np.eye(n)
    d = np.sqrt(np.diag(C))
    C = C / d[:, None] / d[None, :]
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise InvalidParameterError("copula correlation matrix is not positive definite") from None
    return L @ rng.standard_normal(n)


def sample_population(pop: PopulationSpec, n: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fam = pop.family
    if pop.dependence is None:
        if n < 1:
            raise InvalidParameterError("sample size must be at least 1")
        u = (rng.integers(0, 2**53, size=n, dtype=np.int64) + 0.5) / 2.0**53
        return fam.ppf(u)
    if n < 2:
        raise InvalidParameterError("dependent populations need n >= 2")
    z = _correlated_normals(pop.dependence, n, rng)
    # map the upper half through the survival function to keep precision
    out = np.empty(n)
    lo = z <= 0
    out[lo] = fam.ppf(special.ndtr(z[lo]))
    out[~lo] = fam.isf(special.ndtr(-z[~lo]))
    return out


def rmse(estimates, truth: float) -> float:
    e = np.asarray(estimates, float)
    if e.size == 0:
        raise InvalidParameterError("rmse of an empty set")
    return float(np.sqrt(np.mean((e - truth) ** 2)))


@dataclass(frozen=True)
class StudyConfig:
    populations: tuple[str, ...]
    models: tuple[str, ...]
    replicates: int = 500
    sample_size: int = 1000
    levels: tuple[float, ...] = DEFAULT_LEVELS
    master_seed: int = 20240101
    jobs: int = 1
    kernel_bandwidth: str = "cv"
    garch_scale: str = "forecast"
    threshold: ThresholdSearchConfig = field(default_factory=ThresholdSearchConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        object.__setattr__(self, "populations", tuple(self.populations))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if self.replicates < 1:
            raise InvalidParameterError("replicates must be at least 1")
        if self.sample_size < 50:
            raise InvalidParameterError("sample_size must be at least 50")
        lv = np.asarray(self.levels)
        if lv.size == 0 or np.any(lv <= 0) or np.any(lv >= 1) or np.any(np.diff(lv) <= 0):
            raise InvalidParameterError("levels must be strictly increasing inside (0, 1)")
        if not self.populations or not self.models:
            raise InvalidParameterError("at least one population and one model are required")
        for m in self.models:
            parse_model(m)
        for p in self.populations:
            PopulationSpec.parse(p)
        if self.kernel_bandwidth not in ("cv", "fixed"):
            raise InvalidParameterError("kernel_bandwidth must be 'cv' or 'fixed'")
        if self.garch_scale not in ("forecast", "unconditional"):
            raise InvalidParameterError("garch_scale must be 'forecast' or 'unconditional'")
        if self.jobs < 1:
            raise InvalidParameterError("jobs must be at least 1")


def parse_model(name: str) -> tuple[str, bool, bool]:
    """Return (mixture kind, continuity, two-step) for a study model identifier."""
    base = name.strip()
    garch = base.endswith(GARCH_SUFFIX)
    if garch:
        base = base[: -len(GARCH_SUFFIX)].strip()
    if base not in MODELS:
        raise InvalidParameterError(f"unknown model {name!r}; choose from {sorted(MODELS)} with optional ' GARCH'")
    kind, con = MODELS[base]
    return kind, con, garch


def replicate_seed(master_seed: int, pop: PopulationSpec, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, pop.key, r])


def _fit_quantiles(x, model: str, cfg: StudyConfig) -> np.ndarray:
    kind, con, _ = parse_model(model)
    bw = rule_of_thumb_bandwidth(x) if kind == "kernelGPD" and cfg.kernel_bandwidth == "fixed" else None
    rep = fit_mixture(x, kind, continuity=con, cfg=cfg.threshold, opt=cfg.optimizer, bandwidth=bw)
    return np.asarray(rep.best.ppf(np.asarray(cfg.levels)), float)


def _run_replicate(args) -> dict[str, np.ndarray | str]:
    cfg, label, r = args
    pop = PopulationSpec.parse(label)
    x = sample_population(pop, cfg.sample_size, replicate_seed(cfg.master_seed, pop, r))
    out: dict[str, np.ndarray | str] = {}
    garch_x = None
    garch_err = None
    for model in cfg.models:
        _, _, two_step = parse_model(model)
        try:
            if two_step:
                if garch_x is None and garch_err is None:
                    try:
                        fit = fit_garch11(x, cfg.optimizer)
                        mu, s = residual_scale(fit, cfg.garch_scale)
                        garch_x = mu + s * fit.residuals
                    except TailmixError as exc:
                        garch_err = f"garch: {exc}"
                if garch_err is not None:
                    out[model] = garch_err
                    continue
                out[model] = _fit_quantiles(garch_x, model, cfg)
            else:
                out[model] = _fit_quantiles(x, model, cfg)
        except (TailmixError, np.linalg.LinAlgError) as exc:
            out[model] = f"{type(exc).__name__}: {exc}"
    return out


@dataclass
class Cell:
    population: str
    model: str
    levels: tuple[float, ...]
    truth: np.ndarray
    estimates: np.ndarray  # replicates x levels, NaN rows for failures
    failures: list[tuple[int, str]]

    @property
    def ok(self) -> np.ndarray:
        return ~np.isnan(self.estimates).any(axis=1)

    @property
    def n_success(self) -> int:
        return int(self.ok.sum())

    @property
    def n_fail(self) -> int:
        return len(self.failures)

    def rmse(self, rows=None) -> np.ndarray:
        """RMSE per level over successful replicates (optionally a subset of rows)."""
        est = self.estimates if rows is None else self.estimates[np.asarray(rows)]
        est = est[~np.isnan(est).any(axis=1)]
        if est.shape[0] == 0:
            return np.full(len(self.levels), np.nan)
        return np.sqrt(np.mean((est - self.truth) ** 2, axis=0))


@dataclass
class RmseTable:
    config: StudyConfig
    cells: dict[tuple[str, str], Cell]

    def rows(self):
        for (pop, model), cell in self.cells.items():
            r = cell.rmse()
            for lv, v in zip(cell.levels, r):
                yield pop, model, lv, float(v), cell.n_success, cell.n_fail

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["population", "model", "level", "rmse", "n_success", "n_fail"])
        for pop, model, lv, v, ns, nf in self.rows():
            w.writerow([pop, model, _fmt(lv), "nan" if math.isnan(v) else _fmt(v), ns, nf])
        return buf.getvalue()

    def to_json(self) -> str:
        cfg = self.config
        doc = {
            "replicates": cfg.replicates,
            "sample_size": cfg.sample_size,
            "master_seed": cfg.master_seed,
            "levels": list(cfg.levels),
            "kernel_bandwidth": cfg.kernel_bandwidth,
            "garch_back_transform": cfg.garch_scale,
            "cells": [
                {
                    "population": c.population,
                    "model": c.model,
                    "rmse": [None if math.isnan(v) else float(v) for v in c.rmse()],
                    "truth": [float(t) for t in c.truth],
                    "n_success": c.n_success,
                    "n_fail": c.n_fail,
                    "failures": [{"replicate": i, "error": e} for i, e in c.failures],
                }
                for c in self.cells.values()
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def run_study(cfg: StudyConfig) -> RmseTable:
    tasks = [(cfg, pop, r) for pop in cfg.populations for r in range(cfg.replicates)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run_replicate, tasks, chunksize=1))
    else:
        results = [_run_replicate(t) for t in tasks]

    levels = np.asarray(cfg.levels)
    cells: dict[tuple[str, str], Cell] = {}
    for pop in cfg.populations:
        truth = np.asarray(true_quantile(PopulationSpec.parse(pop), levels), float)
        for model in cfg.models:
            cells[(pop, model)] = Cell(pop, model, cfg.levels, truth,
                                       np.full((cfg.replicates, levels.size), np.nan), [])
    for (_, pop, r), res in zip(tasks, results):
        for model, val in res.items():
            cell = cells[(pop, model)]
            if isinstance(val, str):
                cell.failures.append((r, val))
            else:
                cell.estimates[r] = val
    return RmseTable(cfg, cells)
