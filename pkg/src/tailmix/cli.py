"""``tailmix`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or model error.  Results go to
standard output (or ``--out``); diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import diagnostics, risk, simulation, timeseries
from .errors import InvalidParameterError, TailmixError
from .estimation import FitReport, ThresholdSearchConfig, fit_mixture
from .mixture import KINDS

DEFAULT_SEED = 20240101


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return None if not math.isfinite(f) else f
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Input
# ---------------------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_series(path: str) -> np.ndarray:
    """One numeric column, or (date, value) pairs; a non-numeric first row is a header."""
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, newline="") as fh:
                text = fh.read()
    except OSError as exc:
        raise InvalidParameterError(f"cannot read input {path!r}: {exc.strerror}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidParameterError(f"input {path!r} has no data rows")
    width = len(rows[0])
    if width not in (1, 2):
        raise InvalidParameterError(f"expected one or two columns, found {width}")
    if not _is_number(rows[0][-1].strip()):
        rows = rows[1:]
    values = []
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise InvalidParameterError(f"row {i} has {len(r)} columns, expected {width}")
        cell = r[-1].strip()
        if not _is_number(cell):
            raise InvalidParameterError(f"row {i}: non-numeric value {cell!r}")
        values.append(float(cell))
    if not values:
        raise InvalidParameterError(f"input {path!r} has no data rows")
    x = np.asarray(values)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("input contains non-finite values")
    return x


def _load(args) -> np.ndarray:
    x = read_series(args.input)
    if getattr(args, "prices", None):
        x = timeseries.to_returns(x, args.prices).values
    if getattr(args, "loss", False):
        x = -x
    return x


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fit_cfg(args) -> ThresholdSearchConfig:
    if args.grid:
        return ThresholdSearchConfig(tuple(float(v) for v in args.grid.split(",")),
                                     min_exceedances=args.min_exceedances)
    return ThresholdSearchConfig(min_exceedances=args.min_exceedances)


def _fit(args, x) -> FitReport:
    return fit_mixture(x, args.model, mode=args.mode, continuity=args.continuity,
                       cfg=_fit_cfg(args), bandwidth=args.bandwidth)


def cmd_returns(args):
    r = timeseries.to_returns(read_series(args.input), args.kind)
    vals = timeseries.loss_series(r).values if args.loss else r.values
    return "".join(fmt(v) + "\n" for v in vals)


def cmd_describe(args):
    d = timeseries.describe(_load(args))
    if args.format == "json":
        return dump_json(d)
    return "statistic,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in d.items())


def cmd_fit(args):
    return dump_json(_fit(args, _load(args)).to_dict())


def _garch_dict(fit: timeseries.GarchFit) -> dict:
    p = fit.params
    mu, s = timeseries.garch_forecast1(fit)
    return {
        "params": {"mu": p.mu, "alpha0": p.alpha0, "alpha1": p.alpha1, "beta1": p.beta1},
        "log_likelihood": fit.log_likelihood,
        "init_var": fit.init_var,
        "converged": fit.converged,
        "forecast": {"mu_next": mu, "sigma_next": s},
    }


def cmd_garch(args):
    fit = timeseries.fit_garch11(_load(args))
    out = _garch_dict(fit)
    if args.residuals:
        out["residuals"] = fit.residuals.tolist()
        out["cond_sd"] = fit.cond_sd.tolist()
    return dump_json(out)


def cmd_two_step(args):
    garch, rep = timeseries.two_step_fit(_load(args), args.model, mode=args.mode, continuity=args.continuity,
                                         cfg=_fit_cfg(args), bandwidth=args.bandwidth)
    return dump_json({"garch": _garch_dict(garch), "residual_fit": rep.to_dict(),
                      "residual_scale": "standardized"})


def cmd_risk(args):
    x = _load(args)
    if args.method == "empirical":
        rep = risk.risk_report(x, args.alpha, "empirical")
    elif args.method in ("model", "mc"):
        if not args.model:
            raise UsageError("risk: --model is required for --method model/mc")
        fitted = _fit(args, x).best
        rep = risk.risk_report(fitted, args.alpha, args.method, n=args.n, seed=args.seed)
    else:
        if not args.model:
            raise UsageError("risk: --model is required for --method two-step")
        garch, fr = timeseries.two_step_fit(x, args.model, mode=args.mode, continuity=args.continuity,
                                            cfg=_fit_cfg(args), bandwidth=args.bandwidth)
        rep = risk.two_step_var_es(garch, fr.best, None, args.alpha)
    return dump_json(rep.to_dict())


def cmd_diagnose(args):
    x = _load(args)
    grid = None if not args.grid else [float(v) for v in args.grid.split(",")]
    lines = ["u,estimate,ci_low,ci_high,n_exceed"]
    if args.mrl:
        pts, skipped = diagnostics.mean_residual_life(x, grid)
        for p in pts:
            lines.append(",".join([fmt(p.u), fmt(p.mean_excess), fmt(p.ci_low), fmt(p.ci_high), str(p.n_exceed)]))
    else:
        pts, skipped = diagnostics.threshold_stability(x, grid, args.min_exceedances)
        for p in pts:
            if args.param == "xi":
                row = (p.xi_hat, p.xi_ci_low, p.xi_ci_high)
            else:
                row = (p.modified_scale, p.scale_ci_low, p.scale_ci_high)
            lines.append(",".join([fmt(p.u), *map(fmt, row), str(p.n_exceed)]))
    for s in skipped:
        print(f"diagnose: skipped u={fmt(s.u)}: {s.reason}", file=sys.stderr)
    return "\n".join(lines) + "\n"


def cmd_simulate(args):
    levels = simulation.DEFAULT_LEVELS if not args.levels else tuple(float(v) for v in args.levels.split(","))
    cfg = simulation.StudyConfig(
        populations=tuple(args.pop),
        models=tuple(m.strip() for m in args.models.split(",") if m.strip()),
        replicates=args.replicates,
        sample_size=args.n,
        levels=levels,
        master_seed=args.seed,
        jobs=args.jobs,
        kernel_bandwidth=args.kernel_bandwidth,
        garch_scale=args.garch_scale,
    )
    table = simulation.run_study(cfg)
    for cell in table.cells.values():
        for r, err in cell.failures:
            print(f"simulate-study: {cell.population} / {cell.model} replicate {r} failed: {err}", file=sys.stderr)
    return table.to_json() if args.format == "json" else table.to_csv()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_input(p, data_flags=True):
    p.add_argument("--in", dest="input", required=True, help="CSV path, or - for standard input")
    p.add_argument("--out", help="write results here instead of standard output")
    if data_flags:
        p.add_argument("--prices", choices=("log", "arithmetic"),
                       help="treat the input as prices and convert to returns of this kind first")
        p.add_argument("--loss", action="store_true", help="negate the series (returns to losses)")


def _add_model(p, required=True):
    p.add_argument("--model", choices=KINDS, required=required)
    p.add_argument("--mode", choices=("bulk", "parameterized"), help="tail-fraction mode")
    p.add_argument("--continuity", action="store_true", help="impose density continuity at thresholds")
    p.add_argument("--bandwidth", type=float, help="fixed kernel bandwidth (kernelGPD)")
    p.add_argument("--grid", help="comma-separated threshold quantile levels")
    p.add_argument("--min-exceedances", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tailmix", description="Extreme value mixture models for tail risk.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("returns", help="prices to returns")
    _add_input(p, data_flags=False)
    p.add_argument("--kind", choices=("log", "arithmetic"), default="log")
    p.add_argument("--loss", action="store_true", help="emit losses (negated returns)")
    p.set_defaults(func=cmd_returns)

    p = sub.add_parser("describe", help="descriptive statistics")
    _add_input(p)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("fit", help="fit an extreme value mixture")
    _add_input(p)
    _add_model(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("garch", help="GARCH(1,1) quasi-MLE")
    _add_input(p)
    p.add_argument("--residuals", action="store_true", help="include residuals and conditional sds")
    p.set_defaults(func=cmd_garch)

    p = sub.add_parser("two-step", help="GARCH filter then mixture fit on residuals")
    _add_input(p)
    _add_model(p)
    p.set_defaults(func=cmd_two_step)

    p = sub.add_parser("risk", help="VaR and expected shortfall")
    _add_input(p)
    _add_model(p, required=False)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=("empirical", "model", "mc", "two-step"), default="empirical")
    p.add_argument("--n", type=int, default=100_000, help="Monte Carlo draws")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("diagnose", help="mean residual life or threshold stability table")
    _add_input(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mrl", action="store_true")
    g.add_argument("--stability", action="store_true")
    p.add_argument("--param", choices=("xi", "scale"), default="xi",
                   help="stability column: shape or modified scale")
    p.add_argument("--grid", help="comma-separated thresholds (default: 40 empirical quantiles)")
    p.add_argument("--min-exceedances", type=int, default=10)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate-study", help="replicated RMSE study")
    p.add_argument("--pop", action="append", required=True,
                   help="population, e.g. 'norm(0,4)' or 'gamma(5,1):ar1'; repeatable")
    p.add_argument("--models", required=True, help="comma-separated model identifiers")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--levels", help="comma-separated probability levels")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--kernel-bandwidth", choices=("cv", "fixed"), default="cv")
    p.add_argument("--garch-scale", choices=("forecast", "unconditional"), default="forecast")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        text = args.func(args)
        _emit(args, text)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except TailmixError as exc:
        stage = getattr(args, "command", "tailmix")
        print(f"{stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tailmix: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
