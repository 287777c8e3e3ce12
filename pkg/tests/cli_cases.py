"""Shared CLI fixtures: input files and one invocation per subcommand."""

import subprocess
import sys
from pathlib import Path

import numpy as np

from tailmix.simulation import PopulationSpec, sample_population


def write_inputs(tmp: Path) -> dict:
    x = sample_population(PopulationSpec.parse("gamma(5,1):ar1=0.5"), 600, 1)
    prices = 100 * np.exp(np.cumsum(0.01 * np.random.default_rng(0).standard_normal(300)))
    xs, ps = tmp / "x.csv", tmp / "p.csv"
    xs.write_text("value\n" + "".join(f"{v!r}\n" for v in x.tolist()))
    ps.write_text("".join(f"{i},{v!r}\n" for i, v in enumerate(prices.tolist())))
    return {"x": str(xs), "p": str(ps)}


def commands(f: dict) -> dict:
    x, p = f["x"], f["p"]
    study = ["simulate-study", "--pop", "gamma(5,1):ar1", "--models", "gammaGPD GARCH,normGPD",
             "--replicates", "2", "--n", "300", "--seed", "7"]
    return {
        "returns": ["returns", "--in", p, "--kind", "log", "--loss"],
        "describe": ["describe", "--in", p, "--prices", "log", "--format", "csv"],
        "fit": ["fit", "--in", x, "--model", "normGPD"],
        "fit-kernel": ["fit", "--in", x, "--model", "kernelGPD", "--grid", "0.8,0.9"],
        "garch": ["garch", "--in", x, "--residuals"],
        "two-step": ["two-step", "--in", x, "--model", "GNG", "--grid", "0.8,0.9"],
        "risk-empirical": ["risk", "--in", x, "--alpha", "0.99"],
        "risk-model": ["risk", "--in", x, "--alpha", "0.99", "--method", "model", "--model", "gammaGPD"],
        "risk-mc": ["risk", "--in", x, "--alpha", "0.99", "--method", "mc", "--model", "normGPD",
                    "--n", "20000", "--seed", "3"],
        "risk-two-step": ["risk", "--in", x, "--alpha", "0.99", "--method", "two-step", "--model", "normGPD"],
        "diagnose-mrl": ["diagnose", "--in", x, "--mrl"],
        "diagnose-stability": ["diagnose", "--in", x, "--stability", "--param", "scale"],
        "simulate-study": study + ["--jobs", "1"],
        "simulate-study-jobs": study + ["--jobs", "2"],
    }


def invoke(args, stdin=None) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "tailmix", *args], input=stdin,
                          capture_output=True, timeout=300)
