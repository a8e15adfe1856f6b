"""Config-driven experiments with reproducible outputs.

An experiment is a JSON config with sections {function, noise, estimator,
grid, risk, output}.  Running one writes a results CSV plus a JSON
summary and a manifest recording the exact config, its hash, the derived
numeric constants and library versions.  Outputs are pure functions of
the config (seed included), so a rerun — including a rerun started from
the manifest — reproduces the CSV byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .contrast import ContrastSpec, curvature_constant
from .harness import (
    Estimator,
    compare_contrasts,
    deviation_bound_threshold,
    rate_fit,
    risk_curve,
    tail_check,
)
from .kernels import procedure_constants
from .local_fit import OptimizerSettings, fit_local
from .simulate import NOISE_FAMILIES, NoiseModel, gen_data, make_test_function

__all__ = ["ConfigError", "load_config", "run_experiment", "CONFIG_SCHEMA"]


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "seed", "estimator", "output"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": ["fit", "adapt", "rates", "tails", "compare"]},
        "seed": {"type": "integer", "minimum": 0},
        "function": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"type": "string"}},
        },
        "noise": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": sorted(NOISE_FAMILIES)},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "sigma_min": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "heteroscedastic": {
                    "type": ["object", "null"],
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["constant", "alternating", "sinusoidal"]},
                        "factor": {"type": "number"},
                        "amplitude": {"type": "number"},
                        "period": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "estimator": {
            "type": "object",
            "required": ["kind", "contrast", "bound", "x0"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["fixed", "minimax", "adaptive"]},
                "contrast": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["huber", "square", "absolute"]},
                        "gamma": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "kernel": {"enum": ["uniform", "triangular", "epanechnikov"]},
                "bound": {"type": "number", "exclusiveMinimum": 0},
                "x0": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0, "maximum": 1},
                    "minItems": 1,
                },
                "h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "degree": {"type": "integer", "minimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "lipschitz": {"type": "number", "exclusiveMinimum": 0},
                "curvature": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "risk_power": {"type": "number", "minimum": 1},
                "gradient_tolerance": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "n_values": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "epsilon_multipliers": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                "delta": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "risk": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "replications": {"type": "integer", "minimum": 1},
                "power": {"type": "number", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "required": ["directory", "prefix"],
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "prefix": {"type": "string"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid experiment config; message lists offending field paths."""


def _validate(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: e.json_path)
    if errors:
        lines = [f"{e.json_path}: {e.message}" for e in errors]
        raise ConfigError("invalid experiment config:\n  " + "\n  ".join(lines))


def load_config(source) -> dict:
    """Load and validate a config dict, a config file, or a manifest file
    (its embedded config is extracted)."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            cfg = json.load(fh)
    else:
        cfg = dict(source)
    if "config" in cfg and "experiment" not in cfg:
        cfg = cfg["config"]  # manifest rerun
    _validate(cfg)
    return cfg


def _float_repr(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_float_repr(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _noise_model(cfg: dict) -> NoiseModel:
    return NoiseModel.from_config(cfg["noise"])


def _resolve_curvature(est_cfg: dict, noise: NoiseModel) -> float:
    """Explicit curvature constant, or derive it from the declared noise
    family and the Huber threshold when the config leaves it null."""
    c = est_cfg.get("curvature")
    if c is not None:
        return float(c)
    contrast = est_cfg["contrast"]
    if contrast["kind"] != "huber":
        raise ConfigError(
            "$.estimator.curvature: required unless the contrast is huber"
            " (derivation uses the huber threshold)"
        )
    return curvature_constant(
        NOISE_FAMILIES[noise.family], contrast["gamma"], noise.sigma_min
    )


def _estimator(cfg: dict, noise: NoiseModel) -> Estimator:
    est = cfg["estimator"]
    contrast = ContrastSpec.from_config(est["contrast"])
    opt_kwargs = {}
    if "gradient_tolerance" in est:
        opt_kwargs["gradient_tolerance"] = est["gradient_tolerance"]
    if "max_iterations" in est:
        opt_kwargs["max_iterations"] = est["max_iterations"]
    optimizer = OptimizerSettings(**opt_kwargs)
    kind = est["kind"]
    common = dict(
        kind=kind,
        contrast=contrast,
        kernel_kind=est.get("kernel", "uniform"),
        bound=est["bound"],
        optimizer=optimizer,
    )
    if kind == "fixed":
        return Estimator(**common, h=est["h"], degree=est["degree"])
    if kind == "minimax":
        return Estimator(**common, beta=est["beta"], lipschitz=est["lipschitz"])
    return Estimator(
        **common,
        degree=est["degree"],
        curvature=_resolve_curvature(est, noise),
        risk_power=est.get("risk_power", 2.0),
    )


def _manifest(cfg: dict, out_dir: Path, prefix: str, extras: dict) -> Path:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    payload = {
        "config": cfg,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": cfg["seed"],
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "roblp": __version__,
        },
        **extras,
    }
    path = out_dir / f"{prefix}_manifest.json"
    _write_json(path, payload)
    return path


def run_experiment(source, output_dir=None) -> dict:
    """Execute a config (or manifest) and write results.

    Returns a dict with the experiment name and the paths written.
    """
    cfg = load_config(source)
    out = cfg["output"]
    out_dir = Path(output_dir) if output_dir is not None else Path(out["directory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = out["prefix"]
    runner = _RUNNERS[cfg["experiment"]]
    return runner(cfg, out_dir, prefix)


def _require(cfg: dict, *paths: str) -> None:
    missing = []
    for path in paths:
        node = cfg
        for key in path.split("."):
            if not isinstance(node, dict) or key not in node:
                missing.append(f"$.{path}")
                break
            node = node[key]
    if missing:
        raise ConfigError("invalid experiment config:\n  " + "\n  ".join(
            f"{p}: required for experiment {cfg['experiment']!r}" for p in missing
        ))


def _run_rates(cfg, out_dir: Path, prefix: str) -> dict:
    _require(cfg, "function", "noise", "grid.n_values", "risk.replications")
    noise = _noise_model(cfg)
    f = make_test_function(cfg["function"])
    estimator = _estimator(cfg, noise)
    x0 = cfg["estimator"]["x0"]
    d = len(x0)
    r = cfg["risk"].get("power", 2.0)
    workers = cfg["risk"].get("workers", 1)
    report = risk_curve(
        estimator,
        f,
        x0,
        noise,
        r,
        cfg["grid"]["n_values"],
        cfg["risk"]["replications"],
        cfg["seed"],
        workers,
    )
    beta = cfg["estimator"].get("beta", cfg["function"].get("beta"))
    target = -beta / (2.0 * beta + d)
    fit = rate_fit(report, target)

    csv_path = out_dir / f"{prefix}.csv"
    _write_csv(
        csv_path,
        ["n", "risk", "root_risk", "stderr", "replications", "failures"],
        [
            [p.n, p.risk, p.risk ** (1.0 / r), p.stderr, p.replications, p.failures]
            for p in report.points
        ],
    )
    summary = {
        "experiment": "rates",
        "estimator": report.estimator,
        "r": r,
        "rate_fit": {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "residual_spread": fit.residual_spread,
            "target": fit.target,
            "gap": fit.gap,
        },
    }
    json_path = out_dir / f"{prefix}.json"
    _write_json(json_path, summary)
    manifest = _manifest(
        cfg, out_dir, prefix, {"outputs": [csv_path.name, json_path.name]}
    )
    return {"experiment": "rates", "csv": csv_path, "json": json_path, "manifest": manifest, "summary": summary}


def _run_fit(cfg, out_dir: Path, prefix: str) -> dict:
    _require(cfg, "function", "noise", "grid.n")
    noise = _noise_model(cfg)
    f = make_test_function(cfg["function"])
    estimator = _estimator(cfg, noise)
    x0 = cfg["estimator"]["x0"]
    d = len(x0)
    n = cfg["grid"]["n"]
    data = gen_data(f, noise, n, d, cfg["seed"])
    fit_cfg = estimator.fit_config(x0, n)
    result = fit_local(data, fit_cfg)

    s = fit_cfg.index_set
    csv_path = out_dir / f"{prefix}.csv"
    _write_csv(
        csv_path,
        ["position", "index", "coefficient"],
        [
            [i, " ".join(map(str, s.indices[i])), float(v)]
            for i, v in enumerate(result.theta_hat.values)
        ],
    )
    summary = {
        "experiment": "fit",
        "estimator": estimator.describe(),
        "h": fit_cfg.h,
        "estimate": result.estimate,
        "target": float(f(np.atleast_1d(x0))),
        "n_local": result.n_local,
        "iterations": result.iterations,
        "stationarity_gap": result.stationarity_gap,
        "converged": result.converged,
        "underdetermined": result.underdetermined,
    }
    json_path = out_dir / f"{prefix}.json"
    _write_json(json_path, summary)
    manifest = _manifest(cfg, out_dir, prefix, {"outputs": [csv_path.name, json_path.name]})
    return {"experiment": "fit", "csv": csv_path, "json": json_path, "manifest": manifest, "summary": summary}


def _run_adapt(cfg, out_dir: Path, prefix: str) -> dict:
    _require(cfg, "function", "noise", "grid.n")
    noise = _noise_model(cfg)
    f = make_test_function(cfg["function"])
    estimator = _estimator(cfg, noise)
    if estimator.kind != "adaptive":
        raise ConfigError("$.estimator.kind: adapt experiment needs kind 'adaptive'")
    x0 = cfg["estimator"]["x0"]
    d = len(x0)
    n = cfg["grid"]["n"]
    data = gen_data(f, noise, n, d, cfg["seed"])
    trace = estimator.selection_trace(data, x0)

    csv_path = out_dir / f"{prefix}.csv"
    _write_csv(
        csv_path,
        ["k", "h", "estimate", "chosen"],
        [[k, h, est, int(k == trace.chosen_k)] for k, h, est in trace.estimates],
    )
    summary = {
        "experiment": "adapt",
        "estimator": estimator.describe(),
        "target": float(f(np.atleast_1d(x0))),
        "trace": trace.to_dict(),
    }
    json_path = out_dir / f"{prefix}.json"
    _write_json(json_path, summary)
    manifest = _manifest(cfg, out_dir, prefix, {"outputs": [csv_path.name, json_path.name]})
    return {"experiment": "adapt", "csv": csv_path, "json": json_path, "manifest": manifest, "summary": summary}


def _run_tails(cfg, out_dir: Path, prefix: str) -> dict:
    _require(cfg, "function", "noise", "grid.n", "grid.epsilon_multipliers", "risk.replications")
    noise = _noise_model(cfg)
    f = make_test_function(cfg["function"])
    estimator = _estimator(cfg, noise)
    if estimator.kind == "adaptive":
        raise ConfigError("$.estimator.kind: tails experiment needs a single bandwidth")
    x0 = cfg["estimator"]["x0"]
    d = len(x0)
    n = cfg["grid"]["n"]
    fit_cfg = estimator.fit_config(x0, n)
    c = _resolve_curvature(cfg["estimator"], noise)
    constants = procedure_constants(fit_cfg.kernel, fit_cfg.index_set, c)

    bias = f.lipschitz * d * fit_cfg.h**f.beta
    u = max(1.0, bias * math.sqrt(n * fit_cfg.h**d))
    eps_min = deviation_bound_threshold(fit_cfg.index_set.size, c, constants.lam, u)
    eps_grid = [m * eps_min for m in cfg["grid"]["epsilon_multipliers"]]
    report = tail_check(
        f,
        noise,
        fit_cfg,
        constants,
        eps_grid,
        n,
        cfg["risk"]["replications"],
        cfg["seed"],
        cfg["risk"].get("workers", 1),
    )

    csv_path = out_dir / f"{prefix}.csv"
    _write_csv(
        csv_path,
        ["eps", "valid", "empirical", "exceedances", "wilson_half_width", "bound", "informative", "non_violated"],
        [
            [
                p.eps,
                int(p.valid),
                p.empirical,
                p.exceedances,
                p.wilson,
                p.bound if p.bound is not None else "",
                int(p.informative),
                "" if p.non_violated is None else int(p.non_violated),
            ]
            for p in report.points
        ],
    )
    summary = {
        "experiment": "tails",
        "estimator": estimator.describe(),
        "constants": constants.to_dict(),
        "n": report.n,
        "h": report.h,
        "bias_majorant": report.bias_majorant,
        "eps_min": report.eps_min,
        "failures": report.failures,
        "all_informative_non_violated": report.all_informative_non_violated,
        "caveat": report.caveat,
    }
    json_path = out_dir / f"{prefix}.json"
    _write_json(json_path, summary)
    manifest = _manifest(cfg, out_dir, prefix, {"outputs": [csv_path.name, json_path.name], "constants": constants.to_dict()})
    return {"experiment": "tails", "csv": csv_path, "json": json_path, "manifest": manifest, "summary": summary}


def _run_compare(cfg, out_dir: Path, prefix: str) -> dict:
    _require(cfg, "function", "noise", "grid.n", "risk.replications")
    noise = _noise_model(cfg)
    f = make_test_function(cfg["function"])
    estimator = _estimator(cfg, noise)
    if estimator.kind == "adaptive":
        raise ConfigError("$.estimator.kind: compare experiment needs a single bandwidth")
    if estimator.contrast.kind != "huber":
        raise ConfigError("$.estimator.contrast.kind: compare experiment needs huber")
    x0 = cfg["estimator"]["x0"]
    d = len(x0)
    n = cfg["grid"]["n"]
    h = estimator.bandwidth(n, d)
    rows = compare_contrasts(
        f,
        x0,
        noise,
        n,
        cfg["risk"]["replications"],
        cfg["seed"],
        h=h,
        degree=estimator.fit_degree(),
        bound=estimator.bound,
        gamma=estimator.contrast.gamma,
        kernel_kind=estimator.kernel_kind,
        r=cfg["risk"].get("power", 2.0),
    )
    csv_path = out_dir / f"{prefix}.csv"
    _write_csv(
        csv_path,
        ["contrast", "risk", "stderr", "max_error"],
        [[row.name, row.risk, row.stderr, row.max_error] for row in rows],
    )
    summary = {
        "experiment": "compare",
        "estimator": estimator.describe(),
        "h": h,
        "rows": [
            {"contrast": row.name, "risk": row.risk, "stderr": row.stderr, "max_error": row.max_error}
            for row in rows
        ],
    }
    json_path = out_dir / f"{prefix}.json"
    _write_json(json_path, summary)
    manifest = _manifest(cfg, out_dir, prefix, {"outputs": [csv_path.name, json_path.name]})
    return {"experiment": "compare", "csv": csv_path, "json": json_path, "manifest": manifest, "summary": summary}


_RUNNERS = {
    "rates": _run_rates,
    "fit": _run_fit,
    "adapt": _run_adapt,
    "tails": _run_tails,
    "compare": _run_compare,
}
