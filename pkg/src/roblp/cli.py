"""Command line entry points.

Subcommands:
  fit       fit one bandwidth on a CSV dataset
  adapt     run the data-driven bandwidth selection on a CSV dataset
  simulate  write a synthetic dataset CSV plus a JSON sidecar
  rates     config-driven convergence-rate experiment
  tails     config-driven deviation-tail experiment
  compare   config-driven contrast comparison

Config-driven subcommands take a JSON experiment config (see the schema
in roblp.experiments).  ROBLP_WORKERS sets the replication worker count
for config-driven runs unless the config pins one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .contrast import ContrastSpec, curvature_constant
from .experiments import ConfigError, load_config, run_experiment
from .kernels import KernelSpec
from .lepski import bandwidth_grid, selection_config, select_bandwidth
from .local_fit import Dataset, LocalFitConfig, OptimizerSettings, fit_local
from .simulate import NOISE_FAMILIES, NoiseModel, gen_data, make_test_function


def _estimator_settings(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _fit_config(settings: dict, x0, h: float) -> LocalFitConfig:
    d = len(x0)
    opt_kwargs = {
        k: settings[k]
        for k in ("gradient_tolerance", "max_iterations")
        if k in settings
    }
    return LocalFitConfig(
        x0=tuple(x0),
        h=h,
        degree=settings["degree"],
        bound=settings["bound"],
        kernel=KernelSpec(kind=settings.get("kernel", "uniform"), d=d),
        contrast=ContrastSpec.from_config(settings["contrast"]),
        optimizer=OptimizerSettings(**opt_kwargs),
    )


def _cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data)
    settings = _estimator_settings(args.config)
    cfg = _fit_config(settings, args.x0, args.h)
    result = fit_local(data, cfg)
    payload = {
        "estimate": result.estimate,
        "coefficients": result.theta_hat.values.tolist(),
        "indices": [list(p) for p in cfg.index_set.indices],
        "n_local": result.n_local,
        "iterations": result.iterations,
        "stationarity_gap": result.stationarity_gap,
        "converged": result.converged,
        "underdetermined": result.underdetermined,
    }
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def _cmd_adapt(args) -> int:
    data = Dataset.from_csv(args.data)
    settings = _estimator_settings(args.config)
    x0 = tuple(args.x0)
    d = len(x0)
    grid = bandwidth_grid(data.n, d, settings["degree"])
    template = _fit_config(settings, x0, grid.h_max)

    c = settings.get("curvature")
    if c is None:
        noise = settings.get("noise")
        if noise is None:
            raise SystemExit(
                "adapt: provide estimator 'curvature' or a 'noise' section to derive it"
            )
        model = NoiseModel.from_config(noise)
        c = curvature_constant(
            NOISE_FAMILIES[model.family],
            settings["contrast"]["gamma"],
            model.sigma_min,
        )
    selection = selection_config(
        template.contrast,
        template.kernel,
        settings["degree"],
        c,
        settings.get("risk_power", 2.0),
    )
    trace = select_bandwidth(data, x0, grid, template, selection)

    print(f"chosen k: {trace.chosen_k}")
    print(f"bandwidth: {trace.selected_bandwidth!r}")
    print(f"estimate: {trace.selected!r}")
    print(f"{'k':>3} {'l':>3} {'difference':>14} {'threshold':>14} pass")
    for chk in trace.pairwise_checks:
        print(
            f"{chk.k:>3} {chk.l:>3} {chk.difference:>14.6g} {chk.threshold:>14.6g}"
            f" {'yes' if chk.passed else 'no'}"
        )
    if args.json:
        Path(args.json).write_text(json.dumps(trace.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    for key in ("function", "noise", "n", "seed", "output"):
        if key not in cfg:
            raise SystemExit(f"simulate: config missing key {key!r}")
    f = make_test_function(cfg["function"])
    model = NoiseModel.from_config(cfg["noise"])
    d = cfg.get("d", f.d)
    data = gen_data(f, model, cfg["n"], d, cfg["seed"])
    out = Path(cfg["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(out)
    sidecar = {
        "function": f.to_config(),
        "noise": model.to_config(),
        "n": cfg["n"],
        "d": d,
        "seed": cfg["seed"],
        "csv": out.name,
    }
    side_path = out.with_suffix(".json")
    side_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} and {side_path}")
    return 0


def _cmd_experiment(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise SystemExit(str(exc))
    if cfg["experiment"] != args.experiment:
        raise SystemExit(
            f"config is for experiment {cfg['experiment']!r}, not {args.experiment!r}"
        )
    workers = os.environ.get("ROBLP_WORKERS")
    if workers and "risk" in cfg and "workers" not in cfg["risk"]:
        cfg["risk"]["workers"] = int(workers)
    result = run_experiment(cfg, output_dir=args.output_dir)
    print(json.dumps(result["summary"], indent=2, sort_keys=True))
    print(f"wrote {result['csv']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roblp",
        description="robust local polynomial regression at a point",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one bandwidth on a CSV dataset")
    p_fit.add_argument("--data", required=True, help="dataset CSV (x_1..x_d,y)")
    p_fit.add_argument("--x0", required=True, type=float, nargs="+", help="target point")
    p_fit.add_argument("--h", required=True, type=float, help="bandwidth")
    p_fit.add_argument("--config", required=True, help="estimator settings JSON")
    p_fit.set_defaults(func=_cmd_fit)

    p_adapt = sub.add_parser("adapt", help="data-driven bandwidth selection")
    p_adapt.add_argument("--data", required=True)
    p_adapt.add_argument("--x0", required=True, type=float, nargs="+")
    p_adapt.add_argument("--config", required=True, help="estimator settings JSON")
    p_adapt.add_argument("--json", help="also write the selection trace JSON here")
    p_adapt.set_defaults(func=_cmd_adapt)

    p_sim = sub.add_parser("simulate", help="write a synthetic dataset")
    p_sim.add_argument("--config", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    for name, desc in (
        ("rates", "convergence-rate experiment"),
        ("tails", "deviation-tail experiment"),
        ("compare", "contrast comparison experiment"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--output-dir", help="override the config output directory")
        p.set_defaults(func=_cmd_experiment, experiment=name)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
